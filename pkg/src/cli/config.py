"""
Run configuration: defaults, then --config JSON, then command-line flags
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from .. import __version__
from ..core.dae_core import Functional
from ..core.data_loader import DataLoader
from ..core.errors import InputError
from ..core.matspace import Tol
from ..data.artifacts import msg

COMMANDS = (
    "reduce",
    "check-observability",
    "check-detectability",
    "design-finite",
    "design-infinite",
    "estimate",
    "heat-demo",
)

# commands that read F, A, H from --input-dir
NEEDS_INPUT = {"reduce", "check-observability", "check-detectability", "design-finite", "design-infinite", "estimate"}
NEEDS_FUNCTIONALS = {"check-observability", "check-detectability", "design-finite", "design-infinite", "estimate"}


@dataclass
class RunConfig:
    command: str
    input_dir: Optional[str] = None
    output_dir: str = "output"
    ell: Optional[str] = None
    horizon: float = 1.0
    steps: int = 1000
    rank_rtol: float = 1e-10
    seed: int = 0
    signal: Optional[str] = None
    infinite: bool = False
    verbose: bool = False
    heat: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command '{self.command}'")
        if self.command in NEEDS_INPUT and not self.input_dir:
            raise InputError(f"{self.command} needs --input-dir")
        if self.command == "estimate" and not self.signal:
            raise InputError("estimate needs --signal with the measured output table")
        if not self.horizon > 0:
            raise InputError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 2:
            raise InputError(f"steps must be at least 2, got {self.steps}")
        if not self.rank_rtol > 0:
            raise InputError(f"rank-rtol must be positive, got {self.rank_rtol}")

    @property
    def tol(self) -> Tol:
        return Tol(rank_rtol=self.rank_rtol)

    @classmethod
    def assemble(cls, command: str, flags: Dict[str, Any], config_path: Optional[str] = None) -> "RunConfig":
        """Later sources override earlier ones; flags left at None do not override"""
        values: Dict[str, Any] = {}
        if config_path:
            values.update(load_json(config_path))
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise InputError(f"unknown keys in {config_path}: {', '.join(sorted(unknown))}")
        values.update({k: v for k, v in flags.items() if v is not None and k in known})
        if flags.get("heat_horizon") is not None:
            values["heat"] = {**values.get("heat", {}), "horizon": flags["heat_horizon"]}
        values["command"] = command
        return cls(**values)

    def functionals(self, m: int) -> List[Functional]:
        """
        --ell as comma separated 1-based indices of unit vectors, or @file with one
        explicit vector of length m per row.
        """
        spec = (self.ell or "").strip()
        if not spec:
            raise InputError(msg("no_functionals"))
        if spec.startswith("@"):
            rows = DataLoader.read_matrix(Path(spec[1:]))
            if rows.shape[1] != m:
                raise InputError(f"{spec[1:]}: functionals must have {m} entries, found {rows.shape[1]}")
            return [Functional(row, label=f"ell{i + 1}") for i, row in enumerate(rows)]
        try:
            indices = [int(part) for part in spec.split(",") if part.strip()]
        except ValueError:
            raise InputError(f"--ell expects comma separated integers, got '{spec}'")
        if not indices:
            raise InputError(msg("no_functionals"))
        return [Functional.unit(m, i) for i in indices]

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["tolerances"] = self.tol.to_dict()
        payload["version"] = __version__
        return payload


def load_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    # keys may use the flag spelling
    return {key.replace("-", "_"): value for key, value in data.items()}
