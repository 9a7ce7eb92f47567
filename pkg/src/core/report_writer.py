"""
Report Writer Module
Writes matrices, signal tables and JSON sidecars into an output directory
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from ..data.artifacts import Artifacts
from .errors import InputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


class ReportWriter:
    """Collects every artifact of one run under output_dir"""

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise InputError(f"Cannot create output directory {self.output_dir}: {e}") from e
        self.written: List[Path] = []

    def _target(self, filename: str) -> Path:
        path = self.output_dir / filename
        self.written.append(path)
        return path

    def write_matrix(self, name: str, matrix) -> Path:
        """
        One matrix row per line, comma separated, 17 significant digits, no header.

        Matrices without columns produce an empty file.
        """
        path = self._target(Artifacts.matrix_file(name))
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.size == 0:
            path.write_text("")
        else:
            pd.DataFrame(matrix).to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)
        logger.debug(f"wrote {path.name} {matrix.shape}")
        return path

    def write_matrices(self, matrices: Dict[str, Any]) -> List[Path]:
        return [self.write_matrix(name, value) for name, value in matrices.items()]

    def write_table(self, filename: str, frame: pd.DataFrame) -> Path:
        path = self._target(filename)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        logger.debug(f"wrote {path.name} with {len(frame)} rows")
        return path

    def write_json(self, filename: str, payload: Dict[str, Any]) -> Path:
        path = self._target(filename)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, default=_to_jsonable)
        return path
