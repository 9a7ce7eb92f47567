"""
Data Loader Module
Handles matrix directory loading and measured output signals
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..data.artifacts import Artifacts
from .dae_core import DaeTriple, WeightSpec
from .errors import InputError
from .simulate import TrajectoryGrid

logger = logging.getLogger(__name__)


class DataLoader:
    """Loads the DAE triple, optional weights and signal tables from CSV files"""

    # internal name -> possible file names inside the input directory
    FILE_MAPPINGS: Dict[str, Tuple[str, ...]] = Artifacts.INPUT_FILES
    REQUIRED = Artifacts.REQUIRED_INPUTS

    def __init__(self):
        self.directory: Optional[Path] = None
        self.matrices: Dict[str, np.ndarray] = {}
        self.file_map: Dict[str, Path] = {}

    @staticmethod
    def read_matrix(path: Path) -> np.ndarray:
        """
        Read one matrix: rows are lines, entries comma separated, no header.

        Raises InputError naming the file and the first bad row.
        """
        path = Path(path)
        if not path.exists():
            raise InputError(f"File not found: {path}")
        if path.stat().st_size == 0 or not path.read_text().strip():
            raise InputError(f"{path.name}: file is empty")
        try:
            frame = pd.read_csv(path, header=None, float_precision="round_trip", skip_blank_lines=True)
        except pd.errors.EmptyDataError:
            raise InputError(f"{path.name}: file is empty")
        except pd.errors.ParserError as e:
            raise InputError(f"{path.name}: rows have unequal length ({e})") from e

        numeric = frame.apply(pd.to_numeric, errors="coerce")
        bad_rows = numeric.index[numeric.isna().any(axis=1)]
        if len(bad_rows) > 0:
            row = int(bad_rows[0]) + 1
            raise InputError(f"{path.name}: row {row} has a missing or non-numeric entry")
        values = numeric.to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise InputError(f"{path.name}: non-finite entries")
        return values

    @staticmethod
    def read_signal(path: Path, time_column: str = "time") -> TrajectoryGrid:
        """Read a signal table with a header row and a uniform time column"""
        path = Path(path)
        if not path.exists():
            raise InputError(f"File not found: {path}")
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise InputError(f"{path.name}: cannot parse signal table ({e})") from e
        numeric = frame.apply(pd.to_numeric, errors="coerce")
        if numeric.isna().any().any():
            row = int(numeric.index[numeric.isna().any(axis=1)][0]) + 2
            raise InputError(f"{path.name}: line {row} has a missing or non-numeric entry")
        return TrajectoryGrid.from_frame(numeric, time_column)

    def _find_file(self, directory: Path, name: str) -> Optional[Path]:
        for candidate in self.FILE_MAPPINGS[name]:
            path = directory / candidate
            if path.exists():
                return path
        return None

    def load_directory(self, directory: str) -> Tuple[bool, str]:
        """
        Load F, A, H and any optional weight files from a directory.
        Returns (success, message)
        """
        try:
            self.load_directory_strict(directory)
            return True, Artifacts.get("loaded", count=len(self.matrices), directory=self.directory)
        except InputError as e:
            return False, str(e)

    def load_directory_strict(self, directory: str) -> None:
        """Same as load_directory but raises InputError on failure"""
        path = Path(directory)
        if not path.is_dir():
            raise InputError(f"Input directory not found: {directory}")
        self.clear()
        self.directory = path

        for name in self.FILE_MAPPINGS:
            found = self._find_file(path, name)
            if found is None:
                if name in self.REQUIRED:
                    raise InputError(
                        Artifacts.get(
                            "missing_file",
                            name=name,
                            directory=path,
                            candidates=", ".join(self.FILE_MAPPINGS[name]),
                        )
                    )
                continue
            self.file_map[name] = found
            self.matrices[name] = self.read_matrix(found)
            logger.info(f"loaded {name} {self.matrices[name].shape} from {found.name}")

    def clear(self) -> None:
        """Clear the current data and state"""
        self.directory = None
        self.matrices = {}
        self.file_map = {}

    def get_missing_files(self) -> List[str]:
        """Required matrices not yet loaded"""
        return [name for name in self.REQUIRED if name not in self.matrices]

    def get_dae(self) -> DaeTriple:
        """The loaded DAE triple; dimension mismatches raise InputError"""
        missing = self.get_missing_files()
        if missing:
            raise InputError(f"Missing matrices: {', '.join(missing)}")
        return DaeTriple(self.matrices["F"], self.matrices["A"], self.matrices["H"])

    def get_weights(self, d: Optional[DaeTriple] = None) -> WeightSpec:
        """Loaded weights; absent ones default to identity of the right size"""
        d = d or self.get_dae()
        Q0 = self.matrices.get("Q0", np.eye(d.m))
        Q = self.matrices.get("Q", np.eye(d.m))
        R = self.matrices.get("R", np.eye(d.p))
        W = WeightSpec(Q0, Q, R)
        W.check_against(d)
        return W

    def get_signal(self, file_path: str, dim: Optional[int] = None) -> TrajectoryGrid:
        """Measured output table; dim checks the column count"""
        grid = self.read_signal(Path(file_path))
        if dim is not None and grid.dim != dim:
            raise InputError(f"{Path(file_path).name}: expected {dim} signal columns, found {grid.dim}")
        return grid
