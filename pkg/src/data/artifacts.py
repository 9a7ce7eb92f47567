"""
Artifact names and CLI message strings
Matrix files are named NAME_matrix.txt
"""

from typing import Dict, Tuple


class Artifacts:
    """File names of every emitted artifact and the text the CLI prints"""

    MATRIX_SUFFIX = "_matrix.txt"

    # internal name -> accepted input file names, first one is used for output
    INPUT_FILES: Dict[str, Tuple[str, ...]] = {
        "F": ("F_matrix.txt", "F.csv"),
        "A": ("A_matrix.txt", "A.csv"),
        "H": ("H_matrix.txt", "H.csv"),
        "Q0": ("Q0_matrix.txt", "Q0.csv"),
        "Q": ("Q_matrix.txt", "Q.csv"),
        "R": ("R_matrix.txt", "R.csv"),
    }

    REQUIRED_INPUTS: Tuple[str, ...] = ("F", "A", "H")

    REDUCE_OUTPUTS: Tuple[str, ...] = (
        "F", "A", "H",
        "Aa", "Ba", "Ca", "Da", "LMAP",
        "Ag", "Bg", "Cg", "Dg", "LMAPg",
    )

    OBSERVER_OUTPUTS: Tuple[str, ...] = ("P", "K", "Ao", "Bo", "Co")

    RUN_CONFIG = "run_config.json"
    CHECK_REPORT = "checks.json"
    SIGMA_TABLE = "sigma.csv"
    ESTIMATES = "estimates.csv"
    GAIN_SCHEDULE = "gain_schedule.csv"
    ERROR_TRACES = "error_traces.csv"
    RECONSTRUCTION = "reconstruction.csv"

    MESSAGES: Dict[str, str] = {
        "loaded": "Loaded {count} matrices from {directory}",
        "missing_file": "Required file for {name} not found in {directory} (tried {candidates})",
        "dimensions": "{describe}",
        "reduced": "Associated LTI: dim {nhat}, inputs {k}; stabilizable part: dim {l}",
        "wrote": "Wrote {count} files to {directory}",
        "check_line": "{name:>8}  impulse-observable: {observable:<3}  detectable: {detectable}",
        "rank_check": "Rank test for impulse observability of every functional: {verdict}",
        "hautus_check": "Hautus detectability test: {verdict}",
        "sigma_line": "{name:>8}  sigma = {sigma:.6g}",
        "detect_line": "{name:>8}  detectable: {detectable}",
        "tracking_line": "{name:>14}  relative L2 error = {error:.4g}",
        "no_functionals": "No functionals given; use --ell with indices or @file",
        "failed": "Error: {message}",
    }

    @classmethod
    def matrix_file(cls, name: str) -> str:
        return f"{name}{cls.MATRIX_SUFFIX}"

    @classmethod
    def get(cls, key: str, **kwargs) -> str:
        """Message by key, formatted with kwargs"""
        text = cls.MESSAGES.get(key, key)
        if kwargs:
            try:
                return text.format(**kwargs)
            except KeyError:
                return text
        return text


def msg(key: str, **kwargs) -> str:
    """Shorthand for Artifacts.get()"""
    return Artifacts.get(key, **kwargs)
