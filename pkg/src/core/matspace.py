"""
Matrix and Subspace Module
Rank-revealing factorizations and subspace algebra with explicit tolerances
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InputError, NumericalError

logger = logging.getLogger(__name__)

Mat = np.ndarray


@dataclass(frozen=True)
class Tol:
    """Numerical tolerances shared by every rank decision"""

    rank_rtol: float = 1e-10
    abs_floor: float = 1e-12
    # Real parts below -stability_margin count as stable
    stability_margin: float = 1e-9
    # Relative cutoff for rank drops at Hautus candidates and subspace membership
    drop_rtol: float = 1e-8

    def __post_init__(self):
        if not self.rank_rtol > 0:
            raise InputError(f"rank_rtol must be positive, got {self.rank_rtol}")
        if self.abs_floor < 0:
            raise InputError(f"abs_floor must be non-negative, got {self.abs_floor}")
        if self.stability_margin < 0:
            raise InputError(f"stability_margin must be non-negative, got {self.stability_margin}")

    def to_dict(self) -> dict:
        return {
            "rank_rtol": self.rank_rtol,
            "abs_floor": self.abs_floor,
            "stability_margin": self.stability_margin,
            "drop_rtol": self.drop_rtol,
        }


DEFAULT_TOL = Tol()


def as_matrix(data, name: str = "matrix") -> Mat:
    """Convert to a finite 2-D float array"""
    arr = np.array(data, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf entries")
    return arr


def as_vector(data, name: str = "vector") -> np.ndarray:
    """Convert to a finite 1-D float array"""
    arr = np.array(data, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf entries")
    return arr


def symmetrize(M: Mat) -> Mat:
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class Subspace:
    """
    A linear subspace of R^ambient_dim held by an orthonormal basis.

    The basis may have zero columns (the zero subspace).
    """

    ambient_dim: int
    basis: Mat

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1) if basis.size else np.zeros((self.ambient_dim, 0))
        if basis.ndim != 2 or basis.shape[0] != self.ambient_dim:
            raise InputError(
                f"subspace basis of shape {basis.shape} does not live in R^{self.ambient_dim}"
            )
        object.__setattr__(self, "basis", basis)
        k = basis.shape[1]
        if k > self.ambient_dim:
            raise InputError(
                f"subspace basis has {k} columns in ambient dimension {self.ambient_dim}"
            )
        if k and np.max(np.abs(basis.T @ basis - np.eye(k))) > 1e-12 * max(1, k):
            raise InputError("subspace basis is not orthonormal")

    @classmethod
    def zero(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.eye(ambient_dim))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> Mat:
        """Orthogonal projector onto the subspace"""
        return self.basis @ self.basis.T

    def complement_projector(self) -> Mat:
        return np.eye(self.ambient_dim) - self.projector()

    def distance(self, other: "Subspace") -> float:
        """Spectral norm of the projector difference (0 iff spans agree)"""
        _check_same_ambient(self, other)
        if self.ambient_dim == 0:
            return 0.0
        return float(np.linalg.norm(self.projector() - other.projector(), 2))


def _check_same_ambient(S1: Subspace, S2: Subspace) -> None:
    if S1.ambient_dim != S2.ambient_dim:
        raise InputError(
            f"subspaces live in different spaces: R^{S1.ambient_dim} vs R^{S2.ambient_dim}"
        )


def svd_rank(
    M: Mat, tol: Tol = DEFAULT_TOL, scale: Optional[float] = None
) -> Tuple[int, Mat, np.ndarray, Mat]:
    """
    Full SVD with a numerical rank decision.

    Returns (rank, U, sigma, V) with M = U diag(sigma) V^T, U and V square orthogonal.
    A singular value counts when it exceeds both rank_rtol * max(sigma_max, scale)
    and abs_floor. Pass scale when M is a product whose norm is not its natural size.
    """
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape
    if M.size == 0:
        return 0, np.eye(rows), np.zeros(0), np.eye(cols)
    if not np.all(np.isfinite(M)):
        raise InputError("cannot factor a matrix with NaN or Inf entries")
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for a {rows}x{cols} matrix: {exc}") from exc
    smax = s[0] if s.size else 0.0
    if scale is not None:
        smax = max(smax, scale)
    rank = int(np.sum((s > tol.rank_rtol * smax) & (s > tol.abs_floor)))
    return rank, U, s, Vt.T


def rank(M: Mat, tol: Tol = DEFAULT_TOL) -> int:
    return svd_rank(M, tol)[0]


def pinv(M: Mat, tol: Tol = DEFAULT_TOL) -> Mat:
    """Moore-Penrose pseudoinverse at the numerical rank of M"""
    M = np.asarray(M, dtype=float)
    r, U, s, V = svd_rank(M, tol)
    if r == 0:
        return np.zeros((M.shape[1], M.shape[0]))
    return (V[:, :r] / s[:r]) @ U[:, :r].T


def kernel_basis(M: Mat, tol: Tol = DEFAULT_TOL, scale: Optional[float] = None) -> Subspace:
    """Orthonormal basis of {x : Mx = 0}"""
    M = np.asarray(M, dtype=float)
    r, _, _, V = svd_rank(M, tol, scale)
    return Subspace(M.shape[1], V[:, r:])


def image_basis(M: Mat, tol: Tol = DEFAULT_TOL) -> Subspace:
    """Orthonormal basis of the column space of M"""
    M = np.asarray(M, dtype=float)
    r, U, _, _ = svd_rank(M, tol)
    return Subspace(M.shape[0], U[:, :r])


def join(*spaces: Subspace, tol: Tol = DEFAULT_TOL) -> Subspace:
    """Sum of subspaces S1 + S2 + ..."""
    for other in spaces[1:]:
        _check_same_ambient(spaces[0], other)
    return image_basis(np.hstack([S.basis for S in spaces]), tol)


def intersect(S1: Subspace, S2: Subspace, tol: Tol = DEFAULT_TOL) -> Subspace:
    """S1 ∩ S2 through the kernel of [B1, -B2]"""
    _check_same_ambient(S1, S2)
    if S1.dim == 0 or S2.dim == 0:
        return Subspace.zero(S1.ambient_dim)
    stacked = np.hstack([S1.basis, -S2.basis])
    coeffs = kernel_basis(stacked, tol).basis
    if coeffs.shape[1] == 0:
        return Subspace.zero(S1.ambient_dim)
    return image_basis(S1.basis @ coeffs[: S1.dim], tol)


def preimage(M: Mat, S: Subspace, tol: Tol = DEFAULT_TOL) -> Subspace:
    """{x : Mx ∈ S}, the kernel of (I - P_S) M"""
    M = np.asarray(M, dtype=float)
    if S.ambient_dim != M.shape[0]:
        raise InputError(
            f"preimage: matrix has {M.shape[0]} rows but subspace lives in R^{S.ambient_dim}"
        )
    scale = float(np.linalg.norm(M, 2)) if M.size else 0.0
    return kernel_basis(S.complement_projector() @ M, tol, scale)


def contains(S: Subspace, v, tol: Tol = DEFAULT_TOL, rtol: Optional[float] = None) -> bool:
    """Membership test ‖(I - P_S) v‖ <= rtol * max(1, ‖v‖), rtol defaulting to rank_rtol"""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != S.ambient_dim:
        raise InputError(f"vector of length {v.shape[0]} tested against R^{S.ambient_dim}")
    rtol = tol.rank_rtol if rtol is None else rtol
    residual = v - S.basis @ (S.basis.T @ v)
    return bool(np.linalg.norm(residual) <= rtol * max(1.0, float(np.linalg.norm(v))))
