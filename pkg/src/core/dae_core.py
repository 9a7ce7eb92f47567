"""
DAE Core Module
Problem data of the estimation problem d(Fx)/dt = Ax + f, y = Hx + eta:
the plant triple, the noise ellipsoid weights, the rho norm and the dual DAE
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson, trapezoid

from .errors import InputError
from .matspace import DEFAULT_TOL, Mat, Tol, as_matrix, as_vector, pinv, rank, symmetrize

if TYPE_CHECKING:
    from .simulate import TrajectoryGrid

logger = logging.getLogger(__name__)

QUADRATURE_RULES = ("trapezoid", "simpson")


@dataclass(frozen=True)
class DaeTriple:
    """The plant (F, A, H): F, A are m x n and H is p x n"""

    F: Mat
    A: Mat
    H: Mat

    def __post_init__(self):
        F = as_matrix(self.F, "F")
        A = as_matrix(self.A, "A")
        H = as_matrix(self.H, "H")
        if F.shape != A.shape:
            raise InputError(f"F and A must have the same shape, got {F.shape} and {A.shape}")
        if H.shape[1] != F.shape[1]:
            raise InputError(f"H must have {F.shape[1]} columns, got {H.shape[1]}")
        if min(F.shape) < 1 or H.shape[0] < 1:
            raise InputError("m, n and p must all be at least 1")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "H", H)

    @property
    def m(self) -> int:
        return self.F.shape[0]

    @property
    def n(self) -> int:
        return self.F.shape[1]

    @property
    def p(self) -> int:
        return self.H.shape[0]

    def stacked_rank(self, tol: Tol = DEFAULT_TOL) -> int:
        """rank [F; A; H]"""
        return rank(np.vstack([self.F, self.A, self.H]), tol)

    def describe(self) -> str:
        return f"DAE m={self.m} n={self.n} p={self.p}"


@dataclass(frozen=True)
class DualDae:
    """
    The dual DAE d(F^T q)/dt = A^T q - H^T u stored by its transposed matrices.

    Ft and At are n x m; Ht is n x p and acts on the dual input u.
    """

    Ft: Mat
    At: Mat
    Ht: Mat

    def dual(self) -> DaeTriple:
        return DaeTriple(self.Ft.T, self.At.T, self.Ht.T)


def dual_triple(d: DaeTriple) -> DualDae:
    """Matrices of the dual DAE; the -H^T sign is applied by the reduction step"""
    return DualDae(d.F.T.copy(), d.A.T.copy(), d.H.T.copy())


def _check_spd(M: Mat, name: str) -> Mat:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise InputError(f"{name} must be square, got {M.shape}")
    scale = max(float(np.linalg.norm(M)), 1e-300)
    if np.linalg.norm(M - M.T) > 1e-12 * scale:
        raise InputError(f"{name} is not symmetric")
    eigs = np.linalg.eigvalsh(symmetrize(M))
    if eigs.size == 0 or eigs[0] <= 1e-12 * abs(np.trace(M)):
        raise InputError(f"{name} is not positive definite (min eigenvalue {eigs.min():.3e})")
    return M


@dataclass(frozen=True)
class WeightSpec:
    """
    Symmetric positive definite weights of the noise ellipsoid
    x0^T Q0 x0 + ∫ f^T Q f + eta^T R eta <= 1
    """

    Q0: Mat
    Q: Mat
    R: Mat

    def __post_init__(self):
        Q0 = _check_spd(self.Q0, "Q0")
        Q = _check_spd(self.Q, "Q")
        R = _check_spd(self.R, "R")
        if Q0.shape != Q.shape:
            raise InputError(f"Q0 and Q must both be m x m, got {Q0.shape} and {Q.shape}")
        object.__setattr__(self, "Q0", Q0)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def identity(cls, m: int, p: int) -> "WeightSpec":
        return cls(np.eye(m), np.eye(m), np.eye(p))

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def p(self) -> int:
        return self.R.shape[0]

    def check_against(self, d: DaeTriple) -> None:
        if self.m != d.m or self.p != d.p:
            raise InputError(
                f"weights are sized for m={self.m}, p={self.p} but the DAE has m={d.m}, p={d.p}"
            )


@dataclass(frozen=True)
class Functional:
    """The functional x -> ell^T F x to be estimated"""

    ell: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ell", as_vector(self.ell, "ell"))

    @classmethod
    def unit(cls, m: int, i: int) -> "Functional":
        """The standard basis vector e_i of R^m, counted from 1"""
        if not 1 <= i <= m:
            raise InputError(f"unit functional index {i} outside 1..{m}")
        ell = np.zeros(m)
        ell[i - 1] = 1.0
        return cls(ell, label=f"e{i}")

    @property
    def name(self) -> str:
        return self.label or "ell"

    def image(self, d: DaeTriple) -> np.ndarray:
        """F^T ell"""
        if self.ell.shape[0] != d.m:
            raise InputError(f"functional has length {self.ell.shape[0]}, DAE has m={d.m}")
        return d.F.T @ self.ell


@dataclass(frozen=True)
class SolutionTuple:
    """A sampled solution (x, f, y, eta) of the DAE on a common grid"""

    x: "TrajectoryGrid"
    f: "TrajectoryGrid"
    y: "TrajectoryGrid"
    eta: "TrajectoryGrid"

    def __post_init__(self):
        for other in (self.f, self.y, self.eta):
            if not self.x.same_grid(other):
                raise InputError("solution components must share one time grid")

    def scaled(self, factor: float) -> "SolutionTuple":
        return SolutionTuple(
            self.x.scaled(factor), self.f.scaled(factor), self.y.scaled(factor), self.eta.scaled(factor)
        )

    def x0F(self, d: DaeTriple) -> np.ndarray:
        return d.F @ self.x.samples[0]


def integrate(values: np.ndarray, dt: float, rule: str = "trapezoid") -> float:
    """Composite quadrature of uniformly sampled scalar values"""
    if rule == "trapezoid":
        return float(trapezoid(values, dx=dt))
    if rule == "simpson":
        return float(simpson(values, dx=dt))
    raise InputError(f"unknown quadrature rule {rule!r}; expected one of {QUADRATURE_RULES}")


def quadratic_samples(samples: np.ndarray, weight: Mat) -> np.ndarray:
    """v_k^T W v_k for every sample row"""
    return np.einsum("ki,ij,kj->k", samples, weight, samples)


def rho(
    x0,
    f: "TrajectoryGrid",
    eta: "TrajectoryGrid",
    t1: float,
    W: WeightSpec,
    rule: str = "trapezoid",
) -> float:
    """x0^T Q0 x0 + ∫_0^t1 (f^T Q f + eta^T R eta) dt on the grid"""
    x0 = as_vector(x0, "x0")
    if x0.shape[0] != W.m:
        raise InputError(f"x0 has length {x0.shape[0]}, expected {W.m}")
    if f.dim != W.m or eta.dim != W.p:
        raise InputError("f and eta dimensions do not match the weights")
    if not f.same_grid(eta):
        raise InputError("f and eta must share one time grid")
    f_cut = f.truncate(t1)
    eta_cut = eta.truncate(t1)
    integrand = quadratic_samples(f_cut.samples, W.Q) + quadratic_samples(eta_cut.samples, W.R)
    value = float(x0 @ W.Q0 @ x0) + integrate(integrand, f.dt, rule)
    return max(value, 0.0)


def is_admissible(sol: SolutionTuple, d: DaeTriple, W: WeightSpec, t1: Optional[float] = None) -> bool:
    """
    rho(Fx(0), f, eta, tau) <= 1 for all grid times tau <= t1.

    rho grows with tau, so the check at the horizon decides it.
    """
    t1 = sol.x.t_end if t1 is None else t1
    return rho(sol.x0F(d), sol.f, sol.eta, t1, W) <= 1.0 + 1e-12


def qbar0(F: Mat, Q0: Mat, tol: Tol = DEFAULT_TOL) -> Mat:
    """
    Terminal weight of the dual cost:
    Qbar0 = F ((F^T)^+ - M_opt)^T Q0^{-1} ((F^T)^+ - M_opt) F^T,
    M_opt = P (P Q0^{-1} P)^+ P Q0^{-1} (F^T)^+, P = I - (F^T)^+ F^T.
    """
    F = as_matrix(F, "F")
    Q0 = as_matrix(Q0, "Q0")
    m = F.shape[0]
    if Q0.shape != (m, m):
        raise InputError(f"Q0 must be {m}x{m}, got {Q0.shape}")
    if rank(Q0, tol) < m:
        raise InputError("Q0 is not invertible")
    try:
        Q0_inv = np.linalg.inv(Q0)
    except np.linalg.LinAlgError as exc:
        raise InputError(f"Q0 is not invertible: {exc}") from exc
    Ft_pinv = pinv(F.T, tol)
    P = np.eye(m) - Ft_pinv @ F.T
    M_opt = P @ pinv(P @ Q0_inv @ P, tol) @ P @ Q0_inv @ Ft_pinv
    gap = Ft_pinv - M_opt
    return symmetrize(F @ gap.T @ Q0_inv @ gap @ F.T)


def _relative_residual(lhs: np.ndarray, scale_source: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(scale_source))) if scale_source.size else 1.0)
    return float(np.max(np.abs(lhs))) / scale if lhs.size else 0.0


def solution_residual(d: DaeTriple, sol: SolutionTuple) -> float:
    """
    Integral-form residual of Fx(t) = Fx(0) + ∫(Ax + f) together with y = Hx + eta,
    relative to the size of Fx
    """
    x = sol.x.samples
    Fx = x @ d.F.T
    rate = x @ d.A.T + sol.f.samples
    integral = cumulative_trapezoid(rate, dx=sol.x.dt, axis=0, initial=0.0)
    state_gap = Fx - Fx[0] - integral
    output_gap = sol.y.samples - x @ d.H.T - sol.eta.samples
    return max(_relative_residual(state_gap, Fx), _relative_residual(output_gap, sol.y.samples))


def dual_residual(d: DaeTriple, q: "TrajectoryGrid", u: "TrajectoryGrid") -> float:
    """Integral-form residual of d(F^T q)/dt = A^T q - H^T u, relative to the size of F^T q"""
    if not q.same_grid(u):
        raise InputError("q and u must share one time grid")
    Ftq = q.samples @ d.F
    rate = q.samples @ d.A - u.samples @ d.H
    integral = cumulative_trapezoid(rate, dx=q.dt, axis=0, initial=0.0)
    return _relative_residual(Ftq - Ftq[0] - integral, Ftq)
