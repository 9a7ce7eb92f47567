"""
Riccati Module
Differential (finite horizon) and algebraic (infinite horizon) Riccati equations
P' = A^T P + P A - K^T (D^T S D) K + C^T S C with K = (D^T S D)^{-1}(B^T P + D^T S C)
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import block_diag, schur, solve_continuous_lyapunov

from .dae_core import WeightSpec
from .errors import InputError, NumericalError
from .matspace import DEFAULT_TOL, Mat, Tol, rank, symmetrize
from .reduction import LtiSystem
from .simulate import stable_substeps

logger = logging.getLogger(__name__)

NEWTON_ITERATIONS = 20
MAX_SUBSTEPS = 4096


def weight_matrix_S(W: WeightSpec) -> Mat:
    """blockdiag(Q^{-1}, R^{-1})"""
    return symmetrize(block_diag(np.linalg.inv(W.Q), np.linalg.inv(W.R)))


@dataclass(frozen=True)
class RiccatiTerms:
    """The constant pieces of the Riccati right-hand side for one LTI system and weight S"""

    A: Mat
    B: Mat
    Qc: Mat
    N: Mat
    Rr: Mat
    Rr_inv: Mat
    zero_feedthrough: bool
    C: Mat
    D: Mat
    S: Mat

    @classmethod
    def build(cls, g: LtiSystem, S: Mat, tol: Tol = DEFAULT_TOL) -> "RiccatiTerms":
        if S.shape != (g.C.shape[0], g.C.shape[0]):
            raise InputError(f"weight S is {S.shape}, expected {g.C.shape[0]} square")
        Qc = symmetrize(g.C.T @ S @ g.C)
        N = g.C.T @ S @ g.D
        Rr = symmetrize(g.D.T @ S @ g.D)
        zero = g.feedthrough_is_zero(tol)
        k = g.input_dim
        if zero:
            Rr_inv = np.zeros((k, k))
        else:
            if rank(Rr, tol) < k:
                raise NumericalError(
                    "D^T S D is singular although D is nonzero; D must have full column rank"
                )
            Rr_inv = symmetrize(np.linalg.inv(Rr))
        return cls(g.A, g.B, Qc, N, Rr, Rr_inv, zero, g.C, g.D, S)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]

    def gain(self, P: Mat) -> Mat:
        if self.zero_feedthrough:
            return np.zeros((self.input_dim, self.state_dim))
        return self.Rr_inv @ (self.B.T @ P + self.N.T)

    def rhs(self, P: Mat) -> Mat:
        K = self.gain(P)
        return self.A.T @ P + P @ self.A - K.T @ self.Rr @ K + self.Qc

    def residual(self, P: Mat) -> float:
        return float(np.linalg.norm(self.rhs(P))) if P.size else 0.0

    def hamiltonian(self) -> Mat:
        A_bar = self.A - self.B @ self.Rr_inv @ self.N.T
        Q_bar = self.Qc - self.N @ self.Rr_inv @ self.N.T
        G = self.B @ self.Rr_inv @ self.B.T
        return np.block([[A_bar, -G], [-Q_bar, -A_bar.T]])

    def closed_loop(self, K: Mat) -> Mat:
        return self.A - self.B @ K

    def closed_loop_weight(self, K: Mat) -> Mat:
        Cl = self.C - self.D @ K
        return symmetrize(Cl.T @ self.S @ Cl)


@dataclass(frozen=True)
class DreSolution:
    """Samples P(t_k), K(t_k) and P'(t_k) on a uniform grid starting at 0"""

    dt: float
    P: np.ndarray
    K: np.ndarray
    Pdot: np.ndarray
    terms: RiccatiTerms
    substeps: int = 1

    @property
    def count(self) -> int:
        return self.P.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.count)

    @property
    def t1(self) -> float:
        return self.dt * (self.count - 1)

    @property
    def state_dim(self) -> int:
        return self.P.shape[1]

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        flat = self.P.reshape(self.count, -1)
        return CubicHermiteSpline(self.times, flat, self.Pdot.reshape(self.count, -1), axis=0)

    def P_at(self, t: float) -> Mat:
        """P at any t in [0, t1], Hermite-interpolated between samples"""
        l = self.state_dim
        if l == 0:
            return np.zeros((0, 0))
        if t < -1e-12 or t > self.t1 * (1 + 1e-12) + 1e-12:
            raise InputError(f"time {t} outside the Riccati horizon [0, {self.t1}]")
        return symmetrize(np.asarray(self._spline(t)).reshape(l, l))

    def K_at(self, t: float) -> Mat:
        return self.terms.gain(self.P_at(t))

    def gains(self, times) -> np.ndarray:
        """K at an array of times, shape (len(times), k, l)"""
        times = np.asarray(times, dtype=float)
        l, k = self.state_dim, self.terms.input_dim
        if l == 0 or self.terms.zero_feedthrough:
            return np.zeros((times.size, k, l))
        P = np.asarray(self._spline(times)).reshape(times.size, l, l)
        P = 0.5 * (P + P.transpose(0, 2, 1))
        left = self.terms.Rr_inv @ self.terms.B.T
        return np.einsum("ij,tjk->tik", left, P) + (self.terms.Rr_inv @ self.terms.N.T)[None]

    @property
    def P_final(self) -> Mat:
        return self.P[-1]


def _rk4_riccati(terms: RiccatiTerms, P: Mat, h: float) -> Mat:
    k1 = terms.rhs(P)
    k2 = terms.rhs(P + 0.5 * h * k1)
    k3 = terms.rhs(P + 0.5 * h * k2)
    k4 = terms.rhs(P + h * k3)
    return symmetrize(P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def riccati_rate(terms: RiccatiTerms, P: Mat) -> float:
    """
    Bound on the rate of the Riccati flow linearized at P.

    The linearization is X -> Acl^T X + X Acl with Acl = A - B K(P), whose norm is at
    most 2 ||Acl||; the quadratic term enters through K(P).
    """
    if terms.state_dim == 0:
        return 0.0
    Acl = terms.closed_loop(terms.gain(P))
    return 2.0 * float(np.linalg.norm(Acl, 2))


def riccati_substeps(terms: RiccatiTerms, P: Mat, dt: float) -> int:
    """Substeps per grid step keeping h times the local rate inside the RK4 region"""
    return stable_substeps(riccati_rate(terms, P), dt, target=2.5)


def _advance(terms: RiccatiTerms, P: Mat, dt: float, substeps: int) -> Mat:
    h = dt / substeps
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(substeps):
            P = _rk4_riccati(terms, P, h)
    return P


def _adaptive_step(terms: RiccatiTerms, P: Mat, dt: float) -> Tuple[Mat, int]:
    """
    One grid step with the substep count chosen at P and doubled until the result is
    finite and the rate at the new P is still covered by the count used.
    """
    n = riccati_substeps(terms, P, dt)
    while True:
        P_new = _advance(terms, P, dt, n)
        if np.all(np.isfinite(P_new)) and riccati_substeps(terms, P_new, dt) <= n:
            return P_new, n
        if n >= MAX_SUBSTEPS:
            return P_new, n
        n = min(2 * n, MAX_SUBSTEPS)


def solve_dre(
    s: LtiSystem,
    W: WeightSpec,
    Qbar0: Mat,
    t1: float,
    steps: int,
    tol: Tol = DEFAULT_TOL,
    substeps: Optional[int] = None,
) -> DreSolution:
    """
    Integrate the Riccati differential equation forward from P(0) = Cs^T Qbar0 Cs
    with RK4 and symmetrization after every step.

    substeps=None chooses the count per grid step from the flow linearized at the
    current P; an explicit count is used unchanged on every step.
    """
    if not t1 > 0:
        raise InputError(f"horizon must be positive, got {t1}")
    if steps < 2:
        raise InputError(f"steps must be at least 2, got {steps}")
    if Qbar0.shape != (s.m, s.m):
        raise InputError(f"Qbar0 is {Qbar0.shape}, expected {s.m}x{s.m}")
    if substeps is not None and substeps < 1:
        raise InputError(f"substeps must be at least 1, got {substeps}")

    terms = RiccatiTerms.build(s, weight_matrix_S(W), tol)
    l, k = s.state_dim, s.input_dim
    dt = t1 / steps

    P_samples = np.empty((steps + 1, l, l))
    K_samples = np.empty((steps + 1, k, l))
    Pdot_samples = np.empty((steps + 1, l, l))
    P = symmetrize(s.Cs.T @ Qbar0 @ s.Cs)
    P_samples[0] = P
    most = 1
    for step in range(steps):
        if substeps is None:
            P, used = _adaptive_step(terms, P, dt)
        else:
            P, used = _advance(terms, P, dt, substeps), substeps
        if not np.all(np.isfinite(P)):
            raise NumericalError(
                f"Riccati solution became non-finite at t={(step + 1) * dt:.6g} with {used} substeps"
            )
        most = max(most, used)
        P_samples[step + 1] = P
    for i in range(steps + 1):
        K_samples[i] = terms.gain(P_samples[i])
        Pdot_samples[i] = terms.rhs(P_samples[i])

    logger.info(f"DRE solved on [0, {t1}] with {steps} steps, at most {most} substeps, dim {l}")
    return DreSolution(dt, P_samples, K_samples, Pdot_samples, terms, most)


@dataclass(frozen=True)
class CareSolution:
    """Stabilizing solution of the algebraic Riccati equation"""

    P: Mat
    K: Mat
    residual: float
    abscissa: float

    @property
    def state_dim(self) -> int:
        return self.P.shape[0]


def _abscissa(M: Mat) -> float:
    return float(np.max(np.linalg.eigvals(M).real)) if M.size else -np.inf


def _lyapunov(Acl: Mat, weight: Mat) -> Mat:
    # Acl^T P + P Acl + weight = 0
    try:
        return symmetrize(solve_continuous_lyapunov(Acl.T, -weight))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Lyapunov solve failed: {exc}") from exc


def _care_solution(terms: RiccatiTerms, P: Mat) -> CareSolution:
    K = terms.gain(P)
    return CareSolution(P, K, terms.residual(P), _abscissa(terms.closed_loop(K)))


def newton_kleinman(
    g: LtiSystem,
    W: WeightSpec,
    P0: Mat,
    iterations: int = NEWTON_ITERATIONS,
    tol: Tol = DEFAULT_TOL,
) -> CareSolution:
    """
    Newton-Kleinman refinement from a stabilizing start: solve
    (A - BK)^T P + P (A - BK) + (C - DK)^T S (C - DK) = 0 with K = K(P_prev).
    """
    terms = RiccatiTerms.build(g, weight_matrix_S(W), tol)
    return _newton(terms, symmetrize(np.asarray(P0, dtype=float)), iterations)


def _newton(terms: RiccatiTerms, P: Mat, iterations: int) -> CareSolution:
    best = _care_solution(terms, P)
    if best.abscissa >= 0:
        raise NumericalError("Newton refinement needs a stabilizing starting point")
    for it in range(iterations):
        K = terms.gain(best.P)
        P_next = _lyapunov(terms.closed_loop(K), terms.closed_loop_weight(K))
        candidate = _care_solution(terms, P_next)
        if not np.all(np.isfinite(P_next)) or candidate.abscissa >= 0:
            break
        change = float(np.linalg.norm(P_next - best.P)) / max(1.0, float(np.linalg.norm(best.P)))
        improved = candidate.residual <= best.residual
        if improved:
            best = candidate
        logger.debug(f"Newton step {it}: residual {candidate.residual:.3e}, change {change:.3e}")
        if change < 1e-14 or not improved:
            break
    return best


def solve_care(g: LtiSystem, W: WeightSpec, tol: Tol = DEFAULT_TOL) -> CareSolution:
    """
    Stabilizing solution of 0 = P A + A^T P - K^T (D^T S D) K + C^T S C.

    The nonzero-D branch deflates the Hamiltonian by an ordered real Schur form and
    refines with Newton-Kleinman; the D = 0 branch is a Lyapunov equation that needs
    a Hurwitz A.
    """
    terms = RiccatiTerms.build(g, weight_matrix_S(W), tol)
    l = terms.state_dim
    if l == 0:
        return CareSolution(np.zeros((0, 0)), np.zeros((terms.input_dim, 0)), 0.0, -np.inf)

    if terms.zero_feedthrough:
        if _abscissa(terms.A) >= -tol.stability_margin:
            raise NumericalError(
                "D = 0 and A is not Hurwitz: no stabilizing Riccati solution, "
                "the detectability premise does not hold"
            )
        solution = _care_solution(terms, _lyapunov(terms.A, terms.Qc))
    else:
        try:
            _, Z, sdim = schur(terms.hamiltonian(), output="real", sort="lhp")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"Hamiltonian Schur decomposition failed: {exc}") from exc
        if sdim != l:
            raise NumericalError(
                f"Hamiltonian has {sdim} stable eigenvalues, expected {l}: no stabilizing "
                "Riccati solution, the detectability premise does not hold"
            )
        U11, U21 = Z[:l, :l], Z[l:, :l]
        try:
            P = symmetrize(np.linalg.solve(U11.T, U21.T).T)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"stable invariant subspace is not a graph: {exc}") from exc
        solution = _care_solution(terms, P)
        if solution.abscissa < 0:
            solution = _newton(terms, P, NEWTON_ITERATIONS)

    if not solution.abscissa < 0:
        raise NumericalError(
            f"Riccati solution is not stabilizing (closed-loop abscissa {solution.abscissa:.3e})"
        )
    logger.info(
        f"CARE solved: dim {l}, residual {solution.residual:.3e}, "
        f"closed-loop abscissa {solution.abscissa:.3e}"
    )
    return solution
