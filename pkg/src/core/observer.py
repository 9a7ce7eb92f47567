"""
Observer Module
Finite and infinite horizon minimax observers for l^T F x, the dual cost they
minimize, their optimal dual trajectories and the estimation error dynamics
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .dae_core import DaeTriple, Functional, WeightSpec, integrate, qbar0, quadratic_samples
from .errors import InputError, NotDetectableError, NotImpulseObservableError
from .matspace import DEFAULT_TOL, Mat, Tol, as_vector
from .reduction import (
    AssocLti,
    StabLti,
    assoc_lti,
    is_l_detectable,
    is_l_impulse_observable,
    stab_assoc_lti,
)
from .riccati import CareSolution, DreSolution, solve_care, solve_dre
from .simulate import LinearField, TrajectoryGrid, rk4

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiniteHorizonObserver:
    """Minimax observer of ell^T F x(t1) built from the Riccati solution on [0, t1]"""

    assoc: AssocLti
    dre: DreSolution
    ell: Functional
    t1: float
    sigma: float
    v0: np.ndarray

    def recomputed_sigma(self) -> float:
        return float(self.v0 @ self.dre.P_final @ self.v0)


@dataclass(frozen=True)
class ObserverLti:
    """
    r' = Ao r + Bo y, estimates = Co r with r(0) = 0.

    Row i of Co and sigma[i] belong to functionals[i]; Ao and Bo are shared.
    """

    Ao: Mat
    Bo: Mat
    Co: Mat
    sigma: np.ndarray
    functionals: Tuple[Functional, ...] = ()
    stab: Optional[StabLti] = None
    care: Optional[CareSolution] = None

    @property
    def labels(self) -> List[str]:
        return [ell.name for ell in self.functionals] or [f"e{i + 1}" for i in range(self.Co.shape[0])]


@dataclass(frozen=True)
class DualTrajectory:
    """A pair (q, u) on one grid, a candidate solution of the dual DAE"""

    q: TrajectoryGrid
    u: TrajectoryGrid

    def __post_init__(self):
        if not self.q.same_grid(self.u):
            raise InputError("dual trajectory components must share one time grid")

    @property
    def grid(self) -> np.ndarray:
        return self.q.times


def _observable_or_raise(d: DaeTriple, ell: Functional, tol: Tol, s: AssocLti) -> None:
    if not is_l_impulse_observable(d, ell, tol, s):
        raise NotImpulseObservableError(ell.name)


def design_finite(
    d: DaeTriple,
    W: WeightSpec,
    ell: Functional,
    t1: float,
    steps: int,
    tol: Tol = DEFAULT_TOL,
    assoc: Optional[AssocLti] = None,
) -> FiniteHorizonObserver:
    """Associated system, terminal weight and Riccati solution, then sigma = v0^T P(t1) v0"""
    W.check_against(d)
    s = assoc if assoc is not None else assoc_lti(d, tol)
    _observable_or_raise(d, ell, tol, s)
    dre = solve_dre(s, W, qbar0(d.F, W.Q0, tol), t1, steps, tol)
    v0 = s.M @ ell.image(d)
    sigma = max(float(v0 @ dre.P_final @ v0), 0.0)
    logger.info(f"finite-horizon observer for {ell.name} on [0, {t1}]: sigma = {sigma:.6g}")
    return FiniteHorizonObserver(s, dre, ell, t1, sigma, v0)


def _check_finite_grid(obs: FiniteHorizonObserver, y: TrajectoryGrid) -> TrajectoryGrid:
    if abs(y.t0) > 1e-12:
        raise InputError(f"output signal must start at t=0, starts at {y.t0}")
    if y.dim != obs.assoc.Cu.shape[0]:
        raise InputError(f"output signal has dimension {y.dim}, expected {obs.assoc.Cu.shape[0]}")
    return y.truncate(obs.t1)


def finite_observer_path(obs: FiniteHorizonObserver, y: TrajectoryGrid) -> TrajectoryGrid:
    """
    The state r(t) of r' = (Aa - Ba K(t))^T r + (Cu - Du K(t))^T y, r(0) = 0.

    Only r(t1) carries the estimate; earlier samples are intermediate sums.
    """
    y = _check_finite_grid(obs, y)
    s = obs.assoc
    spline = y.interpolant()
    dre = obs.dre

    def matrix(t: float) -> Mat:
        return (s.A - s.B @ dre.K_at(t)).T

    def forcing(times: np.ndarray) -> np.ndarray:
        yt = np.asarray(spline(times)).reshape(times.size, y.dim)
        K = dre.gains(times)
        return yt @ s.Cu - np.einsum("tkl,tk->tl", K, yt @ s.Du)

    substeps = max(1, int(np.ceil(dre.substeps * y.dt / dre.dt - 1e-9)))
    return rk4(LinearField(matrix, forcing), np.zeros(s.state_dim), 0.0, y.dt, y.count - 1, substeps=substeps)


def run_finite(obs: FiniteHorizonObserver, y: TrajectoryGrid) -> float:
    """Estimate of ell^T F x(t1) from y on [0, t1]"""
    if obs.assoc.state_dim == 0:
        _check_finite_grid(obs, y)
        return 0.0
    r = finite_observer_path(obs, y)
    return float(obs.v0 @ r.samples[-1])


def optimal_dual_trajectory_finite(obs: FiniteHorizonObserver) -> DualTrajectory:
    """
    v' = (Aa - Ba K(t1 - s)) v, v(0) = M F^T ell, mapped to
    q* = (Cs - Ds K(t1 - s)) v and u* = (Cu - Du K(t1 - s)) v.
    """
    s = obs.assoc
    dre = obs.dre
    steps = dre.count - 1
    if s.state_dim == 0:
        zeros = lambda dim: TrajectoryGrid.zeros(dim, 0.0, dre.dt, steps)
        return DualTrajectory(zeros(s.m), zeros(s.Cu.shape[0]))

    def matrix(t: float) -> Mat:
        return s.A - s.B @ dre.K_at(max(obs.t1 - t, 0.0))

    v = rk4(LinearField(matrix), obs.v0, 0.0, dre.dt, steps, substeps=dre.substeps)
    K_rev = dre.K[::-1]
    out = v.samples @ s.C.T - np.einsum("ik,tkl,tl->ti", s.D, K_rev, v.samples)
    q = TrajectoryGrid(0.0, dre.dt, out[:, : s.m])
    u = TrajectoryGrid(0.0, dre.dt, out[:, s.m :])
    return DualTrajectory(q, u)


def dual_cost_J(
    traj: DualTrajectory,
    W: WeightSpec,
    Qbar0: Mat,
    t1: float,
    rule: str = "trapezoid",
) -> float:
    """q(t1)^T Qbar0 q(t1) + ∫_0^t1 (q^T Q^{-1} q + u^T R^{-1} u) dt"""
    q = traj.q.truncate(t1)
    u = traj.u.truncate(t1)
    if q.dim != W.m or u.dim != W.p:
        raise InputError("dual trajectory dimensions do not match the weights")
    integrand = quadratic_samples(q.samples, np.linalg.inv(W.Q)) + quadratic_samples(
        u.samples, np.linalg.inv(W.R)
    )
    terminal = q.samples[-1]
    return max(float(terminal @ Qbar0 @ terminal) + integrate(integrand, q.dt, rule), 0.0)


def design_infinite(
    d: DaeTriple,
    W: WeightSpec,
    ells: Sequence[Functional],
    tol: Tol = DEFAULT_TOL,
) -> ObserverLti:
    """
    Ao = (Ag - Bg K)^T, Bo = (Cg_u - Dg_u K)^T and Co rows ell_i^T F Mg^T.

    Ao and Bo depend only on the DAE and (Q, R); each functional adds a row of Co.
    """
    if not ells:
        raise InputError("at least one functional is required")
    W.check_against(d)
    s = assoc_lti(d, tol)
    g = stab_assoc_lti(s, tol)
    for ell in ells:
        if not is_l_detectable(d, ell, tol, s, g):
            raise NotDetectableError(ell.name)
    care = solve_care(g, W, tol)
    K = care.K
    Ao = (g.A - g.B @ K).T
    Bo = (g.Cu - g.Du @ K).T
    V0 = np.column_stack([g.M @ ell.image(d) for ell in ells])
    Co = V0.T
    sigma = np.einsum("ji,jk,ki->i", V0, care.P, V0) if g.state_dim else np.zeros(len(ells))
    sigma = np.maximum(sigma, 0.0)
    logger.info(
        f"infinite-horizon observer: dim {g.state_dim}, {len(ells)} functionals, "
        f"max sigma {float(np.max(sigma)):.6g}"
    )
    return ObserverLti(Ao, Bo, Co, sigma, tuple(ells), g, care)


def run_infinite(obs: ObserverLti, y: TrajectoryGrid) -> TrajectoryGrid:
    """Integrate r' = Ao r + Bo y from r(0) = 0 and return Co r(t_k)"""
    if y.dim != obs.Bo.shape[1]:
        raise InputError(f"output signal has dimension {y.dim}, observer expects {obs.Bo.shape[1]}")
    l = obs.Ao.shape[0]
    if l == 0 or y.count == 1:
        return TrajectoryGrid(y.t0, y.dt, np.zeros((y.count, obs.Co.shape[0])))
    r = rk4(LinearField.driven_by(obs.Ao, obs.Bo, y), np.zeros(l), y.t0, y.dt, y.count - 1)
    return r.map_rows(obs.Co)


def optimal_dual_trajectory_infinite(
    d: DaeTriple,
    g: StabLti,
    K: Mat,
    ell: Functional,
    horizon: float,
    steps: int,
) -> DualTrajectory:
    """v' = (Ag - Bg K) v from v(0) = Mg F^T ell, with (q*, u*) = (Cg - Dg K) v"""
    dt = horizon / steps
    if g.state_dim == 0:
        return DualTrajectory(
            TrajectoryGrid.zeros(g.m, 0.0, dt, steps),
            TrajectoryGrid.zeros(g.Cu.shape[0], 0.0, dt, steps),
        )
    v = rk4(LinearField(g.A - g.B @ K), g.M @ ell.image(d), 0.0, dt, steps)
    out = v.map_rows(g.C - g.D @ K).samples
    return DualTrajectory(
        TrajectoryGrid(0.0, dt, out[:, : g.m]), TrajectoryGrid(0.0, dt, out[:, g.m :])
    )


def error_dynamics(
    d: DaeTriple,
    g: StabLti,
    K: Mat,
    ell: Functional,
    x0F,
    f: TrajectoryGrid,
    eta: TrajectoryGrid,
) -> TrajectoryGrid:
    """
    Estimation error e(t) = ell^T F x(t) - estimate(t) of the infinite-horizon observer,
    e = ell^T F Mg^T r~ with r~' = (Ag - Bg K)^T r~ + (Cg - Dg K)^T [f; -eta]
    and r~(0) = (Cg - Dg K)^T [F x(0); 0].
    """
    if not f.same_grid(eta):
        raise InputError("f and eta must share one time grid")
    x0F = as_vector(x0F, "x0F")
    readout = g.M @ ell.image(d)
    if g.state_dim == 0:
        return TrajectoryGrid(f.t0, f.dt, np.zeros((f.count, 1)))
    Cl = g.C - g.D @ K
    noise = TrajectoryGrid(f.t0, f.dt, np.hstack([f.samples, -eta.samples]))
    r0 = Cl.T @ np.concatenate([x0F, np.zeros(eta.dim)])
    r = rk4(LinearField.driven_by((g.A - g.B @ K).T, Cl.T, noise), r0, f.t0, f.dt, f.count - 1)
    return TrajectoryGrid(f.t0, f.dt, r.samples @ readout)


def noise_gain_bound(
    d: DaeTriple,
    g: StabLti,
    K: Mat,
    ell: Functional,
    horizon: float,
    steps: int = 2000,
) -> float:
    """
    ∫_0^horizon ‖(Cg - Dg K) e^{(Ag - Bg K) s} v0‖_1 ds with v0 = Mg F^T ell.

    With zero initial data sup|e| <= bound * sup‖[f; eta]‖_inf on [0, horizon].
    """
    if g.state_dim == 0:
        return 0.0
    dt = horizon / steps
    step = expm((g.A - g.B @ K) * dt)
    Cl = g.C - g.D @ K
    z = g.M @ ell.image(d)
    values = np.empty(steps + 1)
    for i in range(steps + 1):
        values[i] = np.abs(Cl @ z).sum()
        z = step @ z
    return integrate(values, dt)


def observer_kernel(obs: ObserverLti, tau: float) -> Mat:
    """Co e^{Ao tau} Bo, so that estimate(t) = ∫_0^t kernel(t - s) y(s) ds"""
    if tau < 0:
        raise InputError(f"kernel lag must be non-negative, got {tau}")
    if obs.Ao.size == 0:
        return np.zeros((obs.Co.shape[0], obs.Bo.shape[1]))
    return obs.Co @ expm(obs.Ao * tau) @ obs.Bo
