"""
Heat Equation Demo Module
Galerkin DAE of the 1-D heat equation in the basis phi_k = P_{k+1} - P_k of
Legendre differences, its exact modal truth and the infinite-horizon observer run
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import legendre as npleg

from ..data.artifacts import Artifacts
from .dae_core import DaeTriple, Functional, WeightSpec, rho
from .errors import InputError
from .matspace import DEFAULT_TOL, Mat, Tol
from .observer import ObserverLti, design_infinite, run_infinite
from .reduction import AssocLti, StabLti, assoc_lti, is_l_detectable, stab_assoc_lti
from .report_writer import ReportWriter
from .simulate import LinearField, SignalSpec, TrajectoryGrid, rk4, signal_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeatConfig:
    """Discretization, truth signals and weights of the heat-transfer demo"""

    N: int = 40
    Nu: int = 10
    n1: int = 30
    n2: int = 31
    c: float = 0.033
    horizon: float = 5.0
    dt: float = 1e-3
    eval_point: float = -0.25
    # A v = operator_sign * c * v''; +1 is the dissipative operator the modal truth follows
    operator_sign: float = 1.0
    quadrature_nodes: int = 400
    z0: float = 0.2
    input_amplitude: float = 10.0
    noise_amplitude: float = 0.01
    noise_frequency: float = 100.0
    q0_scale: float = 1.0
    r_scale: float = 400.0

    def __post_init__(self):
        if not 1 <= self.Nu <= self.N:
            raise InputError(f"Nu must satisfy 1 <= Nu <= N, got Nu={self.Nu}, N={self.N}")
        if self.n1 == self.n2:
            raise InputError("output modes n1 and n2 must differ")
        if not self.c > 0:
            raise InputError(f"diffusivity c must be positive, got {self.c}")
        if self.operator_sign not in (-1.0, 1.0):
            raise InputError(f"operator_sign must be +1 or -1, got {self.operator_sign}")
        if not (self.horizon > 0 and self.dt > 0):
            raise InputError("horizon and dt must be positive")
        if not -1.0 <= self.eval_point <= 1.0:
            raise InputError(f"eval_point must lie in [-1, 1], got {self.eval_point}")
        if self.quadrature_nodes < 2 * self.N + 20:
            raise InputError(f"quadrature_nodes must be at least 2N + 20 = {2 * self.N + 20}")

    @property
    def m(self) -> int:
        return 2 * self.N + self.Nu

    @property
    def n(self) -> int:
        return 2 * self.N

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def modes(self) -> Tuple[int, int]:
        return self.n1, self.n2

    def decay_rates(self) -> np.ndarray:
        return self.c * math.pi ** 2 * np.array(self.modes, dtype=float) ** 2

    def weights(self) -> WeightSpec:
        N, Nu = self.N, self.Nu
        q = np.concatenate(
            [np.full(Nu, 1e-5), np.full(N - Nu, 1e-3), np.full(N, 1e-3), np.full(Nu, 0.1)]
        )
        return WeightSpec(self.q0_scale * np.eye(self.m), np.diag(q), self.r_scale * np.eye(2))

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True)
class HeatMatrices:
    """Gram, scaling, stiffness and output matrices of the truncated basis"""

    Mhat: Mat
    Lambda: Mat
    M: Mat
    Astiff: Mat
    C: Mat


def legendre_eval(k: int, x):
    """P_k(x) by the three-term recurrence (j + 1) P_{j+1} = (2j + 1) x P_j - j P_{j-1}"""
    if k < 0:
        raise InputError(f"Legendre degree must be non-negative, got {k}")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if k == 0:
        return prev if prev.ndim else float(prev)
    for j in range(1, k):
        prev, cur = cur, ((2 * j + 1) * x * cur - j * prev) / (j + 1)
    return cur if cur.ndim else float(cur)


def basis_coefficients(N: int) -> np.ndarray:
    """Legendre coefficients of phi_1..phi_N as rows, shape (N, N + 2)"""
    coeffs = np.zeros((N, N + 2))
    for k in range(1, N + 1):
        coeffs[k - 1, k + 1] = 1.0
        coeffs[k - 1, k] = -1.0
    return coeffs


def basis_values(N: int, x) -> np.ndarray:
    """phi_k(x) for k = 1..N, shape (N, len(x))"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([npleg.legval(x, row) for row in basis_coefficients(N)])


def gram_analytic(N: int) -> Mat:
    """<phi_i, phi_j> from <P_i, P_j> = 2 delta_ij / (2i + 1)"""
    i = np.arange(1, N + 1, dtype=float)
    G = np.diag(2.0 / (2 * i + 3) + 2.0 / (2 * i + 1))
    off = -2.0 / (2 * i[:-1] + 3)
    return G + np.diag(off, 1) + np.diag(off, -1)


def build_matrices(cfg: HeatConfig) -> HeatMatrices:
    N = cfg.N
    nodes, weights = npleg.leggauss(cfg.quadrature_nodes)
    coeffs = basis_coefficients(N)
    phi = np.array([npleg.legval(nodes, row) for row in coeffs])
    phi_dd = np.array([npleg.legval(nodes, npleg.legder(row, 2)) for row in coeffs])

    Mhat = gram_analytic(N)
    quad_gram = (phi * weights) @ phi.T
    gap = float(np.max(np.abs(quad_gram - Mhat)))
    if gap > 1e-12:
        logger.warning(f"quadrature Gram differs from the analytic Gram by {gap:.2e}")

    Lambda = np.diag((2 * np.arange(1, N + 1) + 1) / 2.0)
    # row i of the projected equation: entry (i, j) = <A phi_j, phi_i>
    Astiff = cfg.operator_sign * cfg.c * (phi * weights) @ phi_dd.T
    sensors = np.array([np.sin(math.pi * n * nodes) for n in cfg.modes])
    C = (sensors * weights) @ phi.T
    return HeatMatrices(Mhat, Lambda, Lambda @ Mhat, Astiff, C)


def assemble_dae(cfg: HeatConfig, mats: Optional[HeatMatrices] = None) -> Tuple[DaeTriple, WeightSpec]:
    """
    F = [[M_N, 0], [0, 0], [0, 0]], A = [[Lambda A_N, Lambda], [I_N, 0], [0, [I_Nu 0]]],
    H = [C_N, 0] with the demo weights
    """
    mats = mats if mats is not None else build_matrices(cfg)
    N, Nu = cfg.N, cfg.Nu
    Z = np.zeros
    F = np.block([[mats.M, Z((N, N))], [Z((N + Nu, 2 * N))]])
    selector = np.hstack([np.eye(Nu), Z((Nu, N - Nu))])
    A = np.block(
        [
            [mats.Lambda @ mats.Astiff, mats.Lambda],
            [np.eye(N), Z((N, N))],
            [Z((Nu, N)), selector],
        ]
    )
    H = np.hstack([mats.C, Z((2, N))])
    return DaeTriple(F, A, H), cfg.weights()


def input_signals(cfg: HeatConfig) -> List[SignalSpec]:
    return [
        SignalSpec.cosine(cfg.input_amplitude, 5.0),
        SignalSpec.sine(cfg.input_amplitude, 3.0),
    ]


def noise_signal(cfg: HeatConfig) -> SignalSpec:
    decay = 0.001 * math.pi ** 2 * cfg.c
    return SignalSpec("exp-cosine", cfg.noise_amplitude, cfg.noise_frequency, decay=decay)


def modal_closed_form(cfg: HeatConfig, times) -> np.ndarray:
    """Variation of constants for z_i' = -c n_i^2 pi^2 z_i + u_i with sinusoidal u_i"""
    t = np.asarray(times, dtype=float)
    out = np.empty((t.size, 2))
    for i, (lam, spec) in enumerate(zip(cfg.decay_rates(), input_signals(cfg))):
        w, a, ph = spec.frequency, spec.amplitude, spec.phase
        denom = lam ** 2 + w ** 2
        particular = lambda s: a * (lam * np.cos(w * s + ph) + w * np.sin(w * s + ph)) / denom
        out[:, i] = (cfg.z0 - particular(0.0)) * np.exp(-lam * t) + particular(t)
    return out


@dataclass(frozen=True)
class HeatTruth:
    """
    The modal truth and the DAE solution it induces.

    x = (a, e_m) with a = Mhat^{-1} P_N V and e_m = P_N A V - A_N a; f and nu are
    whatever makes (x, f, y, nu) solve the DAE exactly, so they carry the projection
    error of the truncated basis.
    """

    z: TrajectoryGrid
    u: TrajectoryGrid
    Fx: TrajectoryGrid
    y: TrajectoryGrid
    x: TrajectoryGrid
    f: TrajectoryGrid
    nu: TrajectoryGrid

    @property
    def x0F(self) -> np.ndarray:
        return self.Fx.samples[0]

    def noise_energy(self, W: WeightSpec, t1: Optional[float] = None, with_initial: bool = True) -> float:
        x0 = self.x0F if with_initial else np.zeros(self.Fx.dim)
        return rho(x0, self.f, self.nu, self.f.t_end if t1 is None else t1, W)


def exact_truth(cfg: HeatConfig, mats: Optional[HeatMatrices] = None, steps: Optional[int] = None) -> HeatTruth:
    """
    Modal truth z_i' = -c n_i^2 pi^2 z_i + u_i from z(0) = (z0, z0), each mode with its
    own wave number, y = z + w and F x_true = sum_i z_i Lambda P_N(sin(pi n_i .))
    """
    mats = mats if mats is not None else build_matrices(cfg)
    steps = cfg.steps if steps is None else steps
    N, Nu = cfg.N, cfg.Nu
    inputs = input_signals(cfg)
    forcing = lambda t: np.stack([spec.evaluate(t) for spec in inputs], axis=-1)
    rates = cfg.decay_rates()
    z = rk4(LinearField(np.diag(-rates), forcing), np.full(2, cfg.z0), 0.0, cfg.dt, steps)
    u = TrajectoryGrid.from_function(forcing, 0.0, cfg.dt, steps)
    w = signal_grid([noise_signal(cfg)] * 2, 0.0, cfg.dt, steps)
    y = TrajectoryGrid(0.0, cfg.dt, z.samples + w.samples)

    # P_N of V, of A V and of V_t; A sin(pi n .) = -operator_sign c (pi n)^2 sin(pi n .)
    PV = z.samples @ mats.C
    PAV = (-cfg.operator_sign * rates * z.samples) @ mats.C
    PVt = (-rates * z.samples + u.samples) @ mats.C
    a = np.linalg.solve(mats.Mhat, PV.T).T
    em = PAV - a @ mats.Astiff.T

    Fx = np.zeros((z.count, cfg.m))
    Fx[:, :N] = PV @ mats.Lambda
    f = np.hstack([(PVt - PAV) @ mats.Lambda, -a, -em[:, :Nu]])
    nu = y.samples - a @ mats.C.T
    grid = lambda samples: TrajectoryGrid(0.0, cfg.dt, samples)
    return HeatTruth(z, u, grid(Fx), y, grid(np.hstack([a, em])), grid(f), grid(nu))


@dataclass(frozen=True)
class TemperatureField:
    """Temperature estimate sum_k z_k(t) phi_k(v) over the first Nu basis functions"""

    coefficients: TrajectoryGrid

    def __call__(self, t, points) -> np.ndarray:
        """Values of shape (len(t), len(points)); t is interpolated between grid samples"""
        spline = self.coefficients.interpolant()
        z = np.atleast_2d(np.asarray(spline(np.atleast_1d(np.asarray(t, dtype=float)))))
        return z @ basis_values(self.coefficients.dim, points)


def reconstruct(
    estimates: TrajectoryGrid, cfg: HeatConfig, mats: Optional[HeatMatrices] = None
) -> TemperatureField:
    """Map observer outputs through M_Nu^{-1} and synthesize with phi_1..phi_Nu"""
    if estimates.dim != cfg.Nu:
        raise InputError(f"expected {cfg.Nu} estimate components, got {estimates.dim}")
    mats = mats if mats is not None else build_matrices(cfg)
    M_Nu = mats.M[: cfg.Nu, : cfg.Nu]
    coefficients = np.linalg.solve(M_Nu, estimates.samples.T).T
    return TemperatureField(TrajectoryGrid(estimates.t0, estimates.dt, coefficients))


def truth_temperature(cfg: HeatConfig, z: TrajectoryGrid, point: float) -> np.ndarray:
    profile = np.array([math.sin(math.pi * n * point) for n in cfg.modes])
    return z.samples @ profile


@dataclass
class HeatDemoReport:
    """Everything the demo produces; frames are ready for CSV output"""

    cfg: HeatConfig
    dae: DaeTriple
    assoc: AssocLti
    stab: StabLti
    observer: ObserverLti
    detectable: Dict[str, bool]
    traces: pd.DataFrame
    reconstruction: pd.DataFrame
    tracking_errors: Dict[str, float] = field(default_factory=dict)
    truth: Optional[HeatTruth] = None
    estimates: Optional[TrajectoryGrid] = None
    noise_energy: float = 0.0

    def error_bound(self, name: str) -> float:
        """sqrt(sigma rho) with rho the energy of the truth's f and nu; zero initial data"""
        return math.sqrt(self.sigma[name] * self.noise_energy)

    @property
    def sigma(self) -> Dict[str, float]:
        return dict(zip(self.observer.labels, map(float, self.observer.sigma)))

    def matrices(self) -> Dict[str, Mat]:
        obs = self.observer
        return {
            "F": self.dae.F,
            "A": self.dae.A,
            "H": self.dae.H,
            "Aa": self.assoc.A,
            "Ba": self.assoc.B,
            "Ca": self.assoc.C,
            "Da": self.assoc.D,
            "LMAP": self.assoc.M,
            "Ag": self.stab.A,
            "Bg": self.stab.B,
            "Cg": self.stab.C,
            "Dg": self.stab.D,
            "LMAPg": self.stab.M,
            "P": obs.care.P,
            "K": obs.care.K,
            "Ao": obs.Ao,
            "Bo": obs.Bo,
            "Co": obs.Co,
        }


def relative_l2(truth: np.ndarray, estimate: np.ndarray) -> float:
    norm = float(np.linalg.norm(truth))
    return float(np.linalg.norm(truth - estimate)) / norm if norm > 0 else float(np.linalg.norm(estimate))


def run_demo(
    cfg: HeatConfig,
    tol: Tol = DEFAULT_TOL,
    output_dir: Optional[Path] = None,
    tracked: Tuple[int, ...] = (4, 10),
) -> HeatDemoReport:
    """Assemble, check detectability, design, run on the truth and reconstruct"""
    if cfg.operator_sign < 0:
        logger.warning(
            "heat operator is -c d^2/dv^2 while the modal truth decays; "
            "set operator_sign=+1 for the dissipative operator"
        )
    logger.warning("basis phi_k = P_{k+1} - P_k does not vanish at v = -1")

    mats = build_matrices(cfg)
    d, W = assemble_dae(cfg, mats)
    logger.info(f"heat DAE assembled: {d.describe()}, rank [F; A; H] = {d.stacked_rank(tol)}")

    s = assoc_lti(d, tol)
    g = stab_assoc_lti(s, tol)
    detectable = {}
    for i in range(1, cfg.Nu + 2):
        ell = Functional.unit(d.m, i)
        detectable[ell.name] = is_l_detectable(d, ell, tol, s, g)

    ells = [Functional.unit(d.m, i) for i in range(1, cfg.Nu + 1)]
    obs = design_infinite(d, W, ells, tol)

    truth = exact_truth(cfg, mats)
    energy = truth.noise_energy(W, with_initial=False)
    if energy > 1.0:
        logger.warning(
            f"noise energy of the truth is {energy:.4g}, outside the unit ellipsoid; "
            f"errors are only bounded by sqrt(sigma * {energy:.4g})"
        )
    estimates = run_infinite(obs, truth.y)
    traces = pd.DataFrame({"time": truth.y.times})
    tracking = {}
    for i, ell in enumerate(ells):
        exact = truth.Fx.samples[:, i]
        est = estimates.samples[:, i]
        traces[f"truth_{ell.name}"] = exact
        traces[f"estimate_{ell.name}"] = est
        traces[f"error_{ell.name}"] = exact - est
        if i + 1 in tracked:
            tracking[ell.name] = relative_l2(exact, est)

    field_estimate = reconstruct(estimates, cfg, mats)
    projected = reconstruct(TrajectoryGrid(0.0, cfg.dt, truth.Fx.samples[:, : cfg.Nu]), cfg, mats)
    recon = pd.DataFrame(
        {
            "time": truth.y.times,
            "truth": truth_temperature(cfg, truth.z, cfg.eval_point),
            "projected": projected(truth.y.times, cfg.eval_point)[:, 0],
            "estimate": field_estimate(truth.y.times, cfg.eval_point)[:, 0],
        }
    )
    estimate_trace = recon["estimate"].to_numpy()
    tracking["reconstruction"] = relative_l2(recon["truth"].to_numpy(), estimate_trace)
    tracking["reconstruction_projected"] = relative_l2(recon["projected"].to_numpy(), estimate_trace)

    report = HeatDemoReport(cfg, d, s, g, obs, detectable, traces, recon, tracking, truth, estimates, energy)
    for name, value in tracking.items():
        logger.info(f"relative L2 tracking error {name}: {value:.4g}")

    if output_dir is not None:
        writer = ReportWriter(output_dir)
        writer.write_matrices(report.matrices())
        writer.write_table(Artifacts.ERROR_TRACES, traces)
        writer.write_table(Artifacts.RECONSTRUCTION, recon)
        writer.write_json(
            "heat_demo.json",
            {
                "config": cfg.to_dict(),
                "tolerances": tol.to_dict(),
                "detectable": detectable,
                "sigma": report.sigma,
                "tracking_errors": tracking,
                "noise_energy": energy,
                "error_bounds": {ell.name: report.error_bound(ell.name) for ell in ells},
            },
        )
    return report
