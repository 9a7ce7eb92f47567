"""
Simulation Module
Sampled signals on uniform grids, the fixed-step RK4 integrator and
synthesis of consistent DAE solutions for testing
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from .dae_core import DaeTriple, SolutionTuple, WeightSpec, rho
from .errors import InputError, NumericalError
from .matspace import Mat, as_matrix, as_vector

logger = logging.getLogger(__name__)

SIGNAL_KINDS = ("zero", "constant", "sinusoid", "exp-cosine", "samples")


@dataclass(frozen=True)
class TrajectoryGrid:
    """
    A vector signal sampled on the uniform grid t0, t0 + dt, ..., t0 + (count - 1) dt.

    samples has shape (count, dim).
    """

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InputError(f"grid step must be positive, got {self.dt}")
        if not np.isfinite(self.t0):
            raise InputError("grid start must be finite")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise InputError(f"samples must be a (count, dim) array, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InputError("trajectory contains NaN or Inf samples")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def zeros(cls, dim: int, t0: float, dt: float, steps: int) -> "TrajectoryGrid":
        return cls(t0, dt, np.zeros((steps + 1, dim)))

    @classmethod
    def from_function(
        cls, fn: Callable[[np.ndarray], np.ndarray], t0: float, dt: float, steps: int
    ) -> "TrajectoryGrid":
        """Sample fn, which maps a time array of length K to a (K, dim) array"""
        times = t0 + dt * np.arange(steps + 1)
        return cls(t0, dt, np.asarray(fn(times), dtype=float).reshape(steps + 1, -1))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, time_column: str = "time") -> "TrajectoryGrid":
        """Build from a table with a uniform time column and one column per component"""
        if time_column not in frame.columns:
            raise InputError(f"signal table has no '{time_column}' column")
        times = frame[time_column].to_numpy(dtype=float)
        values = frame.drop(columns=[time_column]).to_numpy(dtype=float)
        if times.size < 2:
            raise InputError("signal table needs at least two time samples")
        steps = np.diff(times)
        dt = float(steps.mean())
        if np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(dt)):
            raise InputError("signal time column is not uniformly spaced")
        return cls(float(times[0]), dt, values)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.count)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.count - 1)

    def same_grid(self, other: "TrajectoryGrid") -> bool:
        return (
            self.count == other.count
            and abs(self.t0 - other.t0) <= 1e-12 * max(1.0, abs(self.t0))
            and abs(self.dt - other.dt) <= 1e-12 * self.dt
        )

    def index_of(self, t: float) -> int:
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k >= self.count or abs(self.t0 + k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise InputError(
                f"time {t} is not a grid point of [{self.t0}, {self.t_end}] with step {self.dt}"
            )
        return k

    def truncate(self, t1: float) -> "TrajectoryGrid":
        """Samples on [t0, t1]; t1 must be a grid point"""
        if t1 > self.t_end + 1e-9 * self.dt:
            raise InputError(f"grid ends at {self.t_end}, shorter than the horizon {t1}")
        return TrajectoryGrid(self.t0, self.dt, self.samples[: self.index_of(t1) + 1])

    def scaled(self, factor: float) -> "TrajectoryGrid":
        return TrajectoryGrid(self.t0, self.dt, factor * self.samples)

    def reversed(self) -> "TrajectoryGrid":
        """s -> x(t_end - s), re-based at t0"""
        return TrajectoryGrid(self.t0, self.dt, self.samples[::-1].copy())

    def map_rows(self, matrix: Mat) -> "TrajectoryGrid":
        """Apply a constant matrix to every sample"""
        return TrajectoryGrid(self.t0, self.dt, self.samples @ np.asarray(matrix).T)

    def interpolant(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.count == 1:
            value = self.samples[0]
            return lambda t: np.broadcast_to(value, np.shape(t) + value.shape)
        if self.count < 4:
            return lambda t: np.stack(
                [np.interp(t, self.times, self.samples[:, j]) for j in range(self.dim)], axis=-1
            )
        return CubicSpline(self.times, self.samples, axis=0)

    def to_frame(self, prefix: str = "x", columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
        names = list(columns) if columns is not None else [f"{prefix}{i + 1}" for i in range(self.dim)]
        if len(names) != self.dim:
            raise InputError(f"{len(names)} column names for a {self.dim}-dimensional signal")
        frame = pd.DataFrame(self.samples, columns=names)
        frame.insert(0, "time", self.times)
        return frame


@dataclass(frozen=True)
class SignalSpec:
    """A scalar analytic signal amplitude * e^{-decay t} cos(frequency t + phase) and its relatives"""

    kind: str = "zero"
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    decay: float = 0.0
    samples: Optional[TrajectoryGrid] = None

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise InputError(f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        for name in ("amplitude", "frequency", "phase", "decay"):
            if not np.isfinite(getattr(self, name)):
                raise InputError(f"signal {name} must be finite")
        if self.frequency < 0:
            raise InputError(f"signal frequency must be non-negative, got {self.frequency}")
        if self.kind == "samples" and (self.samples is None or self.samples.dim != 1):
            raise InputError("a 'samples' signal needs a one-dimensional TrajectoryGrid")

    @classmethod
    def sine(cls, amplitude: float, frequency: float) -> "SignalSpec":
        return cls("sinusoid", amplitude, frequency, phase=-0.5 * math.pi)

    @classmethod
    def cosine(cls, amplitude: float, frequency: float) -> "SignalSpec":
        return cls("sinusoid", amplitude, frequency)

    def evaluate(self, times) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.full_like(t, self.amplitude)
        if self.kind == "sinusoid":
            return self.amplitude * np.cos(self.frequency * t + self.phase)
        if self.kind == "exp-cosine":
            return self.amplitude * np.exp(-self.decay * t) * np.cos(self.frequency * t + self.phase)
        return np.asarray(self.samples.interpolant()(t)).reshape(t.shape)


def signal_grid(specs: Sequence[SignalSpec], t0: float, dt: float, steps: int) -> TrajectoryGrid:
    """Sample one SignalSpec per component"""
    if not specs:
        raise InputError("signal_grid needs at least one component")
    return TrajectoryGrid.from_function(
        lambda t: np.stack([spec.evaluate(t) for spec in specs], axis=-1), t0, dt, steps
    )


MatrixSource = Union[Mat, Callable[[float], Mat]]


@dataclass
class LinearField:
    """
    Right-hand side x' = M(t) x + g(t).

    matrix is a constant array or a callable of t; forcing maps a time array of
    length K to a (K, dim) array.
    """

    matrix: MatrixSource
    forcing: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dim: int = field(init=False)

    def __post_init__(self):
        if callable(self.matrix):
            self.dim = np.asarray(self.matrix(0.0)).shape[0]
        else:
            self.matrix = as_matrix(self.matrix, "field matrix")
            self.dim = self.matrix.shape[0]

    @classmethod
    def driven_by(cls, matrix: MatrixSource, input_matrix: Mat, signal: TrajectoryGrid) -> "LinearField":
        """x' = M(t) x + B s(t) with s interpolated from a sampled signal"""
        B = as_matrix(input_matrix, "input matrix")
        if B.shape[1] != signal.dim:
            raise InputError(f"input matrix has {B.shape[1]} columns, signal has dimension {signal.dim}")
        spline = signal.interpolant()
        return cls(matrix, lambda t: np.asarray(spline(t)) @ B.T)

    def matrix_at(self, t: float) -> Mat:
        return self.matrix(t) if callable(self.matrix) else self.matrix

    def spectral_radius(self, t: float = 0.0) -> float:
        M = self.matrix_at(t)
        return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def stable_substeps(spectral_radius: float, dt: float, target: float = 2.0) -> int:
    """Substeps per grid step keeping h * spectral_radius within the RK4 stability region"""
    if spectral_radius <= 0 or dt <= 0:
        return 1
    return max(1, int(math.ceil(dt * spectral_radius / target)))


def rk4(
    lin: LinearField,
    x0,
    t0: float,
    dt: float,
    steps: int,
    substeps: Optional[int] = None,
) -> TrajectoryGrid:
    """
    Classical RK4 on a uniform grid; returns steps + 1 samples.

    substeps=None picks the count from the spectral radius of the field at t0.
    """
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    if steps < 1:
        raise InputError(f"steps must be at least 1, got {steps}")
    x = as_vector(x0, "x0").copy()
    if x.shape[0] != lin.dim:
        raise InputError(f"initial state has length {x.shape[0]}, field dimension is {lin.dim}")
    if substeps is None:
        substeps = stable_substeps(lin.spectral_radius(t0), dt)
    h = dt / substeps
    total = steps * substeps
    # stage points t0, t0 + h/2, t0 + h, ... evaluated in one vectorized call
    stage_times = t0 + 0.5 * h * np.arange(2 * total + 1)
    if lin.forcing is not None:
        forcing = np.asarray(lin.forcing(stage_times), dtype=float).reshape(stage_times.size, -1)
    else:
        forcing = np.zeros((stage_times.size, lin.dim))
    out = np.empty((steps + 1, lin.dim))
    out[0] = x
    constant = not callable(lin.matrix)
    M0 = Mh = M1 = lin.matrix_at(t0)
    for k in range(total):
        if not constant:
            t = t0 + k * h
            M0, Mh, M1 = lin.matrix_at(t), lin.matrix_at(t + 0.5 * h), lin.matrix_at(t + h)
        g0, gh, g1 = forcing[2 * k], forcing[2 * k + 1], forcing[2 * k + 2]
        k1 = M0 @ x + g0
        k2 = Mh @ (x + 0.5 * h * k1) + gh
        k3 = Mh @ (x + 0.5 * h * k2) + gh
        k4 = M1 @ (x + h * k3) + g1
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % substeps == 0:
            if not np.all(np.isfinite(x)):
                raise NumericalError(f"RK4 state became non-finite at t={t0 + (k + 1) * h:.6g}")
            out[(k + 1) // substeps] = x
    logger.debug(f"rk4: {steps} steps x {substeps} substeps, dim {lin.dim}")
    return TrajectoryGrid(t0, dt, out)


def _trig_coefficients(rng: np.random.Generator, dim: int, harmonics: int, scale: float):
    freqs = rng.uniform(0.5, 3.0, size=harmonics)
    a = scale * rng.standard_normal((harmonics, dim)) / harmonics
    b = scale * rng.standard_normal((harmonics, dim)) / harmonics
    return freqs, a, b


def _trig_value(times: np.ndarray, coeffs) -> Tuple[np.ndarray, np.ndarray]:
    freqs, a, b = coeffs
    phase = np.outer(times, freqs)
    value = np.sin(phase) @ a + np.cos(phase) @ b
    rate = (np.cos(phase) * freqs) @ a - (np.sin(phase) * freqs) @ b
    return value, rate


def solution_from_state(
    d: DaeTriple,
    state: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    noise: Callable[[np.ndarray], np.ndarray],
    t0: float,
    dt: float,
    steps: int,
) -> SolutionTuple:
    """
    Consistent solution from an analytic state path: state(t) returns (x, x') as
    (K, n) arrays, f = F x' - A x and y = H x + eta.
    """
    times = t0 + dt * np.arange(steps + 1)
    x, xdot = state(times)
    eta = np.asarray(noise(times), dtype=float).reshape(times.size, d.p)
    f = xdot @ d.F.T - x @ d.A.T
    y = x @ d.H.T + eta
    return SolutionTuple(
        TrajectoryGrid(t0, dt, x),
        TrajectoryGrid(t0, dt, f),
        TrajectoryGrid(t0, dt, y),
        TrajectoryGrid(t0, dt, eta),
    )


def synth_solution(
    d: DaeTriple,
    seed: int,
    t0: float,
    dt: float,
    steps: int,
    harmonics: int = 3,
    state_scale: float = 1.0,
    noise_scale: float = 0.1,
) -> SolutionTuple:
    """Seeded random trigonometric state with analytically derived f and a trigonometric eta"""
    rng = np.random.default_rng(seed)
    x_coeffs = _trig_coefficients(rng, d.n, harmonics, state_scale)
    eta_coeffs = _trig_coefficients(rng, d.p, harmonics, noise_scale)
    return solution_from_state(
        d,
        lambda t: _trig_value(t, x_coeffs),
        lambda t: _trig_value(t, eta_coeffs)[0],
        t0,
        dt,
        steps,
    )


def scale_to_admissible(
    x0F, f: TrajectoryGrid, eta: TrajectoryGrid, t1: float, W: WeightSpec
) -> Tuple[np.ndarray, TrajectoryGrid, TrajectoryGrid]:
    """Divide (x0, f, eta) by sqrt(rho) so the scaled triple has rho = 1"""
    value = rho(x0F, f, eta, t1, W)
    if value <= 0.0:
        raise InputError("cannot scale a zero noise triple to the unit ellipsoid")
    factor = 1.0 / math.sqrt(value)
    return factor * as_vector(x0F, "x0"), f.scaled(factor), eta.scaled(factor)


def scale_solution_to_admissible(
    sol: SolutionTuple, d: DaeTriple, W: WeightSpec, t1: float
) -> SolutionTuple:
    """The same solution scaled so that rho(Fx(0), f, eta, t1) = 1"""
    value = rho(sol.x0F(d), sol.f, sol.eta, t1, W)
    if value <= 0.0:
        raise InputError("cannot scale a zero solution to the unit ellipsoid")
    return sol.scaled(1.0 / math.sqrt(value))
