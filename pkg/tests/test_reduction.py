"""
Associated LTI system, stabilizable restriction and the observability tests
"""

import numpy as np
import pytest

from src.core.dae_core import DaeTriple, Functional, dual_residual
from src.core.matspace import Subspace, contains
from src.core.reduction import (
    assoc_invariants,
    assoc_lti,
    behavior_residual,
    detectability_hautus_check,
    impulse_obs_rank_check,
    is_l_detectable,
    is_l_impulse_observable,
    is_stabilizable,
    lift_dual_trajectory,
    stab_assoc_lti,
    stable_invariant_subspace,
    vstar,
)
from src.core.simulate import LinearField, SignalSpec, TrajectoryGrid, rk4, signal_grid

from .helpers import random_ode, random_triple


def _random_dims(seed: int):
    rng = np.random.default_rng(1000 + seed)
    m, n = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    p = int(rng.integers(1, 4))
    rank_F = int(rng.integers(1, min(m, n) + 1))
    return m, n, p, rank_F


def _scale(d: DaeTriple) -> float:
    return 1.0 + np.linalg.norm(d.F) + np.linalg.norm(d.A) + np.linalg.norm(d.H)


# ── V* ───────────────────────────────────────────────────────────────────────

def test_vstar_without_output_is_everything():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    V, friend = vstar(A, np.zeros((2, 1)), np.zeros((0, 2)), np.zeros((0, 1)))
    assert V.dim == 2
    assert np.allclose(friend, 0.0)


def test_vstar_of_measured_integrator_chain():
    # x1' = x2, x2' = w, z = x1: only the origin keeps z = 0
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    G = np.array([[0.0], [1.0]])
    V, _ = vstar(A, G, np.array([[1.0, 0.0]]), np.zeros((1, 1)))
    assert V.dim == 0


def test_vstar_friend_nulls_output():
    # z = x1 + w can be held at zero by w = -x1 from anywhere
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    G = np.array([[1.0], [0.0]])
    C = np.array([[1.0, 0.0]])
    D = np.array([[1.0]])
    V, friend = vstar(A, G, C, D)
    assert V.dim == 2
    assert np.allclose((C + D @ friend) @ V.basis, 0.0, atol=1e-10)


def test_vstar_exact_subspace_and_friend():
    # z = x1 - x2 stays zero along (1, 1) once w = -(x1 + x2) / 2
    A = np.array([[1.0, 0.0], [0.0, 2.0]])
    G = np.array([[0.0], [1.0]])
    C = np.array([[1.0, -1.0]])
    V, friend = vstar(A, G, C, np.zeros((1, 1)))
    diagonal = Subspace(2, np.array([[1.0], [1.0]]) / np.sqrt(2.0))
    assert V.distance(diagonal) < 1e-12
    assert np.allclose(friend, [[-0.5, -0.5]], atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_vstar_without_input_is_the_unobservable_subspace(seed):
    rng = np.random.default_rng(3000 + seed)
    T, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    A = T @ np.block(
        [[rng.normal(size=(2, 2)), np.zeros((2, 2))], [np.zeros((2, 2)), rng.normal(size=(2, 2))]]
    ) @ T.T
    C = np.hstack([rng.normal(size=(1, 2)), np.zeros((1, 2))]) @ T.T
    V, _ = vstar(A, np.zeros((4, 1)), C, np.zeros((1, 1)))
    assert V.distance(Subspace(4, T[:, 2:])) < 1e-8
    obs = np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(4)])
    assert np.allclose(obs @ V.basis, 0.0, atol=1e-8 * (1.0 + np.linalg.norm(obs)))


@pytest.mark.parametrize("seed", range(10))
def test_vstar_is_a_fixed_point_of_the_recursion(seed):
    rng = np.random.default_rng(4000 + seed)
    A, G, C = rng.normal(size=(4, 4)), rng.normal(size=(4, 1)), rng.normal(size=(1, 4))
    V, friend = vstar(A, G, C, np.zeros((1, 1)))
    # relative degree one leaves three dimensions of zero dynamics
    assert V.dim == 3
    reach = np.block([[V.basis, G], [np.zeros((1, V.dim)), np.zeros((1, 1))]])
    target = np.vstack([A, C]) @ V.basis
    coeffs, *_ = np.linalg.lstsq(reach, target, rcond=None)
    assert np.allclose(reach @ coeffs, target, atol=1e-8 * (1.0 + np.linalg.norm(target)))
    moved = (A + G @ friend) @ V.basis
    assert np.allclose(V.complement_projector() @ moved, 0.0, atol=1e-8 * (1.0 + np.linalg.norm(moved)))


@pytest.mark.parametrize("seed", range(5))
def test_vstar_with_invertible_feedthrough_is_everything(seed):
    rng = np.random.default_rng(5000 + seed)
    A, G, C = rng.normal(size=(4, 4)), rng.normal(size=(4, 1)), rng.normal(size=(1, 4))
    V, friend = vstar(A, G, C, np.array([[2.0]]))
    assert V.dim == 4
    assert np.allclose(C + 2.0 * friend, 0.0, atol=1e-8)


# ── Associated system conditions ─────────────────────────────────────────────

@pytest.mark.parametrize("seed", range(100))
def test_associated_system_conditions_on_random_triples(seed, tol):
    m, n, p, rank_F = _random_dims(seed)
    d = random_triple(seed, m, n, p, rank_F)
    s = assoc_lti(d, tol)
    inv = assoc_invariants(d, s, tol)

    assert inv["norm_FtDs"] <= 1e-10 * _scale(d)
    assert inv["rank_FtCs"] == s.state_dim
    assert inv["D_full_column_rank"] or inv["zero_input_branch"]
    state, inputs = behavior_residual(d, s)
    assert state <= 1e-7 * _scale(d) ** 2
    assert inputs <= 1e-7 * _scale(d) ** 2


@pytest.mark.parametrize("seed", range(5))
def test_ode_associated_matrix_is_similar_to_transpose(seed, tol):
    d = random_ode(seed, n=3, p=1)
    s = assoc_lti(d, tol)
    assert s.state_dim == 3
    # same characteristic polynomial
    assert np.allclose(np.poly(s.A), np.poly(d.A), atol=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_associated_trajectories_solve_the_dual_dae(seed, tol):
    d = random_ode(seed, n=2, p=1)
    s = assoc_lti(d, tol)
    steps, dt = 4000, 2.5e-4
    rng = np.random.default_rng(seed)
    g = signal_grid(
        [SignalSpec.sine(1.0, float(rng.uniform(0.5, 2.0))) for _ in range(s.input_dim)], 0.0, dt, steps
    )
    v = rk4(LinearField.driven_by(s.A, s.B, g), rng.standard_normal(s.state_dim), 0.0, dt, steps)
    out = v.samples @ s.C.T + g.samples @ s.D.T
    q = TrajectoryGrid(0.0, dt, out[:, : d.m])
    u = TrajectoryGrid(0.0, dt, out[:, d.m :])
    assert dual_residual(d, q, u) <= 1e-6


def test_lift_recovers_state_and_input(tol):
    d = random_ode(7, n=3, p=2)
    s = assoc_lti(d, tol)
    rng = np.random.default_rng(7)
    v = TrajectoryGrid(0.0, 0.1, rng.standard_normal((5, s.state_dim)))
    g = TrajectoryGrid(0.0, 0.1, rng.standard_normal((5, s.input_dim)))
    out = v.samples @ s.C.T + g.samples @ s.D.T
    q = TrajectoryGrid(0.0, 0.1, out[:, : d.m])
    u = TrajectoryGrid(0.0, 0.1, out[:, d.m :])
    v_back, g_back = lift_dual_trajectory(d, s, q, u, tol)
    assert np.allclose(v_back.samples, v.samples, atol=1e-9)
    assert np.allclose(g_back.samples, g.samples, atol=1e-9)


def test_impulse_free_triple_has_trivial_associated_system(impulse_free_triple, tol):
    s = assoc_lti(impulse_free_triple, tol)
    assert s.state_dim == 0
    assert s.M.shape == (0, 2)


# ── Stabilizable restriction ─────────────────────────────────────────────────

def test_stable_invariant_subspace_of_diagonal():
    S = stable_invariant_subspace(np.diag([-1.0, 2.0, -3.0]))
    assert S.dim == 2
    assert contains(S, [1.0, 0.0, 0.0]) and contains(S, [0.0, 0.0, 1.0])


def test_stabilizability_hautus():
    A = np.diag([1.0, -1.0])
    assert is_stabilizable(A, np.array([[1.0], [0.0]]))
    assert not is_stabilizable(A, np.array([[0.0], [1.0]]))
    assert is_stabilizable(np.zeros((0, 0)), np.zeros((0, 1)))


def test_restriction_drops_uncontrollable_unstable_mode(tol):
    # x1 unstable and unmeasured, x2 stable and measured
    d = DaeTriple(np.eye(2), np.diag([1.0, -1.0]), np.array([[0.0, 1.0]]))
    s = assoc_lti(d, tol)
    g = stab_assoc_lti(s, tol)
    assert g.state_dim == 1
    assert isinstance(g.Vg, Subspace)
    assert is_stabilizable(g.A, g.B, tol)


@pytest.mark.parametrize("seed", range(10))
def test_restriction_is_stabilizable(seed, tol):
    m, n, p, rank_F = _random_dims(seed)
    d = random_triple(seed, m, n, p, rank_F)
    g = stab_assoc_lti(assoc_lti(d, tol), tol)
    assert is_stabilizable(g.A, g.B, tol)
    assert g.M.shape == (g.state_dim, d.n)


# ── Impulse observability ────────────────────────────────────────────────────

@pytest.mark.parametrize("seed", range(5))
def test_ode_case_is_impulse_observable_for_every_functional(seed, tol):
    d = random_ode(seed, n=3, p=1)
    for i in range(1, 4):
        assert is_l_impulse_observable(d, Functional.unit(3, i), tol)
    assert impulse_obs_rank_check(d, tol) is True


def test_unmeasured_algebraic_rate_is_not_impulse_observable(impulse_free_triple, tol):
    assert not is_l_impulse_observable(impulse_free_triple, Functional.unit(1, 1), tol)
    assert impulse_obs_rank_check(impulse_free_triple, tol) is False


def test_measured_algebraic_rate_is_impulse_observable(tol):
    d = DaeTriple(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[0.0, 1.0]]))
    assert is_l_impulse_observable(d, Functional.unit(1, 1), tol)


def test_rank_check_does_not_apply_below_full_column_rank(tol):
    d = DaeTriple(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))
    assert impulse_obs_rank_check(d, tol) is None


@pytest.mark.parametrize("seed", range(20))
def test_rank_check_implies_impulse_observability(seed, tol):
    n = 3
    d = random_triple(seed, m=n + 1, n=n, p=1, rank_F=n - seed % 2)
    if d.stacked_rank(tol) != n:
        pytest.skip("rank [F; A; H] < n")
    verdict = impulse_obs_rank_check(d, tol)
    if not verdict:
        return
    s = assoc_lti(d, tol)
    rng = np.random.default_rng(seed)
    for _ in range(50):
        ell = Functional(rng.standard_normal(d.m))
        assert is_l_impulse_observable(d, ell, tol, s)


# ── Detectability ────────────────────────────────────────────────────────────

def test_stable_unmeasured_system_is_detectable(tol):
    d = DaeTriple(np.eye(2), np.diag([-1.0, -2.0]), np.zeros((1, 2)))
    assert detectability_hautus_check(d, tol)
    assert all(is_l_detectable(d, Functional.unit(2, i), tol) for i in (1, 2))


def test_hidden_unstable_mode_breaks_detectability(tol):
    d = DaeTriple(np.eye(2), np.diag([1.0, -1.0]), np.array([[0.0, 1.0]]))
    assert not detectability_hautus_check(d, tol)
    assert not is_l_detectable(d, Functional.unit(2, 1), tol)
    assert is_l_detectable(d, Functional.unit(2, 2), tol)


def test_measured_unstable_mode_is_detectable(tol):
    d = DaeTriple(np.eye(2), np.diag([1.0, -1.0]), np.array([[1.0, 0.0]]))
    assert detectability_hautus_check(d, tol)
    assert all(is_l_detectable(d, Functional.unit(2, i), tol) for i in (1, 2))


def test_detectable_implies_impulse_observable(impulse_free_triple, tol):
    assert not is_l_detectable(impulse_free_triple, Functional.unit(1, 1), tol)
