"""
System builders shared by several test modules
"""

import numpy as np

from src.core.dae_core import DaeTriple


def scalar_ode(a: float) -> DaeTriple:
    """x' = a x + f, y = x + eta"""
    return DaeTriple(np.array([[1.0]]), np.array([[a]]), np.array([[1.0]]))


def random_triple(seed: int, m: int, n: int, p: int, rank_F=None) -> DaeTriple:
    """Random (F, A, H) with F of the requested rank"""
    rng = np.random.default_rng(seed)
    k = min(m, n) if rank_F is None else rank_F
    F = rng.standard_normal((m, k)) @ rng.standard_normal((k, n))
    A = rng.standard_normal((m, n))
    H = rng.standard_normal((p, n))
    return DaeTriple(F, A, H)


def random_ode(seed: int, n: int, p: int, shift: float = 0.0) -> DaeTriple:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) / np.sqrt(n) + shift * np.eye(n)
    return DaeTriple(np.eye(n), A, rng.standard_normal((p, n)))


def scalar_riccati(a: float, q0: float, q: float, r: float, t):
    """
    Closed form of P' = 2 a P - r P^2 + 1/q, P(0) = 1/q0 and its stationary root.

    Returns (P(t), P_plus, beta).
    """
    beta = np.sqrt(a * a + r / q)
    p_plus = (a + beta) / r
    p_minus = (a - beta) / r
    p0 = 1.0 / q0
    w = (p0 - p_plus) / (p0 - p_minus) * np.exp(-2.0 * beta * np.asarray(t, dtype=float))
    return (p_plus - w * p_minus) / (1.0 - w), p_plus, beta
