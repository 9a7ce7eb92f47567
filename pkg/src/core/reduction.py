"""
Reduction Module
Builds the LTI system associated with the dual DAE d(F^T q)/dt = A^T q - H^T u,
its stabilizable restriction, and the l-impulse observability and
l-detectability decisions that depend on them
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.linalg import block_diag, eigvals, schur

from .dae_core import DaeTriple, Functional
from .errors import NumericalError
from .matspace import (
    DEFAULT_TOL,
    Mat,
    Subspace,
    Tol,
    contains,
    image_basis,
    intersect,
    join,
    kernel_basis,
    pinv,
    preimage,
    rank,
    svd_rank,
)
from .simulate import TrajectoryGrid

logger = logging.getLogger(__name__)

HAUTUS_POINTS = 8


@dataclass(frozen=True)
class LtiSystem:
    """
    v' = A v + B g, [q; u] = C v + D g together with a state map M.

    The first m output rows form the dual state q, the remaining rows the dual input u.
    """

    A: Mat
    B: Mat
    C: Mat
    D: Mat
    M: Mat
    m: int

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]

    @property
    def Cs(self) -> Mat:
        return self.C[: self.m]

    @property
    def Cu(self) -> Mat:
        return self.C[self.m :]

    @property
    def Ds(self) -> Mat:
        return self.D[: self.m]

    @property
    def Du(self) -> Mat:
        return self.D[self.m :]

    def feedthrough_is_zero(self, tol: Tol = DEFAULT_TOL) -> bool:
        return self.D.size == 0 or float(np.linalg.norm(self.D, 2)) <= tol.abs_floor


@dataclass(frozen=True)
class AssocLti(LtiSystem):
    """Associated LTI system of the dual DAE; M = (F^T Cs)^+ is the state map"""

    vstar: Optional[Subspace] = None
    svd_rank_F: int = 0

    Aa = property(lambda self: self.A)
    Ba = property(lambda self: self.B)
    Ca = property(lambda self: self.C)
    Da = property(lambda self: self.D)
    state_map_M = property(lambda self: self.M)


@dataclass(frozen=True)
class StabLti(LtiSystem):
    """Restriction of an AssocLti to its stabilizability subspace Vg"""

    Vg: Optional[Subspace] = None

    Ag = property(lambda self: self.A)
    Bg = property(lambda self: self.B)
    Cg = property(lambda self: self.C)
    Dg = property(lambda self: self.D)
    state_map_Mg = property(lambda self: self.M)
    Cg_s = property(lambda self: self.Cs)
    Cg_u = property(lambda self: self.Cu)
    Dg_s = property(lambda self: self.Ds)
    Dg_u = property(lambda self: self.Du)


def _vstar_step(Atil: Mat, G: Mat, Ctil: Mat, Dtil: Mat, V: Subspace, tol: Tol) -> Subspace:
    # {x in V : [Atil; Ctil] x in im [[V, G], [0, Dtil]]}
    r = Atil.shape[0]
    kappa = G.shape[1]
    rows_out = Ctil.shape[0]
    reach = np.block(
        [
            [V.basis, G],
            [np.zeros((rows_out, V.dim)), Dtil.reshape(rows_out, kappa)],
        ]
    )
    target = image_basis(reach, tol)
    candidate = preimage(np.vstack([Atil, Ctil.reshape(rows_out, r)]), target, tol)
    return intersect(V, candidate, tol)


def vstar(Atil: Mat, G: Mat, Ctil: Mat, Dtil: Mat, tol: Tol = DEFAULT_TOL) -> Tuple[Subspace, Mat]:
    """
    Largest output-nulling controlled invariant subspace of
    x' = Atil x + G w, z = Ctil x + Dtil w, together with a friend.

    The friend Ftil satisfies (Atil + G Ftil) V ⊆ V and (Ctil + Dtil Ftil) V = 0.
    """
    Atil = np.asarray(Atil, dtype=float)
    G = np.asarray(G, dtype=float)
    r = Atil.shape[0]
    kappa = G.shape[1]
    Ctil = np.asarray(Ctil, dtype=float).reshape(-1, r)
    Dtil = np.asarray(Dtil, dtype=float).reshape(Ctil.shape[0], kappa)

    V = Subspace.full(r)
    for step in range(r + 1):
        nxt = _vstar_step(Atil, G, Ctil, Dtil, V, tol)
        logger.debug(f"V* recursion step {step}: dim {V.dim} -> {nxt.dim}")
        if nxt.dim == V.dim:
            V = nxt
            break
        V = nxt

    friend = np.zeros((kappa, r))
    if V.dim:
        complement = V.complement_projector()
        lhs = np.vstack([complement @ G, Dtil])
        rhs = -np.vstack([complement @ Atil @ V.basis, Ctil @ V.basis])
        W = pinv(lhs, tol) @ rhs
        friend = W @ V.basis.T
        closed = Atil + G @ friend
        scale = max(1.0, float(np.linalg.norm(np.hstack([Atil, G]), 2)))
        invariance = float(np.linalg.norm(complement @ closed @ V.basis)) if r else 0.0
        nulling = float(np.linalg.norm((Ctil + Dtil @ friend) @ V.basis)) if Ctil.size else 0.0
        if max(invariance, nulling) > 1e-8 * scale:
            logger.warning(
                f"friend residuals above tolerance: invariance {invariance:.2e}, "
                f"output nulling {nulling:.2e}"
            )
    return V, friend


def _scalings(Ft: Mat, tol: Tol) -> Tuple[int, Mat, Mat]:
    # S Ft T = [[I_r, 0], [0, 0]]
    n, m = Ft.shape
    r, U, s, V = svd_rank(Ft, tol)
    left = np.ones(n)
    right = np.ones(m)
    left[:r] = 1.0 / np.sqrt(s[:r])
    right[:r] = 1.0 / np.sqrt(s[:r])
    S = left[:, None] * U.T
    T = V * right[None, :]
    return r, S, T


def assoc_lti(d: DaeTriple, tol: Tol = DEFAULT_TOL) -> AssocLti:
    """Associated LTI system of the dual DAE"""
    m, n, p = d.m, d.n, d.p
    r, S, T = _scalings(d.F.T, tol)

    SAT = S @ d.A.T @ T
    SHt = S @ d.H.T
    Atil, A12 = SAT[:r, :r], SAT[:r, r:]
    A21, A22 = SAT[r:, :r], SAT[r:, r:]
    B1, B2 = -SHt[:r], -SHt[r:]

    G = np.hstack([A12, B1])
    Dtil = np.hstack([A22, B2])
    Ctil = A21
    kappa = m - r + p

    V, friend = vstar(Atil, G, Ctil, Dtil, tol)

    ker_D = kernel_basis(Dtil, tol)
    L = intersect(ker_D, preimage(G, V, tol), tol).basis
    if L.shape[1] == 0:
        L = np.zeros((kappa, 1))

    lift = block_diag(T, np.eye(p))
    C_bar = lift @ np.vstack([np.eye(r), friend])
    D_bar = lift @ np.vstack([np.zeros((r, L.shape[1])), L])

    basis = V.basis
    Aa = basis.T @ (Atil + G @ friend) @ basis
    Ba = basis.T @ G @ L
    Ca = C_bar @ basis
    Da = D_bar
    M = pinv(d.F.T @ Ca[:m], tol)

    logger.info(
        f"associated LTI: rank F = {r}, dim V* = {V.dim}, inputs k = {Ba.shape[1]}, "
        f"outputs m + p = {m + p}"
    )
    return AssocLti(Aa, Ba, Ca, Da, M, m, vstar=V, svd_rank_F=r)


def assoc_invariants(d: DaeTriple, s: LtiSystem, tol: Tol = DEFAULT_TOL) -> Dict[str, float]:
    """Quantities behind the associated-system conditions, for reports and tests"""
    FtCs = d.F.T @ s.Cs
    FtDs = d.F.T @ s.Ds
    D_rank = rank(s.D, tol)
    zero_branch = s.input_dim == 1 and np.linalg.norm(np.vstack([s.D, s.B])) <= tol.abs_floor
    return {
        "state_dim": s.state_dim,
        "input_dim": s.input_dim,
        "rank_FtCs": rank(FtCs, tol) if FtCs.size else 0,
        "norm_FtDs": float(np.linalg.norm(FtDs)) if FtDs.size else 0.0,
        "D_full_column_rank": bool(D_rank == s.input_dim),
        "zero_input_branch": bool(zero_branch),
    }


def behavior_residual(d: DaeTriple, s: LtiSystem) -> Tuple[float, float]:
    """
    ‖F^T Cs A - A^T Cs + H^T Cu‖ and ‖F^T Cs B - A^T Ds + H^T Du‖.

    Both vanish exactly when every trajectory of s maps to a dual DAE solution.
    """
    state = d.F.T @ s.Cs @ s.A - d.A.T @ s.Cs + d.H.T @ s.Cu
    inputs = d.F.T @ s.Cs @ s.B - d.A.T @ s.Ds + d.H.T @ s.Du
    norm = lambda X: float(np.linalg.norm(X)) if X.size else 0.0
    return norm(state), norm(inputs)


def lift_dual_trajectory(
    d: DaeTriple, s: AssocLti, q: TrajectoryGrid, u: TrajectoryGrid, tol: Tol = DEFAULT_TOL
) -> Tuple[TrajectoryGrid, TrajectoryGrid]:
    """State and input of the associated system reproducing a dual solution (q, u)"""
    v = q.samples @ (s.M @ d.F.T).T
    stacked = np.hstack([q.samples, u.samples])
    g = (stacked - v @ s.C.T) @ pinv(s.D, tol).T
    return TrajectoryGrid(q.t0, q.dt, v), TrajectoryGrid(q.t0, q.dt, g)


def _krylov_space(A: Mat, B: Mat, tol: Tol) -> Subspace:
    # image [B, AB, A^2 B, ...] grown one orthonormal block at a time
    space = image_basis(B, tol)
    for _ in range(A.shape[0]):
        grown = join(space, image_basis(A @ space.basis, tol), tol=tol)
        if grown.dim == space.dim:
            break
        space = grown
    return space


def stable_invariant_subspace(A: Mat, tol: Tol = DEFAULT_TOL) -> Subspace:
    """Largest A-invariant subspace on which every eigenvalue has Re < -stability_margin"""
    n = A.shape[0]
    if n == 0:
        return Subspace.zero(0)
    margin = tol.stability_margin
    _, Z, sdim = schur(A, output="real", sort=lambda re, im: re < -margin)
    return image_basis(Z[:, :sdim], tol)


def is_stabilizable(A: Mat, B: Mat, tol: Tol = DEFAULT_TOL) -> bool:
    """Hautus test rank [lambda I - A, B] = n at every eigenvalue with Re >= -stability_margin"""
    n = A.shape[0]
    if n == 0:
        return True
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol.stability_margin:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        s = np.linalg.svd(pencil, compute_uv=False)
        if np.sum(s > tol.drop_rtol * max(1.0, s[0])) < n:
            return False
    return True


def stab_assoc_lti(s: AssocLti, tol: Tol = DEFAULT_TOL) -> StabLti:
    """Stabilizable associated system on Vg = im [R, V2]"""
    nhat = s.state_dim
    if nhat == 0:
        Vg = Subspace.zero(0)
    else:
        controllable = _krylov_space(s.A, s.B, tol)
        stable = stable_invariant_subspace(s.A, tol)
        Vg = join(controllable, stable, tol=tol)
    basis = Vg.basis
    Ag = basis.T @ s.A @ basis
    Bg = basis.T @ s.B
    Cg = s.C @ basis
    Mg = basis.T @ s.M
    g = StabLti(Ag, Bg, Cg, s.D, Mg, s.m, Vg=Vg)
    logger.info(f"stabilizable restriction: dim Vg = {Vg.dim} of {nhat}")
    if not is_stabilizable(Ag, Bg, tol):
        logger.warning("restricted system failed the Hautus stabilizability test")
    return g


def is_l_impulse_observable(
    d: DaeTriple, ell: Functional, tol: Tol = DEFAULT_TOL, assoc: Optional[AssocLti] = None
) -> bool:
    """
    F^T ell ∈ im F^T Cs.

    Tested on F^T ell, not on ell.
    """
    s = assoc if assoc is not None else assoc_lti(d, tol)
    image = image_basis(d.F.T @ s.Cs, tol)
    return contains(image, ell.image(d), tol)


def is_l_detectable(
    d: DaeTriple,
    ell: Functional,
    tol: Tol = DEFAULT_TOL,
    assoc: Optional[AssocLti] = None,
    stab: Optional[StabLti] = None,
) -> bool:
    """l-impulse observable and M F^T ell ∈ Vg"""
    s = assoc if assoc is not None else assoc_lti(d, tol)
    if not is_l_impulse_observable(d, ell, tol, s):
        return False
    g = stab if stab is not None else stab_assoc_lti(s, tol)
    return contains(g.Vg, s.M @ ell.image(d), tol)


def impulse_obs_rank_check(d: DaeTriple, tol: Tol = DEFAULT_TOL) -> Optional[bool]:
    """
    rank [[F, A], [0, H], [0, F]] == n + rank F, valid when rank [F; A; H] = n.

    Returns None when that standing assumption fails.
    """
    if d.stacked_rank(tol) != d.n:
        logger.info("rank [F; A; H] < n: impulse observability rank test does not apply")
        return None
    m, n, p = d.m, d.n, d.p
    big = np.block(
        [
            [d.F, d.A],
            [np.zeros((p, n)), d.H],
            [np.zeros((m, n)), d.F],
        ]
    )
    return rank(big, tol) == n + rank(d.F, tol)


def _pencil(d: DaeTriple, s: complex) -> np.ndarray:
    return np.vstack([s * d.F - d.A, d.H.astype(complex)])


def _complex_rank(M: np.ndarray, rtol: float) -> Tuple[int, np.ndarray]:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    return int(np.sum(s > rtol * s[0])), s


def detectability_hautus_check(d: DaeTriple, tol: Tol = DEFAULT_TOL, seed: int = 0) -> bool:
    """
    rank [lambda F - A; H] equals the normal rank of the pencil for every Re lambda >= 0.

    The normal rank comes from random complex sample points. Candidate rank-drop points are
    the finite eigenvalues of a randomly compressed square subpencil; each candidate in
    the closed right half plane is checked by a direct rank evaluation.
    """
    rng = np.random.default_rng(seed)
    points = rng.standard_normal(HAUTUS_POINTS) + 1j * rng.standard_normal(HAUTUS_POINTS)
    normal_rank = max(_complex_rank(_pencil(d, z), tol.drop_rtol)[0] for z in points)
    if normal_rank == 0:
        return True

    rows = d.m + d.p
    E = np.vstack([d.F, np.zeros((d.p, d.n))])
    Ahat = np.vstack([d.A, -d.H])
    W = rng.standard_normal((normal_rank, rows))
    Z = rng.standard_normal((d.n, normal_rank))
    try:
        candidates = eigvals(W @ Ahat @ Z, W @ E @ Z)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"generalized eigenvalue solve failed: {exc}") from exc
    candidates = candidates[np.isfinite(candidates)]
    logger.debug(f"Hautus check: normal rank {normal_rank}, {candidates.size} finite candidates")

    for lam in candidates:
        if lam.real < -tol.stability_margin:
            continue
        local_rank, _ = _complex_rank(_pencil(d, lam), tol.drop_rtol)
        if local_rank < normal_rank:
            logger.info(f"pencil drops rank at lambda = {lam:.6g}")
            return False
    return True
