"""H-represented polytopes and vertex enumeration by double description.

A polytope is ``{v : A v <= b, E v = f}``. Enumeration first restricts to the
affine hull of the equalities, then homogenises to the cone
``{(t, w) : t b' - A' w >= 0, t >= 0}`` and runs the incremental double
description method on it. Extreme rays with ``t > 0`` are the vertices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr

from .errors import BudgetExceeded, DimensionMismatch, EmptyPolytope, UnboundedPolytope

log = logging.getLogger(__name__)

TAU_FEAS = 1e-9
TAU_DEDUPE = 1e-7
DEFAULT_MAX_VERTICES = 10**6


@dataclass
class Polytope:
    A: np.ndarray
    b: np.ndarray
    E: np.ndarray | None = None
    f: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.array(self.A, dtype=float, ndmin=2)
        self.b = np.array(self.b, dtype=float).ravel()
        d = self.A.shape[1]
        if self.E is None or np.size(self.E) == 0:
            self.E = np.zeros((0, d))
            self.f = np.zeros(0)
        else:
            self.E = np.array(self.E, dtype=float, ndmin=2)
            self.f = np.array(self.f, dtype=float).ravel()
        if self.A.shape[0] != self.b.size:
            raise DimensionMismatch("A and b disagree on the number of inequalities")
        if self.E.shape[1] != d or self.E.shape[0] != self.f.size:
            raise DimensionMismatch("equality system has the wrong shape")

    @property
    def dim(self) -> int:
        """Ambient dimension."""
        return self.A.shape[1]

    def contains(self, v, tol: float = TAU_FEAS) -> bool:
        return contains(self, v, tol)

    def slack(self, v) -> np.ndarray:
        return self.b - self.A @ np.asarray(v, dtype=float)


@dataclass
class VertexSet:
    points: np.ndarray
    tol_dedupe: float = TAU_DEDUPE

    def __len__(self):
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)


def contains(P: Polytope, v, tol: float = TAU_FEAS) -> bool:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != P.dim:
        raise DimensionMismatch(f"point of length {v.size} for a {P.dim}-dimensional polytope")
    if np.any(P.A @ v > P.b + tol):
        return False
    return bool(np.all(np.abs(P.E @ v - P.f) <= tol))


def _affine_hull(E: np.ndarray, f: np.ndarray, d: int):
    """Particular solution and orthonormal null-space basis of ``E v = f``."""
    if E.shape[0] == 0:
        return np.zeros(d), np.eye(d)
    v0, *_ = np.linalg.lstsq(E, f, rcond=None)
    scale = max(1.0, float(np.abs(f).max()))
    if np.abs(E @ v0 - f).max() > 1e-9 * scale:
        raise EmptyPolytope("equality constraints are inconsistent")
    _, sv, Vt = np.linalg.svd(E)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv.max(initial=0.0))))
    return v0, Vt[rank:].T


def _normalise_rows(A: np.ndarray, b: np.ndarray):
    """Scale rows to unit norm; drop trivial and duplicate rows.

    Returns ``(A, b, source)`` where ``source`` maps kept rows to input rows.
    """
    norms = np.linalg.norm(A, axis=1)
    trivial = norms <= 1e-12
    if np.any(b[trivial] < -TAU_FEAS):
        raise EmptyPolytope("a constraint reduces to 0 <= negative")
    idx = np.flatnonzero(~trivial)
    An = A[idx] / norms[idx, None]
    bn = b[idx] / norms[idx]
    key = np.round(np.column_stack([An, bn]), 11)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    return An[first], bn[first], idx[first]


class _DoubleDescription:
    """Incremental double description on the cone ``{x : M x >= 0}``."""

    def __init__(self, M: np.ndarray, tol: float, max_rays: int, order: str):
        self.M = M
        self.tol = tol
        self.max_rays = max_rays
        self.order = order
        self.n, self.D = M.shape

    def run(self) -> np.ndarray:
        M, D = self.M, self.D
        _, _, piv = qr(M.T, pivoting=True, mode="economic")
        basis_rows = np.sort(piv[:D])
        R = np.linalg.inv(M[basis_rows]).T  # rows are rays: M_B r_i = e_i
        R /= np.abs(R).max(axis=1, keepdims=True)
        processed = list(basis_rows)
        Z = np.abs(R @ M[processed].T) <= self.tol
        remaining = [i for i in range(self.n) if i not in set(processed)]

        while remaining:
            if self.order in ("maxcutoff", "mincutoff"):
                viol = (R @ M[remaining].T < -self.tol).sum(axis=0)
                pick = np.argmax(viol) if self.order == "maxcutoff" else np.argmin(
                    np.where(viol > 0, viol, np.iinfo(np.int64).max))
                h = remaining.pop(int(pick))
            elif self.order == "lexmin":
                h = remaining.pop(0)
            else:
                h = remaining.pop(0)
            vals = R @ M[h]
            pos = vals > self.tol
            neg = vals < -self.tol
            zero = ~(pos | neg)
            if not neg.any():
                Z = np.column_stack([Z, zero])
                processed.append(h)
                continue
            if not (pos.any() or zero.any()):
                return np.zeros((0, D))
            new_R, new_Z = self._new_rays(R, Z, vals, np.flatnonzero(pos), np.flatnonzero(neg))
            keep = pos | zero
            R = np.vstack([R[keep], new_R])
            Z = np.vstack([Z[keep], new_Z])
            Z = np.column_stack([Z, np.concatenate([zero[keep], np.ones(len(new_R), bool)])])
            processed.append(h)
            log.debug("constraint %d: %d+ %d- %dz -> %d rays", h, pos.sum(), neg.sum(),
                      zero.sum(), R.shape[0])
            if R.shape[0] > self.max_rays:
                raise BudgetExceeded(f"more than {self.max_rays} intermediate rays")
        return R

    def _new_rays(self, R, Z, vals, pos_idx, neg_idx):
        """Rays on the new hyperplane from adjacent (positive, negative) pairs.

        Combinatorial adjacency: ``p`` and ``q`` are adjacent iff no third
        ray's zero set contains ``Z(p) & Z(q)``. For a fixed ``p`` this is a
        maximality question among the sets ``Z(r) & Z(p)``, which is answered
        on their distinct values only.
        """
        D = self.D
        if len(pos_idx) <= len(neg_idx):
            pivots, others = pos_idx, neg_idx
        else:
            pivots, others = neg_idx, pos_idx
        other_mask = np.zeros(len(R), dtype=bool)
        other_mask[others] = True
        pairs_a, pairs_b = [], []
        Zf = Z.astype(np.float32)
        chunk = max(1, 2_000_000 // max(1, len(R)))
        for start in range(0, len(pivots), chunk):
            block = pivots[start:start + chunk]
            overlap = Zf[block] @ Zf.T  # |Z(p) & Z(r)|
            for bi, p in enumerate(block):
                big = overlap[bi] >= D - 2.5
                big[p] = False
                if not (big & other_mask).any():
                    continue
                rows = np.flatnonzero(big)
                cols = np.flatnonzero(Z[p])
                W = Z[np.ix_(rows, cols)]
                sizes = overlap[bi, rows]
                keys = _row_keys(W)
                _, first, inverse, counts = np.unique(
                    keys, return_index=True, return_inverse=True, return_counts=True)
                inverse = inverse.ravel()
                # distinct sets that contain a candidate from the other side
                cand_u = np.unique(inverse[other_mask[rows]])
                cand_u = cand_u[counts[cand_u] == 1]
                if cand_u.size == 0:
                    continue
                U = W[first].astype(np.float32)
                usize = sizes[first]
                superset = (U[cand_u] @ U.T) >= usize[cand_u, None] - 0.5
                superset[np.arange(cand_u.size), cand_u] = False
                alive = np.zeros(len(first), dtype=bool)
                alive[cand_u[~superset.any(axis=1)]] = True
                ok = other_mask[rows] & alive[inverse]
                if ok.any():
                    q = rows[ok]
                    pairs_a.append(np.full(q.size, p))
                    pairs_b.append(q)
        if not pairs_a:
            return np.zeros((0, D)), np.zeros((0, Z.shape[1]), dtype=bool)
        a_idx = np.concatenate(pairs_a)
        b_idx = np.concatenate(pairs_b)
        p = np.where(vals[a_idx] > 0, a_idx, b_idx)
        q = np.where(vals[a_idx] > 0, b_idx, a_idx)
        rays = vals[p, None] * R[q] - vals[q, None] * R[p]
        rays /= np.abs(rays).max(axis=1, keepdims=True)
        return rays, Z[p] & Z[q]


def _row_keys(W: np.ndarray) -> np.ndarray:
    """Hashable key per boolean row (uint64 when it fits, else raw bytes)."""
    packed = np.packbits(W, axis=1)
    nb = packed.shape[1]
    if nb <= 8:
        padded = np.zeros((len(W), 8), dtype=np.uint8)
        padded[:, :nb] = packed
        return padded.view(">u8").ravel()
    return np.ascontiguousarray(packed).view(np.dtype((np.void, nb))).ravel()


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    """Drop points within ``tol`` (max-norm) of an earlier point."""
    n = len(points)
    if n <= 1:
        return points
    # points close in max-norm are close along any fixed direction
    u = np.random.default_rng(12345).standard_normal(points.shape[1])
    proj = points @ u
    order = np.argsort(proj, kind="stable")
    sp = proj[order]
    reach = tol * np.abs(u).sum()
    drop = np.zeros(n, dtype=bool)
    k = 1
    while True:
        close = sp[k:] - sp[:-k] <= reach
        if not close.any():
            break
        i, j = order[:-k][close], order[k:][close]
        near = np.abs(points[i] - points[j]).max(axis=1) <= tol
        for a, b in zip(i[near], j[near]):
            lo, hi = min(a, b), max(a, b)
            if not drop[lo]:
                drop[hi] = True
        k += 1
        if k >= n:
            break
    return points[~drop]


def enumerate_vertices(P: Polytope, max_vertices: int = DEFAULT_MAX_VERTICES,
                       tol: float = TAU_FEAS, tol_dedupe: float = TAU_DEDUPE,
                       order: str = "maxcutoff") -> VertexSet:
    """All vertices of a bounded, non-empty polytope.

    ``order`` selects the constraint insertion rule: ``"maxcutoff"`` inserts
    the constraint violated by the most current rays first, ``"index"`` uses
    input order.
    """
    d = P.dim
    v0, N = _affine_hull(P.E, P.f, d)
    k = N.shape[1]
    A1 = P.A @ N
    b1 = P.b - P.A @ v0
    A1, b1, _ = _normalise_rows(A1, b1)

    if k == 0:
        if np.any(b1 < -tol):
            raise EmptyPolytope("the single affine point violates an inequality")
        return VertexSet(v0[None, :].copy(), tol_dedupe)

    if A1.shape[0] == 0 or np.linalg.matrix_rank(A1, tol=1e-10) < k:
        # non-trivial lineality: either empty or unbounded
        L = _null_space(A1, k)
        Wp = _null_space(L.T, k)
        try:
            enumerate_vertices(Polytope(A1 @ Wp, b1), max_vertices, tol, tol_dedupe, order)
        except UnboundedPolytope:
            pass
        raise UnboundedPolytope("polytope contains a line")

    M = np.zeros((A1.shape[0] + 1, k + 1))
    M[:-1, 0] = b1
    M[:-1, 1:] = -A1
    M[-1, 0] = 1.0
    M /= np.linalg.norm(M, axis=1, keepdims=True)

    R = _DoubleDescription(M, tol, max_vertices, order).run()
    if R.shape[0] == 0:
        raise EmptyPolytope("no feasible point")
    t = R[:, 0]
    if np.any(t <= tol):
        if np.all(t <= tol):
            raise EmptyPolytope("no feasible point")
        raise UnboundedPolytope("polytope has a direction of recession")
    W = R[:, 1:] / t[:, None]
    V = v0[None, :] + W @ N.T
    V[np.abs(V) < 1e-14] = 0.0
    V = _dedupe(V, tol_dedupe)
    if len(V) > max_vertices:
        raise BudgetExceeded(f"{len(V)} vertices exceed the cap {max_vertices}")
    return VertexSet(V, tol_dedupe)


def _null_space(A: np.ndarray, k: int) -> np.ndarray:
    if A.shape[0] == 0:
        return np.eye(k)
    _, sv, Vt = np.linalg.svd(A)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv.max(initial=0.0))))
    return Vt[rank:].T
