"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Solves ``min c.x  s.t.  A x = b, x >= 0``. Problem sizes here are small
(a handful of equality rows, up to a few thousand columns), so a dense
tableau is adequate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPInfeasible, LPUnbounded


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    basis: list[int]
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _run(T: np.ndarray, basis: list[int], allowed: np.ndarray, tol: float,
         max_iter: int) -> int:
    """Iterate on tableau ``T`` (last row = reduced costs, last column = rhs)."""
    m = T.shape[0] - 1
    it = 0
    while True:
        red = T[-1, :-1]
        cand = np.flatnonzero((red < -tol) & allowed)
        if cand.size == 0:
            return it
        col = int(cand[0])  # Bland: lowest index entering
        colv = T[:m, col]
        pos = colv > tol
        if not pos.any():
            raise LPUnbounded("objective unbounded below")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colv[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        # Bland: among tied rows, the one whose basic variable has lowest index
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def simplex(c, A_eq, b_eq, tol: float = 1e-10, max_iter: int = 50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float).ravel()
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")

    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: artificials n..n+m-1
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    it = _run(T, basis, allowed, tol, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[-1, -1] > 1e-8 * scale:
        raise LPInfeasible(f"phase 1 residual {-T[-1, -1]:.3e}")

    # drive artificials out of the basis; drop redundant rows
    keep = list(range(m))
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                keep.remove(r)
    T = np.vstack([T[keep], T[-1:]])
    basis = [basis[r] for r in keep]
    T = np.delete(T, np.s_[n:n + m], axis=1)
    mk = len(keep)

    # phase 2 reduced costs
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, j in enumerate(basis):
        T[-1] -= c[j] * T[r]
    it += _run(T, basis, np.ones(n, dtype=bool), tol, max_iter)

    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    x[x < 0] = 0.0
    return LPResult(x=x, fun=float(c @ x), basis=basis[:mk], iterations=it)
