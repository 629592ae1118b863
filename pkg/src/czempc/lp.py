"""Dense two-phase simplex solver.

Deliberately dependency-free (numpy only) and deterministic: Bland's rule
picks the lowest-index entering column and breaks leaving ties by the lowest
basic index, which also prevents cycling. Problem sizes here are small
(tens of rows), so a dense tableau is adequate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MAX_ITER = 50_000


class SimplexStalled(RuntimeError):
    """Raised when the pivot iteration cap is exceeded."""


@dataclass
class LpResult:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    x: np.ndarray | None = None
    fun: float | None = None


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, j] = 0.0
    T[r, j] = 1.0


def _run_simplex(T: np.ndarray, basis: np.ndarray, tol: float) -> str:
    """Iterate on tableau ``T`` (objective in last row, rhs in last column)."""
    for _ in range(_MAX_ITER):
        reduced = T[-1, :-1]
        entering = np.nonzero(reduced < -tol)[0]
        if entering.size == 0:
            return "optimal"
        j = int(entering[0])  # Bland: lowest index
        col = T[:-1, j]
        rows = np.nonzero(col > tol)[0]
        if rows.size == 0:
            return "unbounded"
        ratios = T[rows, -1] / col[rows]
        best = np.min(ratios)
        ties = rows[ratios <= best + tol * (1.0 + abs(best))]
        r = int(ties[np.argmin(basis[ties])])  # Bland: lowest basic index leaves
        _pivot(T, r, j)
        basis[r] = j
    raise SimplexStalled("simplex iteration cap exceeded")


def _standard_form_solve(A: np.ndarray, b: np.ndarray, c: np.ndarray, tol: float) -> LpResult:
    """min c@x s.t. A@x = b, x >= 0, via two phases with artificial variables."""
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1 tableau: [A | I_m | b] with artificial basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, : n + m + 1] = -T[:m].sum(axis=0)
    T[-1, n : n + m] = 0.0
    basis = np.arange(n, n + m)

    status = _run_simplex(T, basis, tol)
    if status != "optimal" or T[-1, -1] < -tol * (1.0 + float(np.abs(b).max(initial=0.0))):
        return LpResult("infeasible")

    # drive leftover artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] < n:
            continue
        row = T[r, :n]
        cand = np.nonzero(np.abs(row) > tol)[0]
        if cand.size:
            _pivot(T, r, int(cand[0]))
            basis[r] = int(cand[0])
        else:
            keep[r] = False
    rows_idx = np.concatenate([np.nonzero(keep)[0], [m]])
    T = T[rows_idx][:, np.concatenate([np.arange(n), [n + m]])]
    basis = basis[keep]
    m = basis.size

    # phase 2 objective: reduced costs of c over the current basis
    T[-1, :-1] = c
    T[-1, -1] = 0.0
    for r in range(m):
        T[-1] -= c[basis[r]] * T[r]
    status = _run_simplex(T, basis, tol)
    if status != "optimal":
        return LpResult(status)
    x = np.zeros(n)
    x[basis] = T[:m, -1]
    return LpResult("optimal", x=x, fun=float(c @ x))


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    lb=None,
    ub=None,
    tol: float = 1e-9,
) -> LpResult:
    """Minimize ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lb <= x <= ub``.

    Bounds may be scalars, arrays, or None (unbounded). Free variables are
    split, bounded ones shifted, before the two-phase simplex runs on the
    equality standard form.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    lb = np.full(n, -np.inf) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
    ub = np.full(n, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
    if np.any(lb > ub):
        return LpResult("infeasible")

    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()

    # substitution x = x0 + B y with y >= 0
    x0 = np.zeros(n)
    cols = []  # (original var, sign)
    extra_rows = []  # upper-bound rows in y space: (y_col, rhs)
    for i in range(n):
        if np.isfinite(lb[i]):
            x0[i] = lb[i]
            cols.append((i, 1.0))
            if np.isfinite(ub[i]):
                extra_rows.append((len(cols) - 1, ub[i] - lb[i]))
        elif np.isfinite(ub[i]):
            x0[i] = ub[i]
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    ny = len(cols)
    B = np.zeros((n, ny))
    for jcol, (i, s) in enumerate(cols):
        B[i, jcol] = s

    Au_y = A_ub @ B
    bu_y = b_ub - A_ub @ x0
    if extra_rows:
        rows = np.zeros((len(extra_rows), ny))
        rhs = np.zeros(len(extra_rows))
        for r, (jcol, val) in enumerate(extra_rows):
            rows[r, jcol] = 1.0
            rhs[r] = val
        Au_y = np.vstack([Au_y, rows])
        bu_y = np.concatenate([bu_y, rhs])
    Ae_y = A_eq @ B
    be_y = b_eq - A_eq @ x0

    m_ub = Au_y.shape[0]
    A_std = np.block(
        [
            [Au_y, np.eye(m_ub)],
            [Ae_y, np.zeros((Ae_y.shape[0], m_ub))],
        ]
    )
    b_std = np.concatenate([bu_y, be_y])
    c_std = np.concatenate([c @ B, np.zeros(m_ub)])

    res = _standard_form_solve(A_std, b_std, c_std, tol)
    if res.status != "optimal":
        return res
    x = x0 + B @ res.x[:ny]
    return LpResult("optimal", x=x, fun=float(c @ x))
