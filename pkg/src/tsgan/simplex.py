"""Dense two-phase simplex for small linear programs.

Solves  min c @ x  subject to  A x <= b, x >= 0  on a dense tableau with
Bland's anti-cycling rule.  Built for the tiny call-surface repair programs
(tens of variables), where a dependency-free exact-pivoting solver beats
generality.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1.0e-9


class SimplexError(RuntimeError):
    pass


class Infeasible(SimplexError):
    pass


class Unbounded(SimplexError):
    pass


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]
    basis[row] = col


def _iterate(tableau: np.ndarray, basis: np.ndarray, n_cols: int) -> None:
    """Run pivots until the reduced costs (last row) are all >= -tol."""
    m = tableau.shape[0] - 1
    while True:
        reduced = tableau[-1, :n_cols]
        candidates = np.where(reduced < -PIVOT_TOL)[0]
        if candidates.size == 0:
            return
        col = int(candidates[0])  # Bland: smallest eligible index
        rows = [r for r in range(m) if tableau[r, col] > PIVOT_TOL]
        if not rows:
            raise Unbounded("objective unbounded below")
        ratios = [(tableau[r, -1] / tableau[r, col], basis[r], r) for r in rows]
        ratios.sort()  # min ratio, ties broken by smallest basis index
        _pivot(tableau, basis, ratios[0][2], col)


def solve_lp(c, a_ub, b_ub) -> tuple[np.ndarray, float]:
    """Return (x, objective) minimizing c @ x s.t. a_ub @ x <= b_ub, x >= 0."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float).copy()
    m, n = a.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")

    # slack form: A x + s = b with s >= 0; flip rows with negative rhs
    full = np.hstack([a, np.eye(m)])
    neg = b < 0
    full[neg] *= -1.0
    b[neg] *= -1.0

    art_rows = np.where(neg)[0]
    n_art = art_rows.size
    tableau = np.zeros((m + 1, n + m + n_art + 1))
    tableau[:m, : n + m] = full
    tableau[:m, -1] = b
    basis = np.empty(m, dtype=int)
    for r in range(m):
        basis[r] = n + r  # slack
    for k, r in enumerate(art_rows):
        col = n + m + k
        tableau[r, col] = 1.0
        basis[r] = col

    n_cols = n + m + n_art
    if n_art:
        # phase 1: minimize the artificial sum
        tableau[-1, n + m: n + m + n_art] = 1.0
        for r in art_rows:
            tableau[-1] -= tableau[r]
        _iterate(tableau, basis, n_cols)
        if tableau[-1, -1] < -1.0e-7:
            raise Infeasible(f"phase-1 objective {-tableau[-1, -1]:.3e} > 0")
        # drive any degenerate artificial out of the basis
        for r in range(m):
            if basis[r] >= n + m:
                pivot_cols = np.where(np.abs(tableau[r, : n + m]) > PIVOT_TOL)[0]
                if pivot_cols.size:
                    _pivot(tableau, basis, r, int(pivot_cols[0]))

    # phase 2: original objective over structural + slack columns
    tableau[-1, :] = 0.0
    tableau[-1, :n] = c
    for r in range(m):
        if basis[r] < n and c[basis[r]] != 0.0:
            tableau[-1] -= c[basis[r]] * tableau[r]
    tableau[:, n + m: n + m + n_art] = 0.0  # freeze artificials
    _iterate(tableau, basis, n + m)

    x = np.zeros(n)
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = tableau[r, -1]
    return x, float(c @ x)
