"""Dense tableau simplex with Bland's anti-cycling rule.

Solves ``max c @ x`` subject to ``A @ x <= b``, ``x >= 0`` with ``b >= 0``,
so the slack basis is feasible and no phase one is needed.  Every LP built
by :mod:`qrboot.prob_metrics` has this shape after shifting the function
values by the sup-norm bound.

The LPs in this package are heavily degenerate (all right-hand sides but
one are zero), which is exactly where Dantzig's rule can cycle; Bland's
smallest-index rule guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

__all__ = ["LPResult", "simplex_max"]


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    objective: float
    iterations: int


def simplex_max(c, A, b, *, max_iter: int = 50_000, tol: float = 1e-9) -> LPResult:
    """Maximize ``c @ x`` over ``{x >= 0 : A @ x <= b}``.

    Parameters
    ----------
    c : (n,) array
    A : (m, n) array
    b : (m,) array, nonnegative
    max_iter : int
        Pivot budget; exceeding it raises :class:`NumericError`.
    tol : float
        Zero threshold for reduced costs and pivot entries.  Pivoting on
        entries much smaller than this lets rounding error swamp the tableau.

    Returns
    -------
    LPResult
        Optimal primal point, objective value and pivot count.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise DomainError("inconsistent LP dimensions")
    if np.any(b < 0):
        raise DomainError("simplex_max needs b >= 0 (origin feasible)")

    # rows 0..m-1: constraints with slacks; last row: reduced costs (z - c)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = np.arange(n, n + m)

    for it in range(max_iter):
        entering = np.flatnonzero(T[m, :-1] < -tol)
        if entering.size == 0:
            x = np.zeros(n + m)
            x[basis] = T[:m, -1]
            x = x[:n].copy()
            residual = max(float(np.max(A @ x - b, initial=0.0)), float(np.max(-x, initial=0.0)))
            if residual > 1e-7:
                raise NumericError(f"simplex drifted off the feasible set (residual {residual:.2e})", iterations=it)
            return LPResult(x, float(c @ x), it)
        j = entering[0]
        col = T[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            raise NumericError("LP is unbounded", iterations=it)
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        i = ties[np.argmin(basis[ties])]
        T[i] /= T[i, j]
        others = T[:, j].copy()
        others[i] = 0.0
        T -= np.outer(others, T[i])
        basis[i] = j
    raise NumericError(f"simplex did not converge within {max_iter} pivots", iterations=max_iter)
