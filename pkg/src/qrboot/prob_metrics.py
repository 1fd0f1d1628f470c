"""Distances between discrete probability measures.

``bl_distance`` solves the bounded-Lipschitz dual exactly as a linear
program: maximize ``sum_i (p_i - q_i) f_i`` over function values ``f`` on the
union support with ``|f_i| <= M``, ``|f_i - f_j| <= L d_ij`` and ``L + M <= 1``.
Substituting ``u = f + M`` makes every variable nonnegative and every
right-hand side zero except ``L + M <= 1``, so the origin is a feasible
vertex.

Two formulations are used:

* union form: one value per union atom.  On a line only neighbouring atoms
  need Lipschitz rows; elsewhere pairs with an intermediate atom on a
  geodesic are pruned when the support is small enough to check.
* bipartite form: separate values on the atoms of ``p`` and of ``q`` with
  only the rows ``u_i - v_j <= L d(x_i, y_j)``.  Any feasible pair extends
  to a feasible function (take ``max(-M, max_i u_i - L d(., x_i))``), so
  the optimum is unchanged, and only cross distances are needed.  This is
  the form used on measure spaces, where each distance is itself an LP.

``prohorov_distance`` uses Strassen's characterization: ``pi <= eps`` iff
a flow of value ``>= 1 - eps`` fits through the bipartite graph of pairs
within distance ``eps``.  Between consecutive pairwise distances the flow
is constant, so binary search over the sorted distances followed by one
closed-form step gives the exact value.
"""

from __future__ import annotations

import json
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import CapabilityError, CapacityError, DomainError, NumericError
from .measures import ATOM_TOL, DiscreteMeasure, MetricSpace
from .simplex import simplex_max

__all__ = [
    "BLCertificate",
    "MeasureSpace",
    "ProhorovCertificate",
    "RelationReport",
    "bl_distance",
    "bl_from_cross",
    "bl_value",
    "dump_lp_instance",
    "load_lp_instance",
    "max_flow",
    "measure_space",
    "metric_relations",
    "prohorov_certificate",
    "prohorov_distance",
]

N_MAX = 2000
LP_TOL = 1e-7
RELATION_TOL = 1e-6
# union formulations with more rows than this go to HiGHS instead of the tableau
SIMPLEX_MAX_ROWS = 40
# betweenness pruning costs k^3; above this size all pairs are kept
PRUNE_MAX = 120


@dataclass(frozen=True)
class BLCertificate:
    """Optimal dual function for a bounded-Lipschitz distance.

    ``function_values[i]`` is the value at ``support[i]`` of a function with
    Lipschitz constant ``lipschitz_part`` and sup-norm ``sup_part``.
    """

    function_values: np.ndarray
    lipschitz_part: float
    sup_part: float
    objective: float
    support: tuple = field(default=(), repr=False)

    def max_violation(self, distances: np.ndarray, signed_mass: np.ndarray) -> float:
        """Largest violation of the certificate invariants (0 when all hold)."""
        f = self.function_values
        L, M = self.lipschitz_part, self.sup_part
        worst = max(0.0, L + M - 1.0, -L, -M)
        worst = max(worst, float(np.max(np.abs(f) - M, initial=0.0)))
        if f.size > 1:
            gap = np.abs(f[:, None] - f[None, :]) - L * distances
            worst = max(worst, float(gap.max()))
        worst = max(worst, abs(float(signed_mass @ f) - self.objective))
        return worst

    def to_dict(self) -> dict:
        return {
            "function_values": self.function_values.tolist(),
            "lipschitz_part": self.lipschitz_part,
            "sup_part": self.sup_part,
            "objective": self.objective,
        }


@dataclass(frozen=True)
class ProhorovCertificate:
    """Prohorov distance plus a set of ``p``-atoms proving the lower bound.

    When ``witness_set`` is present, ``P(A) - Q(A^eps) = deficiency > eps``
    for every ``eps < epsilon`` (closed ``eps``-neighbourhoods).
    """

    epsilon: float
    witness_set: tuple[int, ...] | None = None
    deficiency: float = 0.0


@dataclass(frozen=True)
class RelationReport:
    d_bl: float
    prohorov: float
    sqrt_d_bl: float
    prohorov_le_sqrt_bl: bool
    bl_le_two_prohorov: bool
    # 2 pi^2 / (2 + pi) <= d_BL holds for every pair under the L + M <= 1 norm
    quadratic_lower_bound: bool
    asserted_regime: bool


def _check_capacity(k: int, n_max: int):
    if k > n_max:
        raise CapacityError(f"union support has {k} atoms, more than n_max={n_max}")


def _signed_union(p: DiscreteMeasure, q: DiscreteMeasure):
    """Union support and ``p - q`` on it, merged with the atom tolerance."""
    if p.is_numeric != q.is_numeric:
        raise DomainError("measures live on different kinds of spaces")
    if p.is_numeric:
        pts = np.concatenate([p.points, q.points])
        w = np.concatenate([p.weights, -q.weights])
        flat = pts.reshape(len(pts), -1)
        order = np.argsort(flat[:, 0], kind="stable") if flat.shape[1] == 1 else np.lexsort(flat.T[::-1])
        flat = flat[order]
        if len(flat) > 1:
            step = np.max(np.abs(np.diff(flat, axis=0)), axis=1)
            starts = np.concatenate([[0], np.nonzero(step >= ATOM_TOL)[0] + 1])
        else:
            starts = np.array([0])
        g = np.add.reduceat(w[order], starts)
        union = pts[order][starts]
        return list(union) if union.ndim > 1 else union, g
    index: dict = {}
    atoms: list = []
    g: list = []
    for measure, sign in ((p, 1.0), (q, -1.0)):
        for atom, wt in measure:
            k = atom.key
            if k not in index:
                index[k] = len(atoms)
                atoms.append(atom)
                g.append(0.0)
            g[index[k]] += sign * wt
    order = sorted(range(len(atoms)), key=lambda i: atoms[i].key)
    return [atoms[i] for i in order], np.asarray(g)[order]


def _lipschitz_edges(D: np.ndarray, is_line: bool) -> np.ndarray:
    k = D.shape[0]
    if k < 2:
        return np.empty((0, 2), dtype=int)
    if is_line:
        idx = np.arange(k - 1)
        return np.column_stack([idx, idx + 1])
    iu, ju = np.triu_indices(k, 1)
    if k > PRUNE_MAX:
        return np.column_stack([iu, ju])
    # pair (i, j) is implied when some m lies on a geodesic between them
    through = D[:, :, None] + D[None, :, :]  # [i, m, j]
    slack = 1e-12 * np.maximum(1.0, D)
    between = through <= (D + slack)[:, None, :]
    m = np.arange(k)
    between[m, m, :] = False
    between[:, m, m] = False
    implied = between.any(axis=1)
    keep = ~implied[iu, ju]
    return np.column_stack([iu[keep], ju[keep]])


def _solve(c, rows, cols, vals, n_rows, n_vars, solver):
    b = np.zeros(n_rows)
    b[-1] = 1.0
    use_simplex = solver == "simplex" or (solver == "auto" and n_rows <= SIMPLEX_MAX_ROWS)
    if solver not in ("auto", "simplex", "highs"):
        raise DomainError(f"unknown LP solver {solver!r}")
    if use_simplex:
        A = np.zeros((n_rows, n_vars))
        np.add.at(A, (rows, cols), vals)
        res = simplex_max(c, A, b)
        return res.x, res.objective
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_vars))
    res = linprog(-c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericError(f"LP solver failed: {res.message}", iterations=int(getattr(res, "nit", 0) or 0))
    return np.asarray(res.x), float(-res.fun)


def _union_lp(g: np.ndarray, D: np.ndarray, is_line: bool, solver: str):
    k = g.size
    edges = _lipschitz_edges(D, is_line)
    E = len(edges)
    L, M = k, k + 1
    n_rows = k + 2 * E + 1
    r = np.arange(k)
    rows = [r, r]
    cols = [r, np.full(k, M)]
    vals = [np.ones(k), np.full(k, -2.0)]
    if E:
        i, j = edges[:, 0], edges[:, 1]
        d = D[i, j]
        r1 = k + 2 * np.arange(E)
        r2 = r1 + 1
        rows += [r1, r1, r1, r2, r2, r2]
        cols += [i, j, np.full(E, L), j, i, np.full(E, L)]
        vals += [np.ones(E), -np.ones(E), -d, np.ones(E), -np.ones(E), -d]
    rows += [np.array([n_rows - 1] * 2)]
    cols += [np.array([L, M])]
    vals += [np.ones(2)]
    c = np.concatenate([g, [0.0, -g.sum()]])
    x, obj = _solve(c, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n_rows, k + 2, solver)
    lip, sup = float(x[L]), float(x[M])
    f = x[:k] - sup
    return obj, f, lip, sup


def bl_from_cross(p_weights, q_weights, cross: np.ndarray, *, solver: str = "auto") -> float:
    """Bounded-Lipschitz distance from the cross-distance matrix only.

    ``cross[i, j]`` is the ground distance between atom ``i`` of ``p`` and
    atom ``j`` of ``q``.  Atoms may repeat; zero weights are allowed.
    """
    pw = np.asarray(p_weights, float)
    qw = np.asarray(q_weights, float)
    a, b = pw.size, qw.size
    if cross.shape != (a, b):
        raise DomainError("cross matrix shape does not match the weights")
    L, M = a + b, a + b + 1
    n_rows = a + b + a * b + 1
    ii, jj = np.meshgrid(np.arange(a), np.arange(b), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    rc = a + b + np.arange(a * b)
    rows = np.concatenate([np.arange(a + b), np.arange(a + b), rc, rc, rc, [n_rows - 1] * 2])
    cols = np.concatenate([np.arange(a + b), np.full(a + b, M), ii, a + jj, np.full(a * b, L), [L, M]])
    vals = np.concatenate([np.ones(a + b), np.full(a + b, -2.0), np.ones(a * b), -np.ones(a * b), -cross.ravel(), [1.0, 1.0]])
    c = np.concatenate([pw, -qw, [0.0, -(pw.sum() - qw.sum())]])
    _, obj = _solve(c, rows, cols, vals, n_rows, a + b + 2, solver)
    return float(min(max(obj, 0.0), 2.0))


def bl_distance(
    p: DiscreteMeasure,
    q: DiscreteMeasure,
    space: MetricSpace,
    *,
    solver: str = "auto",
    certificate: bool = True,
    n_max: int = N_MAX,
) -> tuple[float, BLCertificate | None]:
    """Bounded-Lipschitz distance ``sup{|int f dP - int f dQ| : |f|_1 + |f|_inf <= 1}``.

    Parameters
    ----------
    p, q : DiscreteMeasure
    space : MetricSpace
        Ground space of both measures.
    solver : {"auto", "simplex", "highs"}
        ``auto`` uses the Bland tableau for small LPs and HiGHS otherwise.
    certificate : bool
        Return the optimal function.  Without it, costly spaces are solved in
        bipartite form from cross distances only.
    n_max : int
        Capacity guard on the union support size.

    Returns
    -------
    value : float
        In ``[0, 2]``; bit-for-bit symmetric in ``(p, q)``.
    certificate : BLCertificate or None
    """
    if p == q:
        if not certificate:
            return 0.0, None
        union, g = _signed_union(p, p)
        return 0.0, BLCertificate(np.zeros(len(union)), 0.0, 0.0, 0.0, tuple(_plain(union)))
    # solve with the pair in a canonical order so the value is exactly symmetric
    flip = q.key < p.key
    if flip:
        p, q = q, p
    if not certificate and space.costly:
        _check_capacity(len(p) + len(q), n_max)
        cross = space.pairwise(p.support, q.support)
        return bl_from_cross(p.weights, q.weights, cross, solver=solver), None
    union, g = _signed_union(p, q)
    _check_capacity(len(union), n_max)
    D = space.pairwise(union, union)
    obj, f, lip, sup = _union_lp(g, D, space.is_line, solver)
    value = float(min(max(obj, 0.0), 2.0))
    if not certificate:
        return value, None
    sign = -1.0 if flip else 1.0
    cert = BLCertificate(sign * f, lip, sup, float(g @ f), tuple(_plain(union)))
    return value, cert


def bl_value(p: DiscreteMeasure, q: DiscreteMeasure, space: MetricSpace, **kwargs) -> float:
    """``bl_distance`` without the certificate."""
    return bl_distance(p, q, space, certificate=False, **kwargs)[0]


def _plain(union):
    if isinstance(union, np.ndarray):
        return union.tolist()
    return [u.tolist() if isinstance(u, np.ndarray) else u for u in union]


class MeasureSpace(MetricSpace):
    """Discrete measures over ``inner`` metrized by the bounded-Lipschitz distance.

    Nesting it (``measure_space(measure_space(H))``) gives the space in which
    laws of bootstrap laws are compared.
    """

    costly = True

    def __init__(self, inner: MetricSpace, threads: int = 1):
        self.inner = inner
        self.threads = max(1, int(threads))
        super().__init__(self._bl, 2.0, f"M({inner.name})")

    def _bl(self, x, y):
        return bl_value(x, y, self.inner)

    def pairwise(self, xs, ys) -> np.ndarray:
        xs, ys = list(xs), list(ys)
        out = np.zeros((len(xs), len(ys)))
        jobs = [(i, j) for i in range(len(xs)) for j in range(len(ys)) if xs[i] is not ys[j]]
        if self.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                vals = list(pool.map(lambda ij: self._bl(xs[ij[0]], ys[ij[1]]), jobs))
        else:
            vals = [self._bl(xs[i], ys[j]) for i, j in jobs]
        for (i, j), v in zip(jobs, vals):
            out[i, j] = v
        return out

    def contains(self, x) -> bool:
        return isinstance(x, DiscreteMeasure)


def measure_space(inner: MetricSpace, threads: int = 1) -> MeasureSpace:
    return MeasureSpace(inner, threads)


def max_flow(supply, demand, allowed: np.ndarray, tol: float = 1e-15):
    """Max flow from ``supply`` atoms to ``demand`` atoms along ``allowed`` pairs.

    Dinic's algorithm on the bipartite network source -> p_i -> q_j -> sink
    with real capacities (unbounded middle edges).

    Returns
    -------
    value : float
    source_side : ndarray of int
        Indices of supply atoms reachable from the source in the final
        residual network (the supply part of a minimum cut).
    """
    a, b = len(supply), len(demand)
    n = a + b + 2
    s, t = 0, n - 1
    head: list[list[int]] = [[] for _ in range(n)]
    to: list[int] = []
    cap: list[float] = []

    def add(u, v, c):
        head[u].append(len(to))
        to.append(v)
        cap.append(c)
        head[v].append(len(to))
        to.append(u)
        cap.append(0.0)

    for i in range(a):
        add(s, 1 + i, float(supply[i]))
    for j in range(b):
        add(1 + a + j, t, float(demand[j]))
    for i, j in zip(*np.nonzero(allowed)):
        add(1 + i, 1 + a + j, math.inf)

    def bfs():
        level = [-1] * n
        level[s] = 0
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for e in head[u]:
                if cap[e] > tol and level[to[e]] < 0:
                    level[to[e]] = level[u] + 1
                    dq.append(to[e])
        return level

    flow = 0.0
    while True:
        level = bfs()
        if level[t] < 0:
            break
        it = [0] * n

        def dfs(u, pushed):
            if u == t:
                return pushed
            while it[u] < len(head[u]):
                e = head[u][it[u]]
                v = to[e]
                if cap[e] > tol and level[v] == level[u] + 1:
                    got = dfs(v, min(pushed, cap[e]))
                    if got > tol:
                        cap[e] -= got
                        cap[e ^ 1] += got
                        return got
                it[u] += 1
            return 0.0

        while True:
            got = dfs(s, math.inf)
            if got <= tol:
                break
            flow += got
    level = bfs()
    source_side = np.array([i for i in range(a) if level[1 + i] >= 0], dtype=int)
    return flow, source_side


def prohorov_certificate(p: DiscreteMeasure, q: DiscreteMeasure, space: MetricSpace, *, n_max: int = N_MAX) -> ProhorovCertificate:
    """Exact Prohorov distance with a Strassen witness set."""
    if p.is_numeric != q.is_numeric:
        raise DomainError("measures live on different kinds of spaces")
    _check_capacity(len(p) + len(q), n_max)
    if p == q:
        return ProhorovCertificate(0.0)
    cross = space.pairwise(p.support, q.support)
    cands = np.unique(np.concatenate([[0.0, 1.0], cross.ravel()]))
    cands = cands[cands <= 1.0]

    def flow_at(eps):
        return max_flow(p.weights, q.weights, cross <= eps)

    # smallest candidate at which the coupling condition holds (eps = 1 always does)
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if flow_at(cands[mid])[0] >= 1.0 - cands[mid] - 1e-12:
            hi = mid
        else:
            lo = mid + 1
    if lo == 0:
        return ProhorovCertificate(0.0)
    below = cands[lo - 1]
    flow, side = flow_at(below)
    deficiency = 1.0 - flow
    eps = float(min(cands[lo], deficiency))
    return ProhorovCertificate(eps, tuple(int(i) for i in side), float(deficiency))


def prohorov_distance(p: DiscreteMeasure, q: DiscreteMeasure, space: MetricSpace, *, n_max: int = N_MAX) -> float:
    """Prohorov distance ``inf{eps : P(A) <= Q(A^eps) + eps for all A}``."""
    return prohorov_certificate(p, q, space, n_max=n_max).epsilon


def metric_relations(p: DiscreteMeasure, q: DiscreteMeasure, space: MetricSpace) -> RelationReport:
    """Compare d_BL and the Prohorov distance.

    ``d_BL <= 2 pi`` and ``2 pi^2 / (2 + pi) <= d_BL`` hold for every pair.
    ``pi <= sqrt(d_BL)`` is only claimed for small distances and is recorded,
    not enforced; ``asserted_regime`` marks pairs with ``d_BL <= 0.25``.
    """
    d, _ = bl_distance(p, q, space, certificate=False)
    pi = prohorov_distance(p, q, space)
    root = math.sqrt(d)
    return RelationReport(
        d_bl=d,
        prohorov=pi,
        sqrt_d_bl=root,
        prohorov_le_sqrt_bl=pi <= root + RELATION_TOL,
        bl_le_two_prohorov=d <= 2 * pi + RELATION_TOL,
        quadratic_lower_bound=2 * pi * pi / (2 + pi) <= d + RELATION_TOL,
        asserted_regime=d <= 0.25,
    )


def dump_lp_instance(path, p: DiscreteMeasure, q: DiscreteMeasure, space: MetricSpace) -> dict:
    """Solve one d_BL instance and write it, with its certificate, as JSON."""
    if not (p.is_numeric and q.is_numeric):
        raise CapabilityError("only numeric supports can be dumped")
    value, cert = bl_distance(p, q, space)
    union = list(cert.support)
    D = space.pairwise(union, union)
    doc = {
        "space": space.name,
        "support": union,
        "distance_matrix": D.tolist(),
        "p_weights": [p.mass_of(x) for x in union],
        "q_weights": [q.mass_of(x) for x in union],
        "solution": {"value": value, **cert.to_dict()},
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return doc


def load_lp_instance(path) -> dict:
    doc = json.loads(Path(path).read_text())
    doc["distance_matrix"] = np.asarray(doc["distance_matrix"], dtype=float)
    doc["solution"]["function_values"] = np.asarray(doc["solution"]["function_values"], dtype=float)
    return doc
