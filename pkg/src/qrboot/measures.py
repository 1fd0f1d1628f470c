"""Finite discrete probability measures and the metric spaces they live on.

A :class:`DiscreteMeasure` is kept in canonical form: support sorted
lexicographically, atoms closer than ``ATOM_TOL`` merged, zero-mass atoms
dropped and weights renormalized.  Two measures built from the same data in
any order are therefore identical objects up to floating point, which is what
makes permutation invariance of statistical operators checkable exactly.

Supports are either numeric (floats for one-dimensional ground spaces, tuples
for boxes and product spaces) or themselves :class:`DiscreteMeasure`
instances, which is how laws of laws are represented.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .errors import CapacityError, DomainError

__all__ = [
    "ATOM_TOL",
    "Box",
    "DiscreteMeasure",
    "MetricSpace",
    "ProductSpace",
    "SamplePath",
    "dn_distance",
    "dn_from_distances",
    "empirical_measure",
    "interval",
    "mixture",
    "product_measure",
    "product_space",
    "product_space_dn",
    "real_line",
    "unit_box",
]

ATOM_TOL = 1e-12
# accepted drift of total mass before renormalizing; beyond it the input is wrong
MASS_TOL = 1e-9


class MetricSpace:
    """A ground set with a distance function.

    Parameters
    ----------
    dist : callable
        ``dist(x, y) -> float``, assumed to be a metric.
    diameter_bound : float, optional
        Known upper bound on all distances.
    name : str
        Label used in reports.
    """

    #: distances are expensive (each one is an LP); solvers should avoid
    #: asking for more pairs than they need
    costly = False
    #: points are reals on a line, so Lipschitz constraints between sorted
    #: neighbours imply all the others
    is_line = False

    def __init__(self, dist: Callable[[Any, Any], float], diameter_bound: float | None = None, name: str = "metric"):
        self._dist = dist
        self.diameter_bound = diameter_bound
        self.name = name

    def dist(self, x, y) -> float:
        return float(self._dist(x, y))

    def pairwise(self, xs: Sequence, ys: Sequence) -> np.ndarray:
        out = np.empty((len(xs), len(ys)))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                out[i, j] = self.dist(x, y)
        return out

    def contains(self, x) -> bool:
        return True

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class Box(MetricSpace):
    """Axis-aligned box ``[low, high]`` in ``R^d`` with the Euclidean metric.

    One-dimensional points are plain floats, higher-dimensional points are
    tuples.  Infinite bounds are allowed (``real_line``) and simply leave the
    diameter unset.
    """

    def __init__(self, low, high, name: str | None = None):
        low = np.atleast_1d(np.asarray(low, dtype=float))
        high = np.atleast_1d(np.asarray(high, dtype=float))
        if low.shape != high.shape or low.ndim != 1:
            raise DomainError("box bounds must be 1-d arrays of equal length")
        if np.any(high < low):
            raise DomainError("box needs low <= high componentwise")
        self.low = low
        self.high = high
        self.dim = int(low.size)
        span = float(np.sqrt(np.sum((high - low) ** 2)))
        diameter = span if math.isfinite(span) else None
        if name is None:
            name = "[" + ", ".join(f"{a:g}..{b:g}" for a, b in zip(low, high)) + "]"
        super().__init__(self._euclid, diameter, name)
        self.is_line = self.dim == 1

    def _euclid(self, x, y):
        return float(np.sqrt(np.sum((np.asarray(x, float) - np.asarray(y, float)) ** 2)))

    def as_array(self, points) -> np.ndarray:
        arr = np.asarray(points, dtype=float)
        if self.dim == 1:
            return arr.reshape(-1)
        return arr.reshape(-1, self.dim)

    def pairwise(self, xs, ys) -> np.ndarray:
        a = self.as_array(xs)
        b = self.as_array(ys)
        if self.dim == 1:
            return np.abs(a[:, None] - b[None, :])
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def contains(self, x, atol: float = 1e-12) -> bool:
        arr = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return bool(np.all(arr >= self.low - atol) and np.all(arr <= self.high + atol))

    def clip(self, values: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return np.clip(values, self.low[0], self.high[0])
        return np.clip(values, self.low, self.high)

    def corners(self) -> np.ndarray:
        pts = np.array(list(itertools.product(*zip(self.low, self.high))), dtype=float)
        return pts[:, 0] if self.dim == 1 else pts

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Box":
        return cls(data["low"], data["high"])

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.low, other.low) and np.array_equal(self.high, other.high)

    def __hash__(self):
        return hash((tuple(self.low), tuple(self.high)))


def interval(low: float = 0.0, high: float = 1.0) -> Box:
    return Box([low], [high])


def unit_box(d: int = 1) -> Box:
    if not 1 <= d <= 3:
        raise DomainError("boxes are supported for 1 <= d <= 3")
    return Box(np.zeros(d), np.ones(d))


def real_line() -> Box:
    """The estimate space H = R with the absolute-value distance."""
    return Box([-np.inf], [np.inf], name="R")


def dn_from_distances(distances) -> float:
    """Exact value of ``inf{eps > 0 : #{i : d_i >= eps} / n <= eps}``.

    If at most ``j`` coordinates may violate, eps must exceed the
    ``(j+1)``-th largest distance and be at least ``j/n``; minimizing over
    ``j`` gives the infimum.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise DomainError("need a nonempty 1-d array of distances")
    n = d.size
    desc = np.append(np.sort(d)[::-1], 0.0)
    return float(np.min(np.maximum(np.arange(n + 1) / n, desc)))


def dn_distance(a: Sequence, b: Sequence, ground: MetricSpace) -> float:
    """The contamination metric d_n between two n-tuples of ground points.

    Small when all but an eps-fraction of coordinates are within eps, so it
    is small under rounding errors and under a few gross errors alike.
    """
    if len(a) != len(b):
        raise DomainError(f"tuples differ in length ({len(a)} vs {len(b)})")
    if len(a) == 0:
        raise DomainError("tuples must be nonempty")
    if isinstance(ground, Box):
        x = np.asarray(a, float).reshape(len(a), -1)
        y = np.asarray(b, float).reshape(len(b), -1)
        d = np.sqrt(np.sum((x - y) ** 2, axis=1))
    else:
        d = [ground.dist(u, v) for u, v in zip(a, b)]
    return dn_from_distances(d)


class ProductSpace(MetricSpace):
    """``ground^n`` metrized by ``d_n`` (``"dn"``), the max (``"sup"``) or sum metric.

    ``sup`` and ``sum`` are strongly equivalent product metrics; ``dn`` is only
    topologically equivalent to them and is the one that treats a few gross
    errors as a small perturbation.
    """

    _METRICS = ("dn", "sup", "sum")

    def __init__(self, ground: MetricSpace, n: int, metric: str = "dn"):
        if n < 1:
            raise DomainError("product space needs n >= 1")
        if metric not in self._METRICS:
            raise DomainError(f"unknown product metric {metric!r}; use one of {self._METRICS}")
        self.ground = ground
        self.n = int(n)
        self.metric = metric
        gd = ground.diameter_bound
        if metric == "dn":
            diameter = 1.0 if gd is None else min(1.0, gd)
        elif gd is None:
            diameter = None
        else:
            diameter = gd if metric == "sup" else n * gd
        super().__init__(self._tuple_dist, diameter, f"{ground.name}^{n}[{metric}]")

    def _coord_distances(self, a, b) -> np.ndarray:
        if len(a) != self.n or len(b) != self.n:
            raise DomainError(f"expected {self.n}-tuples")
        if isinstance(self.ground, Box):
            x = np.asarray(a, float).reshape(self.n, -1)
            y = np.asarray(b, float).reshape(self.n, -1)
            return np.sqrt(np.sum((x - y) ** 2, axis=1))
        return np.array([self.ground.dist(u, v) for u, v in zip(a, b)])

    def _reduce(self, d: np.ndarray) -> float:
        if self.metric == "dn":
            return dn_from_distances(d)
        return float(d.max() if self.metric == "sup" else d.sum())

    def _tuple_dist(self, a, b):
        return self._reduce(self._coord_distances(a, b))

    def pairwise(self, xs, ys) -> np.ndarray:
        if not isinstance(self.ground, Box):
            return super().pairwise(xs, ys)
        a = np.asarray(xs, float).reshape(len(xs), self.n, -1)
        b = np.asarray(ys, float).reshape(len(ys), self.n, -1)
        diff = a[:, None] - b[None, :]
        d = np.sqrt(np.sum(diff * diff, axis=-1))  # (kx, ky, n)
        if self.metric == "sup":
            return d.max(axis=-1)
        if self.metric == "sum":
            return d.sum(axis=-1)
        desc = np.concatenate([-np.sort(-d, axis=-1), np.zeros(d.shape[:2] + (1,))], axis=-1)
        return np.min(np.maximum(np.arange(self.n + 1) / self.n, desc), axis=-1)

    def contains(self, x) -> bool:
        return len(x) == self.n and all(self.ground.contains(c) for c in x)


def product_space(ground: MetricSpace, n: int, metric: str = "sup") -> ProductSpace:
    return ProductSpace(ground, n, metric)


def product_space_dn(ground: MetricSpace, n: int) -> ProductSpace:
    """``ground^n`` under the d_n metric."""
    return ProductSpace(ground, n, "dn")


def _as_tuple(obj):
    if isinstance(obj, list):
        return tuple(_as_tuple(o) for o in obj)
    return obj


def _atom_key(x):
    if isinstance(x, DiscreteMeasure):
        return x.key
    if isinstance(x, tuple):
        return tuple(_atom_key(c) for c in x)
    return float(x)


class DiscreteMeasure:
    """Finitely supported probability measure in canonical form.

    Parameters
    ----------
    support : sequence
        Atoms: floats, tuples of floats, or ``DiscreteMeasure`` objects.
    weights : sequence of float
        Nonnegative masses summing to one (drift up to ``MASS_TOL`` is
        renormalized away).
    atol : float
        Atoms whose coordinates all differ by less than ``atol`` are merged.
    """

    __slots__ = ("support", "weights", "_points", "_key")

    def __init__(self, support, weights, *, atol: float = ATOM_TOL):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(support) != w.size:
            raise DomainError(f"support has {len(support)} atoms but {w.size} weights were given")
        if w.size == 0:
            raise DomainError("a probability measure needs at least one atom")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if np.any(w < -ATOM_TOL):
            raise DomainError(f"negative weight {w.min():g}")
        w = np.clip(w, 0.0, None)
        total = float(w.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"weights sum to {total:.12g}, not 1")
        if not isinstance(support, np.ndarray) and isinstance(support[0], DiscreteMeasure):
            self._init_measures(list(support), w)
        else:
            self._init_numeric(support, w, atol)
        self._key = None

    def _init_numeric(self, support, w, atol):
        try:
            arr = np.asarray(support, dtype=float)
        except (TypeError, ValueError) as exc:
            raise DomainError(f"support is not numeric: {exc}") from None
        if arr.ndim == 0 or not np.all(np.isfinite(arr)):
            raise DomainError("support points must be finite numbers or tuples of numbers")
        flat = arr.reshape(arr.shape[0], -1)
        if flat.shape[1] == 1:
            order = np.argsort(flat[:, 0], kind="stable")
        else:
            order = np.lexsort(flat.T[::-1])
        flat = flat[order]
        w = w[order]
        if len(flat) > 1:
            step = np.max(np.abs(np.diff(flat, axis=0)), axis=1)
            starts = np.concatenate([[0], np.nonzero(step >= atol)[0] + 1])
        else:
            starts = np.array([0])
        merged = np.add.reduceat(w, starts)
        keep = merged > 0
        pts = arr[order][starts][keep]
        merged = merged[keep]
        self.weights = merged / merged.sum()
        self.weights.setflags(write=False)
        pts.setflags(write=False)
        self._points = pts
        self.support = tuple(pts.tolist()) if pts.ndim == 1 else tuple(_as_tuple(pts.tolist()))

    def _init_measures(self, support, w):
        if not all(isinstance(m, DiscreteMeasure) for m in support):
            raise DomainError("cannot mix measure atoms with numeric atoms")
        keys = [m.key for m in support]
        order = sorted(range(len(support)), key=keys.__getitem__)
        atoms, masses = [], []
        last = None
        for i in order:
            if last is not None and keys[i] == last:
                masses[-1] += w[i]
            else:
                atoms.append(support[i])
                masses.append(w[i])
                last = keys[i]
        masses = np.asarray(masses)
        keep = masses > 0
        self.support = tuple(a for a, k in zip(atoms, keep) if k)
        self.weights = masses[keep] / masses[keep].sum()
        self.weights.setflags(write=False)
        self._points = None

    @classmethod
    def dirac(cls, x) -> "DiscreteMeasure":
        return cls([x], [1.0])

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        n = len(points)
        return cls(points, np.full(n, 1.0 / n))

    @property
    def is_numeric(self) -> bool:
        return self._points is not None

    @property
    def points(self) -> np.ndarray:
        """Support as an array (``(k,)`` or ``(k, d, ...)``); numeric supports only."""
        if self._points is None:
            raise DomainError("support consists of measures, not numeric points")
        return self._points

    @property
    def key(self):
        if self._key is None:
            self._key = (tuple(_atom_key(x) for x in self.support), tuple(np.round(self.weights, 12).tolist()))
        return self._key

    def __len__(self):
        return len(self.support)

    def __iter__(self):
        return iter(zip(self.support, self.weights.tolist()))

    def mass_of(self, x, atol: float = ATOM_TOL) -> float:
        if self.is_numeric:
            diff = np.abs(self._points.reshape(len(self), -1) - np.asarray(x, float).reshape(1, -1))
            hit = np.all(diff < atol, axis=1)
            return float(self.weights[hit].sum())
        k = _atom_key(x)
        return float(sum(w for a, w in self if a.key == k))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.weights.tolist()))

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure) or len(self) != len(other):
            return False
        if not np.allclose(self.weights, other.weights, rtol=0.0, atol=1e-12):
            return False
        if self.is_numeric and other.is_numeric:
            a, b = self._points, other._points
            return a.shape == b.shape and bool(np.all(np.abs(a - b) < ATOM_TOL))
        if self.is_numeric or other.is_numeric:
            return False
        return all(x == y for x, y in zip(self.support, other.support))

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        if len(self) <= 6:
            body = ", ".join(f"{_short(a)}: {w:.6g}" for a, w in self)
        else:
            body = f"{len(self)} atoms"
        return f"DiscreteMeasure({{{body}}})"


def _short(atom):
    if isinstance(atom, DiscreteMeasure):
        return f"<measure {len(atom)} atoms>"
    if isinstance(atom, tuple):
        return "(" + ", ".join(_short(a) for a in atom) + ")"
    return f"{atom:.6g}"


@dataclass(frozen=True, eq=False)
class SamplePath:
    """An observed tuple ``(z_1, ..., z_n)`` plus its provenance."""

    values: np.ndarray
    origin: str = "data"
    seed: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 0 or vals.shape[0] < 1:
            raise DomainError("a sample path needs at least one value")
        if vals.ndim > 2:
            raise DomainError("path values must be scalars or d-vectors")
        if not np.all(np.isfinite(vals)):
            raise DomainError("path values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return int(self.values.shape[0])

    @property
    def n(self) -> int:
        return len(self)

    def with_values(self, values, origin: str | None = None, seed: int | None = None) -> "SamplePath":
        return SamplePath(values, self.origin if origin is None else origin, self.seed if seed is None else seed)


def empirical_measure(path) -> DiscreteMeasure:
    """Empirical measure ``(1/n) sum delta_{z_i}`` of a path or array of values."""
    values = path.values if isinstance(path, SamplePath) else np.asarray(path, dtype=float)
    if values.ndim == 0 or values.shape[0] == 0:
        raise DomainError("empirical measure of an empty path")
    n = values.shape[0]
    if values.ndim == 1:
        pts, counts = np.unique(values, return_counts=True)
    else:
        pts, counts = np.unique(values, axis=0, return_counts=True)
    return DiscreteMeasure(pts, counts / n)


def mixture(measures: Sequence[DiscreteMeasure], coeffs: Sequence[float]) -> DiscreteMeasure:
    """Convex combination ``sum_i coeffs_i * measures_i``."""
    if len(measures) == 0 or len(measures) != len(coeffs):
        raise DomainError("mixture needs equally many (>0) measures and coefficients")
    c = np.asarray(coeffs, dtype=float)
    if np.any(c < 0):
        raise DomainError("mixture coefficients must be nonnegative")
    if abs(c.sum() - 1.0) > MASS_TOL:
        raise DomainError(f"mixture coefficients sum to {c.sum():.12g}, not 1")
    support: list = []
    weights: list = []
    for m, ci in zip(measures, c):
        support.extend(m.support)
        weights.extend((ci * m.weights).tolist())
    if measures[0].is_numeric:
        return DiscreteMeasure(np.asarray(support, dtype=float), np.asarray(weights) / c.sum())
    return DiscreteMeasure(support, np.asarray(weights) / c.sum())


def product_measure(marginals: Sequence[DiscreteMeasure], s_max: int = 6, n_max: int = 4) -> DiscreteMeasure:
    """Independent product ``P^1 x ... x P^n`` on n-tuples.

    Raises :class:`CapacityError` when the ``s^n`` support blowup exceeds the
    guards (``n <= n_max``, every marginal with at most ``s_max`` atoms).
    """
    if len(marginals) == 0:
        raise DomainError("product of zero measures")
    if len(marginals) > n_max:
        raise CapacityError(f"product of {len(marginals)} marginals exceeds n_max={n_max}")
    for m in marginals:
        if len(m) > s_max:
            raise CapacityError(f"marginal with {len(m)} atoms exceeds s_max={s_max}")
        if not m.is_numeric:
            raise DomainError("product measures need numeric marginals")
    tuples = list(itertools.product(*(m.support for m in marginals)))
    weights = [math.prod(ws) for ws in itertools.product(*(m.weights.tolist() for m in marginals))]
    return DiscreteMeasure(np.asarray(tuples, dtype=float), weights)
