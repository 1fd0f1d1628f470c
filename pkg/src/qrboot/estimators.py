"""Estimators given as statistical operators on discrete measures.

Every estimator is a map ``S: M(Z) -> R``; the value on a sample is ``S``
applied to its empirical measure.  ``evaluate_samples`` is the vectorized
path used inside the bootstrap, written directly on sorted samples so it can
be cross-checked against the measure path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapabilityError, DomainError, NumericError
from .measures import Box, DiscreteMeasure, MetricSpace, empirical_measure, interval, mixture, real_line
from .prob_metrics import bl_value
from .rng import substream

__all__ = [
    "EstimatorOperator",
    "available_estimators",
    "evaluate",
    "get_estimator",
    "huber_psi",
    "modulus_probe",
    "register_estimator",
]

FLAT_TOL = 1e-12
HUBER_XTOL = 1e-10


def huber_psi(u, k: float):
    return np.clip(u, -k, k)


def _atoms(measure: DiscreteMeasure):
    if not measure.is_numeric or measure.points.ndim != 1:
        raise CapabilityError("estimators are defined for one-dimensional measures only")
    return measure.points, measure.weights


def _mean(x, w):
    return float(x @ w)


def _median(x, w):
    cum = np.cumsum(w)
    k = int(np.searchsorted(cum, 0.5 - FLAT_TOL))
    k = min(k, len(x) - 1)
    if abs(cum[k] - 0.5) <= FLAT_TOL and k + 1 < len(x):
        # the quantile function is flat at level 1/2: take the middle of the gap
        return float(0.5 * (x[k] + x[k + 1]))
    return float(x[k])


def _trim_masses(cum_hi, cum_lo, beta):
    return np.clip(np.minimum(cum_hi, 1.0 - beta) - np.maximum(cum_lo, beta), 0.0, None)


def _trimmed_mean(x, w, beta):
    cum = np.cumsum(w)
    mass = _trim_masses(cum, np.concatenate([[0.0], cum[:-1]]), beta)
    return float(x @ mass / mass.sum())


def _huber(x, w, k, xtol=HUBER_XTOL):
    def h(theta):
        return np.sum(w * huber_psi(x[None, :] - np.atleast_1d(theta)[:, None], k), axis=1)

    lo, hi = float(x.min()), float(x.max())
    if h(lo)[0] < 0 or h(hi)[0] > 0:
        raise NumericError("Huber score has no sign change on the support hull")
    if lo == hi:
        return lo
    # the zero set of the nonincreasing score is an interval [a, b]; return its midpoint
    a_lo, a_hi = lo, hi  # bracket of a = sup{h > 0}
    b_lo, b_hi = lo, hi  # bracket of b = inf{h < 0}
    it = 0
    while (a_hi - a_lo > xtol or b_hi - b_lo > xtol) and it < 200:
        am, bm = 0.5 * (a_lo + a_hi), 0.5 * (b_lo + b_hi)
        ha, hb = h(np.array([am, bm]))
        if ha > 0:
            a_lo = am
        else:
            a_hi = am
        if hb < 0:
            b_hi = bm
        else:
            b_lo = bm
        it += 1
    if it >= 200:
        raise NumericError("Huber bisection did not converge", iterations=it)
    return float(0.25 * (a_lo + a_hi + b_lo + b_hi))


def _huber_rows(values, k, xtol=HUBER_XTOL):
    lo, hi = values.min(axis=1), values.max(axis=1)
    a_lo, a_hi = lo.copy(), hi.copy()
    b_lo, b_hi = lo.copy(), hi.copy()
    m = values.shape[1]
    for _ in range(200):
        if max(np.max(a_hi - a_lo), np.max(b_hi - b_lo)) <= xtol:
            break
        am, bm = 0.5 * (a_lo + a_hi), 0.5 * (b_lo + b_hi)
        ha = huber_psi(values - am[:, None], k).sum(axis=1) / m
        hb = huber_psi(values - bm[:, None], k).sum(axis=1) / m
        pos = ha > 0
        a_lo = np.where(pos, am, a_lo)
        a_hi = np.where(pos, a_hi, am)
        neg = hb < 0
        b_hi = np.where(neg, bm, b_hi)
        b_lo = np.where(neg, b_lo, bm)
    else:
        raise NumericError("Huber bisection did not converge", iterations=200)
    return 0.25 * (a_lo + a_hi + b_lo + b_hi)


def _mean_rows(values):
    # summing in sorted order makes the result independent of the path order
    return np.sort(values, axis=1).mean(axis=1)


def _median_rows(values):
    return np.median(values, axis=1)


def _trimmed_rows(values, beta):
    m = values.shape[1]
    cum = np.arange(1, m + 1) / m
    mass = _trim_masses(cum, np.arange(m) / m, beta)
    return np.sort(values, axis=1) @ mass / mass.sum()


@dataclass(frozen=True, eq=False)
class EstimatorOperator:
    """A statistical operator ``S`` with values in ``H = R``.

    Built-in names: ``mean``, ``median`` (midpoint of a flat spot of the
    quantile function at 1/2), ``trimmed_mean`` (``beta`` in ``[0, 1/2)``,
    boundary atoms split fractionally) and ``huber`` (tuning constant ``k``).
    """

    name: str
    params: dict = field(default_factory=dict)
    output_space: MetricSpace = field(default_factory=real_line)
    measure_fn: Callable | None = field(default=None, repr=False)
    samples_fn: Callable | None = field(default=None, repr=False)

    def evaluate(self, measure: DiscreteMeasure) -> float:
        return float(self.measure_fn(measure, **self.params))

    def evaluate_samples(self, values) -> np.ndarray:
        """``S`` of the empirical measure of each row of ``values``."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2:
            raise CapabilityError("estimators are defined for one-dimensional samples only")
        if self.samples_fn is not None:
            return np.asarray(self.samples_fn(values, **self.params), dtype=float)
        return np.array([self.evaluate(empirical_measure(row)) for row in values])

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}

    def __eq__(self, other):
        return isinstance(other, EstimatorOperator) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items()))))


def _on_measure(fn):
    def run(measure, **params):
        x, w = _atoms(measure)
        return fn(x, w, **params)

    return run


def _check_beta(beta):
    if not 0.0 <= beta < 0.5:
        raise DomainError("trim fraction beta must lie in [0, 0.5)")


def _check_k(k):
    if not k > 0:
        raise DomainError("Huber constant k must be positive")


def _make_mean():
    return EstimatorOperator("mean", {}, measure_fn=_on_measure(_mean), samples_fn=_mean_rows)


def _make_median():
    return EstimatorOperator("median", {}, measure_fn=_on_measure(_median), samples_fn=_median_rows)


def _make_trimmed(beta: float = 0.1):
    beta = float(beta)
    _check_beta(beta)
    return EstimatorOperator("trimmed_mean", {"beta": beta}, measure_fn=_on_measure(_trimmed_mean), samples_fn=_trimmed_rows)


def _make_huber(k: float = 1.345):
    k = float(k)
    _check_k(k)
    return EstimatorOperator("huber", {"k": k}, measure_fn=_on_measure(_huber), samples_fn=_huber_rows)


_REGISTRY: dict[str, Callable[..., EstimatorOperator]] = {
    "mean": _make_mean,
    "median": _make_median,
    "trimmed_mean": _make_trimmed,
    "huber": _make_huber,
}


def register_estimator(name: str, fn: Callable, samples_fn: Callable | None = None, *, replace: bool = False):
    """Add an external operator ``fn(measure, **params) -> float`` to the registry."""
    if name in _REGISTRY and not replace:
        raise DomainError(f"estimator {name!r} is already registered")

    def factory(**params):
        return EstimatorOperator(name, params, measure_fn=fn, samples_fn=samples_fn)

    _REGISTRY[name] = factory


def available_estimators() -> list[str]:
    return sorted(_REGISTRY)


def get_estimator(name: str, **params) -> EstimatorOperator:
    if name not in _REGISTRY:
        raise DomainError(f"unknown estimator {name!r}; registered: {', '.join(available_estimators())}")
    try:
        return _REGISTRY[name](**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for estimator {name!r}: {exc}") from None


def evaluate(op: EstimatorOperator, measure: DiscreteMeasure) -> float:
    return op.evaluate(measure)


def _perturb(center: DiscreteMeasure, radius: float, ground: Box, rng: np.random.Generator) -> DiscreteMeasure:
    kind = rng.integers(3)
    x, w = center.points, center.weights
    lo, hi = float(ground.low[0]), float(ground.high[0])
    if kind == 0:
        # move a small mass to a random point
        t = rng.uniform(0.0, min(1.0, radius))
        y = rng.uniform(lo, hi)
        return mixture([center, DiscreteMeasure.dirac(y)], [1.0 - t, t])
    if kind == 1:
        # shift every atom a little
        moved = np.clip(x + rng.uniform(-radius, radius, size=x.shape), lo, hi)
        return DiscreteMeasure(moved, w)
    t = rng.uniform(0.0, min(1.0, radius))
    return DiscreteMeasure(x, (1.0 - t) * w + t * rng.dirichlet(np.ones(len(w))))


def modulus_probe(
    op: EstimatorOperator,
    center: DiscreteMeasure,
    radius_grid,
    probes: int,
    seed: int,
    ground: Box | None = None,
) -> list[tuple[float, float, int]]:
    """Empirical lower bound on the modulus of continuity of ``op`` at ``center``.

    For each radius ``r``: draw ``probes`` random perturbations ``Q`` of
    ``center`` (point-mass injection, atom jitter, reweighting), keep those
    with ``d_BL(Q, center) <= r`` and record ``max |S(Q) - S(center)|``.

    Returns
    -------
    list of (radius, modulus, accepted)
    """
    ground = interval() if ground is None else ground
    if ground.dim != 1:
        raise CapabilityError("modulus probes are one-dimensional")
    base = op.evaluate(center)
    table = []
    for j, r in enumerate(radius_grid):
        r = float(r)
        if r < 0:
            raise DomainError("radii must be nonnegative")
        if r == 0:
            table.append((0.0, 0.0, 0))
            continue
        rng = substream(seed, "modulus", j)
        best, accepted = 0.0, 0
        for _ in range(int(probes)):
            q = _perturb(center, r, ground, rng)
            if bl_value(q, center, ground) <= r:
                accepted += 1
                best = max(best, abs(op.evaluate(q) - base))
        table.append((r, best, accepted))
    return table
