"""Nested Monte Carlo estimates of the distance between bootstrap laws.

For each sample size ``n`` and outer replicate ``k`` one seed
``seed_k = derive_seed(seed, n, k)`` drives both arms: the ideal path, the
contamination and the inner resample indices.  The arms are therefore
coupled by common random numbers, and identical arms give identical inner
laws bit for bit.

Two output distances are reported:

* nested: ``d_BL`` on laws of laws, with inner ``d_BL`` as ground metric;
* coupled: ``(1/K) sum_k d_BL(zeta_k, xi_k)`` along the shared seeds, an
  upper bound on the nested distance for the same replicates.

Both come from one ``K x K`` matrix of inner distances, which is also reused
for the error bars (paired resampling of outer replicates).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtr

from .bootstrap import BootstrapScheme, bootstrap_law_of_estimator
from .errors import CapacityError, DomainError, QRBootError
from .estimators import EstimatorOperator, get_estimator
from .measures import Box, DiscreteMeasure, mixture, product_space, real_line
from .processes import ProcessSpec, _rate, generate
from .prob_metrics import bl_from_cross, bl_value, measure_space
from .rng import derive_seed, substream

__all__ = [
    "ExperimentConfig",
    "RobustnessReport",
    "compress_law",
    "coupled_expectation",
    "input_distance_proxy",
    "inner_laws",
    "joint_law",
    "law_of_laws",
    "marginal_mixture",
    "nested_bl_distance",
    "run_experiment",
]

METHODS = ("nested_bl", "coupled_expectation", "both")
MAX_OUTER = 64
DEFAULT_MAX_ATOMS = 200
ERROR_RESAMPLES = 30
PROXY_BINS = 200
CSV_FIELDS = ("n", "input_proxy", "nested", "coupled", "err_nested", "err_coupled", "runtime_ms")


def compress_law(law: DiscreteMeasure, max_atoms: int = DEFAULT_MAX_ATOMS) -> tuple[DiscreteMeasure, float]:
    """Merge a 1-d law into at most ``max_atoms`` atoms by contiguous quantile groups.

    Each group is replaced by its barycenter.  Returns the compressed law and
    the mass-weighted displacement ``sum_i w_i |x_i - bary(group_i)|``, a
    transport cost and hence an upper bound on the ``d_BL`` error.
    """
    if len(law) <= max_atoms:
        return law, 0.0
    x, w = law.points, law.weights
    mid = np.cumsum(w) - 0.5 * w
    group = np.minimum((mid * max_atoms).astype(int), max_atoms - 1)
    starts = np.flatnonzero(np.diff(group, prepend=-1))
    mass = np.add.reduceat(w, starts)
    bary = np.add.reduceat(w * x, starts) / mass
    shift = float(np.sum(w * np.abs(x - np.repeat(bary, np.diff(np.append(starts, len(x)))))))
    return DiscreteMeasure(bary, mass), shift


@dataclass(frozen=True)
class ArmLaws:
    laws: tuple[DiscreteMeasure, ...]
    seeds: tuple[int, ...]
    resolution: float


def _outer_seeds(seed: int, n: int, outer_reps: int, outer_seeds=None) -> tuple[int, ...]:
    if outer_seeds is not None:
        if len(outer_seeds) != outer_reps:
            raise DomainError("need exactly one forced seed per outer replicate")
        return tuple(int(s) for s in outer_seeds)
    return tuple(derive_seed(seed, int(n), k) for k in range(outer_reps))


def inner_laws(
    spec: ProcessSpec,
    scheme: BootstrapScheme,
    estimator: EstimatorOperator,
    n: int,
    outer_reps: int,
    inner_reps: int,
    seed: int,
    *,
    max_atoms: int = DEFAULT_MAX_ATOMS,
    outer_seeds=None,
    threads: int = 1,
) -> ArmLaws:
    """The ``outer_reps`` bootstrap laws of one arm, in replicate order."""
    if outer_reps < 1 or inner_reps < 1:
        raise DomainError("outer_reps and inner_reps must be >= 1")
    seeds = _outer_seeds(seed, n, outer_reps, outer_seeds)

    def one(s):
        law = bootstrap_law_of_estimator(generate(spec, n, s), scheme, estimator, inner_reps, s)
        return compress_law(law, max_atoms)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, seeds))
    else:
        out = [one(s) for s in seeds]
    return ArmLaws(tuple(o[0] for o in out), seeds, max(o[1] for o in out))


def law_of_laws(
    spec: ProcessSpec,
    scheme: BootstrapScheme,
    estimator: EstimatorOperator,
    n: int,
    outer_reps: int,
    inner_reps: int,
    seed: int,
    **kwargs,
) -> DiscreteMeasure:
    """Uniform measure on the ``outer_reps`` inner bootstrap laws (duplicates merged)."""
    arm = inner_laws(spec, scheme, estimator, n, outer_reps, inner_reps, seed, **kwargs)
    k = len(arm.laws)
    return DiscreteMeasure(list(arm.laws), np.full(k, 1.0 / k))


def nested_bl_distance(lp: DiscreteMeasure, lq: DiscreteMeasure, *, threads: int = 1, max_outer: int = MAX_OUTER) -> float:
    """``d_BL`` between two laws of laws over ``H = R``."""
    if len(lp) > max_outer or len(lq) > max_outer:
        raise CapacityError(f"laws of laws with more than {max_outer} atoms")
    return bl_value(lp, lq, measure_space(real_line(), threads))


def _cross_matrix(laws_p, laws_q, threads: int = 1, full: bool = True) -> np.ndarray:
    """Inner distances ``C[k, l] = d_BL(zeta_k, xi_l)`` (only the diagonal when not ``full``)."""
    H = real_line()
    K = len(laws_p)
    pairs = [(k, l) for k in range(K) for l in range(len(laws_q)) if full or k == l]
    C = np.full((K, len(laws_q)), np.nan)

    def one(kl):
        return bl_value(laws_p[kl[0]], laws_q[kl[1]], H)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(one, pairs))
    else:
        vals = [one(kl) for kl in pairs]
    for (k, l), v in zip(pairs, vals):
        C[k, l] = v
    return C


def _nested_from_cross(C: np.ndarray, idx: np.ndarray | None = None) -> float:
    if idx is not None:
        C = C[np.ix_(idx, idx)]
    K = C.shape[0]
    return bl_from_cross(np.full(K, 1.0 / K), np.full(C.shape[1], 1.0 / C.shape[1]), C)


def coupled_expectation(
    spec_p: ProcessSpec,
    spec_q: ProcessSpec,
    scheme: BootstrapScheme,
    estimator: EstimatorOperator,
    n: int,
    outer_reps: int,
    inner_reps: int,
    seed: int,
    **kwargs,
) -> float:
    """``(1/K) sum_k d_BL(zeta_k, xi_k)`` with both arms driven by the same seeds."""
    arm_p = inner_laws(spec_p, scheme, estimator, n, outer_reps, inner_reps, seed, **kwargs)
    arm_q = inner_laws(spec_q, scheme, estimator, n, outer_reps, inner_reps, seed, **kwargs)
    return float(np.mean([bl_value(a, b, real_line()) for a, b in zip(arm_p.laws, arm_q.laws)]))


# ---------------------------------------------------------------- input proxy


class _Binned:
    """Accumulates a law on ``{low, bin midpoints, high}`` of a bounded interval."""

    def __init__(self, ground: Box, bins: int):
        self.lo, self.hi = float(ground.low[0]), float(ground.high[0])
        self.edges = np.linspace(self.lo, self.hi, bins + 1)
        self.atoms = np.concatenate([[self.lo], 0.5 * (self.edges[:-1] + self.edges[1:]), [self.hi]])
        self.mass = np.zeros(bins + 2)
        self.width = (self.hi - self.lo) / bins

    def add_cdf(self, cdf, weight: float):
        """Add ``weight`` times the law of ``clip(X)`` where ``X`` has CDF ``cdf``."""
        c = cdf(self.edges)
        self.mass[0] += weight * c[0]
        self.mass[1:-1] += weight * np.diff(c)
        self.mass[-1] += weight * (1.0 - c[-1])

    def add_uniform(self, a: float, b: float, weight: float):
        if b <= a:
            self.add_atom(min(max(a, self.lo), self.hi), weight)
        else:
            self.add_cdf(lambda t: np.clip((t - a) / (b - a), 0.0, 1.0), weight)

    def add_atom(self, x: float, weight: float):
        self.mass[int(np.argmin(np.abs(self.atoms - x)))] += weight

    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.atoms, self.mass / self.mass.sum())


def _exact_marginals(spec: ProcessSpec, n: int) -> list[DiscreteMeasure] | None:
    """Laws of ``Z_1..Z_n`` before contamination when all are discrete."""
    laws = [spec.marginal(i) for i in range(1, n + 1)] if spec.kind in ("iid", "markov_chain", "shrinking_contamination") else [None]
    if any(m is None for m in laws):
        return None
    return laws


def _contaminate_law(law: DiscreteMeasure, spec: ProcessSpec, n: int) -> DiscreteMeasure:
    """Law of a contaminated coordinate, averaged over positions (no rounding)."""
    c = spec.contamination
    if c is None:
        return law
    rate = math.floor(c.fraction * n + 1e-9) / n if c.mode == "gross_error" else c.fraction
    if c.mode == "rounding" or rate == 0:
        return law
    target = c.shift_target if c.shift_target is not None else DiscreteMeasure.uniform(spec.ground.corners())
    return mixture([law, target], [1.0 - rate, rate])


def marginal_mixture(spec: ProcessSpec, n: int, bins: int = PROXY_BINS) -> tuple[DiscreteMeasure, float]:
    """``(1/n) sum_i law(Z_i)`` and its discretization resolution (0 when exact).

    Continuous laws are put on ``bins`` cells of the ground interval (plus the
    two endpoints, which carry clipped mass); the resolution is half a cell.
    """
    if spec.ground.dim != 1:
        raise DomainError("input proxies are computed on one-dimensional grounds")
    exact = _exact_marginals(spec, n)
    if exact is not None and (spec.contamination is None or spec.contamination.mode != "rounding" or spec.contamination.magnitude == 0):
        parts = [_contaminate_law(m, spec, n) for m in exact]
        return mixture(parts, np.full(n, 1.0 / n)), 0.0
    if not (np.all(np.isfinite(spec.ground.low)) and np.all(np.isfinite(spec.ground.high))):
        raise DomainError("discretized proxies need a bounded ground interval")
    binned = _Binned(spec.ground, bins)
    ideal = _Binned(spec.ground, bins)
    p = spec.params
    lo, hi = binned.lo, binned.hi
    i = np.arange(1, n + 1, dtype=float)
    if exact is not None:
        for m in exact:
            for x, w in m:
                ideal.add_atom(x, w / n)
    elif spec.kind == "iid" or spec.kind == "shrinking_contamination":
        if spec.kind == "iid":
            comps = [(spec._marginal, 1.0)]
        else:
            eps = float(np.mean(spec.epsilons(n)))
            comps = [(spec._base, 1.0 - eps), (spec._contaminant, eps)]
        for marg, weight in comps:
            if marg.measure is None:
                ideal.add_uniform(float(marg.low[0]), float(marg.high[0]), weight)
            else:
                for x, w in marg.measure:
                    ideal.add_atom(x, weight * w)
    elif spec.kind == "normal_drift":
        a = float(p.get("limit", 0.0)) + float(p.get("amplitude", 1.0)) * _rate(p.get("rate", "1/i"), i)
        off, sc = float(p.get("offset", 0.5)), float(p.get("scale", 0.25))
        for ai in a:
            ideal.add_cdf(lambda t, ai=ai: ndtr((t - off) / sc - ai), 1.0 / n)
    else:  # ar1_transformed: stationary uniform output
        ideal.add_uniform(lo, hi, 1.0)
    law = ideal.measure()
    cont = spec.contamination
    if cont is not None and cont.mode == "rounding" and cont.magnitude > 0:
        for x, w in law:
            binned.add_uniform(x - cont.magnitude, x + cont.magnitude, w)
        return binned.measure(), 0.5 * binned.width
    out = _contaminate_law(law, spec, n)
    return out, 0.5 * binned.width


def joint_law(spec: ProcessSpec, n: int, s_max: int = 6, n_max: int = 3) -> DiscreteMeasure | None:
    """Exact law of ``(Z_1..Z_n)`` for tiny discrete instances, else ``None``."""
    if n > n_max:
        return None
    c = spec.contamination
    if c is not None and c.mode == "rounding" and c.magnitude > 0:
        return None
    if spec.kind == "markov_chain":
        P, pi, states = spec._P, spec._pi, spec._states
        if len(states) > s_max:
            return None
        paths, weights = [], []
        for seq in itertools.product(range(len(states)), repeat=n):
            w = pi[seq[0]] * np.prod([P[a, b] for a, b in zip(seq, seq[1:])])
            paths.append(states[list(seq)])
            weights.append(w)
        base = [(np.asarray(paths), np.asarray(weights))]
        if c is None:
            return DiscreteMeasure(base[0][0], base[0][1])
    else:
        laws = _exact_marginals(spec, n)
        if laws is None or any(len(m) > s_max for m in laws):
            return None
        base = None
    target = None
    if c is not None:
        target = c.shift_target if c.shift_target is not None else DiscreteMeasure.uniform(spec.ground.corners())
        if len(target) > s_max:
            return None
    support, weights = [], []

    def emit(factor_laws, scale):
        for combo in itertools.product(*(list(m) for m in factor_laws)):
            support.append([x for x, _ in combo])
            weights.append(scale * math.prod(w for _, w in combo))

    if base is not None:
        # contaminated chain: each path mixed coordinate-wise with the target
        paths, pw = base[0]
        count = math.floor(c.fraction * n + 1e-9) if c.mode == "gross_error" else None
        for path, w in zip(paths, pw):
            laws = [DiscreteMeasure.dirac(float(x)) for x in path]
            _emit_contaminated(laws, target, c, n, count, w, emit)
    elif c is None:
        emit(laws, 1.0)
    else:
        count = math.floor(c.fraction * n + 1e-9) if c.mode == "gross_error" else None
        _emit_contaminated(laws, target, c, n, count, 1.0, emit)
    return DiscreteMeasure(np.asarray(support, dtype=float), np.asarray(weights))


def _emit_contaminated(laws, target, c, n, count, scale, emit):
    if c.mode == "gross_error":
        subsets = list(itertools.combinations(range(n), count))
        for S in subsets:
            emit([target if i in S else laws[i] for i in range(n)], scale / len(subsets))
    else:
        emit([mixture([laws[i], target], [1.0 - c.fraction, c.fraction]) for i in range(n)], scale)


def input_distance_proxy(process_p: ProcessSpec, process_q: ProcessSpec, n: int, *, bins: int = PROXY_BINS) -> dict:
    """``d_BL`` between the mixture marginals of the two arms.

    A lower bound for the distance of the joint laws under the sup product
    metric.  For ``n <= 3`` and tiny discrete supports the joint distance
    itself is computed as ``exact_joint``.
    """
    mp, rp = marginal_mixture(process_p, n, bins)
    mq, rq = marginal_mixture(process_q, n, bins)
    out: dict[str, Any] = {"value": bl_value(mp, mq, process_p.ground), "resolution": max(rp, rq), "exact_joint": None}
    jp, jq = joint_law(process_p, n), joint_law(process_q, n)
    if jp is not None and jq is not None:
        out["exact_joint"] = bl_value(jp, jq, product_space(process_p.ground, n, "sup"))
    return out


# ---------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ExperimentConfig:
    process_p: ProcessSpec
    process_q: ProcessSpec
    scheme: BootstrapScheme
    estimator: EstimatorOperator
    n_grid: tuple[int, ...]
    outer_reps: int = 32
    inner_reps: int = 500
    seed: int = 0
    method: str = "both"
    max_atoms: int = DEFAULT_MAX_ATOMS
    error_resamples: int = ERROR_RESAMPLES
    max_outer: int = MAX_OUTER
    threads: int = 1
    outer_seeds: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.outer_reps < 2 or self.inner_reps < 2:
            raise DomainError("outer_reps and inner_reps must be >= 2")
        if self.outer_reps > self.max_outer:
            raise CapacityError(f"outer_reps={self.outer_reps} exceeds the guard {self.max_outer}")
        if not self.n_grid or any(n < 1 for n in self.n_grid) or list(self.n_grid) != sorted(set(self.n_grid)):
            raise DomainError("n_grid must be a nonempty strictly ascending list of positive integers")
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; use one of {METHODS}")
        if self.process_p.structural_class != self.process_q.structural_class:
            raise DomainError(
                f"arms belong to different process classes ({self.process_p.structural_class} vs {self.process_q.structural_class})"
            )
        if self.max_atoms < 2 or self.error_resamples < 1:
            raise DomainError("max_atoms must be >= 2 and error_resamples >= 1")

    def to_dict(self) -> dict:
        return {
            "process_p": self.process_p.to_dict(),
            "process_q": self.process_q.to_dict(),
            "scheme": self.scheme.to_dict(),
            "estimator": self.estimator.to_dict(),
            "n_grid": list(self.n_grid),
            "outer_reps": self.outer_reps,
            "inner_reps": self.inner_reps,
            "seed": self.seed,
            "method": self.method,
            "max_atoms": self.max_atoms,
            "error_resamples": self.error_resamples,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        est = data["estimator"]
        if isinstance(est, str):
            est = {"name": est}
        return cls(
            process_p=ProcessSpec.from_dict(data["process_p"]),
            process_q=ProcessSpec.from_dict(data["process_q"]),
            scheme=BootstrapScheme.from_dict(data.get("scheme", {})),
            estimator=get_estimator(est["name"], **est.get("params", {})),
            n_grid=tuple(data["n_grid"]),
            outer_reps=int(data.get("outer_reps", 32)),
            inner_reps=int(data.get("inner_reps", 500)),
            seed=int(data.get("seed", 0)),
            method=data.get("method", "both"),
            max_atoms=int(data.get("max_atoms", DEFAULT_MAX_ATOMS)),
            error_resamples=int(data.get("error_resamples", ERROR_RESAMPLES)),
        )


@dataclass(frozen=True)
class RobustnessReport:
    config: dict
    records: tuple[dict, ...]

    @property
    def ok(self) -> bool:
        return any(r["status"] == "ok" for r in self.records)

    def record(self, n: int) -> dict:
        for r in self.records:
            if r["n"] == n:
                return r
        raise KeyError(n)

    def to_dict(self, *, timing: bool = True) -> dict:
        recs = [dict(r) for r in self.records]
        if not timing:
            for r in recs:
                r.pop("runtime_ms", None)
        return {"config": self.config, "records": recs}

    def to_json(self, *, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing=timing), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.records:
            w.writerow([r["n"]] + [_fmt(r.get(k)) for k in CSV_FIELDS[1:]])
        return buf.getvalue()

    @classmethod
    def from_json(cls, text: str) -> "RobustnessReport":
        data = json.loads(text)
        return cls(data["config"], tuple(data["records"]))


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9f}"


def _half_width(samples) -> float:
    lo, hi = np.percentile(samples, [2.5, 97.5])
    return float(0.5 * (hi - lo))


def _run_one(config: ExperimentConfig, n: int) -> dict:
    kw = dict(max_atoms=config.max_atoms, outer_seeds=config.outer_seeds, threads=config.threads)
    args = (config.scheme, config.estimator, n, config.outer_reps, config.inner_reps, config.seed)
    arm_p = inner_laws(config.process_p, *args, **kw)
    same_spec = config.process_p == config.process_q
    arm_q = arm_p if same_spec else inner_laws(config.process_q, *args, **kw)
    proxy = input_distance_proxy(config.process_p, config.process_q, n)
    K = config.outer_reps
    rec: dict[str, Any] = {
        "n": n,
        "status": "ok",
        "input_proxy": proxy["value"],
        "input_resolution": proxy["resolution"],
        "input_exact_joint": proxy["exact_joint"],
        "nested": None,
        "coupled": None,
        "err_nested": None,
        "err_coupled": None,
        "compression_resolution": max(arm_p.resolution, arm_q.resolution),
        "outer_seeds": [str(s) for s in arm_p.seeds],
    }
    want_nested = config.method in ("nested_bl", "both")
    want_coupled = config.method in ("coupled_expectation", "both")
    if all(a == b for a, b in zip(arm_p.laws, arm_q.laws)):
        # identical inner laws on every replicate: both distances vanish exactly
        C = np.zeros((K, K)) if want_nested else np.diag(np.zeros(K))
        identical = True
    else:
        C = _cross_matrix(arm_p.laws, arm_q.laws, config.threads, full=want_nested)
        identical = False
    rng = substream(config.seed, "errorbars", n)
    resamples = [rng.integers(K, size=K) for _ in range(config.error_resamples)]
    if want_coupled:
        diag = np.diag(C)
        rec["coupled"] = float(diag.mean())
        rec["err_coupled"] = _half_width([diag[I].mean() for I in resamples])
    if want_nested:
        if identical:
            rec["nested"], rec["err_nested"] = 0.0, 0.0
        else:
            rec["nested"] = _nested_from_cross(C)
            rec["err_nested"] = _half_width([_nested_from_cross(C, I) for I in resamples])
    return rec


def run_experiment(config: ExperimentConfig) -> RobustnessReport:
    """Input proxy, nested and coupled output distances with error bars, per ``n``.

    A failure at one ``n`` is recorded in that row (``status`` "failed" and
    the message) and the remaining sizes still run.
    """
    records = []
    for n in config.n_grid:
        t0 = time.perf_counter()
        try:
            rec = _run_one(config, n)
        except (QRBootError, ValueError, ArithmeticError) as exc:
            rec = {
                "n": n,
                "status": "failed",
                "error": f"{type(exc).__name__}: {exc}",
                "input_proxy": None,
                "nested": None,
                "coupled": None,
                "err_nested": None,
                "err_coupled": None,
            }
        rec["runtime_ms"] = round(1000.0 * (time.perf_counter() - t0), 3)
        records.append(rec)
    return RobustnessReport(config.to_dict(), tuple(records))
