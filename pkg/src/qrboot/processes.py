"""Data-generating processes, contamination operators and mixing diagnostics.

Every generator is a pure function of ``(spec, n, seed)``.  The base path is
drawn from the substream ``(seed, "process")`` and contamination from
``(seed, "contamination")``, so a process and its contaminated version
share the ideal draws exactly (common random numbers across arms).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtr

from .errors import CapabilityError, CapacityError, DomainError
from .measures import Box, DiscreteMeasure, SamplePath, empirical_measure, interval, mixture
from .prob_metrics import bl_value
from .rng import derive_seed, substream

__all__ = [
    "ContaminationSpec",
    "MixingDiagnostics",
    "ProcessSpec",
    "contaminate",
    "exact_alpha_markov",
    "generate",
    "mixing_diagnostics",
    "stationary_distribution",
    "varadarajan_diagnostic",
    "weak_bi_mixing_average",
]

KINDS = ("iid", "normal_drift", "shrinking_contamination", "markov_chain", "ar1_transformed")
STRUCTURAL_CLASS = {
    "iid": "independent",
    "normal_drift": "independent",
    "shrinking_contamination": "independent",
    "markov_chain": "mixing",
    "ar1_transformed": "mixing",
}
RATES = ("1/i", "1/sqrt(i)", "const")
MODES = ("gross_error", "rounding", "distribution_shift")
# exact alpha enumerates 2^s x 2^s event pairs
ALPHA_MAX_STATES = 3


def _rate(tag: str, i: np.ndarray) -> np.ndarray:
    if tag == "1/i":
        return 1.0 / i
    if tag == "1/sqrt(i)":
        return 1.0 / np.sqrt(i)
    if tag == "const":
        return np.ones_like(i, dtype=float)
    raise DomainError(f"unknown rate {tag!r}; use one of {RATES}")


class Marginal:
    """One-point law from a parameter block.

    ``{"type": "uniform"}`` (on the ground box unless ``low``/``high`` given),
    ``{"type": "discrete", "atoms": [...], "weights": [...]}``,
    ``{"type": "dirac", "value": x}`` or ``{"type": "grid", "points": k}``
    (uniform on the ``k`` cell midpoints of a 1-d ground interval).
    """

    TYPES = ("uniform", "discrete", "dirac", "grid")

    def __init__(self, block: dict, ground: Box):
        if not isinstance(block, dict):
            raise DomainError("a marginal must be a table with a 'type' key")
        kind = block.get("type", "uniform")
        if kind not in self.TYPES:
            raise DomainError(f"unknown marginal type {kind!r}; use one of {self.TYPES}")
        self.kind = kind
        self.ground = ground
        self.measure: DiscreteMeasure | None = None
        if kind == "uniform":
            self.low = np.asarray(block.get("low", ground.low), float).reshape(-1)
            self.high = np.asarray(block.get("high", ground.high), float).reshape(-1)
            if self.low.size != ground.dim or self.high.size != ground.dim:
                raise DomainError("uniform bounds must match the ground dimension")
            if not (np.all(np.isfinite(self.low)) and np.all(np.isfinite(self.high))) or np.any(self.high < self.low):
                raise DomainError("uniform marginal needs finite bounds with low <= high")
            if not (ground.contains(self.low) and ground.contains(self.high)):
                raise DomainError("uniform marginal must lie in the ground space")
        elif kind == "discrete":
            self.measure = DiscreteMeasure(block["atoms"], block["weights"])
        elif kind == "dirac":
            self.measure = DiscreteMeasure.dirac(block["value"])
        else:
            k = int(block.get("points", 10))
            if k < 1 or ground.dim != 1 or not np.all(np.isfinite(ground.low)) or not np.all(np.isfinite(ground.high)):
                raise DomainError("grid marginal needs points >= 1 on a bounded interval")
            lo, hi = float(ground.low[0]), float(ground.high[0])
            self.measure = DiscreteMeasure.uniform(lo + (hi - lo) * (np.arange(k) + 0.5) / k)
        if self.measure is not None and self.measure.is_numeric:
            if not all(ground.contains(x) for x in self.measure.support):
                raise DomainError("marginal atoms must lie in the ground space")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            u = rng.random((size, self.low.size))
            out = self.low + u * (self.high - self.low)
            return out[:, 0] if self.ground.dim == 1 else out
        m = self.measure
        idx = rng.choice(len(m), size=size, p=m.weights)
        return m.points[idx]


@dataclass(frozen=True)
class ContaminationSpec:
    """How an ideal path is corrupted.

    ``gross_error`` replaces ``floor(fraction * n)`` uniformly chosen
    positions by draws from ``shift_target`` (default: random corners of the
    ground box); ``rounding`` adds uniform noise of half-width ``magnitude``
    to every point and clips; ``distribution_shift`` replaces each point
    independently with probability ``fraction``.
    """

    mode: str = "gross_error"
    fraction: float = 0.0
    magnitude: float = 0.0
    shift_target: DiscreteMeasure | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown contamination mode {self.mode!r}; use one of {MODES}")
        if not 0.0 <= self.fraction <= 1.0:
            raise DomainError("contamination fraction must lie in [0, 1]")
        if self.magnitude < 0:
            raise DomainError("contamination magnitude must be nonnegative")
        if self.shift_target is not None and not self.shift_target.is_numeric:
            raise DomainError("shift_target must have numeric atoms")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"mode": self.mode, "fraction": self.fraction, "magnitude": self.magnitude}
        if self.shift_target is not None:
            out["shift_target"] = {"atoms": self.shift_target.points.tolist(), "weights": self.shift_target.weights.tolist()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ContaminationSpec":
        target = data.get("shift_target")
        if target is not None:
            target = DiscreteMeasure(target["atoms"], target["weights"])
        unknown = set(data) - {"mode", "fraction", "magnitude", "shift_target"}
        if unknown:
            raise DomainError(f"unknown contamination keys {sorted(unknown)}")
        return cls(data.get("mode", "gross_error"), float(data.get("fraction", 0.0)), float(data.get("magnitude", 0.0)), target)


def stationary_distribution(transition) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix."""
    P = _check_stochastic(transition)
    s = P.shape[0]
    A = np.vstack([P.T - np.eye(s), np.ones(s)])
    rhs = np.append(np.zeros(s), 1.0)
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.any(pi < -1e-10) or np.linalg.norm(A @ pi - rhs) > 1e-8:
        raise DomainError("transition matrix has no unique stationary distribution")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _check_stochastic(transition) -> np.ndarray:
    P = np.asarray(transition, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise DomainError("transition matrix must be square")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise DomainError("transition probabilities must be finite and nonnegative")
    if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
        raise DomainError("transition matrix rows must sum to 1")
    return P


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    """Declarative description of a data-generating process.

    Parameters by ``kind``:

    ``iid``
        ``marginal``: a :class:`Marginal` block.
    ``normal_drift``
        ``Z_i ~ N(a_i, 1)`` with ``a_i = limit + amplitude * rate(i)``, mapped
        through ``offset + scale * z`` and clipped to a bounded ground space.
        Keys ``limit`` (0), ``amplitude`` (1), ``rate`` ("1/i"), ``offset``
        (0.5), ``scale`` (0.25); on an unbounded ground the map is skipped.
    ``shrinking_contamination``
        ``P^i = (1 - eps_i) P + eps_i P~`` with ``eps_i = eps0 * rate(i)``.
        Keys ``base`` and ``contaminant`` (marginal blocks), ``eps0``, ``rate``.
    ``markov_chain``
        ``transition`` (s x s) and ``states`` (emitted values, default evenly
        spaced over the ground interval); started from the stationary law.
    ``ar1_transformed``
        ``X_{i+1} = phi X_i + sqrt(1 - phi^2) eta_i`` with standard normal
        ``X_1``; emits ``Phi(X_i)`` rescaled to the ground interval, so the
        output is stationary uniform.
    """

    kind: str
    params: dict = field(default_factory=dict)
    ground: Box = field(default_factory=interval)
    contamination: ContaminationSpec | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown process kind {self.kind!r}; use one of {KINDS}")
        if not isinstance(self.ground, Box):
            raise DomainError("process ground space must be an interval or box")
        object.__setattr__(self, "params", dict(self.params))
        getattr(self, f"_check_{self.kind}")()

    def _bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.ground.low)) and np.all(np.isfinite(self.ground.high)))

    def _check_iid(self):
        object.__setattr__(self, "_marginal", Marginal(self.params.get("marginal", {"type": "uniform"}), self.ground))

    def _check_normal_drift(self):
        p = self.params
        if self.ground.dim != 1:
            raise DomainError("normal_drift is one-dimensional")
        _rate(p.get("rate", "1/i"), np.array([1.0]))
        for key in ("limit", "amplitude", "offset", "scale"):
            if key in p and not math.isfinite(float(p[key])):
                raise DomainError(f"normal_drift {key} must be finite")
        if float(p.get("scale", 0.25)) <= 0:
            raise DomainError("normal_drift scale must be positive")

    def _check_shrinking_contamination(self):
        p = self.params
        object.__setattr__(self, "_base", Marginal(p.get("base", {"type": "uniform"}), self.ground))
        if "contaminant" not in p:
            raise DomainError("shrinking_contamination needs a contaminant marginal")
        object.__setattr__(self, "_contaminant", Marginal(p["contaminant"], self.ground))
        eps0 = float(p.get("eps0", 0.5))
        if not 0.0 < eps0 <= 1.0:
            raise DomainError("eps0 must lie in (0, 1]")
        _rate(p.get("rate", "1/i"), np.array([1.0]))

    def _check_markov_chain(self):
        p = self.params
        if "transition" not in p:
            raise DomainError("markov_chain needs a transition matrix")
        P = _check_stochastic(p["transition"])
        s = P.shape[0]
        if "states" in p:
            states = np.asarray(p["states"], float)
        elif self._bounded() and self.ground.dim == 1:
            lo, hi = float(self.ground.low[0]), float(self.ground.high[0])
            states = np.linspace(lo, hi, s) if s > 1 else np.array([(lo + hi) / 2])
        else:
            raise DomainError("markov_chain on this ground space needs explicit states")
        if states.shape[0] != s:
            raise DomainError(f"{s} transition rows but {states.shape[0]} states")
        if not all(self.ground.contains(x) for x in states):
            raise DomainError("markov_chain states must lie in the ground space")
        object.__setattr__(self, "_P", P)
        object.__setattr__(self, "_states", states)
        object.__setattr__(self, "_pi", stationary_distribution(P))

    def _check_ar1_transformed(self):
        phi = float(self.params.get("phi", 0.5))
        if not abs(phi) < 1:
            raise DomainError("ar1_transformed needs |phi| < 1")
        if self.ground.dim != 1 or not self._bounded():
            raise DomainError("ar1_transformed needs a bounded interval")

    @property
    def structural_class(self) -> str:
        return STRUCTURAL_CLASS[self.kind]

    def with_contamination(self, contamination: ContaminationSpec | None) -> "ProcessSpec":
        return ProcessSpec(self.kind, self.params, self.ground, contamination)

    def marginal(self, i: int) -> DiscreteMeasure | None:
        """Exact law of ``Z_i`` (1-based) before contamination, when it is discrete."""
        if self.kind == "iid":
            return self._marginal.measure
        if self.kind == "markov_chain":
            return DiscreteMeasure(self._states, self._pi)
        if self.kind == "shrinking_contamination":
            base, cont = self._base.measure, self._contaminant.measure
            if base is None or cont is None:
                return None
            eps = self.epsilons(i)[-1]
            return mixture([base, cont], [1.0 - eps, eps])
        return None

    def epsilons(self, n: int) -> np.ndarray:
        """``eps_1..eps_n`` of a shrinking_contamination process."""
        i = np.arange(1, n + 1, dtype=float)
        return float(self.params.get("eps0", 0.5)) * _rate(self.params.get("rate", "1/i"), i)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "params": _jsonable(self.params), "ground": self.ground.to_dict()}
        if self.contamination is not None:
            out["contamination"] = self.contamination.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProcessSpec":
        if "kind" not in data:
            raise DomainError("process table needs a 'kind'")
        ground = Box.from_dict(data["ground"]) if "ground" in data else interval()
        cont = data.get("contamination")
        params = data.get("params")
        if params is None:
            params = {k: v for k, v in data.items() if k not in ("kind", "ground", "contamination")}
        return cls(data["kind"], params, ground, ContaminationSpec.from_dict(cont) if cont else None)

    def __eq__(self, other):
        return isinstance(other, ProcessSpec) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _generate_ideal(spec: ProcessSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    p = spec.params
    if spec.kind == "iid":
        return spec._marginal.sample(rng, n)
    if spec.kind == "normal_drift":
        i = np.arange(1, n + 1, dtype=float)
        a = float(p.get("limit", 0.0)) + float(p.get("amplitude", 1.0)) * _rate(p.get("rate", "1/i"), i)
        z = a + rng.standard_normal(n)
        if not spec._bounded():
            return z
        return spec.ground.clip(float(p.get("offset", 0.5)) + float(p.get("scale", 0.25)) * z)
    if spec.kind == "shrinking_contamination":
        eps = spec.epsilons(n)
        base = spec._base.sample(rng, n)
        hit = rng.random(n) < eps
        cont = spec._contaminant.sample(rng, n)
        base[hit] = cont[hit]
        return base
    if spec.kind == "markov_chain":
        P, pi = spec._P, spec._pi
        cum = np.cumsum(P, axis=1)
        u = rng.random(n)
        state = np.empty(n, dtype=int)
        state[0] = min(int(np.searchsorted(np.cumsum(pi), u[0], side="right")), len(pi) - 1)
        for t in range(1, n):
            state[t] = min(int(np.searchsorted(cum[state[t - 1]], u[t], side="right")), len(pi) - 1)
        return spec._states[state]
    phi = float(p.get("phi", 0.5))
    eta = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = eta[0]
    scale = math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + scale * eta[t]
    lo, hi = float(spec.ground.low[0]), float(spec.ground.high[0])
    return lo + (hi - lo) * ndtr(x)


def generate(spec: ProcessSpec, n: int, seed: int) -> SamplePath:
    """Draw ``Z_1..Z_n`` from ``spec`` (contamination applied if declared)."""
    if int(n) < 1:
        raise DomainError("n must be >= 1")
    n = int(n)
    values = _generate_ideal(spec, n, substream(seed, "process"))
    path = SamplePath(values, origin=spec.kind, seed=int(seed))
    if spec.contamination is not None:
        path = contaminate(path, spec.contamination, seed, ground=spec.ground)
    return path


def _target_draws(spec: ContaminationSpec, ground: Box, rng: np.random.Generator, size: int) -> np.ndarray:
    if spec.shift_target is not None:
        t = spec.shift_target
        return t.points[rng.choice(len(t), size=size, p=t.weights)]
    if not (np.all(np.isfinite(ground.low)) and np.all(np.isfinite(ground.high))):
        raise DomainError("gross errors on an unbounded ground need a shift_target")
    corners = ground.corners()
    return corners[rng.integers(len(corners), size=size)]


def contaminate(path: SamplePath, spec: ContaminationSpec, seed: int, *, ground: Box | None = None) -> SamplePath:
    """Corrupt ``path`` according to ``spec``; deterministic given ``seed``.

    ``ground`` defaults to the unit box of the path's dimension and is used
    for clipping and for the default gross-error targets.
    """
    values = np.array(path.values, dtype=float)
    n = values.shape[0]
    if ground is None:
        ground = interval() if values.ndim == 1 else Box(np.zeros(values.shape[1]), np.ones(values.shape[1]))
    rng = substream(seed, "contamination")
    if spec.mode == "gross_error":
        count = int(math.floor(spec.fraction * n + 1e-9))
        if count:
            idx = rng.choice(n, size=count, replace=False)
            values[idx] = _target_draws(spec, ground, rng, count)
    elif spec.mode == "rounding":
        if spec.magnitude > 0:
            values = ground.clip(values + rng.uniform(-spec.magnitude, spec.magnitude, size=values.shape))
    else:
        hit = rng.random(n) < spec.fraction
        if hit.any():
            if spec.shift_target is None:
                raise DomainError("distribution_shift needs a shift_target")
            values[hit] = _target_draws(spec, ground, rng, int(hit.sum()))
    return SamplePath(values, origin=f"{path.origin}+{spec.mode}", seed=path.seed)


def _alpha_from_joint(J: np.ndarray) -> float:
    s = J.shape[0]
    masks = np.array(list(itertools.product((0.0, 1.0), repeat=s)))  # every event A subset of states
    row, col = J.sum(axis=1), J.sum(axis=0)
    both = masks @ J @ masks.T
    indep = np.outer(masks @ row, masks @ col)
    return float(np.max(np.abs(both - indep)))


def exact_alpha_markov(transition, lag: int, states=None) -> float:
    """Exact ``alpha(sigma(Z_1), sigma(Z_{1+lag}))`` of a stationary chain.

    Enumerates every pair of events over the (at most three) states.  When
    ``states`` maps several states to the same value, events are generated
    by the emitted values only.  ``lag = 0`` gives ``sup P(A)(1 - P(A))``.
    """
    P = _check_stochastic(transition)
    if P.shape[0] > ALPHA_MAX_STATES:
        raise CapacityError(f"exact alpha enumerates subsets; at most {ALPHA_MAX_STATES} states")
    if int(lag) < 0:
        raise DomainError("lag must be nonnegative")
    pi = stationary_distribution(P)
    J = pi[:, None] * np.linalg.matrix_power(P, int(lag))
    if states is not None:
        _, group = np.unique(np.asarray(states, float), return_inverse=True)
        G = np.zeros((P.shape[0], group.max() + 1))
        G[np.arange(P.shape[0]), group] = 1.0
        J = G.T @ J @ G
    return _alpha_from_joint(J)


def _alpha_sequence(spec: ProcessSpec, count: int) -> np.ndarray:
    """``alpha(0), ..., alpha(count - 1)`` for kinds with exact coefficients."""
    if spec.contamination is not None:
        raise CapabilityError("exact alpha is available for uncontaminated processes only")
    if spec.kind == "markov_chain":
        P = spec._P
        if P.shape[0] > ALPHA_MAX_STATES:
            raise CapacityError(f"exact alpha enumerates subsets; at most {ALPHA_MAX_STATES} states")
        out = np.empty(count)
        Pk = np.eye(P.shape[0])
        pi = spec._pi
        _, group = np.unique(spec._states, return_inverse=True)
        G = np.zeros((P.shape[0], group.max() + 1))
        G[np.arange(P.shape[0]), group] = 1.0
        for m in range(count):
            out[m] = _alpha_from_joint(G.T @ (pi[:, None] * Pk) @ G)
            Pk = Pk @ P
        return out
    if spec.kind == "iid":
        m = spec._marginal.measure
        if m is None:
            a0 = 0.25  # atomless marginal: some event has probability 1/2
        else:
            masses = m.weights
            if len(masses) > 16:
                raise CapacityError("exact alpha(0) enumerates subsets of at most 16 atoms")
            sub = np.array(list(itertools.product((0.0, 1.0), repeat=len(masses)))) @ masses
            a0 = float(np.max(sub * (1.0 - sub)))
        out = np.zeros(count)
        out[0] = a0
        return out
    raise CapabilityError(f"no exact alpha coefficients for kind {spec.kind!r}")


def weak_bi_mixing_average(spec: ProcessSpec, n: int) -> float:
    """``(1/n^2) sum_{i,j <= n} alpha(i, j)`` using stationarity.

    The double sum includes the diagonal ``i = j``, where ``alpha(i, i) =
    alpha(0) > 0`` for any nondegenerate law, so even an independent process
    gives ``alpha(0) / n`` rather than 0.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    a = _alpha_sequence(spec, n)
    m = np.arange(1, n)
    return float((n * a[0] + 2.0 * np.sum((n - m) * a[1:])) / (n * n))


@dataclass(frozen=True)
class MixingDiagnostics:
    """Mixing coefficients and summability fits for one process.

    ``summability_estimate`` holds the tail sums ``sum_{m > k} alpha(m)``
    for ``k = 1..len(alpha_coeffs) - 1``, ``gamma_hat`` and ``c_hat`` the
    least-squares fit ``tail(k) ~ C k^-gamma`` on the log scale, and
    ``dimension_weighted_sum`` the partial sum of
    ``(m + 1)^(8d + 7) sqrt(alpha(m))``.
    """

    alpha_coeffs: tuple[float, ...]
    weak_bi_mixing_averages: tuple[tuple[int, float], ...]
    summability_estimate: tuple[float, ...]
    gamma_hat: float | None
    c_hat: float | None
    dimension_weighted_sum: float
    bound_only: bool = False

    def to_dict(self) -> dict:
        return {
            "alpha_coeffs": list(self.alpha_coeffs),
            "weak_bi_mixing_averages": [list(x) for x in self.weak_bi_mixing_averages],
            "summability_estimate": list(self.summability_estimate),
            "gamma_hat": self.gamma_hat,
            "c_hat": self.c_hat,
            "dimension_weighted_sum": self.dimension_weighted_sum,
            "bound_only": self.bound_only,
        }


def mixing_diagnostics(spec: ProcessSpec, max_lag: int = 50, n_grid=(10, 100, 1000), dimension: int = 1) -> MixingDiagnostics:
    """Exact coefficients for finite chains; the geometric bound ``|phi|^m / 4`` for AR(1)."""
    if max_lag < 2:
        raise DomainError("max_lag must be >= 2")
    bound_only = spec.kind == "ar1_transformed"
    if bound_only:
        phi = abs(float(spec.params.get("phi", 0.5)))
        alpha = 0.25 * phi ** np.arange(max_lag + 1)
        averages = tuple((int(n), float((n * alpha[0] + 2 * sum((n - m) * 0.25 * phi**m for m in range(1, n))) / n**2)) for n in n_grid)
    else:
        alpha = _alpha_sequence(spec, max_lag + 1)
        averages = tuple((int(n), weak_bi_mixing_average(spec, n)) for n in n_grid)
    tails = np.cumsum(alpha[::-1])[::-1]  # tails[k] = sum_{m >= k} alpha(m)
    tail = tails[2:] if len(tails) > 2 else np.array([])
    k = np.arange(1, len(tail) + 1, dtype=float)
    good = tail > 1e-300
    gamma = c = None
    if good.sum() >= 2:
        slope, icept = np.polyfit(np.log(k[good]), np.log(tail[good]), 1)
        gamma, c = float(-slope), float(math.exp(icept))
    m = np.arange(len(alpha), dtype=float)
    weighted = float(np.sum((m + 1.0) ** (8 * dimension + 7) * np.sqrt(alpha)))
    return MixingDiagnostics(tuple(alpha.tolist()), averages, tuple(tail.tolist()), gamma, c, weighted, bound_only)


def varadarajan_diagnostic(spec: ProcessSpec, target: DiscreteMeasure, n_grid, reps: int, seed: int) -> list[tuple[int, float]]:
    """Median over ``reps`` paths of ``d_BL(empirical(Z_1..Z_n), target)`` per ``n``.

    Rep ``r`` at size ``n`` uses seed ``derive_seed(seed, n, r)``.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    table = []
    for n in n_grid:
        dists = [bl_value(empirical_measure(generate(spec, n, derive_seed(seed, int(n), r))), target, spec.ground) for r in range(reps)]
        table.append((int(n), float(np.median(dists))))
    return table
