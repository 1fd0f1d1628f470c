"""Efron's bootstrap and the circular moving block bootstrap.

Indices are 0-based internally; the circular wrap ``Z_{n+j} = Z_j`` is
modular indexing.  Block lengths follow a dyadic schedule: constant on every
range ``[2^q, 2^(q+1))`` and growing like ``n^exponent`` along powers of two.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, EstimatorError
from .estimators import EstimatorOperator
from .measures import DiscreteMeasure, SamplePath, empirical_measure
from .rng import substream

__all__ = [
    "BlockSchedule",
    "BootstrapScheme",
    "block_schedule",
    "bootstrap_law_of_estimator",
    "efron_resample",
    "mbb_indices",
    "mbb_resample",
    "resample_indices",
]

DEFAULT_EXPONENT = 0.25
# exponents below 1/3 cover the scalar regime; up to 0.45 the multivariate one
SCALAR_MAX_EXPONENT = 1.0 / 3.0
MULTIVARIATE_MAX_EXPONENT = 0.45


@dataclass(frozen=True)
class BlockSchedule:
    n: int
    b: int
    ell: int


def block_schedule(n: int, block_exponent: float = DEFAULT_EXPONENT, *, multivariate: bool = False) -> BlockSchedule:
    """Block length ``b = max(1, floor(2^(q * exponent)))`` with ``q = floor(log2 n)``.

    ``ell = ceil(n / b)`` blocks are drawn and the concatenation is cut to
    ``n`` values.  ``multivariate`` widens the admissible exponent range
    from ``(0, 1/3)`` to ``(0, 0.45]``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    e = float(block_exponent)
    ok = 0.0 < e <= MULTIVARIATE_MAX_EXPONENT if multivariate else 0.0 < e < SCALAR_MAX_EXPONENT
    if not ok:
        bound = "(0, 0.45]" if multivariate else "(0, 1/3)"
        raise DomainError(f"block exponent {e} outside {bound}")
    q = n.bit_length() - 1
    b = max(1, int(math.floor(2.0 ** (q * e) + 1e-12)))
    return BlockSchedule(n, b, -(-n // b))


@dataclass(frozen=True)
class BootstrapScheme:
    """Resampling scheme.

    Parameters
    ----------
    kind : {"efron", "moving_block"}
    block_exponent : float
        Moving-block only; see :func:`block_schedule`.
    resample_size : int, optional
        Efron resample size ``m`` (default ``n``).
    circular : bool
        Moving-block start indices range over all ``n`` positions with
        wrap-around; ``False`` restricts them to ``0..n-b``.
    multivariate : bool
        Admit block exponents up to 0.45.
    """

    kind: str = "efron"
    block_exponent: float = DEFAULT_EXPONENT
    resample_size: int | None = None
    circular: bool = True
    multivariate: bool = False

    def __post_init__(self):
        if self.kind not in ("efron", "moving_block"):
            raise DomainError(f"unknown bootstrap kind {self.kind!r}; use 'efron' or 'moving_block'")
        if self.resample_size is not None and int(self.resample_size) < 1:
            raise DomainError("resample_size must be >= 1")
        if self.kind == "moving_block":
            block_schedule(1, self.block_exponent, multivariate=self.multivariate)

    def schedule(self, n: int) -> BlockSchedule:
        return block_schedule(n, self.block_exponent, multivariate=self.multivariate)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "block_exponent": self.block_exponent,
            "resample_size": self.resample_size,
            "circular": self.circular,
            "multivariate": self.multivariate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BootstrapScheme":
        unknown = set(data) - {"kind", "block_exponent", "resample_size", "circular", "multivariate"}
        if unknown:
            raise DomainError(f"unknown bootstrap keys {sorted(unknown)}")
        size = data.get("resample_size")
        return cls(
            data.get("kind", "efron"),
            float(data.get("block_exponent", DEFAULT_EXPONENT)),
            None if size is None else int(size),
            bool(data.get("circular", True)),
            bool(data.get("multivariate", False)),
        )


def mbb_indices(n: int, b: int, reps: int, rng: np.random.Generator, *, circular: bool = True, length: int | None = None) -> np.ndarray:
    """``(reps, length)`` source indices of moving-block resamples."""
    length = n if length is None else int(length)
    if not 1 <= b <= n:
        raise DomainError(f"block length {b} outside 1..{n}")
    ell = -(-length // b)
    starts = rng.integers(n if circular else n - b + 1, size=(reps, ell))
    idx = (starts[:, :, None] + np.arange(b)) % n
    return idx.reshape(reps, ell * b)[:, :length]


def efron_resample(path: SamplePath, m: int | None, seed: int) -> SamplePath:
    """``m`` draws with replacement from ``path`` (default ``m = n``)."""
    n = len(path)
    m = n if m is None else int(m)
    if m < 1:
        raise DomainError("resample size must be >= 1")
    idx = substream(seed, "efron").integers(n, size=m)
    return SamplePath(path.values[idx], origin=f"{path.origin}*efron", seed=int(seed))


def mbb_resample(path: SamplePath, schedule: BlockSchedule, seed: int, *, circular: bool = True) -> SamplePath:
    """Concatenate ``ell`` blocks of length ``b`` with circular wrap, cut to ``n``."""
    if schedule.n != len(path):
        raise DomainError(f"schedule is for n={schedule.n} but the path has {len(path)} values")
    idx = mbb_indices(schedule.n, schedule.b, 1, substream(seed, "mbb"), circular=circular)[0]
    return SamplePath(path.values[idx], origin=f"{path.origin}*mbb", seed=int(seed))


def resample_indices(n: int, scheme: BootstrapScheme, reps: int, seed: int) -> np.ndarray:
    """Index matrix of ``reps`` resamples, all drawn from one substream."""
    rng = substream(seed, "inner")
    if scheme.kind == "efron":
        m = n if scheme.resample_size is None else int(scheme.resample_size)
        return rng.integers(n, size=(reps, m))
    sched = scheme.schedule(n)
    return mbb_indices(n, sched.b, reps, rng, circular=scheme.circular, length=scheme.resample_size)


def bootstrap_law_of_estimator(
    path: SamplePath,
    scheme: BootstrapScheme,
    estimator: EstimatorOperator,
    inner_reps: int,
    seed: int,
    *,
    trace: str | Path | None = None,
) -> DiscreteMeasure:
    """Empirical law of ``estimator`` over ``inner_reps`` resamples of ``path``.

    One realization of the random measure ``L*_n(S_n)``.  Failures are
    re-raised as :class:`EstimatorError` carrying the resample index.
    ``trace`` writes the source indices as CSV (rep, position, source_index).
    """
    if int(inner_reps) < 1:
        raise DomainError("inner_reps must be >= 1")
    idx = resample_indices(len(path), scheme, int(inner_reps), seed)
    if trace is not None:
        write_trace(trace, idx)
    samples = path.values[idx]
    try:
        values = estimator.evaluate_samples(samples)
    except Exception:
        # locate the first failing resample
        for r in range(samples.shape[0]):
            try:
                estimator.evaluate_samples(samples[r : r + 1])
            except Exception as exc:
                raise EstimatorError(f"estimator {estimator.name!r} failed on resample {r}: {exc}", resample_index=r) from exc
        raise
    if not np.all(np.isfinite(values)):
        r = int(np.flatnonzero(~np.isfinite(values))[0])
        raise EstimatorError(f"estimator {estimator.name!r} returned a non-finite value on resample {r}", resample_index=r)
    return empirical_measure(values)


def write_trace(path, idx: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rep", "position", "source_index"])
        for r, row in enumerate(idx):
            for pos, src in enumerate(row):
                w.writerow([r, pos, int(src)])
