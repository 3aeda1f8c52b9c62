"""Probability-outlier handling for quality-preserving embedding.

Upper outliers of the step distribution (boxplot whisker rule) are tokens
the generator strongly prefers; forcing them off the sampling side would
visibly damage output.  They are therefore admitted into the side set
before biasing, and each admission of a wrong-side outlier is recorded as
a correction bit so detection can XOR the flip back out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tokenmark import kernels
from tokenmark.vocab import PartitionMask

SUM_TOLERANCE = 1e-6


class DistributionError(ValueError):
    pass


def validate_distribution(probs: np.ndarray, expected_size: int | None = None) -> np.ndarray:
    """Check a per-token probability vector: non-negative, sums to 1."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size < 2:
        raise DistributionError(f"expected a vector of >= 2 probabilities, got shape {probs.shape}")
    if expected_size is not None and probs.size != expected_size:
        raise DistributionError(
            f"distribution size {probs.size} does not match vocabulary size {expected_size}"
        )
    if np.any(probs < 0):
        raise DistributionError("negative probability")
    total = float(probs.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise DistributionError(f"probabilities sum to {total}, expected 1 +- {SUM_TOLERANCE}")
    return probs


@dataclass(frozen=True)
class OutlierReport:
    """Upper-outlier scan of one step distribution."""

    upper_outliers: np.ndarray  # ascending token ids with prob > f_upper
    f_upper: float
    q1: float
    q3: float
    s: float

    @property
    def count(self) -> int:
        return int(self.upper_outliers.size)

    def contains(self, token_id: int) -> bool:
        return bool(np.isin(token_id, self.upper_outliers))


def quartiles(probs: np.ndarray) -> tuple[float, float]:
    """Linear-interpolation quantiles at 0.25 and 0.75.

    Position p*(n-1) over the ascending sort, interpolating between the
    floor and ceil neighbours (numpy's ``linear`` method).
    """
    q1, q3 = np.quantile(np.asarray(probs, dtype=np.float64), [0.25, 0.75], method="linear")
    return float(q1), float(q3)


def detect_upper_outliers(probs: np.ndarray, s: float = 1.5) -> OutlierReport:
    """All ids strictly above the upper whisker ``(s+1)*q3 - s*q1``.

    Membership is tested against ``max(f_upper, q3)``: the whisker cannot
    mathematically sit below q3, but the float expression can round one ulp
    under it when the inter-quartile range is zero, which would flag an
    entire constant distribution.
    """
    if s <= 0:
        raise ValueError(f"outlier scale must be positive, got {s}")
    probs = np.asarray(probs, dtype=np.float64)
    q1, q3 = quartiles(probs)
    f_upper = (s + 1.0) * q3 - s * q1
    ids = np.flatnonzero(probs > max(f_upper, q3)).astype(np.int64)
    return OutlierReport(upper_outliers=ids, f_upper=float(f_upper), q1=q1, q3=q3, s=s)


def augment_partition(mask: PartitionMask, report: OutlierReport, hash_value: int) -> PartitionMask:
    """Admit outliers into the side set.

    Zero outliers: unchanged.  One: added outright.  Two or more: exactly
    ceil(m/2) of them, chosen by the hash-seeded generator over the
    candidates in ascending token-id order, so the choice replays.
    """
    m = report.count
    if m == 0:
        return mask
    candidates = np.sort(report.upper_outliers)
    if m == 1:
        return mask.with_added(candidates)
    take = (m + 1) // 2
    chosen = candidates[kernels.select_indices(hash_value & kernels.MASK64, m, take)]
    return mask.with_added(chosen)


def apply_gap_bias(probs: np.ndarray, mask: PartitionMask) -> np.ndarray:
    """Add max-min of the distribution to every selected entry.

    Computed as ``max + (p - min)`` rather than ``p + (max - min)``: the two
    are identical in exact arithmetic, but the first form cannot round below
    the global maximum, so the biased argmax provably stays on the selected
    side in floats.  The result is deliberately not renormalized: greedy
    argmax sampling is unaffected, and raw values stay auditable.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if mask.total_size != probs.size:
        raise DistributionError(
            f"mask covers {mask.total_size} ids but distribution has {probs.size}"
        )
    top = probs.max()
    bottom = probs.min()
    biased = probs.copy()
    biased[mask.member] = top + (probs[mask.member] - bottom)
    return biased


def tolerance_bit(sampled_id: int, report: OutlierReport, original_selected) -> int:
    """1 iff the sampled token is an upper outlier admitted from the wrong side.

    ``original_selected`` is the pre-augmentation side set (bool vector or a
    set of ids).  A 1 here means the observed partition bit is flipped
    relative to the intended bit, which is exactly what the matching
    correction bit undoes at detection time.
    """
    if not report.contains(sampled_id):
        return 0
    if isinstance(original_selected, np.ndarray):
        inside = bool(original_selected[sampled_id])
    else:
        inside = sampled_id in original_selected
    return 0 if inside else 1


def greedy_argmax(probs: np.ndarray) -> int:
    """Plain argmax; ties break toward the lowest token id."""
    return int(np.argmax(probs))


def biased_argmax(probs: np.ndarray, member: np.ndarray) -> int:
    """Argmax of the gap-biased distribution, restricted to the side set.

    Equivalent to taking the global argmax of ``apply_gap_bias`` output with
    ties broken toward selected entries (the bias lifts the side maximum to
    at least the global maximum), but computed on the raw values so float
    rounding can never push the winner off-side.  Ties break toward the
    lowest token id.
    """
    ids = np.flatnonzero(member)
    if ids.size == 0:
        return greedy_argmax(probs)
    return int(ids[np.argmax(probs[ids])])
