"""Adequacy-fraction estimation and onset extraction.

Per cell (t, m, delta) the engine produces a Bernoulli sample of adequacy
flags.  This module turns those into:

* Wilson score intervals for the adequate fraction (robust at 0/1 counts,
  unlike the Wald interval),
* an isotonic (PAVA) smoothing of the fraction along m, legitimate
  because adding sites never destroys adequacy in expectation,
* the onset size m* = min{m : smoothed fraction >= theta} and the derived
  redundancy R = N/m*, functional information FI = log2 R, and the
  overlap-corrected variants,
* onset confidence bounds by two routes, Wilson-band inversion and a
  percentile bootstrap, combined by keeping the tighter interval.

Absent onsets (threshold never crossed on the m grid) are first-class:
they are returned as None and serialized as empty fields, never as a
sentinel grid value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "EstimationError",
    "AdequacyCell",
    "IsotonicCurve",
    "OnsetEstimate",
    "RedundancyValues",
    "wilson_interval",
    "adequacy_cell",
    "isotonic_fit",
    "onset_from_curve",
    "redundancy_fi",
    "onset_ci_inversion",
    "bootstrap_onset",
    "combine_onset_ci",
]

_LN2 = math.log(2.0)


class EstimationError(ValueError):
    """Invalid estimation input (counts, grids, or curve shapes)."""


def wilson_interval(successes: int, trials: int,
                    alpha: float = 0.05) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Returns (low, high) clamped to [0, 1].  Degenerate counts stay
    informative: k = 0 gives low = 0 and k = n gives high = 1 exactly.
    """
    if trials < 1:
        raise EstimationError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise EstimationError(
            f"successes must lie in [0, {trials}], got {successes}")
    if not 0.0 < alpha < 1.0:
        raise EstimationError(f"alpha must lie in (0, 1), got {alpha}")
    lo, hi = _wilson_bounds(np.array([successes]), np.array([trials]), alpha)
    return float(lo[0]), float(hi[0])


def _wilson_bounds(k: np.ndarray, n: np.ndarray,
                   alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized Wilson bounds; no input validation."""
    z = NormalDist().inv_cdf(1.0 - alpha / 2.0)
    k = k.astype(float)
    n = n.astype(float)
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = (z / denom) * np.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    lo = np.clip(center - half, 0.0, 1.0)
    hi = np.clip(center + half, 0.0, 1.0)
    # center - half cancels imperfectly at the degenerate counts; the
    # algebraic bounds there are exact
    lo = np.where(k == 0, 0.0, lo)
    hi = np.where(k == n, 1.0, hi)
    return lo, hi


@dataclass(frozen=True)
class AdequacyCell:
    """Estimated adequate fraction for one (t, m, delta, protocol) cell.

    phi_iso is filled in after the per-m isotonic pass; it is None on a
    freshly estimated cell.
    """

    t: float
    m: int
    delta: float
    protocol: str
    n: int
    k: int
    p_hat: float
    ci_low: float
    ci_high: float
    phi_iso: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise EstimationError("cell needs n >= 1 flags")
        if not 0 <= self.k <= self.n:
            raise EstimationError("cell count k out of range")
        if abs(self.p_hat - self.k / self.n) > 1e-12:
            raise EstimationError("p_hat inconsistent with k/n")
        if not (0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0):
            raise EstimationError("confidence bounds must bracket p_hat "
                                  "within [0, 1]")


def adequacy_cell(flags, t: float, m: int, delta: float, protocol: str,
                  alpha: float = 0.05) -> AdequacyCell:
    """Summarize a Bernoulli adequacy sample into an AdequacyCell."""
    arr = np.asarray(flags, dtype=bool)
    if arr.ndim != 1 or arr.size < 1:
        raise EstimationError("flags must be a nonempty 1-d array")
    n = int(arr.size)
    k = int(arr.sum())
    lo, hi = wilson_interval(k, n, alpha)
    return AdequacyCell(t=t, m=m, delta=delta, protocol=protocol, n=n, k=k,
                        p_hat=k / n, ci_low=lo, ci_high=hi)


def isotonic_fit(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto nondecreasing sequences.

    Pool-adjacent-violators: walk left to right keeping a stack of blocks;
    whenever the trailing block mean drops below its predecessor, merge
    them into one weighted block.  Each pooled block of the output carries
    the weighted mean of its inputs, so an already monotone input comes
    back unchanged.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise EstimationError("values must be a nonempty 1-d array")
    if not np.all(np.isfinite(v)):
        raise EstimationError("values must be finite")
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != v.shape:
            raise EstimationError("weights must match values in length")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise EstimationError("weights must be finite and positive")
    means: list[float] = []
    wsum: list[float] = []
    counts: list[int] = []
    for vi, wi in zip(v, w):
        means.append(float(vi))
        wsum.append(float(wi))
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            wm = wsum[-2] + wsum[-1]
            means[-2] = (means[-2] * wsum[-2] + means[-1] * wsum[-1]) / wm
            wsum[-2] = wm
            counts[-2] += counts[-1]
            del means[-1], wsum[-1], counts[-1]
    return np.repeat(np.asarray(means), np.asarray(counts))


@dataclass(frozen=True, eq=False)
class IsotonicCurve:
    """Smoothed adequacy fraction phi_iso over a strictly increasing m grid."""

    m_grid: np.ndarray
    phi_iso: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.m_grid, dtype=np.int64)
        phi = np.asarray(self.phi_iso, dtype=float)
        if grid.ndim != 1 or phi.shape != grid.shape or grid.size < 1:
            raise EstimationError("curve needs matching 1-d m_grid/phi_iso")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise EstimationError("m_grid must be strictly increasing")
        if np.any(np.diff(phi) < 0.0):
            raise EstimationError("phi_iso must be nondecreasing")
        grid.setflags(write=False)
        phi = phi.copy()
        phi.setflags(write=False)
        object.__setattr__(self, "m_grid", grid)
        object.__setattr__(self, "phi_iso", phi)

    @classmethod
    def fit(cls, m_grid, values, weights=None) -> "IsotonicCurve":
        return cls(m_grid=np.asarray(m_grid, dtype=np.int64),
                   phi_iso=isotonic_fit(values, weights))


def onset_from_curve(curve: IsotonicCurve, theta: float) -> Optional[int]:
    """Smallest m with phi_iso >= theta (closed comparison), or None.

    Ties at the boundary resolve to the smallest qualifying m.
    """
    if not 0.0 < theta < 1.0:
        raise EstimationError(f"theta must lie in (0, 1), got {theta}")
    hits = np.flatnonzero(curve.phi_iso >= theta)
    if hits.size == 0:
        return None
    return int(curve.m_grid[hits[0]])


class RedundancyValues(NamedTuple):
    r: float
    r_eff: float
    fi: float
    fi_eff: float


def redundancy_fi(n_sites: int, m_star: int,
                  eta: float = 0.0) -> RedundancyValues:
    """Redundancy R = N/m*, FI = log2 R, and the overlap-corrected pair.

    The correction divides R by the effective multiple-counting factor of
    overlapping fragments: R_eff = R (1 - eta) / (1 + eta).  eta must lie
    in [0, 1); eta = 1 would mean a family of identical fragments.
    """
    if n_sites < 1:
        raise EstimationError("n_sites must be >= 1")
    if not 1 <= m_star <= n_sites:
        raise EstimationError(
            f"m_star must lie in [1, {n_sites}], got {m_star}")
    if not (math.isfinite(eta) and 0.0 <= eta < 1.0):
        raise EstimationError(f"eta must lie in [0, 1), got {eta}")
    r = n_sites / m_star
    r_eff = r * (1.0 - eta) / (1.0 + eta)
    return RedundancyValues(r=r, r_eff=r_eff, fi=math.log2(r),
                            fi_eff=math.log2(r_eff))


def _check_cell_group(cells: Sequence[AdequacyCell]) -> None:
    if not cells:
        raise EstimationError("need at least one cell")
    ms = [c.m for c in cells]
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise EstimationError("cells must be sorted by strictly "
                              "increasing m")


def onset_ci_inversion(cells: Sequence[AdequacyCell],
                       theta: float) -> Tuple[Optional[int], Optional[int]]:
    """Onset bounds by inverting the per-m Wilson band.

    After isotonic smoothing of each band edge (weights = cell sizes),
    the upper onset bound is the first m whose smoothed lower edge clears
    theta, and the lower bound the first m whose smoothed upper edge
    does.  PAVA preserves pointwise order, so m_lo <= m* <= m_hi whenever
    all three exist.
    """
    _check_cell_group(cells)
    if not 0.0 < theta < 1.0:
        raise EstimationError(f"theta must lie in (0, 1), got {theta}")
    grid = np.array([c.m for c in cells], dtype=np.int64)
    w = np.array([c.n for c in cells], dtype=float)
    iso_low = isotonic_fit(np.array([c.ci_low for c in cells]), w)
    iso_high = isotonic_fit(np.array([c.ci_high for c in cells]), w)
    m_hi = onset_from_curve(IsotonicCurve(grid, iso_low), theta)
    m_lo = onset_from_curve(IsotonicCurve(grid, iso_high), theta)
    return m_lo, m_hi


def _batch_onset_indices(p: np.ndarray, weights: np.ndarray,
                         theta: float) -> np.ndarray:
    """Onset grid index after PAVA, for a whole batch at once; -1 = absent.

    Uses the minimax form of the isotonic fit: with cumulative sums
    C[j] = sum_{l<j} w_l (p_l - theta), the fitted value at j clears theta
    iff min_{k>j} C[k] >= min_{i<=j} C[i].  This avoids running PAVA per
    replicate and is exercised against the direct route in the tests.
    """
    d = weights[None, :] * (p - theta)
    c = np.concatenate([np.zeros((p.shape[0], 1)), np.cumsum(d, axis=1)],
                       axis=1)
    prefix_min = np.minimum.accumulate(c, axis=1)[:, :-1]
    suffix_min = np.minimum.accumulate(c[:, ::-1], axis=1)[:, ::-1][:, 1:]
    ok = suffix_min >= prefix_min
    hit = ok.any(axis=1)
    return np.where(hit, ok.argmax(axis=1), -1)


def _bootstrap_counts(m_values: np.ndarray, k: np.ndarray, n: np.ndarray,
                      theta: float, n_replicates: int,
                      seed: int) -> Tuple[Optional[int], Optional[int]]:
    """Percentile bootstrap of the onset from per-m counts.

    Resampling n Bernoulli flags with replacement is a Binomial(n, k/n)
    draw on the adequate count, which is how replicates are generated
    here.  Replicates whose smoothed curve never reaches theta contribute
    +inf, so an absent percentile reports an absent bound.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    p_hat = k / n
    k_star = rng.binomial(n.astype(np.int64), p_hat,
                          size=(n_replicates, n.size))
    p_star = k_star / n
    idx = _batch_onset_indices(p_star, n.astype(float), theta)
    onsets = np.where(idx >= 0,
                      m_values[np.maximum(idx, 0)].astype(float), np.inf)
    lo_q, hi_q = np.quantile(onsets, [0.025, 0.975], method="nearest")
    lo = int(lo_q) if math.isfinite(lo_q) else None
    hi = int(hi_q) if math.isfinite(hi_q) else None
    return lo, hi


def bootstrap_onset(flags_by_m: Sequence[Tuple[int, np.ndarray]],
                    theta: float, n_replicates: int = 1000,
                    seed: int = 0) -> Tuple[Optional[int], Optional[int]]:
    """2.5/97.5 percentile bounds on the onset from resampled flags.

    flags_by_m pairs each m with its Bernoulli flag array, sorted by
    strictly increasing m.  Each replicate resamples flags with
    replacement within every m, refits the isotonic curve with the same
    cell-size weights, and reads off the onset.  Deterministic in seed;
    with n_replicates = 1 both bounds equal the single replicate onset.
    """
    if n_replicates < 1:
        raise EstimationError("n_replicates must be >= 1")
    if not 0.0 < theta < 1.0:
        raise EstimationError(f"theta must lie in (0, 1), got {theta}")
    if not flags_by_m:
        raise EstimationError("flags_by_m must be nonempty")
    ms = [m for m, _ in flags_by_m]
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise EstimationError("flags_by_m must be sorted by strictly "
                              "increasing m")
    k = []
    n = []
    for _, flags in flags_by_m:
        arr = np.asarray(flags, dtype=bool)
        if arr.ndim != 1 or arr.size < 1:
            raise EstimationError("each flag array must be nonempty 1-d")
        k.append(int(arr.sum()))
        n.append(int(arr.size))
    return _bootstrap_counts(np.asarray(ms, dtype=np.int64),
                             np.asarray(k, dtype=float),
                             np.asarray(n, dtype=float),
                             theta, n_replicates, seed)


def combine_onset_ci(
        inversion: Tuple[Optional[int], Optional[int]],
        bootstrap: Tuple[Optional[int], Optional[int]],
) -> Tuple[Optional[int], Optional[int]]:
    """Keep the tighter of the two onset intervals.

    An interval is scored by (number of absent bounds, width); lower is
    better, and exact ties go to the inversion interval, which carries an
    explicit coverage statement.  If both intervals are fully absent the
    result is (None, None).
    """
    def score(iv: Tuple[Optional[int], Optional[int]]):
        lo, hi = iv
        absent = (lo is None) + (hi is None)
        width = (hi - lo) if absent == 0 else math.inf
        return (absent, width)

    if inversion == (None, None) and bootstrap == (None, None):
        return (None, None)
    return bootstrap if score(bootstrap) < score(inversion) else inversion


@dataclass(frozen=True)
class OnsetEstimate:
    """Onset and derived redundancy for one (t, delta) of a trajectory.

    m_star is None when the smoothed curve never reaches theta on the m
    grid; the derived fields are then None as well.  eta records the
    overlap actually used for the corrected values (0.0 when the family
    had a single fragment and no pair estimate existed).
    """

    t: float
    delta: float
    m_star: Optional[int]
    m_star_lo: Optional[int]
    m_star_hi: Optional[int]
    r: Optional[float]
    r_eff: Optional[float]
    eta: Optional[float]
    fi: Optional[float]
    fi_eff: Optional[float]
