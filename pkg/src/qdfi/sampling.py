"""Fragment families over an N-site environment.

Three protocols produce the fragment sets whose adequacy gets counted:

* ``random``     -- independent uniform m-subsets (repeats across draws
  allowed, repeats within a draw impossible),
* ``disjoint``   -- floor(N/m) non-overlapping blocks cut from one seeded
  permutation, capped at min(N, 400) blocks,
* ``exhaustive`` -- every m-subset in lexicographic order, for small N.

Fragments are stored as rows of a 2-d index array, each row sorted
strictly increasing.  All draws run through numpy PCG64 generators seeded
explicitly, so identical arguments give byte-identical samples on any
machine and thread count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SamplingError",
    "FragmentSample",
    "OverlapStat",
    "PROTOCOLS",
    "sample_random_fragments",
    "partition_disjoint",
    "enumerate_fragments",
    "estimate_overlap_eta",
]

PROTOCOLS = ("random", "disjoint", "exhaustive")

# Disjoint runs keep at most this many blocks; retained blocks are chosen
# uniformly so the family stays exchangeable.
DEFAULT_BLOCK_CAP = 400
# Exhaustive enumeration refuses to materialize more subsets than this.
DEFAULT_ENUMERATION_CAP = 200_000


class SamplingError(ValueError):
    """Invalid sampling request (bad sizes, blown enumeration cap, ...)."""


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class FragmentSample:
    """A family of same-size fragments: one sorted index row per fragment."""

    indices: np.ndarray
    protocol: str
    m: int
    seed: int
    n_fragments: int = field(init=False)

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices)
        if idx.ndim != 2:
            raise SamplingError("fragment indices must be a 2-d array")
        if self.protocol not in PROTOCOLS:
            raise SamplingError(f"unknown protocol {self.protocol!r}")
        if idx.shape[1] != self.m:
            raise SamplingError("row width does not match fragment size m")
        idx = np.ascontiguousarray(idx, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "n_fragments", int(idx.shape[0]))

    def fragments(self):
        """Iterate fragments as 1-d sorted index arrays."""
        for row in self.indices:
            yield row

    def validate(self, n_sites: int) -> None:
        """Assert the structural invariants; raises SamplingError."""
        idx = self.indices
        if idx.size and (idx.min() < 0 or idx.max() >= n_sites):
            raise SamplingError("fragment index out of range")
        if idx.shape[1] > 1 and np.any(np.diff(idx, axis=1) <= 0):
            raise SamplingError("fragment rows must be strictly increasing")
        if self.protocol == "disjoint":
            flat = idx.ravel()
            if np.unique(flat).size != flat.size:
                raise SamplingError("disjoint blocks share sites")


@dataclass(frozen=True)
class OverlapStat:
    """Mean pairwise Jaccard overlap of a fragment family."""

    eta: float
    pairs_used: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eta) and 0.0 <= self.eta <= 1.0):
            raise SamplingError(f"eta must lie in [0, 1], got {self.eta}")
        if self.pairs_used < 1:
            raise SamplingError("pairs_used must be positive")


def _check_sizes(n_sites: int, m: int) -> None:
    if n_sites < 1:
        raise SamplingError(f"environment needs at least one site, "
                            f"got N = {n_sites}")
    if m < 1:
        raise SamplingError(f"fragment size must be >= 1, got m = {m}")
    if m > n_sites:
        raise SamplingError(f"fragment size m = {m} exceeds N = {n_sites}")


def _distinct_rows_by_rejection(rng: np.random.Generator, n_sites: int,
                                m: int, n_rows: int) -> np.ndarray:
    """Uniform m-subsets via resampling rows that drew a duplicate index.

    Exact: conditioning independent uniform draws on all-distinct gives
    the uniform distribution over ordered m-tuples, hence over subsets.
    """
    idx = rng.integers(0, n_sites, size=(n_rows, m), dtype=np.int64)
    idx.sort(axis=1)
    if m == 1:
        return idx
    bad = np.flatnonzero((np.diff(idx, axis=1) == 0).any(axis=1))
    while bad.size:
        fresh = rng.integers(0, n_sites, size=(bad.size, m), dtype=np.int64)
        fresh.sort(axis=1)
        idx[bad] = fresh
        still = (np.diff(fresh, axis=1) == 0).any(axis=1)
        bad = bad[still]
    return idx


def _distinct_rows_by_keys(rng: np.random.Generator, n_sites: int,
                           m: int, n_rows: int) -> np.ndarray:
    """Uniform m-subsets as the m smallest of N iid uniform keys per row.

    Ranking iid continuous keys induces a uniform random permutation, so
    the bottom-m index set is exactly uniform.  Used when m^2 > N and
    rejection would churn; costs O(n_rows * N) memory so callers only
    reach it for modest N.
    """
    keys = rng.random((n_rows, n_sites))
    picked = np.argpartition(keys, m - 1, axis=1)[:, :m].astype(np.int64)
    return np.sort(picked, axis=1)


def sample_random_fragments(n_sites: int, m: int, n_fragments: int,
                            seed: int) -> FragmentSample:
    """Draw n_fragments independent uniform m-subsets of {0, ..., N-1}.

    Distinct draws may repeat the same subset; indices within a draw never
    repeat.  Deterministic in (n_sites, m, n_fragments, seed).
    """
    _check_sizes(n_sites, m)
    if n_fragments < 1:
        raise SamplingError("n_fragments must be >= 1")
    rng = _rng(seed)
    if m == n_sites:
        rows = np.tile(np.arange(n_sites, dtype=np.int64), (n_fragments, 1))
    elif m * m <= n_sites:
        rows = _distinct_rows_by_rejection(rng, n_sites, m, n_fragments)
    else:
        rows = _distinct_rows_by_keys(rng, n_sites, m, n_fragments)
    return FragmentSample(indices=rows, protocol="random", m=m, seed=seed)


def partition_disjoint(n_sites: int, m: int, seed: int,
                       block_cap: int = DEFAULT_BLOCK_CAP) -> FragmentSample:
    """Cut floor(N/m) disjoint m-blocks from one seeded permutation.

    When the partition yields more than min(N, block_cap) blocks, a
    uniformly chosen subset of blocks of exactly that size is retained.
    Leftover sites (N mod m of them) are dropped.
    """
    _check_sizes(n_sites, m)
    if block_cap < 1:
        raise SamplingError("block_cap must be >= 1")
    rng = _rng(seed)
    perm = rng.permutation(n_sites)
    n_blocks = n_sites // m
    blocks = perm[: n_blocks * m].reshape(n_blocks, m)
    cap = min(n_sites, block_cap)
    if n_blocks > cap:
        keep = np.sort(rng.choice(n_blocks, size=cap, replace=False))
        blocks = blocks[keep]
    rows = np.sort(blocks, axis=1)
    return FragmentSample(indices=rows, protocol="disjoint", m=m, seed=seed)


def enumerate_fragments(n_sites: int, m: int,
                        cap: int = DEFAULT_ENUMERATION_CAP) -> FragmentSample:
    """All C(N, m) fragments in lexicographic order.

    Refuses to enumerate past ``cap`` subsets; the error names the exact
    count so callers can report it.
    """
    _check_sizes(n_sites, m)
    count = math.comb(n_sites, m)
    if count > cap:
        raise SamplingError(
            f"C({n_sites}, {m}) = {count} subsets exceed the enumeration "
            f"cap of {cap}")
    flat = np.fromiter(
        itertools.chain.from_iterable(
            itertools.combinations(range(n_sites), m)),
        dtype=np.int64, count=count * m)
    rows = flat.reshape(count, m)
    return FragmentSample(indices=rows, protocol="exhaustive", m=m, seed=0)


def estimate_overlap_eta(sample: FragmentSample, n_pairs: int,
                         seed: int) -> OverlapStat:
    """Mean Jaccard overlap |F_i & F_j| / |F_i | F_j| over random pairs.

    Pairs are uniformly drawn unordered pairs of distinct fragment
    positions (the fragments themselves may be equal sets, counting as
    overlap 1).  Requires at least two fragments in the family.
    """
    if n_pairs < 1:
        raise SamplingError("n_pairs must be >= 1")
    n = sample.n_fragments
    if n < 2:
        raise SamplingError("overlap estimation needs >= 2 fragments")
    rng = _rng(seed)
    first = rng.integers(0, n, size=n_pairs)
    # Offset in [1, n-1] makes the second position uniform over the
    # remaining fragments, so no rejection loop is needed.
    second = (first + 1 + rng.integers(0, n - 1, size=n_pairs)) % n
    a = sample.indices[first]
    b = sample.indices[second]
    merged = np.sort(np.concatenate([a, b], axis=1), axis=1)
    inter = (merged[:, 1:] == merged[:, :-1]).sum(axis=1)
    union = 2 * sample.m - inter
    eta = float(np.mean(inter / union))
    # Guard against accumulated roundoff pushing past the closed interval.
    eta = min(max(eta, 0.0), 1.0)
    return OverlapStat(eta=eta, pairs_used=n_pairs)
