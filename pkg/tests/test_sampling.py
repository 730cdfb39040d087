"""Fragment sampling tests: exactness, uniformity, disjointness, overlap.

Uniformity checks use chi-square and Wilson bounds with seeds pinned, so
they are deterministic.  Critical values frozen from scipy.stats.chi2.ppf
run independently: 0.999 quantile at df=49 is 85.351, at df=5 is 20.515.
"""

import itertools
import math

import numpy as np
import pytest

from qdfi import (FragmentSample, SamplingError, enumerate_fragments,
                  estimate_overlap_eta, partition_disjoint,
                  sample_random_fragments, wilson_interval)

CHI2_999_DF49 = 85.351


def _rows_as_tuples(sample):
    return [tuple(r) for r in sample.indices]


class TestFragmentSampleValidation:
    def test_accepts_sorted_rows(self):
        s = FragmentSample(indices=np.array([[0, 2], [1, 3]]),
                           protocol="random", m=2, seed=0)
        s.validate(4)

    def test_rejects_out_of_range(self):
        s = FragmentSample(indices=np.array([[0, 5]]), protocol="random",
                           m=2, seed=0)
        with pytest.raises(SamplingError):
            s.validate(4)

    def test_rejects_duplicate_within_row(self):
        with pytest.raises(SamplingError):
            FragmentSample(indices=np.array([[1, 1]]), protocol="random",
                           m=2, seed=0).validate(4)

    def test_rejects_unknown_protocol(self):
        with pytest.raises(SamplingError):
            FragmentSample(indices=np.array([[0, 1]]), protocol="fancy",
                           m=2, seed=0)

    def test_disjoint_claim_is_checked(self):
        s = FragmentSample(indices=np.array([[0, 1], [1, 2]]),
                           protocol="disjoint", m=2, seed=0)
        with pytest.raises(SamplingError):
            s.validate(4)


class TestRandomFragments:
    def test_full_environment_is_the_only_subset(self):
        s = sample_random_fragments(5, 5, 3, seed=0)
        assert _rows_as_tuples(s) == [(0, 1, 2, 3, 4)] * 3

    def test_deterministic(self):
        a = sample_random_fragments(40, 7, 100, seed=5)
        b = sample_random_fragments(40, 7, 100, seed=5)
        assert np.array_equal(a.indices, b.indices)
        c = sample_random_fragments(40, 7, 100, seed=6)
        assert not np.array_equal(a.indices, c.indices)

    def test_rows_sorted_and_valid(self):
        for m in (1, 3, 7, 20, 39):  # spans both internal sampling paths
            s = sample_random_fragments(40, m, 200, seed=2)
            s.validate(40)
            assert s.indices.shape == (200, m)

    def test_singleton_uniformity(self):
        # N=50, m=1: per-index counts against the flat law, df = 49
        n = 50_000
        s = sample_random_fragments(50, 1, n, seed=17)
        counts = np.bincount(s.indices[:, 0], minlength=50)
        expected = n / 50
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < CHI2_999_DF49

    def test_pair_frequencies(self):
        # N=4, m=2: all 6 pairs near 1/6 (exercises the rejection path)
        n = 60_000
        s = sample_random_fragments(4, 2, n, seed=19)
        seen = {}
        for row in _rows_as_tuples(s):
            seen[row] = seen.get(row, 0) + 1
        assert set(seen) == set(itertools.combinations(range(4), 2))
        for count in seen.values():
            assert abs(count / n - 1 / 6) < 0.01

    def test_enumerable_uniformity_wilson(self):
        # N=6, m=3 (m*m > N exercises the permutation path): each of the
        # C(6,3)=20 subsets should hold 1/20 inside its own 99% band
        n = 100_000
        s = sample_random_fragments(6, 3, n, seed=23)
        seen = {}
        for row in _rows_as_tuples(s):
            seen[row] = seen.get(row, 0) + 1
        assert len(seen) == 20
        for count in seen.values():
            lo, hi = wilson_interval(count, n, alpha=0.01)
            assert lo <= 1 / 20 <= hi

    def test_errors(self):
        with pytest.raises(SamplingError):
            sample_random_fragments(10, 0, 5, seed=0)
        with pytest.raises(SamplingError):
            sample_random_fragments(10, 11, 5, seed=0)
        with pytest.raises(SamplingError):
            sample_random_fragments(10, 2, 0, seed=0)


class TestDisjointPartition:
    def test_floor_count_and_coverage(self):
        s = partition_disjoint(10, 3, seed=0)
        assert s.n_fragments == 3
        flat = s.indices.ravel()
        assert len(set(flat.tolist())) == 9

    def test_pairwise_disjoint(self):
        s = partition_disjoint(6, 2, seed=0)
        assert s.n_fragments == 3
        rows = [set(r) for r in s.indices]
        for a, b in itertools.combinations(rows, 2):
            assert not (a & b)
        s.validate(6)

    def test_oversized_fragment_rejected(self):
        with pytest.raises(SamplingError):
            partition_disjoint(6, 7, seed=0)

    def test_block_cap(self):
        s = partition_disjoint(5000, 10, seed=3, block_cap=400)
        assert s.n_fragments == 400
        s.validate(5000)

    def test_cap_never_exceeds_available_blocks(self):
        s = partition_disjoint(12, 5, seed=1, block_cap=400)
        assert s.n_fragments == 2

    def test_deterministic(self):
        a = partition_disjoint(100, 7, seed=11)
        b = partition_disjoint(100, 7, seed=11)
        assert np.array_equal(a.indices, b.indices)
        c = partition_disjoint(100, 7, seed=12)
        assert not np.array_equal(a.indices, c.indices)


class TestEnumerateFragments:
    def test_all_pairs_lexicographic(self):
        s = enumerate_fragments(4, 2)
        assert _rows_as_tuples(s) == [(0, 1), (0, 2), (0, 3), (1, 2),
                                      (1, 3), (2, 3)]

    def test_zero_size_rejected(self):
        with pytest.raises(SamplingError):
            enumerate_fragments(5, 0)

    def test_cap_exceeded_names_the_count(self):
        with pytest.raises(SamplingError) as err:
            enumerate_fragments(30, 15, cap=200_000)
        assert str(math.comb(30, 15)) in str(err.value)

    def test_count_matches_binomial(self):
        for n, m in [(6, 3), (8, 1), (7, 7)]:
            s = enumerate_fragments(n, m)
            assert s.n_fragments == math.comb(n, m)
            s.validate(n)


class TestOverlapEta:
    def test_disjoint_sample_has_zero_overlap(self):
        s = partition_disjoint(24, 4, seed=0)
        stat = estimate_overlap_eta(s, 50, seed=1)
        assert stat.eta == 0.0
        assert stat.pairs_used == 50

    def test_identical_fragments_full_overlap(self):
        idx = np.tile(np.array([2, 5, 9]), (4, 1))
        s = FragmentSample(indices=idx, protocol="random", m=3, seed=0)
        stat = estimate_overlap_eta(s, 20, seed=1)
        assert stat.eta == 1.0

    def test_single_pair_value(self):
        # {1,2} vs {2,3}: intersection 1, union 3
        idx = np.array([[1, 2], [2, 3]])
        s = FragmentSample(indices=idx, protocol="random", m=2, seed=0)
        stat = estimate_overlap_eta(s, 1, seed=4)
        assert abs(stat.eta - 1 / 3) < 1e-15

    def test_eta_shrinks_with_environment(self):
        # fixed m = 4: expected Jaccard falls as N grows
        etas = []
        for n_sites in (20, 80, 320):
            s = sample_random_fragments(n_sites, 4, 300, seed=7)
            etas.append(estimate_overlap_eta(s, 200, seed=8).eta)
        assert etas[0] > etas[1] > etas[2]

    def test_deterministic(self):
        s = sample_random_fragments(30, 5, 100, seed=9)
        a = estimate_overlap_eta(s, 80, seed=3)
        b = estimate_overlap_eta(s, 80, seed=3)
        assert a.eta == b.eta

    def test_needs_two_fragments(self):
        s = sample_random_fragments(10, 2, 1, seed=0)
        with pytest.raises(SamplingError):
            estimate_overlap_eta(s, 10, seed=0)
