"""Feature construction: padding, raw aggregation, statistics, DFT dominant
frequencies (against a brute-force O(n^2) transform), and vector assembly."""

import cmath
import math

import numpy as np
import pytest

from ntpdetect.features import (
    FeatureConfig,
    aggregate_raw,
    build_features,
    cross_features,
    dft_topk,
    featurize_dataset,
    pad,
    stat_features,
)
from ntpdetect.data import synth_generate
from tests.test_data import make_record


def dft_topk_oracle(seq, k):
    """Brute-force DFT, then rank non-DC first-half bins by magnitude."""
    seq = list(map(float, seq))
    n = len(seq)
    mags = []
    for b in range(1, n // 2 + 1):
        coeff = sum(seq[t] * cmath.exp(-2j * math.pi * b * t / n) for t in range(n))
        mags.append((b, abs(coeff)))
    tol = 100.0 * n * np.finfo(float).eps * max(1.0, max(abs(v) for v in seq))
    mags.sort(key=lambda p: (-p[1], p[0]))
    out = [b / n for b, m in mags if m > tol][:k]
    return out + [0.0] * (k - len(out))


class TestPad:
    def test_pads_with_zeros(self):
        assert pad([0.5, 0.9], 4).tolist() == [0.5, 0.9, 0.0, 0.0]

    def test_exact_length_unchanged(self):
        assert pad([0.1, 0.2, 0.3], 3).tolist() == [0.1, 0.2, 0.3]

    def test_too_long_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            pad([0.1, 0.2], 1)


class TestAggregateRaw:
    def test_subtract(self):
        fv = aggregate_raw([0.8], [0.3], "subtract", 2)
        assert fv.values.tolist() == pytest.approx([0.5, 0.0])
        assert fv.names == ("raw.subtract.0", "raw.subtract.1")

    def test_divide_formula(self):
        fv = aggregate_raw([1.0], [1.0], "divide", 1)
        assert fv.values.tolist() == [0.5]

    def test_divide_small_linguistic(self):
        fv = aggregate_raw([0.6], [0.001], "divide", 1)
        assert fv.values[0] == pytest.approx(0.6 / 1.001)

    def test_concat_doubles_length(self):
        fv = aggregate_raw([0.5, 0.6], [0.7, 0.8], "concat", 3)
        assert fv.values.tolist() == pytest.approx([0.5, 0.6, 0.0, 0.7, 0.8, 0.0])

    def test_single_source_modes(self):
        assert aggregate_raw([0.5], [0.7], "description_only", 2).values.tolist() == [0.5, 0.0]
        assert aggregate_raw([0.5], [0.7], "linguistic_only", 2).values.tolist() == [0.7, 0.0]

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="lengths differ"):
            aggregate_raw([0.5, 0.6], [0.7], "subtract", 4)

    def test_divide_range_property(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 20))
            desc = rng.uniform(1e-6, 1.0, n)
            ling = rng.uniform(1e-6, 1.0, n)
            vals = aggregate_raw(desc, ling, "divide", n).values
            assert np.all(vals >= 0.0) and np.all(vals <= 1.0)


class TestDftTopk:
    def test_zero_k_is_empty(self):
        assert dft_topk([0.1, 0.2, 0.3], 0).size == 0

    def test_pure_cosine_bin2(self):
        n = 16
        seq = 0.5 + 0.25 * np.cos(2 * np.pi * 2 * np.arange(n) / n)
        assert dft_topk(seq, 1).tolist() == [2 / 16]

    def test_constant_sequence_zero_filled(self):
        assert dft_topk([0.4] * 10, 2).tolist() == [0.0, 0.0]

    def test_matches_bruteforce_on_random_signals(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            n = int(rng.integers(1, 45))
            seq = rng.uniform(0.01, 1.0, n)
            k = int(rng.integers(0, 6))
            np.testing.assert_allclose(dft_topk(seq, k), dft_topk_oracle(seq, k), atol=1e-9)

    def test_offset_invariance(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            n = int(rng.integers(4, 40))
            seq = rng.uniform(0.1, 0.9, n)
            np.testing.assert_allclose(dft_topk(seq, 3), dft_topk(seq + 0.5, 3), atol=1e-12)

    def test_two_tone_ordering(self):
        n = 20
        t = np.arange(n)
        seq = 0.5 + 0.3 * np.cos(2 * np.pi * 5 * t / n) + 0.1 * np.cos(2 * np.pi * 2 * t / n)
        assert dft_topk(seq, 2).tolist() == pytest.approx([5 / 20, 2 / 20])


class TestStatFeatures:
    def test_constant_sequence(self):
        c = 0.7
        got = dict(stat_features([c, c, c], 0))
        assert got["mean"] == pytest.approx(c)
        assert got["std"] == pytest.approx(0.0, abs=1e-15)
        assert got["mean_log"] == pytest.approx(math.log(c))
        assert got["mean_exp"] == pytest.approx(math.exp(c))

    def test_hand_computed_pair(self):
        got = dict(stat_features([0.5, 1.0], 0))
        assert got["mean"] == pytest.approx(0.75)
        assert got["std"] == pytest.approx(0.25)
        assert got["mean_log"] == pytest.approx(math.log(0.5) / 2)
        assert got["mean_exp"] == pytest.approx((math.exp(0.5) + math.e) / 2)

    def test_log_of_one_is_zero(self):
        assert dict(stat_features([1.0], 0))["mean_log"] == 0.0

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            stat_features([0.5, 0.0], 0)

    def test_ranges_for_probability_inputs(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            seq = rng.uniform(1e-4, 1.0, int(rng.integers(1, 30)))
            got = dict(stat_features(seq, 0))
            assert 1.0 < got["mean_exp"] <= math.e
            assert got["mean_log"] <= 0.0
            assert got["std"] >= 0.0

    def test_includes_dft_names(self):
        names = [n for n, _ in stat_features([0.2, 0.6, 0.4], 3)]
        assert names == ["mean", "std", "mean_log", "mean_exp", "dft.0", "dft.1", "dft.2"]


class TestCrossFeatures:
    def test_identical_sequences_ratio_one(self):
        got = dict(cross_features([0.3, 0.8], [0.3, 0.8]))
        assert got["cross.min_ratio"] == pytest.approx(1.0)

    def test_hand_computed(self):
        got = dict(cross_features([0.8], [0.4]))
        assert got["cross.mean_product"] == pytest.approx(0.32)
        assert got["cross.min_ratio"] == pytest.approx(0.5)

    def test_mean_product(self):
        got = dict(cross_features([0.5, 0.5], [0.5, 0.5]))
        assert got["cross.mean_product"] == pytest.approx(0.25)


class TestBuildFeatures:
    def test_statistical_minimal_is_four_features(self):
        fv = build_features(make_record(), FeatureConfig(kind="statistical"))
        assert fv.names == ("desc.mean", "desc.std", "desc.mean_log", "desc.mean_exp")

    def test_full_statistical_is_sixteen_features(self):
        cfg = FeatureConfig(
            kind="statistical",
            use_linguistic=True,
            dft_k=2,
            include_llava_pred=True,
            include_paligemma_pred=True,
        )
        fv = build_features(make_record(paligemma_pred=0.4), cfg)
        assert len(fv.names) == 16
        assert fv.names[-2:] == ("pred.llava", "pred.paligemma")
        assert "cross.mean_product" in fv.names and "ling.dft.1" in fv.names

    def test_raw_concat_is_double_pad_len(self):
        cfg = FeatureConfig(kind="raw", aggregation="concat", pad_len=42)
        fv = build_features(make_record(), cfg)
        assert len(fv.names) == 84

    def test_missing_pred_raises_with_record_and_field(self):
        cfg = FeatureConfig(kind="statistical", include_paligemma_pred=True)
        with pytest.raises(ValueError, match="record r1.*paligemma_pred"):
            build_features(make_record(paligemma_pred=None), cfg)

    def test_exclusion_removes_only_that_coordinate(self):
        cfg = FeatureConfig(kind="statistical", use_linguistic=True, dft_k=1)
        full = build_features(make_record(), cfg)
        reduced = build_features(make_record(), FeatureConfig(
            kind="statistical", use_linguistic=True, dft_k=1,
            excluded_features=frozenset({"desc.std"}),
        ))
        assert set(full.names) - set(reduced.names) == {"desc.std"}
        kept = [v for n, v in zip(full.names, full.values) if n != "desc.std"]
        assert reduced.values.tolist() == pytest.approx(kept)

    def test_unknown_exclusion_rejected(self):
        cfg = FeatureConfig(kind="statistical", excluded_features=frozenset({"nope"}))
        with pytest.raises(ValueError, match="excluded_features"):
            build_features(make_record(), cfg)

    def test_deterministic(self):
        cfg = FeatureConfig(kind="statistical", use_linguistic=True, dft_k=5)
        a = build_features(make_record(), cfg)
        b = build_features(make_record(), cfg)
        assert a.names == b.names
        assert a.values.tolist() == b.values.tolist()


class TestFeaturizeDataset:
    def test_shapes_and_names(self):
        d = synth_generate(24, 1.0, seed=0)
        X, names = featurize_dataset(d, FeatureConfig(kind="statistical", use_linguistic=True, dft_k=2))
        # (4 stats + 2 dft) per sequence + 2 cross features
        assert X.shape == (24, 14)
        assert len(names) == 14

    def test_raw_pad_len_resolved_from_dataset(self):
        d = synth_generate(24, 1.0, seed=0)
        X, names = featurize_dataset(d, FeatureConfig(kind="raw", aggregation="subtract"))
        assert X.shape[1] == d.max_seq_len
        # padding commutes: positions past each record's length are exactly zero
        for i, r in enumerate(d):
            assert np.all(X[i, len(r.description_ntps):] == 0.0)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="dft_k"):
            FeatureConfig(dft_k=6)
        with pytest.raises(ValueError, match="aggregation"):
            FeatureConfig(aggregation="mean")
        with pytest.raises(ValueError, match="kind"):
            FeatureConfig(kind="learned")
