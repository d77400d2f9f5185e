"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s``.

Criteria 1-4 evaluate the released probe dataset and run only when it is
available as converted JSONL (env var NTPDETECT_DATA, or data/published.jsonl
under the repo root); they skip otherwise, since the data cannot be bundled
here. Criteria 5-6 are self-contained oracle and control checks and always
run in under a couple of minutes.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from ntpdetect.boosting import BoostedTreesClassifier
from ntpdetect.data import dataset_stats, load_dataset, synth_generate, write_jsonl
from ntpdetect.evaluation import (
    GBT_GRID,
    SplitSpec,
    ablation,
    make_learner,
    run_experiment,
    run_matrix,
)
from ntpdetect.features import FeatureConfig, dft_topk, featurize_dataset
from ntpdetect.linear import LogisticRegressionClassifier, logistic_objective
from ntpdetect.metrics import auc_roc, spearman
from ntpdetect.svm import SVMClassifier, _rbf_kernel
from tests.test_linear import logreg_grid_oracle
from tests.test_metrics import auc_pair_oracle, spearman_rank_oracle
from tests.test_features import dft_topk_oracle
from tests.test_svm import dual_objective, svm_dual_grid_oracle

DATA_ENV = "NTPDETECT_DATA"
DEFAULT_DATA = Path(__file__).resolve().parent.parent / "data" / "published.jsonl"

# Reference mean AUCs measured on the released dataset (hallucination = positive).
REFERENCE = {
    "stat/none/noling/logreg": 0.606,
    "stat/none/ling/logreg": 0.615,
    "stat/llava/noling/svm": 0.660,
    "stat/paligemma/noling/logreg": 0.761,
    "stat/paligemma/ling/logreg": 0.761,
    "stat/both/noling/svm": 0.772,
}
BASELINE_REFERENCE = {"llava": 0.632, "paligemma": 0.757}

# Controls use deliberately small grids: the control properties do not depend
# on the hyperparameter surface, only on the data carrying no label signal.
CONTROL_GRIDS = {
    "logreg": [{"C": 0.1, "penalty": "l2"}, {"C": 10.0, "penalty": "l1"}],
    "svm": [{"C": 1.0, "kernel": "linear"}, {"C": 10.0, "kernel": "rbf", "gamma": "scale"}],
    "gbt": [GBT_GRID[0], GBT_GRID[-1]],
}


def check(cid: str, condition: bool, detail: str) -> None:
    status = "PASS" if condition else "FAIL"
    print(f"ACCEPTANCE {cid}: {status} - {detail}", flush=True)
    assert condition, f"{cid}: {detail}"


def published_path() -> Path | None:
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    if DEFAULT_DATA.exists():
        return DEFAULT_DATA
    return None


@pytest.fixture(scope="module")
def published():
    path = published_path()
    if path is None or not path.exists():
        pytest.skip(
            f"released dataset not available; set {DATA_ENV} or place it at {DEFAULT_DATA} "
            "(convert with: ntpdetect convert --source <download dir> --out data/published.jsonl)"
        )
    return load_dataset(path)


@pytest.fixture(scope="module")
def published_matrix(published):
    spec = SplitSpec(train_n=1000, val_n=200, test_n=200, n_splits=100, base_seed=0)
    threads = os.cpu_count() or 1
    t0 = time.time()
    matrix = run_matrix(published, spec, threads=threads)
    print(f"\nfull matrix on released data: {time.time() - t0:.0f}s on {threads} workers", flush=True)
    return matrix


# ---------------------------------------------------------------------------
# Criterion 1: reproduction of the published numbers
# ---------------------------------------------------------------------------


class TestC1PublishedReproduction:
    def test_c1_reference_cells_exist_in_matrix(self):
        from ntpdetect.evaluation import matrix_cells

        ids = {cid for cid, _, _ in matrix_cells()}
        missing = set(REFERENCE) - ids
        check("C1", not missing, f"all referenced table cells are produced by the matrix {sorted(missing) or ''}")

    def test_c1_table_cells(self, published_matrix):
        for cell_id, want in REFERENCE.items():
            got = published_matrix.cells[cell_id].mean_auc
            check("C1", abs(got - want) <= 0.03, f"{cell_id}: mean AUC {got:.3f} vs reference {want:.3f} (tol 0.03)")

    def test_c1_raw_vlm_baselines(self, published):
        spec = SplitSpec(n_splits=100, base_seed=0)
        from ntpdetect.evaluation import predictor_baseline

        for name, want in BASELINE_REFERENCE.items():
            got = predictor_baseline(published, spec, name).mean_auc
            check("C1", abs(got - want) <= 0.005, f"baseline/{name}: AUC {got:.4f} vs reference {want:.3f} (tol 0.005)")


# ---------------------------------------------------------------------------
# Criterion 2: ordering properties
# ---------------------------------------------------------------------------


class TestC2Orderings:
    def test_c2a_statistical_beats_raw_per_learner(self, published_matrix):
        cells = published_matrix.cells
        for kind in ("gbt", "svm", "logreg"):
            stat = [cells[f"stat/none/{ling}/{kind}"].mean_auc for ling in ("noling", "ling")]
            raw = [
                cells[f"raw/{mode}/{kind}"].mean_auc
                for mode in ("description_only", "linguistic_only", "concat", "subtract", "divide")
            ]
            check("C2a", min(stat) > max(raw), f"{kind}: min statistical {min(stat):.3f} > max raw {max(raw):.3f}")

    def test_c2b_subtraction_best_raw_for_majority(self, published_matrix):
        cells = published_matrix.cells
        wins = 0
        for kind in ("gbt", "svm", "logreg"):
            by_mode = {
                mode: cells[f"raw/{mode}/{kind}"].mean_auc
                for mode in ("description_only", "linguistic_only", "concat", "subtract", "divide")
            }
            if max(by_mode, key=by_mode.get) == "subtract":
                wins += 1
        check("C2b", wins >= 2, f"subtraction is the best raw aggregation for {wins}/3 learners")

    def test_c2c_ntp_features_improve_llava_pred(self, published_matrix):
        base = published_matrix.baselines["llava"].mean_auc
        for kind in ("gbt", "svm", "logreg"):
            got = published_matrix.cells[f"stat/llava/noling/{kind}"].mean_auc
            check("C2c", got > base, f"{kind}: pred+NTP stats {got:.3f} > pred alone {base:.3f}")


# ---------------------------------------------------------------------------
# Criterion 3: ablation ordering
# ---------------------------------------------------------------------------


class TestC3Ablation:
    def test_c3_pred_largest_dft_lowest(self, published):
        fc = FeatureConfig(
            kind="statistical", use_linguistic=True, dft_k=2, include_llava_pred=True
        )
        spec = SplitSpec(n_splits=100, base_seed=0)
        result = ablation(published, spec, fc, "logreg", threads=os.cpu_count() or 1)
        deltas = result.deltas()
        names = [n for n, _ in deltas]
        check("C3", names[0] == "pred.llava", f"largest delta is {names[0]} ({deltas[0][1]:+.4f})")
        by_name = dict(deltas)
        dft = [v for n, v in by_name.items() if ".dft." in n]
        rest = [v for n, v in by_name.items() if ".dft." not in n]
        check(
            "C3",
            np.mean(dft) <= np.mean(rest),
            f"mean delta of DFT features {np.mean(dft):+.4f} <= others {np.mean(rest):+.4f}",
        )


# ---------------------------------------------------------------------------
# Criterion 4: correlation statistic
# ---------------------------------------------------------------------------


class TestC4Correlation:
    def test_c4_mean_spearman_in_reported_band(self, published):
        stats = dataset_stats(published)
        check(
            "C4",
            0.72 <= stats.mean_spearman <= 0.77,
            f"mean per-probe rank correlation {stats.mean_spearman:.4f} in [0.72, 0.77]",
        )


# ---------------------------------------------------------------------------
# Criterion 5: oracle suites (self-contained, fast)
# ---------------------------------------------------------------------------


class TestC5Oracles:
    def test_c5_auc_pair_counting(self):
        rng = np.random.default_rng(1005)
        for _ in range(1000):
            n = int(rng.integers(4, 40))
            scores = rng.integers(0, 8, size=n).astype(float)
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                labels[0], labels[1] = True, False
            assert abs(auc_roc(scores, labels) - auc_pair_oracle(scores, labels)) < 1e-12
        check("C5", True, "auc_roc matches O(n^2) pair counting on 1000 random tied instances")

    def test_c5_dft_bruteforce(self):
        rng = np.random.default_rng(1006)
        for _ in range(100):
            n = int(rng.integers(1, 45))
            seq = rng.uniform(0.01, 1.0, n)
            k = int(rng.integers(0, 6))
            np.testing.assert_allclose(dft_topk(seq, k), dft_topk_oracle(seq, k), atol=1e-9)
        check("C5", True, "dft_topk matches brute-force DFT on 100 random signals")

    def test_c5_spearman_rank_oracle(self):
        rng = np.random.default_rng(1007)
        import math

        for _ in range(300):
            n = int(rng.integers(2, 30))
            a = rng.integers(0, 5, size=n).astype(float)
            b = rng.integers(0, 5, size=n).astype(float)
            got, want = spearman(a, b), spearman_rank_oracle(a, b)
            assert (math.isnan(got) and math.isnan(want)) or abs(got - want) < 1e-12
        check("C5", True, "spearman matches explicit-rank oracle on 300 random tied instances")

    def test_c5_logreg_fine_grid(self):
        for seed in (2, 3):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(40, 2))
            y = (rng.random(40) < 1.0 / (1.0 + np.exp(-(1.5 * X[:, 0] - 0.8 * X[:, 1])))).astype(int)
            y[0], y[1] = 0, 1
            m = LogisticRegressionClassifier(C=1.0, penalty="l2", standardize=False).fit(X, y)
            oracle = logreg_grid_oracle(X, y.astype(float), 1.0, "l2")
            got = np.array([m.coef_[0], m.coef_[1], m.intercept_])
            assert np.max(np.abs(got - oracle)) < 1e-3
        check("C5", True, "L2 logistic regression matches fine-grid objective minimization within 1e-3")

    def test_c5_svm_duals(self):
        for seed in (1, 2):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(4, 2))
            y = np.array([1.0, 1.0, -1.0, -1.0])
            K = _rbf_kernel(X, X, 0.7)
            m = SVMClassifier(C=1.0, kernel="rbf", gamma=0.7, tol=1e-4, standardize=False).fit(X, (y > 0).astype(int))
            assert np.all(m.alphas_ >= -1e-3) and np.all(m.alphas_ <= 1.0 + 1e-3)
            assert abs(float(m.alphas_ @ y)) < 1e-3
            oracle = svm_dual_grid_oracle(K, y, C=1.0)
            assert np.max(np.abs(m.alphas_ - oracle)) < 1e-2
        check("C5", True, "SVM duals satisfy box/equality within 1e-3 and match exhaustive dual search within 1e-2")

    def test_c5_gbt_stump_leaf_weights(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        m = BoostedTreesClassifier(
            n_rounds=1, max_depth=1, min_child_weight=0.0, gamma=0.0,
            subsample=1.0, colsample=1.0, reg_alpha=0.0, reg_lambda=1.0,
        ).fit(X, y)
        values = m.tree_values_[0]
        # p = 1/2 at margin 0: G_left = 1, H_left = 1/2 -> -G/(H + lambda) = -2/3
        assert abs(values[1] - (-1.0 / 1.5)) < 1e-12
        assert abs(values[2] - (1.0 / 1.5)) < 1e-12
        check("C5", True, "GBT stump leaf weights equal hand-derived -G/(H+lambda)")


# ---------------------------------------------------------------------------
# Criterion 6: controls and bit-reproducibility
# ---------------------------------------------------------------------------


class TestC6Controls:
    def test_c6_nosignal_auc_cis_contain_half(self):
        # Fixed seed keeps this 95%-coverage style check deterministic. The
        # pool is much larger than one split so split overlap stays low.
        dataset = synth_generate(6000, 0.0, seed=9)
        spec = SplitSpec(train_n=1000, val_n=200, test_n=200, n_splits=8, base_seed=900)
        matrix = run_matrix(dataset, spec, grids=CONTROL_GRIDS, gbt_rounds=40, threads=min(4, os.cpu_count() or 1))
        cells = {**matrix.cells, **matrix.baselines}
        bad = [cid for cid, r in cells.items() if abs(r.mean_auc - 0.5) > r.ci95]
        check("C6", not bad, f"no-signal control: all {len(cells)} configs have 0.5 inside the 95% CI {bad or ''}")

    def test_c6_separable_all_learners(self):
        dataset = synth_generate(400, 5.0, seed=77)
        spec = SplitSpec(train_n=200, val_n=80, test_n=80, n_splits=4, base_seed=7)
        fc = FeatureConfig(kind="statistical")
        for kind in ("gbt", "svm", "logreg"):
            res = run_experiment(dataset, spec, fc, kind, grids=CONTROL_GRIDS, gbt_rounds=40)
            check("C6", res.mean_auc >= 0.99, f"separable control: {kind} mean AUC {res.mean_auc:.4f} >= 0.99")

    def test_c6_bit_reproducible_csv(self, tmp_path):
        import yaml

        from ntpdetect.cli import main

        data_path = tmp_path / "data.jsonl"
        write_jsonl(synth_generate(140, 1.0, seed=55), data_path)
        outputs = []
        for name in ("a", "b"):
            out_dir = tmp_path / name
            cfg = {
                "dataset": str(data_path),
                "output_dir": str(out_dir),
                "split": {"train_n": 70, "val_n": 30, "test_n": 30, "n_splits": 3, "base_seed": 11},
                "matrix": {"dft_k": 1},
                "gbt_rounds": 10,
                "grids": CONTROL_GRIDS,
            }
            cfg_path = tmp_path / f"{name}.yaml"
            cfg_path.write_text(yaml.safe_dump(cfg))
            assert main(["run", "--config", str(cfg_path), "--threads", "1" if name == "a" else "2"]) == 0
            outputs.append((out_dir / "results.csv").read_bytes())
        check("C6", outputs[0] == outputs[1], "two runs of the same manifest produce byte-identical result CSVs")
