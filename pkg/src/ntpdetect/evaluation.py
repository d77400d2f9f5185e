"""The evaluation protocol: repeated random 1000/200/200 splits, per-split
grid search maximizing validation AUC, aggregation over splits with 95%
confidence intervals, the standard experiment matrix, and leave-one-feature-
out ablation.

Every split i is drawn from seed ``base_seed + i``, learners are seeded the
same way, and grid order is fixed, so results are bit-reproducible and
independent of how work is scheduled across processes. All cells sharing a
dataset and split spec see identical split sequences, which makes paired
comparisons between cells valid.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .boosting import BoostedTreesClassifier
from .data import Dataset
from .features import FeatureConfig, featurize_dataset
from .linear import LogisticRegressionClassifier
from .metrics import auc_roc, mean_ci95
from .svm import SVMClassifier

log = logging.getLogger(__name__)

LEARNER_KINDS = ("gbt", "svm", "logreg")
DFT_GRID = (0, 1, 2, 3, 4, 5)

# Hyperparameter grids, enumerated lexicographically in the order the axes
# are listed; ties in validation AUC resolve to the earliest point.
LOGREG_GRID = [
    {"C": C, "penalty": penalty}
    for C, penalty in product((0.1, 1.0, 10.0, 100.0), ("l1", "l2"))
]
SVM_GRID = []
for _C in (0.1, 1.0, 10.0, 100.0):
    SVM_GRID.append({"C": _C, "kernel": "linear"})
    for _gamma in ("scale", "auto", 1.0, 0.1, 0.01, 0.001):
        SVM_GRID.append({"C": _C, "kernel": "rbf", "gamma": _gamma})
GBT_GRID = [
    {
        "max_depth": md,
        "learning_rate": lr,
        "min_child_weight": mcw,
        "gamma": gm,
        "subsample": ss,
        "colsample": cs,
        "reg_alpha": a,
        "reg_lambda": lam,
    }
    for md, lr, mcw, gm, ss, cs, a, lam in product(
        (3, 5), (0.1, 0.2), (3, 5, 7), (0.01, 0.1), (0.6, 0.7), (0.6, 0.7), (0.1, 1.0, 10.0), (1.0, 10.0, 100.0)
    )
]

DEFAULT_GRIDS = {"logreg": LOGREG_GRID, "svm": SVM_GRID, "gbt": GBT_GRID}


def make_learner(kind: str, params: dict, seed: int = 0, gbt_rounds: int = 100):
    if kind == "logreg":
        return LogisticRegressionClassifier(**params)
    if kind == "svm":
        return SVMClassifier(**params)
    if kind == "gbt":
        return BoostedTreesClassifier(n_rounds=gbt_rounds, random_state=seed, **params)
    raise ValueError(f"unknown learner kind {kind!r}; expected one of {LEARNER_KINDS}")


@dataclass(frozen=True)
class SplitSpec:
    """Sizes and seeding of the repeated random train/validation/test splits."""

    train_n: int = 1000
    val_n: int = 200
    test_n: int = 200
    n_splits: int = 100
    base_seed: int = 0

    def to_json_obj(self) -> dict:
        return {
            "train_n": self.train_n,
            "val_n": self.val_n,
            "test_n": self.test_n,
            "n_splits": self.n_splits,
            "base_seed": self.base_seed,
        }


def make_splits(dataset: Dataset, spec: SplitSpec) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Disjoint (train, val, test) index triples, one per split, at probe
    granularity; split i is a permutation drawn from seed base_seed + i."""
    n = len(dataset)
    need = spec.train_n + spec.val_n + spec.test_n
    if need > n:
        raise ValueError(f"split sizes need {need} records but the dataset has {n}")
    out = []
    for i in range(spec.n_splits):
        perm = np.random.default_rng(spec.base_seed + i).permutation(n)
        out.append(
            (
                perm[: spec.train_n],
                perm[spec.train_n : spec.train_n + spec.val_n],
                perm[spec.train_n + spec.val_n : need],
            )
        )
    return out


@dataclass
class ExperimentResult:
    """Per-split test AUCs for one (feature config, learner) cell."""

    cell_id: str
    learner: str
    feature_config: FeatureConfig
    split_aucs: tuple[float, ...]
    chosen_params: tuple[dict, ...] = ()
    mean_auc: float = field(init=False)
    ci95: float = field(init=False)

    def __post_init__(self):
        self.mean_auc, self.ci95 = mean_ci95(self.split_aucs)


@dataclass
class AblationResult:
    base: ExperimentResult
    removed: dict[str, ExperimentResult]

    def deltas(self) -> list[tuple[str, float]]:
        """(feature, base mean AUC - mean AUC without it), largest first."""
        out = [(name, self.base.mean_auc - res.mean_auc) for name, res in self.removed.items()]
        out.sort(key=lambda p: (-p[1], p[0]))
        return out


# ---------------------------------------------------------------------------
# Worker-side execution. A worker holds the dataset once and caches feature
# matrices per config, so tasks only carry indices and small configs.
# ---------------------------------------------------------------------------

_WORKER_DATASET: Dataset | None = None
_WORKER_FEATURES: dict = {}


def _init_worker(dataset: Dataset) -> None:
    global _WORKER_DATASET
    _WORKER_DATASET = dataset
    _WORKER_FEATURES.clear()


def _features_for(fc: FeatureConfig):
    cached = _WORKER_FEATURES.get(fc)
    if cached is None:
        cached = featurize_dataset(_WORKER_DATASET, fc)
        _WORKER_FEATURES[fc] = cached
    return cached


def grid_search(kind, grid, feature_sets, y, train_idx, val_idx, seed=0, gbt_rounds=100):
    """Evaluate every (feature set, grid point), maximizing validation AUC.

    ``feature_sets`` is a list of (dft_k, X) pairs; a single pair means no
    sweep. Returns (params, dft_k, fitted model, val_auc) of the maximizer;
    exact AUC ties resolve to the earliest point in enumeration order. Raises
    if every grid point fails to train.
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    best = None
    first_error = None
    for dft_k, X in feature_sets:
        X_train, y_train = X[train_idx], y[train_idx]
        X_val, y_val = X[val_idx], y[val_idx]
        for params in grid:
            try:
                model = make_learner(kind, params, seed=seed, gbt_rounds=gbt_rounds)
                model.fit(X_train, y_train)
                val_auc = auc_roc(model.decision_function(X_val), y_val)
            except (ValueError, np.linalg.LinAlgError) as e:
                if first_error is None:
                    first_error = e
                continue
            if best is None or val_auc > best[3]:
                best = (params, dft_k, model, val_auc)
    if best is None:
        raise RuntimeError(f"every grid point failed to train; first error: {first_error}")
    return best


def _run_cell_split(cell_id, fc, kind, split_index, train_idx, val_idx, test_idx, grid, dft_grid, gbt_rounds, seed):
    """One (cell, split) work item; returns its test AUC and chosen point."""
    dataset = _WORKER_DATASET
    y = dataset.labels()
    try:
        if dft_grid:
            feature_sets = [(k, _features_for(replace(fc, dft_k=k))[0]) for k in dft_grid]
        else:
            feature_sets = [(fc.dft_k, _features_for(fc)[0])]
        params, dft_k, model, _ = grid_search(
            kind, grid, feature_sets, y, train_idx, val_idx, seed=seed, gbt_rounds=gbt_rounds
        )
        X = dict(feature_sets)[dft_k]
        test_auc = auc_roc(model.decision_function(X[test_idx]), y[test_idx])
    except Exception as e:
        raise RuntimeError(f"cell {cell_id}, split {split_index}: {e}") from e
    chosen = dict(params)
    chosen["dft_k"] = dft_k
    return cell_id, split_index, float(test_auc), chosen


def _run_cells(
    dataset: Dataset,
    spec: SplitSpec,
    cells: list[tuple[str, FeatureConfig, str]],
    *,
    grids: dict | None = None,
    sweep_dft: bool = False,
    gbt_rounds: int = 100,
    threads: int = 1,
) -> dict[str, ExperimentResult]:
    """Run every (cell, split) pair, in-process or across a worker pool."""
    grids = {**DEFAULT_GRIDS, **(grids or {})}
    splits = make_splits(dataset, spec)
    resolved = []
    seen_ids = set()
    for cell_id, fc, kind in cells:
        if cell_id in seen_ids:
            raise ValueError(f"duplicate cell id {cell_id!r}")
        seen_ids.add(cell_id)
        fc = fc.resolve_pad_len(dataset)
        fc.feature_names()  # fail fast on malformed configs
        if kind not in LEARNER_KINDS:
            raise ValueError(f"cell {cell_id}: unknown learner {kind!r}")
        resolved.append((cell_id, fc, kind))
    tasks = []
    for cell_id, fc, kind in resolved:
        dft_grid = tuple(DFT_GRID) if (sweep_dft and fc.kind == "statistical") else ()
        for i, (tr, va, te) in enumerate(splits):
            tasks.append((cell_id, fc, kind, i, tr, va, te, grids[kind], dft_grid, gbt_rounds, spec.base_seed + i))
    log.info("running %d cells x %d splits = %d tasks on %d worker(s)", len(resolved), spec.n_splits, len(tasks), threads)
    outcomes = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker, initargs=(dataset,)) as pool:
            for res in pool.map(_run_cell_split_star, tasks, chunksize=1):
                outcomes.append(res)
    else:
        _init_worker(dataset)
        for task in tasks:
            outcomes.append(_run_cell_split(*task))
    by_cell: dict[str, dict[int, tuple[float, dict]]] = {cid: {} for cid, _, _ in resolved}
    for cell_id, split_index, test_auc, chosen in outcomes:
        by_cell[cell_id][split_index] = (test_auc, chosen)
    results = {}
    for cell_id, fc, kind in resolved:
        per_split = [by_cell[cell_id][i] for i in range(spec.n_splits)]
        results[cell_id] = ExperimentResult(
            cell_id=cell_id,
            learner=kind,
            feature_config=fc,
            split_aucs=tuple(a for a, _ in per_split),
            chosen_params=tuple(c for _, c in per_split),
        )
    return results


def _run_cell_split_star(task):
    return _run_cell_split(*task)


def run_experiment(
    dataset: Dataset,
    spec: SplitSpec,
    fc: FeatureConfig,
    kind: str,
    *,
    grids: dict | None = None,
    sweep_dft: bool = False,
    gbt_rounds: int = 100,
    threads: int = 1,
    cell_id: str | None = None,
) -> ExperimentResult:
    """Full protocol for one cell: per split, grid-search on train/validation,
    then report the chosen model's test AUC; aggregate over splits."""
    cid = cell_id or f"{fc.kind}/{kind}"
    return _run_cells(
        dataset, spec, [(cid, fc, kind)],
        grids=grids, sweep_dft=sweep_dft, gbt_rounds=gbt_rounds, threads=threads,
    )[cid]


def predictor_scores(dataset: Dataset, predictor: str) -> np.ndarray:
    """Hallucination-ranking scores from one predictor column: the predictor
    estimates P(probe is correct), so its negation ranks hallucinations."""
    field_name = {"llava": "llava_pred", "paligemma": "paligemma_pred"}[predictor]
    vals = []
    for r in dataset:
        v = getattr(r, field_name)
        if v is None:
            raise ValueError(f"record {r.record_id}: {field_name} is required but missing")
        vals.append(v)
    return -np.asarray(vals, dtype=float)


def predictor_baseline(dataset: Dataset, spec: SplitSpec, predictor: str) -> ExperimentResult:
    """Training-free baseline: per-split test AUC of one predictor's score."""
    scores = predictor_scores(dataset, predictor)
    y = dataset.labels()
    aucs = [float(auc_roc(scores[te], y[te])) for _, _, te in make_splits(dataset, spec)]
    fc = FeatureConfig(
        kind="statistical",
        include_llava_pred=predictor == "llava",
        include_paligemma_pred=predictor == "paligemma",
    )
    return ExperimentResult(
        cell_id=f"baseline/{predictor}", learner="none", feature_config=fc, split_aucs=tuple(aucs)
    )


PRED_FLAG_SETS = (("none", False, False), ("llava", True, False), ("paligemma", False, True), ("both", True, True))
STAT_FEATURE_NAMES = ("desc.mean", "desc.std", "desc.mean_log", "desc.mean_exp")


def matrix_cells(
    dft_k: int = 0,
    include_raw: bool = True,
    include_preds_only: bool = True,
) -> list[tuple[str, FeatureConfig, str]]:
    """The standard table: 4 predictor settings x with/without linguistic
    features x 3 learners, optionally plus the preds-only row and the five
    raw-aggregation comparison rows."""
    cells = []
    for pred_name, ll, pg in PRED_FLAG_SETS:
        for ling in (False, True):
            fc = FeatureConfig(
                kind="statistical",
                use_linguistic=ling,
                dft_k=dft_k,
                include_llava_pred=ll,
                include_paligemma_pred=pg,
            )
            for kind in LEARNER_KINDS:
                ling_name = "ling" if ling else 'noling'
                cells.append((f"stat/{pred_name}/{ling_name}/{kind}", fc, kind))
    if include_preds_only:
        fc = FeatureConfig(
            kind="statistical",
            include_llava_pred=True,
            include_paligemma_pred=True,
            excluded_features=frozenset(STAT_FEATURE_NAMES),
        )
        for kind in LEARNER_KINDS:
            cells.append((f"predsonly/{kind}", fc, kind))
    if include_raw:
        from .features import AGGREGATIONS

        for mode in AGGREGATIONS:
            fc = FeatureConfig(kind="raw", aggregation=mode)
            for kind in LEARNER_KINDS:
                cells.append((f"raw/{mode}/{kind}", fc, kind))
    return cells


@dataclass
class MatrixResult:
    cells: dict[str, ExperimentResult]
    baselines: dict[str, ExperimentResult]


def run_matrix(
    dataset: Dataset,
    spec: SplitSpec,
    *,
    dft_k: int = 0,
    include_raw: bool = True,
    include_preds_only: bool = True,
    grids: dict | None = None,
    sweep_dft: bool = False,
    gbt_rounds: int = 100,
    threads: int = 1,
) -> MatrixResult:
    """Run the full matrix plus the training-free predictor baselines; every
    cell sees the identical split sequence."""
    predictor_scores(dataset, "llava")  # fail fast when predictor columns are missing
    predictor_scores(dataset, "paligemma")
    cells = matrix_cells(dft_k=dft_k, include_raw=include_raw, include_preds_only=include_preds_only)
    results = _run_cells(
        dataset, spec, cells,
        grids=grids, sweep_dft=sweep_dft, gbt_rounds=gbt_rounds, threads=threads,
    )
    baselines = {p: predictor_baseline(dataset, spec, p) for p in ("llava", "paligemma")}
    return MatrixResult(cells=results, baselines=baselines)


def ablation(
    dataset: Dataset,
    spec: SplitSpec,
    fc: FeatureConfig,
    kind: str,
    *,
    grids: dict | None = None,
    gbt_rounds: int = 100,
    threads: int = 1,
) -> AblationResult:
    """Leave-one-feature-out deltas on identical splits.

    The DFT count is taken from ``fc`` as-is (no sweep) so that the feature
    name set stays fixed across arms.
    """
    fc = fc.resolve_pad_len(dataset)
    names = [n for n in fc.feature_names() if n not in fc.excluded_features]
    if len(names) < 2:
        raise ValueError("ablation needs a config producing at least 2 features")
    cells = [("ablate/none", fc, kind)]
    for name in names:
        fc_removed = replace(fc, excluded_features=frozenset(fc.excluded_features | {name}))
        cells.append((f"ablate/{name}", fc_removed, kind))
    results = _run_cells(dataset, spec, cells, grids=grids, gbt_rounds=gbt_rounds, threads=threads)
    return AblationResult(
        base=results["ablate/none"],
        removed={name: results[f"ablate/{name}"] for name in names},
    )
