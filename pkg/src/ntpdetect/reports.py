"""CSV and Markdown rendering of experiment results.

The CSV carries one row per cell per split plus one aggregate row per cell;
the Markdown mirrors the standard results-table layout (predictor setting by
linguistic setting, one column per learner).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

from .evaluation import AblationResult, ExperimentResult, MatrixResult, PRED_FLAG_SETS
from .features import AGGREGATIONS

LEARNER_LABELS = {"gbt": "GBT", "svm": "SVM", "logreg": "LR"}

CSV_FIELDS = (
    "cell_id",
    "learner",
    "kind",
    "aggregation",
    "use_linguistic",
    "include_llava_pred",
    "include_paligemma_pred",
    "dft_k",
    "excluded_features",
    "row_type",
    "split_index",
    "auc",
    "mean_auc",
    "ci95",
    "chosen_params",
)


def _cell_fields(res: ExperimentResult) -> dict:
    fc = res.feature_config
    return {
        "cell_id": res.cell_id,
        "learner": res.learner,
        "kind": fc.kind,
        "aggregation": fc.aggregation if fc.kind == "raw" else "",
        "use_linguistic": fc.use_linguistic,
        "include_llava_pred": fc.include_llava_pred,
        "include_paligemma_pred": fc.include_paligemma_pred,
        "dft_k": fc.dft_k,
        "excluded_features": ";".join(sorted(fc.excluded_features)),
    }


def write_results_csv(path, results: Iterable[ExperimentResult]) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for res in results:
            base = _cell_fields(res)
            for i, auc in enumerate(res.split_aucs):
                row = dict(base)
                row.update(
                    row_type="split",
                    split_index=i,
                    auc=repr(auc),
                    chosen_params=json.dumps(res.chosen_params[i], sort_keys=True) if res.chosen_params else "",
                )
                writer.writerow(row)
            agg = dict(base)
            agg.update(row_type="aggregate", mean_auc=repr(res.mean_auc), ci95=repr(res.ci95))
            writer.writerow(agg)


def _fmt(res: ExperimentResult | None) -> str:
    if res is None:
        return "--"
    return f"{res.mean_auc:.3f} ± {res.ci95:.3f}"


def render_matrix_markdown(matrix: MatrixResult, n_splits: int) -> str:
    cells = matrix.cells
    lines = [
        "# Results",
        "",
        f"Mean test AUC-ROC ± 95% CI over {n_splits} random splits.",
        "",
        "## Statistical NTP features",
        "",
        "| Preds | Linguistic | GBT | SVM | LR |",
        "|---|---|---|---|---|",
    ]
    pred_labels = {"none": "None", "llava": "LLaVA", "paligemma": "PaliGemma", "both": "LLaVA and PaliGemma"}
    for pred_name, _, _ in PRED_FLAG_SETS:
        for ling_name, ling_label in (("noling", "No"), ("ling", "Yes")):
            row = [pred_labels[pred_name], ling_label]
            for kind in ("gbt", "svm", "logreg"):
                row.append(_fmt(cells.get(f"stat/{pred_name}/{ling_name}/{kind}")))
            lines.append("| " + " | ".join(row) + " |")
    lines += [
        "",
        "## Predictor baselines",
        "",
        "| Predictor | Raw score AUC | GBT | SVM | LR |",
        "|---|---|---|---|---|",
    ]
    for pred, label in (("llava", "LLaVA"), ("paligemma", "PaliGemma")):
        lines.append(f"| {label} | {_fmt(matrix.baselines.get(pred))} | -- | -- | -- |")
    both = ["| LLaVA and PaliGemma | --"]
    for kind in ("gbt", "svm", "logreg"):
        both.append(_fmt(cells.get(f"predsonly/{kind}")))
    lines.append(" | ".join(both) + " |")
    raw_cells = {cid: r for cid, r in cells.items() if cid.startswith("raw/")}
    if raw_cells:
        lines += [
            "",
            "## Raw NTP aggregations (no predictors)",
            "",
            "| Aggregation | GBT | SVM | LR |",
            "|---|---|---|---|",
        ]
        for mode in AGGREGATIONS:
            row = [mode.replace("_", " ")]
            for kind in ("gbt", "svm", "logreg"):
                row.append(_fmt(cells.get(f"raw/{mode}/{kind}")))
            lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def write_ablation_csv(path, ab: AblationResult) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "delta_auc", "mean_auc_without", "ci95_without", "base_mean_auc", "base_ci95"])
        for name, delta in ab.deltas():
            res = ab.removed[name]
            writer.writerow([name, repr(delta), repr(res.mean_auc), repr(res.ci95), repr(ab.base.mean_auc), repr(ab.base.ci95)])


def render_ablation_markdown(ab: AblationResult) -> str:
    lines = [
        "# Leave-one-feature-out ablation",
        "",
        f"Base model: {LEARNER_LABELS.get(ab.base.learner, ab.base.learner)}, "
        f"mean AUC {_fmt(ab.base)} over {len(ab.base.split_aucs)} splits.",
        "",
        "Positive delta = removing the feature hurts (the feature helps).",
        "",
        "| Feature | ΔAUC | AUC without |",
        "|---|---|---|",
    ]
    for name, delta in ab.deltas():
        lines.append(f"| {name} | {delta:+.4f} | {_fmt(ab.removed[name])} |")
    return "\n".join(lines) + "\n"
