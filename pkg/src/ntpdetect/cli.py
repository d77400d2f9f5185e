"""Command-line interface: dataset conversion, stats, experiment runs,
leave-one-feature-out ablation, and scoring with a saved model.

Every run/ablate invocation writes a ``manifest.json`` into its output
directory capturing the fully resolved configuration and seeds; replaying
the same manifest reproduces the output files byte for byte. Diagnostics go
to stderr; machine-readable outputs go to files (or stdout for ``score``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import __version__
from .data import convert_published, dataset_stats, load_dataset
from .evaluation import (
    DEFAULT_GRIDS,
    SplitSpec,
    _run_cells,
    ablation,
    make_learner,
    make_splits,
    matrix_cells,
    predictor_baseline,
    run_matrix,
)
from .features import FeatureConfig, featurize_dataset
from .model_io import load_model, save_model, score_dataset
from .reports import render_ablation_markdown, render_matrix_markdown, write_ablation_csv, write_results_csv

log = logging.getLogger("ntpdetect")

MANIFEST_VERSION = 1


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, dataset_path: Path, outputs: list[str]) -> None:
    doc = {
        "manifest_version": MANIFEST_VERSION,
        "package": "ntpdetect",
        "package_version": __version__,
        "command": command,
        "dataset": str(dataset_path),
        "dataset_sha256": _sha256(dataset_path),
        "config": config,
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _feature_config(obj: dict) -> FeatureConfig:
    try:
        return FeatureConfig.from_json_obj(obj or {})
    except TypeError as e:
        raise ValueError(f"invalid feature config {obj!r}: {e}") from e


def _split_spec(obj: dict) -> SplitSpec:
    try:
        return SplitSpec(**{k: int(v) for k, v in obj.items()})
    except (TypeError, ValueError) as e:
        raise ValueError(f"invalid split section {obj!r}: {e}") from e


def _load_config(path: Path) -> dict:
    with path.open("r", encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return cfg


def _resolve_run_config(args) -> tuple[dict, Path, Path]:
    cfg_path = Path(args.config)
    cfg = _load_config(cfg_path)
    base = cfg_path.parent
    if "dataset" not in cfg:
        raise ValueError("config needs a 'dataset' path")
    dataset_path = (base / cfg["dataset"]).resolve() if not Path(cfg["dataset"]).is_absolute() else Path(cfg["dataset"])
    out_dir = Path(args.output_dir) if args.output_dir else (base / cfg.get("output_dir", "results")).resolve()
    split = dict(cfg.get("split", {}))
    if args.splits is not None:
        split["n_splits"] = args.splits
    if args.seed is not None:
        split["base_seed"] = args.seed
    cfg["split"] = split
    cfg["dataset"] = str(dataset_path)
    cfg["output_dir"] = str(out_dir)
    return cfg, dataset_path, out_dir


def _custom_grids(cfg: dict) -> dict | None:
    grids = cfg.get("grids") or {}
    unknown = set(grids) - set(DEFAULT_GRIDS)
    if unknown:
        raise ValueError(f"grids override names unknown learners: {sorted(unknown)}")
    return {k: list(v) for k, v in grids.items()} or None


def cmd_convert(args) -> int:
    n = convert_published(args.source, args.out, label_means_valid=args.label_polarity == "valid")
    log.info("wrote %d records to %s", n, args.out)
    return 0


def cmd_stats(args) -> int:
    ds = load_dataset(args.data)
    stats = dataset_stats(ds)
    print(f"records           : {stats.n_records}")
    print(f"positive rate     : {stats.positive_rate:.4f}  (label=True means hallucinated)")
    print(f"max sequence len  : {max(stats.seq_len_histogram)}")
    print(f"generator counts  : {dict(sorted(stats.generator_counts.items()))}")
    print(f"mean spearman     : {stats.mean_spearman:.4f}  (description vs linguistic NTPs)")
    print(f"median spearman   : {stats.median_spearman:.4f}")
    print(f"undefined spearman: {stats.n_undefined_spearman} records (constant or single-token)")
    if args.json:
        Path(args.json).write_text(json.dumps(stats.to_json_obj(), indent=2) + "\n", encoding="utf-8")
        log.info("wrote JSON stats to %s", args.json)
    return 0


def _save_models(dataset, spec, results, out_dir: Path, gbt_rounds: int) -> list[str]:
    """Retrain each cell's split-0 chosen point on split 0 and save it."""
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    train_idx, _, _ = make_splits(dataset, spec)[0]
    y = dataset.labels()
    saved = []
    for res in results:
        chosen = dict(res.chosen_params[0])
        dft_k = chosen.pop("dft_k", res.feature_config.dft_k)
        fc = replace(res.feature_config, dft_k=dft_k).resolve_pad_len(dataset)
        X, names = featurize_dataset(dataset, fc)
        model = make_learner(res.learner, chosen, seed=spec.base_seed, gbt_rounds=gbt_rounds)
        model.fit(X[train_idx], y[train_idx])
        fname = res.cell_id.replace("/", "_") + ".json"
        save_model(model, names, models_dir / fname, feature_config=fc, seed=spec.base_seed)
        saved.append(f"models/{fname}")
    return saved


def cmd_run(args) -> int:
    cfg, dataset_path, out_dir = _resolve_run_config(args)
    dataset = load_dataset(dataset_path)
    spec = _split_spec(cfg["split"])
    grids = _custom_grids(cfg)
    gbt_rounds = int(cfg.get("gbt_rounds", 100))
    sweep_dft = bool(cfg.get("sweep_dft", False))
    out_dir.mkdir(parents=True, exist_ok=True)

    results = []
    baselines = {}
    if cfg.get("matrix") is not None:
        mcfg = cfg.get("matrix") or {}
        if not isinstance(mcfg, dict):
            mcfg = {}
        matrix = run_matrix(
            dataset,
            spec,
            dft_k=int(mcfg.get("dft_k", 0)),
            include_raw=bool(mcfg.get("include_raw", True)),
            include_preds_only=bool(mcfg.get("include_preds_only", True)),
            grids=grids,
            sweep_dft=sweep_dft,
            gbt_rounds=gbt_rounds,
            threads=args.threads,
        )
        results.extend(matrix.cells.values())
        baselines = matrix.baselines
        (out_dir / "results.md").write_text(render_matrix_markdown(matrix, spec.n_splits), encoding="utf-8")
    extra = []
    for i, cell in enumerate(cfg.get("cells") or []):
        fc = _feature_config(cell.get("features", {}))
        kind = cell.get("learner")
        cell_id = cell.get("id", f"cell{i}/{fc.kind}/{kind}")
        extra.append((cell_id, fc, kind))
    if extra:
        results.extend(
            _run_cells(
                dataset, spec, extra,
                grids=grids, sweep_dft=sweep_dft, gbt_rounds=gbt_rounds, threads=args.threads,
            ).values()
        )
    if not results:
        raise ValueError("config selects no work: set 'matrix' and/or 'cells'")
    all_results = list(results) + list(baselines.values())
    write_results_csv(out_dir / "results.csv", all_results)
    outputs = ["results.csv", "manifest.json"]
    if cfg.get("matrix") is not None:
        outputs.append("results.md")
    if cfg.get("save_models"):
        outputs += _save_models(dataset, spec, results, out_dir, gbt_rounds)
    _write_manifest(out_dir, "run", cfg, dataset_path, sorted(outputs))
    log.info("wrote %s", out_dir / "results.csv")
    return 0


def cmd_ablate(args) -> int:
    cfg, dataset_path, out_dir = _resolve_run_config(args)
    acfg = cfg.get("ablate")
    if not isinstance(acfg, dict) or "learner" not in acfg:
        raise ValueError("config needs an 'ablate' section with 'learner' and 'features'")
    dataset = load_dataset(dataset_path)
    spec = _split_spec(cfg["split"])
    fc = _feature_config(acfg.get("features", {}))
    result = ablation(
        dataset,
        spec,
        fc,
        acfg["learner"],
        grids=_custom_grids(cfg),
        gbt_rounds=int(cfg.get("gbt_rounds", 100)),
        threads=args.threads,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ablation_csv(out_dir / "ablation.csv", result)
    (out_dir / "ablation.md").write_text(render_ablation_markdown(result), encoding="utf-8")
    _write_manifest(out_dir, "ablate", cfg, dataset_path, ["ablation.csv", "ablation.md", "manifest.json"])
    for name, delta in result.deltas():
        log.info("delta %+0.4f  %s", delta, name)
    log.info("wrote %s", out_dir / "ablation.csv")
    return 0


def cmd_score(args) -> int:
    model, names, fc = load_model(args.model)
    dataset = load_dataset(args.data)
    scores = score_dataset(model, names, fc, dataset)
    lines = ["record_id,score"]
    lines += [f"{r.record_id},{float(score)!r}" for r, score in zip(dataset, scores)]
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        log.info("wrote %d scores to %s", len(scores), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ntpdetect", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ntpdetect {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="info", choices=("debug", "info", "warning", "error"))
    runner = argparse.ArgumentParser(add_help=False)
    runner.add_argument("--seed", type=int, default=None, help="override split.base_seed from the config")
    runner.add_argument("--splits", type=int, default=None, help="override split.n_splits from the config")
    runner.add_argument("--threads", type=int, default=1, help="worker processes for (cell, split) tasks")
    runner.add_argument("--output-dir", default=None, help="override output_dir from the config")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", parents=[common], help="convert the released distribution to probe-level JSONL")
    p.add_argument("--source", required=True, help="directory with the released json/jsonl/csv files")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument(
        "--label-polarity",
        choices=("valid", "hallucinated"),
        default="valid",
        help="meaning of the source Label column (default: True means the probe is valid)",
    )
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", parents=[common], help="dataset summary statistics")
    p.add_argument("--data", required=True, help="probe-level JSONL dataset")
    p.add_argument("--json", default=None, help="also write the stats as JSON to this path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("run", parents=[common, runner], help="run an experiment config")
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", parents=[common, runner], help="leave-one-feature-out ablation")
    p.add_argument("--config", required=True, help="YAML experiment config with an 'ablate' section")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("score", parents=[common], help="score records with a saved model")
    p.add_argument("--model", required=True, help="saved model JSON")
    p.add_argument("--data", required=True, help="probe-level JSONL dataset")
    p.add_argument("--out", default="-", help="output CSV path, or - for stdout")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as e:  # noqa: BLE001 - single CLI error boundary
        log.debug("traceback", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
