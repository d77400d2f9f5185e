"""Dataset schema, JSONL I/O, the published-distribution converter, and a
synthetic generator used by the test and control suites.

One record is a *probe*: a single statement derived from a VLM-generated
image description, labeled True when it contains a hallucination. Each probe
carries two aligned token-probability sequences: the probabilities recorded
while the description was generated (``description_ntps``) and the
probabilities obtained by re-feeding the same text through the model without
the image (``linguistic_ntps``), plus optional Yes/No correctness scores from
two predictor VLMs.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import spearman

log = logging.getLogger(__name__)

GENERATOR_MODELS = ("llava-1.5", "llava-1.6")

# Canonical JSONL field order, fixed so serialization is byte-stable.
_JSONL_FIELDS = (
    "record_id",
    "image_id",
    "generator_model",
    "probe_text",
    "context_span",
    "label",
    "description_ntps",
    "linguistic_ntps",
    "llava_pred",
    "paligemma_pred",
)


class DatasetError(ValueError):
    """Malformed dataset input: parse failures or schema violations."""


@dataclass(frozen=True)
class ProbeRecord:
    """One annotated statement with its NTP sequences and predictor scores."""

    record_id: str
    image_id: str
    generator_model: str
    probe_text: str
    context_span: str
    label: bool
    description_ntps: tuple[float, ...]
    linguistic_ntps: tuple[float, ...]
    llava_pred: float | None = None
    paligemma_pred: float | None = None

    def validate(self) -> None:
        rid = self.record_id
        if not rid:
            raise DatasetError("record_id must be a non-empty string")
        if self.generator_model not in GENERATOR_MODELS:
            raise DatasetError(
                f"record {rid}: generator_model must be one of {GENERATOR_MODELS}, got {self.generator_model!r}"
            )
        n_desc = len(self.description_ntps)
        n_ling = len(self.linguistic_ntps)
        if n_desc < 1:
            raise DatasetError(f"record {rid}: description_ntps must contain at least one value")
        if n_desc != n_ling:
            raise DatasetError(
                f"record {rid}: description_ntps and linguistic_ntps lengths differ ({n_desc} != {n_ling})"
            )
        for name in ("description_ntps", "linguistic_ntps"):
            for i, v in enumerate(getattr(self, name)):
                if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 < v <= 1.0):
                    raise DatasetError(f"record {rid}: {name}[{i}] = {v!r} is outside (0, 1]")
        for name in ("llava_pred", "paligemma_pred"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
                raise DatasetError(f"record {rid}: {name} = {v!r} is outside [0, 1]")

    def to_json_obj(self) -> dict:
        return {
            "record_id": self.record_id,
            "image_id": self.image_id,
            "generator_model": self.generator_model,
            "probe_text": self.probe_text,
            "context_span": self.context_span,
            "label": self.label,
            "description_ntps": list(self.description_ntps),
            "linguistic_ntps": list(self.linguistic_ntps),
            "llava_pred": self.llava_pred,
            "paligemma_pred": self.paligemma_pred,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ProbeRecord":
        if not isinstance(obj, dict):
            raise DatasetError(f"record must be a JSON object, got {type(obj).__name__}")
        missing = [f for f in _JSONL_FIELDS if f not in obj]
        if missing:
            rid = obj.get("record_id", "<unknown>")
            raise DatasetError(f"record {rid}: missing fields {missing}")
        unknown = [k for k in obj if k not in _JSONL_FIELDS]
        if unknown:
            raise DatasetError(f"record {obj.get('record_id', '<unknown>')}: unknown fields {unknown}")
        rid = obj["record_id"]
        for name in ("record_id", "image_id", "generator_model", "probe_text", "context_span"):
            if not isinstance(obj[name], str):
                raise DatasetError(f"record {rid}: field {name} must be a string")
        if not isinstance(obj["label"], bool):
            raise DatasetError(f"record {rid}: field label must be a boolean")
        for name in ("description_ntps", "linguistic_ntps"):
            if not isinstance(obj[name], list):
                raise DatasetError(f"record {rid}: field {name} must be an array of numbers")
        rec = cls(
            record_id=rid,
            image_id=obj["image_id"],
            generator_model=obj["generator_model"],
            probe_text=obj["probe_text"],
            context_span=obj["context_span"],
            label=obj["label"],
            description_ntps=tuple(float(v) for v in obj["description_ntps"]),
            linguistic_ntps=tuple(float(v) for v in obj["linguistic_ntps"]),
            llava_pred=None if obj["llava_pred"] is None else float(obj["llava_pred"]),
            paligemma_pred=None if obj["paligemma_pred"] is None else float(obj["paligemma_pred"]),
        )
        rec.validate()
        return rec


@dataclass(frozen=True)
class Dataset:
    """Immutable ordered collection of validated probe records."""

    records: tuple[ProbeRecord, ...]
    max_seq_len: int = field(init=False)

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.record_id in seen:
                raise DatasetError(f"duplicate record_id {r.record_id!r}")
            seen.add(r.record_id)
        max_len = max((len(r.description_ntps) for r in self.records), default=0)
        object.__setattr__(self, "max_seq_len", max_len)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=bool)


@dataclass(frozen=True)
class DatasetStats:
    n_records: int
    positive_rate: float
    seq_len_histogram: dict[int, int]
    generator_counts: dict[str, int]
    mean_spearman: float
    median_spearman: float
    n_undefined_spearman: int

    def to_json_obj(self) -> dict:
        return {
            "n_records": self.n_records,
            "positive_rate": self.positive_rate,
            "seq_len_histogram": {str(k): v for k, v in sorted(self.seq_len_histogram.items())},
            "generator_counts": dict(sorted(self.generator_counts.items())),
            "mean_spearman": self.mean_spearman,
            "median_spearman": self.median_spearman,
            "n_undefined_spearman": self.n_undefined_spearman,
        }


def load_dataset(path, format: str = "jsonl") -> Dataset:
    """Load and validate a probe dataset.

    Every line must parse as JSON and satisfy the record schema; the first
    violation aborts the load with the offending line number or record id.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported dataset format {format!r}; only 'jsonl' is supported")
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}: line {lineno}: invalid JSON: {e}") from e
            try:
                records.append(ProbeRecord.from_json_obj(obj))
            except DatasetError as e:
                raise DatasetError(f"{path}: line {lineno}: {e}") from e
    if not records:
        raise DatasetError(f"{path}: dataset is empty")
    return Dataset(records=tuple(records))


def write_jsonl(dataset: Dataset, path) -> None:
    """Serialize a dataset to canonical JSONL (stable field order, one record per line)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in dataset.records:
            fh.write(json.dumps(r.to_json_obj(), ensure_ascii=False) + "\n")


def dataset_stats(dataset: Dataset) -> DatasetStats:
    """Dataset-level summary, including the per-record rank correlation between
    the two NTP sequences (records where either sequence is constant, or has a
    single token, are excluded from the correlation aggregate)."""
    if len(dataset) == 0:
        raise ValueError("dataset_stats needs a non-empty dataset")
    labels = dataset.labels()
    seq_lens = Counter(len(r.description_ntps) for r in dataset)
    generators = Counter(r.generator_model for r in dataset)
    corrs = []
    n_undefined = 0
    for r in dataset:
        if len(r.description_ntps) < 2:
            n_undefined += 1
            continue
        c = spearman(r.description_ntps, r.linguistic_ntps)
        if math.isnan(c):
            n_undefined += 1
        else:
            corrs.append(c)
    corrs_arr = np.array(corrs, dtype=float)
    return DatasetStats(
        n_records=len(dataset),
        positive_rate=float(labels.sum()) / len(dataset),
        seq_len_histogram=dict(seq_lens),
        generator_counts=dict(generators),
        mean_spearman=float(corrs_arr.mean()) if corrs_arr.size else float("nan"),
        median_spearman=float(np.median(corrs_arr)) if corrs_arr.size else float("nan"),
        n_undefined_spearman=n_undefined,
    )


# --------------------------------------------------------------------------
# Converter for the released columnar distribution
# --------------------------------------------------------------------------

def _norm_key(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "", name.lower())


def _find_column(row: dict, *candidates: str):
    by_norm = {_norm_key(k): k for k in row}
    for cand in candidates:
        k = by_norm.get(_norm_key(cand))
        if k is not None:
            return k
    return None


def _parse_float_list(value, where: str) -> list[float]:
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError as e:
            raise DatasetError(f"{where}: cannot parse NTP list from string: {e}") from e
    if not isinstance(value, (list, tuple)):
        raise DatasetError(f"{where}: expected a list of numbers, got {type(value).__name__}")
    return [float(v) for v in value]


def _parse_bool(value, where: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ("true", "yes", "1"):
            return True
        if s in ("false", "no", "0"):
            return False
    raise DatasetError(f"{where}: cannot interpret {value!r} as a boolean label")


def _parse_generator(value) -> str:
    s = _norm_key(str(value))
    if "15" in s:
        return "llava-1.5"
    if "16" in s:
        return "llava-1.6"
    raise DatasetError(f"cannot map generator model {value!r} to one of {GENERATOR_MODELS}")


def _iter_source_rows(source_dir: Path):
    """Yield description-level rows from any json/jsonl/csv files under source_dir."""
    files = sorted(
        p for p in source_dir.rglob("*") if p.suffix.lower() in (".json", ".jsonl", ".csv") and p.is_file()
    )
    if not files:
        raise DatasetError(f"{source_dir}: no .json/.jsonl/.csv files found")
    for p in files:
        if p.suffix.lower() == ".csv":
            import csv

            with p.open("r", encoding="utf-8", newline="") as fh:
                yield from csv.DictReader(fh)
        elif p.suffix.lower() == ".jsonl":
            with p.open("r", encoding="utf-8") as fh:
                for i, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        yield json.loads(line)
                    except json.JSONDecodeError as e:
                        raise DatasetError(f"{p}: line {i}: invalid JSON: {e}") from e
        else:
            with p.open("r", encoding="utf-8") as fh:
                try:
                    obj = json.load(fh)
                except json.JSONDecodeError as e:
                    raise DatasetError(f"{p}: invalid JSON: {e}") from e
            if isinstance(obj, list):
                yield from obj
            elif isinstance(obj, dict) and isinstance(obj.get("data"), list):
                yield from obj["data"]
            else:
                raise DatasetError(f"{p}: top-level JSON must be a list of rows (or {{'data': [...]}})")


def _row_ntps(row: dict, logical: str, probe_idx: int, where: str) -> list[float]:
    """Extract the NTP sequence for probe ``probe_idx`` (1-based) from a row.

    Distributions vary: some carry one column per probe, some a single column
    holding four lists, some a single flat list shared by all four probes.
    """
    per_probe = _find_column(row, f"{logical} NTPs ({probe_idx})", f"{logical} NTPs {probe_idx}", f"{logical}_ntps_{probe_idx}")
    if per_probe is not None:
        return _parse_float_list(row[per_probe], f"{where}: column {per_probe!r}")
    shared = _find_column(row, f"{logical} NTPs", f"{logical}_ntps", f"{logical}")
    if shared is None:
        raise DatasetError(f"{where}: missing column for {logical} NTPs")
    value = row[shared]
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError as e:
            raise DatasetError(f"{where}: cannot parse column {shared!r}: {e}") from e
    if isinstance(value, (list, tuple)) and len(value) == 4 and all(isinstance(v, (list, tuple)) for v in value):
        return [float(v) for v in value[probe_idx - 1]]
    return _parse_float_list(value, f"{where}: column {shared!r}")


def convert_published(source_dir, out_path, label_means_valid: bool = True) -> int:
    """Convert the released description-level distribution to probe-level JSONL.

    Each source row describes one image description and contributes four
    probe records sharing an ``image_id``. ``label_means_valid`` controls the
    polarity of the source ``Label (i)`` column: the released data marks
    whether a probe is a *valid* statement, while this toolkit's label is True
    when the probe is *hallucinated*. Returns the number of records written;
    nothing is written if any row fails to convert.
    """
    source_dir = Path(source_dir)
    out_path = Path(out_path)
    if not source_dir.is_dir():
        raise DatasetError(f"{source_dir}: not a directory")
    records = []
    for row_idx, row in enumerate(_iter_source_rows(source_dir)):
        where = f"source row {row_idx}"
        if not isinstance(row, dict):
            raise DatasetError(f"{where}: expected an object, got {type(row).__name__}")
        img_col = _find_column(row, "image_id", "image", "image name", "img")
        image_id = str(row[img_col]) if img_col is not None else f"img-{row_idx:04d}"
        gen_col = _find_column(row, "generator_model", "model", "vlm", "generator")
        if gen_col is not None:
            generator = _parse_generator(row[gen_col])
        else:
            generator = "llava-1.5"
            if row_idx == 0:
                log.warning("source rows carry no generator-model column; defaulting to llava-1.5")
        for i in (1, 2, 3, 4):
            pwhere = f"{where}, probe {i}"
            probe_col = _find_column(row, f"Probe ({i})", f"Probe {i}", f"probe_{i}")
            label_col = _find_column(row, f"Label ({i})", f"Label {i}", f"label_{i}")
            context_col = _find_column(row, f"Context ({i})", f"Context {i}", f"context_{i}")
            if probe_col is None or label_col is None:
                raise DatasetError(f"{pwhere}: missing Probe/Label column")
            desc = _row_ntps(row, "Description", i, pwhere)
            ling = _row_ntps(row, "Linguistic", i, pwhere)
            if len(desc) != len(ling):
                raise DatasetError(f"{pwhere}: Description/Linguistic NTP lengths differ ({len(desc)} != {len(ling)})")
            src_label = _parse_bool(row[label_col], pwhere)
            label = (not src_label) if label_means_valid else src_label
            preds = {}
            for pred_field, names in (
                ("llava_pred", (f"LLaVA Pred ({i})", f"LLaVA Pred {i}", f"llava_pred_{i}")),
                ("paligemma_pred", (f"PaliGemma Pred ({i})", f"PaliGemma Pred {i}", f"paligemma_pred_{i}")),
            ):
                col = _find_column(row, *names)
                v = row.get(col) if col is not None else None
                if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none", "null", "nan")):
                    preds[pred_field] = None
                else:
                    try:
                        preds[pred_field] = float(v)
                    except (TypeError, ValueError) as e:
                        raise DatasetError(f"{pwhere}: cannot parse {pred_field} from {v!r}") from e
            rec = ProbeRecord(
                record_id=f"d{row_idx:04d}-p{i}",
                image_id=image_id,
                generator_model=generator,
                probe_text=str(row[probe_col]),
                context_span=str(row[context_col]) if context_col is not None else "",
                label=label,
                description_ntps=tuple(desc),
                linguistic_ntps=tuple(ling),
                **preds,
            )
            try:
                rec.validate()
            except DatasetError as e:
                raise DatasetError(f"{pwhere}: {e}") from e
            records.append(rec)
    if not records:
        raise DatasetError(f"{source_dir}: no rows found in source files")
    write_jsonl(Dataset(records=tuple(records)), out_path)
    return len(records)


# --------------------------------------------------------------------------
# Synthetic data
# --------------------------------------------------------------------------

def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def synth_generate(
    n: int,
    signal_strength: float,
    seed: int,
    positive_rate: float = 0.429,
    min_len: int = 4,
    max_len: int = 42,
    linguistic_coupling: float = 0.8,
) -> Dataset:
    """Generate a synthetic probe dataset with a controllable label signal.

    Token probabilities are sigmoids of Gaussian latents; for hallucinated
    records the latent mean is shifted down by ``signal_strength`` standard
    deviations, so ``signal_strength=0`` yields label-independent data and
    large values make the mean-probability feature separate the classes on
    its own. Linguistic sequences are coupled to the description latents with
    correlation ``linguistic_coupling``. Predictor scores estimate the
    probability the probe is *correct*, so they shift down for hallucinated
    records (PaliGemma more sharply than LLaVA). Deterministic given ``seed``.
    """
    if n < 4:
        raise ValueError("synth_generate needs n >= 4")
    if signal_strength < 0:
        raise ValueError("signal_strength must be >= 0")
    rng = np.random.default_rng(seed)
    rho = linguistic_coupling
    records = []
    for i in range(n):
        label = bool(rng.random() < positive_rate)
        shift = signal_strength if label else 0.0
        length = int(rng.integers(min_len, max_len + 1))
        z_desc = rng.normal(1.2 - shift, 1.0, size=length)
        z_ling = rho * z_desc + math.sqrt(1.0 - rho * rho) * rng.normal(0.0, 1.0, size=length)
        llava = float(_sigmoid(rng.normal(0.8, 1.0) - 0.8 * shift))
        pali = float(_sigmoid(rng.normal(0.8, 1.0) - 1.2 * shift))
        image_idx = i // 4
        records.append(
            ProbeRecord(
                record_id=f"synth-{i:05d}",
                image_id=f"img-{image_idx:05d}",
                generator_model=GENERATOR_MODELS[image_idx % 2],
                probe_text=f"synthetic probe {i}",
                context_span=f"synthetic context {i}",
                label=label,
                description_ntps=tuple(float(v) for v in _sigmoid(z_desc)),
                linguistic_ntps=tuple(float(v) for v in _sigmoid(z_ling)),
                llava_pred=llava,
                paligemma_pred=pali,
            )
        )
    return Dataset(records=tuple(records))
