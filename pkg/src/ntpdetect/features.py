"""Feature construction from token-probability sequences.

Two families are supported. *Raw* features zero-pad the sequences to a fixed
length and optionally combine the description and linguistic series
element-wise (the combination runs on the unpadded tokens, then pads, which
keeps padding positions exactly zero). *Statistical* features summarize the
unpadded sequence: mean, population std, mean of the element-wise log and
exp, and the normalized frequencies of the dominant non-DC DFT bins; when
both sequences are used, two cross-sequence summaries are added. Predictor
scores can be appended to either family as single features.

Feature names are stable strings (``desc.mean``, ``ling.dft.0``,
``raw.subtract.17``, ``pred.llava``, ...) so that leave-one-out reports can
reference individual coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .data import Dataset, ProbeRecord

AGGREGATIONS = ("description_only", "linguistic_only", "concat", "subtract", "divide")
FEATURE_KINDS = ("raw", "statistical")
MAX_DFT_K = 5


@dataclass(frozen=True)
class FeatureConfig:
    """Full specification of one feature space.

    ``aggregation`` only matters for the raw kind; ``use_linguistic`` and
    ``dft_k`` only for the statistical kind. ``pad_len`` is the raw padding
    target and is normally resolved to the dataset's longest sequence.
    ``excluded_features`` names coordinates dropped after construction (for
    leave-one-out runs) and must be a subset of the produced names.
    """

    kind: str = "statistical"
    aggregation: str = "subtract"
    use_linguistic: bool = False
    dft_k: int = 0
    include_llava_pred: bool = False
    include_paligemma_pred: bool = False
    excluded_features: frozenset[str] = field(default_factory=frozenset)
    pad_len: int | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"kind must be one of {FEATURE_KINDS}, got {self.kind!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if not (0 <= self.dft_k <= MAX_DFT_K):
            raise ValueError(f"dft_k must be in [0, {MAX_DFT_K}], got {self.dft_k}")
        if self.pad_len is not None and self.pad_len < 1:
            raise ValueError(f"pad_len must be positive, got {self.pad_len}")
        object.__setattr__(self, "excluded_features", frozenset(self.excluded_features))

    def resolve_pad_len(self, dataset: Dataset) -> "FeatureConfig":
        if self.kind == "raw" and self.pad_len is None:
            return replace(self, pad_len=dataset.max_seq_len)
        return self

    def feature_names(self) -> tuple[str, ...]:
        """Produced names before exclusion, in construction order."""
        names: list[str] = []
        if self.kind == "raw":
            if self.pad_len is None:
                raise ValueError("pad_len is unresolved; call resolve_pad_len first")
            width = 2 * self.pad_len if self.aggregation == "concat" else self.pad_len
            names += [f"raw.{self.aggregation}.{i}" for i in range(width)]
        else:
            stat = ["mean", "std", "mean_log", "mean_exp"] + [f"dft.{i}" for i in range(self.dft_k)]
            names += [f"desc.{s}" for s in stat]
            if self.use_linguistic:
                names += [f"ling.{s}" for s in stat]
                names += ["cross.mean_product", "cross.min_ratio"]
        if self.include_llava_pred:
            names.append("pred.llava")
        if self.include_paligemma_pred:
            names.append("pred.paligemma")
        unknown = self.excluded_features - set(names)
        if unknown:
            raise ValueError(f"excluded_features not produced by this config: {sorted(unknown)}")
        return tuple(names)

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "aggregation": self.aggregation,
            "use_linguistic": self.use_linguistic,
            "dft_k": self.dft_k,
            "include_llava_pred": self.include_llava_pred,
            "include_paligemma_pred": self.include_paligemma_pred,
            "excluded_features": sorted(self.excluded_features),
            "pad_len": self.pad_len,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FeatureConfig":
        kwargs = dict(obj)
        kwargs["excluded_features"] = frozenset(kwargs.get("excluded_features", ()))
        return cls(**kwargs)


@dataclass
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.names) != self.values.size:
            raise ValueError(f"{len(self.names)} names but {self.values.size} values")
        if not np.all(np.isfinite(self.values)):
            bad = [self.names[i] for i in np.flatnonzero(~np.isfinite(self.values))]
            raise ValueError(f"non-finite feature values: {bad}")


def pad(seq, target_len: int) -> np.ndarray:
    """Zero-pad a sequence on the right to ``target_len``."""
    seq = np.asarray(seq, dtype=float)
    if seq.size > target_len:
        raise ValueError(f"sequence of length {seq.size} exceeds pad length {target_len}")
    out = np.zeros(target_len, dtype=float)
    out[: seq.size] = seq
    return out


def aggregate_raw(desc, ling, mode: str, pad_len: int) -> FeatureVector:
    """Combine the two NTP sequences into one fixed-length raw vector.

    Element-wise modes operate on unpadded tokens, then pad; ``divide`` uses
    d_i / (1 + l_i), which stays in [0, 1] for probability inputs and maps
    padding to exactly zero.
    """
    desc = np.asarray(desc, dtype=float)
    ling = np.asarray(ling, dtype=float)
    if mode not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    if desc.size != ling.size:
        raise ValueError(f"sequence lengths differ ({desc.size} != {ling.size})")
    if mode == "description_only":
        values = pad(desc, pad_len)
    elif mode == "linguistic_only":
        values = pad(ling, pad_len)
    elif mode == "concat":
        values = np.concatenate([pad(desc, pad_len), pad(ling, pad_len)])
    elif mode == "subtract":
        values = pad(desc - ling, pad_len)
    else:  # divide
        values = pad(desc / (1.0 + ling), pad_len)
    names = tuple(f"raw.{mode}.{i}" for i in range(values.size))
    return FeatureVector(names=names, values=values)


def dft_topk(seq, k: int) -> np.ndarray:
    """Normalized frequencies of the k strongest non-DC DFT bins.

    Bins 1..floor(n/2) are ranked by magnitude (ties to the lower bin index)
    and reported as bin/n, strongest first. Bins whose magnitude is
    numerically zero carry no frequency information and are not dominant, so
    the output is zero-filled when fewer than k informative bins exist; a
    constant sequence therefore yields all zeros.
    """
    seq = np.asarray(seq, dtype=float)
    if not (0 <= k <= MAX_DFT_K):
        raise ValueError(f"k must be in [0, {MAX_DFT_K}], got {k}")
    if seq.size == 0:
        raise ValueError("dft_topk needs a non-empty sequence")
    out = np.zeros(k, dtype=float)
    if k == 0:
        return out
    n = seq.size
    mags = np.abs(np.fft.rfft(seq))[1:]  # rfft yields bins 0..floor(n/2)
    tol = 100.0 * n * np.finfo(float).eps * max(1.0, float(np.max(np.abs(seq))))
    order = sorted(range(mags.size), key=lambda b: (-mags[b], b))
    for slot, b in enumerate(order[:k]):
        if mags[b] <= tol:
            break
        out[slot] = (b + 1) / n
    return out


def stat_features(seq, dft_k: int) -> list[tuple[str, float]]:
    """Summary statistics of one unpadded probability sequence.

    Returns (name, value) pairs: mean, population std, mean of log(p), mean
    of exp(p), then the ``dft_k`` dominant-frequency values.
    """
    seq = np.asarray(seq, dtype=float)
    if seq.size == 0:
        raise ValueError("stat_features needs a non-empty sequence")
    if np.any(seq <= 0.0):
        raise ValueError("stat_features needs strictly positive values (log is undefined at <= 0)")
    pairs = [
        ("mean", float(seq.mean())),
        ("std", float(seq.std())),
        ("mean_log", float(np.log(seq).mean())),
        ("mean_exp", float(np.exp(seq).mean())),
    ]
    pairs += [(f"dft.{i}", float(v)) for i, v in enumerate(dft_topk(seq, dft_k))]
    return pairs


def cross_features(desc, ling) -> list[tuple[str, float]]:
    """Cross-sequence summaries: mean element-wise product, and the smaller of
    the two mean element-wise ratios (ling/desc vs desc/ling)."""
    desc = np.asarray(desc, dtype=float)
    ling = np.asarray(ling, dtype=float)
    if desc.size != ling.size:
        raise ValueError(f"sequence lengths differ ({desc.size} != {ling.size})")
    mean_product = float((desc * ling).mean())
    min_ratio = min(float((ling / desc).mean()), float((desc / ling).mean()))
    return [("cross.mean_product", mean_product), ("cross.min_ratio", min_ratio)]


def build_features(record: ProbeRecord, config: FeatureConfig) -> FeatureVector:
    """Build one record's feature vector under ``config``.

    Deterministic, and total on valid records; raises when the record lacks a
    predictor score the config asks for.
    """
    pairs: list[tuple[str, float]] = []
    if config.kind == "raw":
        if config.pad_len is None:
            raise ValueError("pad_len is unresolved; call config.resolve_pad_len(dataset) first")
        fv = aggregate_raw(record.description_ntps, record.linguistic_ntps, config.aggregation, config.pad_len)
        pairs += list(zip(fv.names, fv.values))
    else:
        pairs += [(f"desc.{n}", v) for n, v in stat_features(record.description_ntps, config.dft_k)]
        if config.use_linguistic:
            pairs += [(f"ling.{n}", v) for n, v in stat_features(record.linguistic_ntps, config.dft_k)]
            pairs += cross_features(record.description_ntps, record.linguistic_ntps)
    for flag, field_name, feat_name in (
        (config.include_llava_pred, "llava_pred", "pred.llava"),
        (config.include_paligemma_pred, "paligemma_pred", "pred.paligemma"),
    ):
        if flag:
            value = getattr(record, field_name)
            if value is None:
                raise ValueError(f"record {record.record_id}: field {field_name} is required by the feature config but missing")
            pairs.append((feat_name, float(value)))
    names = tuple(n for n, _ in pairs)
    unknown = config.excluded_features - set(names)
    if unknown:
        raise ValueError(f"excluded_features not produced by this config: {sorted(unknown)}")
    kept = [(n, v) for n, v in pairs if n not in config.excluded_features]
    return FeatureVector(names=tuple(n for n, _ in kept), values=np.array([v for _, v in kept], dtype=float))


def featurize_dataset(dataset: Dataset, config: FeatureConfig) -> tuple[np.ndarray, tuple[str, ...]]:
    """Feature matrix for every record in dataset order, plus the shared names."""
    config = config.resolve_pad_len(dataset)
    names: tuple[str, ...] | None = None
    rows = []
    for record in dataset:
        fv = build_features(record, config)
        if names is None:
            names = fv.names
        elif fv.names != names:
            raise ValueError(f"record {record.record_id}: inconsistent feature names")
        rows.append(fv.values)
    assert names is not None
    return np.vstack(rows), names
