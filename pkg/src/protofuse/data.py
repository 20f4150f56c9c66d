"""On-disk formats and n-shot splits.

Feature files are line-delimited JSON: line 1 is a header object
{"k": K, "d": D, "labels": [...], "source": "..."}, every following line is
one record {"id": ..., "label": int, "hidden": [...], "scores": [...]}.
A calibration file is a single JSON line {"scores": [...]}.  Model files
use the same style: a header object followed by one line per tensor.
"""

import json
from dataclasses import dataclass

import numpy as np

from .decoder import (
    CalibrationRecord,
    DecoderModel,
    FeatureRecord,
    MlpParams,
)
from .errors import MissingClassError, ParseError, SchemaError

# Score sums further than this from 1 are rejected instead of renormalized.
SCORE_SUM_TOL = 1e-4


@dataclass(frozen=True)
class FeatureHeader:
    n_classes: int
    hidden_dim: int
    labels: tuple[str, ...]
    source: str = ""


@dataclass(frozen=True)
class ShotSplit:
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    shots: int
    seed: int


def _parse_json_line(line: str, line_no: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), line_no) from exc
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line_no)
    return obj


def _float_array(values, what: str, rec_id: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise SchemaError(f"record {rec_id}: {what} must be a flat array")
    return arr


def load_feature_file(path) -> tuple[FeatureHeader, list[FeatureRecord]]:
    """Load and validate a feature file; renormalizes near-1 score sums."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    head = _parse_json_line(lines[0], 1)
    for key in ("k", "d", "labels"):
        if key not in head:
            raise ParseError(f"header missing {key!r}", 1)
    header = FeatureHeader(
        n_classes=int(head["k"]), hidden_dim=int(head["d"]),
        labels=tuple(str(x) for x in head["labels"]),
        source=str(head.get("source", "")))
    if header.n_classes < 2 or len(header.labels) != header.n_classes:
        raise SchemaError(f"header declares K={header.n_classes} with {len(header.labels)} label names")
    if header.hidden_dim < 1:
        raise SchemaError("header hidden dimension must be >= 1")

    records = []
    seen = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = _parse_json_line(line, line_no)
        for key in ("id", "label", "hidden", "scores"):
            if key not in obj:
                raise ParseError(f"record missing {key!r}", line_no)
        rec_id = str(obj["id"])
        if rec_id in seen:
            raise SchemaError(f"record {rec_id}: duplicate id")
        seen.add(rec_id)
        scores = _float_array(obj["scores"], "scores", rec_id)
        total = float(scores.sum())
        if abs(total - 1.0) > SCORE_SUM_TOL:
            raise SchemaError(f"record {rec_id}: scores sum to {total}")
        rec = FeatureRecord(
            id=rec_id, label=int(obj["label"]),
            hidden=_float_array(obj["hidden"], "hidden", rec_id),
            scores=scores / total,
            text=obj.get("text"))
        rec.validate(header.n_classes, header.hidden_dim)
        records.append(rec)
    return header, records


def write_feature_file(path, header: FeatureHeader,
                       records: list[FeatureRecord]) -> None:
    with open(path, "w") as f:
        f.write(json.dumps({
            "k": header.n_classes, "d": header.hidden_dim,
            "labels": list(header.labels), "source": header.source}) + "\n")
        for rec in records:
            obj = {"id": rec.id, "label": rec.label,
                   "hidden": rec.hidden.tolist(), "scores": rec.scores.tolist()}
            if rec.text is not None:
                obj["text"] = rec.text
            f.write(json.dumps(obj) + "\n")


def load_calibration(path) -> CalibrationRecord:
    with open(path) as f:
        line = f.readline()
    if not line.strip():
        raise ParseError("empty calibration file", 1)
    obj = _parse_json_line(line, 1)
    if "scores" not in obj:
        raise ParseError("calibration record missing 'scores'", 1)
    scores = np.asarray(obj["scores"], dtype=float)
    total = float(scores.sum())
    if abs(total - 1.0) > SCORE_SUM_TOL:
        raise SchemaError(f"calibration scores sum to {total}")
    cal = CalibrationRecord(scores=scores / total)
    cal.validate()
    return cal


def write_calibration(path, cal: CalibrationRecord) -> None:
    with open(path, "w") as f:
        f.write(json.dumps({"scores": cal.scores.tolist()}) + "\n")


def make_shot_split(records: list[FeatureRecord], n: int, seed: int) -> ShotSplit:
    """Sample n train + n validation ids per class, without replacement.

    Deterministic for a given seed; classes are visited in index order so
    the draw does not depend on record order across classes.
    """
    if n < 1:
        raise SchemaError("shots must be >= 1")
    by_class: dict[int, list[str]] = {}
    for rec in records:
        if rec.label >= 0:
            by_class.setdefault(rec.label, []).append(rec.id)
    if not by_class:
        raise MissingClassError("no labeled records")
    rng = np.random.default_rng(seed)
    train_ids, val_ids = [], []
    for label in sorted(by_class):
        ids = by_class[label]
        if len(ids) < 2 * n:
            raise MissingClassError(
                f"class {label} has {len(ids)} records, needs {2 * n} for {n}-shot")
        order = rng.permutation(len(ids))
        train_ids.extend(ids[i] for i in order[:n])
        val_ids.extend(ids[i] for i in order[n:2 * n])
    return ShotSplit(train_ids=tuple(train_ids), val_ids=tuple(val_ids),
                     shots=n, seed=seed)


def select_records(records: list[FeatureRecord], ids) -> list[FeatureRecord]:
    by_id = {rec.id: rec for rec in records}
    return [by_id[i] for i in ids]


def save_model(path, model: DecoderModel, config: dict | None = None,
               loss_history: list[float] | None = None) -> None:
    """Serialize a model as a header line plus one line per tensor."""
    header = {
        "format": "protofuse-model",
        "version": 1,
        "decoder": model.decoder_kind,
        "k": model.n_classes,
        "d_in": model.input_dim,
        "d": model.proj_dim,
        "lambda": model.fusion_lambda,
        "score_space": model.score_space,
        "config": config or {},
        "loss_history": loss_history or [],
    }
    tensors = {"weight": model.weight, "centers": model.centers,
               "radii": model.radii}
    if model.mlp is not None:
        tensors.update(w1=model.mlp.w1, b1=model.mlp.b1,
                       w2=model.mlp.w2, b2=model.mlp.b2)
    with open(path, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for name in sorted(tensors):
            t = tensors[name]
            f.write(json.dumps({"tensor": name, "shape": list(t.shape),
                                "data": t.ravel().tolist()}) + "\n")


def load_model(path) -> DecoderModel:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("empty model file", 1)
    head = _parse_json_line(lines[0], 1)
    if head.get("format") != "protofuse-model":
        raise ParseError("not a model file", 1)
    tensors = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = _parse_json_line(line, line_no)
        tensors[obj["tensor"]] = np.asarray(obj["data"], dtype=float).reshape(obj["shape"])
    mlp = None
    if head["decoder"] == "mlp":
        mlp = MlpParams(w1=tensors["w1"], b1=tensors["b1"],
                        w2=tensors["w2"], b2=tensors["b2"])
    model = DecoderModel(
        weight=tensors["weight"], centers=tensors["centers"],
        radii=tensors["radii"], fusion_lambda=float(head["lambda"]),
        decoder_kind=head["decoder"], score_space=head.get("score_space", "prob"),
        mlp=mlp)
    model.validate()
    return model
