"""File formats shared with the decoder package.

Feature files are line-delimited JSON: a header object
{"k": K, "d": D, "labels": [...], "source": "..."} followed by one record
per line {"id", "label", "hidden", "scores"(, "text")}.  A calibration file
is a single line {"scores": [...]}.  Input examples are also line-delimited
JSON, one object per example with an "id", optional "label", and the slot
values ("text", or "text_a"/"text_b", or "entity").
"""

import json

from .errors import ConfigError
from .runner import Example

SLOT_KEYS = ("text", "text_a", "text_b", "entity")


def read_examples(path) -> list[Example]:
    """Read line-delimited JSON examples."""
    examples = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{line_no}: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj:
                raise ConfigError(f"{path}:{line_no}: expected an object with an 'id'")
            values = {k: str(obj[k]) for k in SLOT_KEYS if k in obj}
            if not values:
                raise ConfigError(f"{path}:{line_no}: no input slot values")
            examples.append(Example(
                id=str(obj["id"]), label=int(obj.get("label", -1)),
                values=values, text=obj.get("text")))
    return examples


def write_feature_file(path, records: list[dict], k: int, d: int,
                       labels, source: str = "") -> None:
    """Write the header plus one JSON line per record."""
    labels = [str(x) for x in labels]
    if len(labels) != k:
        raise ConfigError(f"{len(labels)} label names for k={k}")
    with open(path, "w") as f:
        f.write(json.dumps({"k": k, "d": d, "labels": labels,
                            "source": source}) + "\n")
        for rec in records:
            f.write(json.dumps(rec) + "\n")


def write_calibration(path, scores: list[float]) -> None:
    with open(path, "w") as f:
        f.write(json.dumps({"scores": list(scores)}) + "\n")
