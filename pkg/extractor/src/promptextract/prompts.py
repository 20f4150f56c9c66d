"""Prompt templates and label-word sets.

A template is a plain string with input slots ({text}, {text_a}, {text_b},
{entity}) and exactly one [MASK] marker, which is substituted with the
target tokenizer's mask (or sentinel) token at encoding time.
"""

import json
import re
from dataclasses import dataclass

from .errors import ConfigError

MASK_MARKER = "[MASK]"
SLOT_NAMES = ("text", "text_a", "text_b", "entity")
_SLOT_RE = re.compile(r"\{(" + "|".join(SLOT_NAMES) + r")\}")


@dataclass(frozen=True)
class PromptSpec:
    template: str
    label_words: tuple[str, ...]
    dataset: str = ""

    def __post_init__(self):
        if self.template.count(MASK_MARKER) != 1:
            raise ConfigError(
                f"template needs exactly one {MASK_MARKER} marker: {self.template!r}")
        if len(self.label_words) < 2:
            raise ConfigError("need at least two label words")
        unknown = set(re.findall(r"\{(\w+)\}", self.template)) - set(SLOT_NAMES)
        if unknown:
            raise ConfigError(f"unknown template slots: {sorted(unknown)}")

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(_SLOT_RE.findall(self.template))

    def fill(self, values: dict) -> str:
        """Substitute slot values; missing slots become the empty string."""
        def sub(match):
            return str(values.get(match.group(1), ""))
        return _SLOT_RE.sub(sub, self.template)


DEFAULT_TEMPLATES = {
    "sst2": PromptSpec("{text} In summary, it was [MASK].",
                       ("bad", "great"), "sst2"),
    "yelp": PromptSpec("{text} In summary, it was [MASK].",
                       ("bad", "great"), "yelp"),
    "imdb": PromptSpec("{text} In summary, it was [MASK].",
                       ("bad", "great"), "imdb"),
    "agnews": PromptSpec("[ Topic : [MASK] ] {text}",
                         ("politics", "sports", "business", "technology"),
                         "agnews"),
    "yahoo": PromptSpec("[ Topic : [MASK] ] {text}",
                        ("society", "science", "health", "education",
                         "computers", "sports", "business", "entertainment",
                         "family", "politics"), "yahoo"),
    "dbpedia": PromptSpec("{text_a} {text_b} The category of {text_a} is [MASK].",
                          ("company", "school", "artist", "athlete",
                           "politics", "transportation", "building", "river",
                           "village", "animal", "plant", "album", "film",
                           "book"), "dbpedia"),
    "rte": PromptSpec("{text_a} ? [MASK] , {text_b}", ("No", "Yes"), "rte"),
    "snli": PromptSpec("{text_a} ? [MASK] , {text_b}",
                       ("No", "Maybe", "Yes"), "snli"),
    "mnli": PromptSpec("{text_a} ? [MASK] , {text_b}",
                       ("No", "Maybe", "Yes"), "mnli"),
}


def load_template_file(path) -> dict[str, PromptSpec]:
    """Load {name: {"template": ..., "label_words": [...]}} from JSON."""
    with open(path) as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ConfigError("template file must hold an object keyed by dataset")
    specs = {}
    for name, obj in raw.items():
        try:
            specs[name] = PromptSpec(template=obj["template"],
                                     label_words=tuple(obj["label_words"]),
                                     dataset=name)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"template entry {name!r} malformed: {exc}") from exc
    return specs
