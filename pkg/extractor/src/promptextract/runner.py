"""Batched feature extraction from a frozen masked (or encoder-decoder) LM.

For each example the model is queried once with the template-wrapped input;
we keep the final-layer hidden state at the mask position and the softmax
over the label-word logits.  The calibration record comes from the same
template applied to the empty string.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigError, ExampleError
from .prompts import MASK_MARKER, PromptSpec

SCORE_MODES = ("restricted", "full")


@dataclass
class Example:
    id: str
    label: int = -1
    values: dict = field(default_factory=dict)
    text: str | None = None


class FeatureExtractor:
    """Wraps a tokenizer/model pair; counts per-sample queries."""

    def __init__(self, model, tokenizer, max_length=None,
                 score_mode="restricted", device="cpu"):
        if score_mode not in SCORE_MODES:
            raise ConfigError(f"unknown score mode {score_mode!r}")
        self.model = model.to(device).eval()
        self.tokenizer = tokenizer
        self.device = device
        self.score_mode = score_mode
        self.is_encoder_decoder = bool(
            getattr(model.config, "is_encoder_decoder", False))
        self.queries = 0  # per-sample forward passes issued so far
        if self.is_encoder_decoder:
            self.fill_token_id = tokenizer.convert_tokens_to_ids("<extra_id_0>")
            if self.fill_token_id is None or self.fill_token_id < 0:
                raise ConfigError("encoder-decoder model lacks sentinel tokens")
        else:
            if tokenizer.mask_token_id is None:
                raise ConfigError("tokenizer has no mask token")
            self.fill_token_id = tokenizer.mask_token_id
        self.max_length = max_length or getattr(
            tokenizer, "model_max_length", None) or 512
        if self.max_length > 100_000:  # unset sentinel value in some tokenizers
            self.max_length = getattr(model.config, "max_position_embeddings", 512)

    @classmethod
    def from_pretrained(cls, model_id, **kwargs):
        from transformers import (
            AutoConfig,
            AutoModelForMaskedLM,
            AutoModelForSeq2SeqLM,
            AutoTokenizer,
        )
        config = AutoConfig.from_pretrained(model_id)
        auto = (AutoModelForSeq2SeqLM if getattr(config, "is_encoder_decoder", False)
                else AutoModelForMaskedLM)
        return cls(auto.from_pretrained(model_id),
                   AutoTokenizer.from_pretrained(model_id), **kwargs)

    @property
    def hidden_size(self) -> int:
        cfg = self.model.config
        return getattr(cfg, "d_model", None) or cfg.hidden_size

    def label_word_ids(self, spec: PromptSpec) -> list[int]:
        """Resolve each label word to a single vocabulary id."""
        ids = []
        for word in spec.label_words:
            candidates = [self.tokenizer.tokenize(word),
                          self.tokenizer.tokenize(" " + word)]
            single = [c for c in candidates if len(c) == 1]
            unk = self.tokenizer.unk_token
            single = [c for c in single if c[0] != unk] or single
            if not single:
                raise ConfigError(
                    f"label word {word!r} is not a single token "
                    f"(got {candidates[0]})")
            ids.append(self.tokenizer.convert_tokens_to_ids(single[0][0]))
        if len(set(ids)) != len(ids):
            raise ConfigError("label words collide after tokenization")
        return ids

    def _truncate_slot(self, values: dict, overflow: int) -> bool:
        """Drop `overflow` tokens from the end of the longest slot value."""
        tok = self.tokenizer
        longest, longest_ids = None, []
        for name, text in values.items():
            ids = tok(str(text), add_special_tokens=False)["input_ids"]
            if len(ids) > len(longest_ids):
                longest, longest_ids = name, ids
        if longest is None or not longest_ids:
            return False
        kept = longest_ids[:max(0, len(longest_ids) - overflow)]
        values[longest] = tok.decode(kept)
        return True

    def encode(self, spec: PromptSpec, example: Example) -> list[int]:
        """Token ids for the filled template, truncated to keep the mask."""
        tok = self.tokenizer
        mask_token = tok.convert_ids_to_tokens(self.fill_token_id)
        values = {k: str(v) for k, v in example.values.items()}
        for _ in range(8):
            prompt = spec.fill(values).replace(MASK_MARKER, mask_token)
            ids = tok(prompt, add_special_tokens=True)["input_ids"]
            if len(ids) <= self.max_length:
                if ids.count(self.fill_token_id) != 1:
                    raise ExampleError(example.id, "mask slot lost in encoding")
                return ids
            if not self._truncate_slot(values, len(ids) - self.max_length):
                raise ExampleError(
                    example.id,
                    f"prompt needs {len(ids)} tokens, window is {self.max_length}")
        raise ExampleError(example.id, "could not truncate prompt to fit")

    def _forward(self, batch_ids: list[list[int]]):
        """Hidden state and logits at the mask position for each sequence."""
        tok = self.tokenizer
        pad = tok.pad_token_id if tok.pad_token_id is not None else 0
        width = max(len(ids) for ids in batch_ids)
        input_ids = torch.full((len(batch_ids), width), pad, dtype=torch.long)
        attention = torch.zeros((len(batch_ids), width), dtype=torch.long)
        mask_pos = []
        for i, ids in enumerate(batch_ids):
            input_ids[i, :len(ids)] = torch.tensor(ids)
            attention[i, :len(ids)] = 1
            mask_pos.append(ids.index(self.fill_token_id))
        input_ids = input_ids.to(self.device)
        attention = attention.to(self.device)
        with torch.no_grad():
            if self.is_encoder_decoder:
                start = self.model.config.decoder_start_token_id
                dec = torch.tensor([[start, self.fill_token_id]] * len(batch_ids),
                                   device=self.device)
                out = self.model(input_ids=input_ids, attention_mask=attention,
                                 decoder_input_ids=dec,
                                 output_hidden_states=True)
                hidden = out.decoder_hidden_states[-1][:, -1, :]
                logits = out.logits[:, -1, :]
            else:
                out = self.model(input_ids=input_ids, attention_mask=attention,
                                 output_hidden_states=True)
                rows = torch.arange(len(batch_ids))
                pos = torch.tensor(mask_pos)
                hidden = out.hidden_states[-1][rows, pos, :]
                logits = out.logits[rows, pos, :]
        self.queries += len(batch_ids)
        return hidden.cpu().numpy(), logits.cpu().numpy()

    def _scores(self, logits: np.ndarray, label_ids: list[int]) -> np.ndarray:
        logits = np.asarray(logits, dtype=float)
        picked = logits[:, label_ids]
        if self.score_mode == "restricted":
            e = np.exp(picked - picked.max(axis=1, keepdims=True))
        else:
            full = np.exp(logits - logits.max(axis=1, keepdims=True))
            e = full[:, label_ids] / full.sum(axis=1, keepdims=True)
        return e / e.sum(axis=1, keepdims=True)

    def extract(self, examples: list[Example], spec: PromptSpec,
                batch_size: int = 32) -> list[dict]:
        """One record per example: hidden state, label-word scores, label."""
        if batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        label_ids = self.label_word_ids(spec)
        records = []
        for start in range(0, len(examples), batch_size):
            chunk = examples[start:start + batch_size]
            batch_ids = [self.encode(spec, ex) for ex in chunk]
            hidden, logits = self._forward(batch_ids)
            scores = self._scores(logits, label_ids)
            for ex, h, s in zip(chunk, hidden, scores):
                rec = {"id": ex.id, "label": ex.label,
                       "hidden": h.astype(float).tolist(),
                       "scores": s.astype(float).tolist()}
                if ex.text is not None:
                    rec["text"] = ex.text
                records.append(rec)
        return records

    def extract_calibration(self, spec: PromptSpec) -> list[float]:
        """Label-word scores for the template filled with empty strings."""
        label_ids = self.label_word_ids(spec)
        ids = self.encode(spec, Example(id="<calibration>"))
        _, logits = self._forward([ids])
        return self._scores(logits, label_ids)[0].astype(float).tolist()
