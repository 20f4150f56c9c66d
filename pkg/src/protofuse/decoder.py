"""Core scoring chain: calibration, projection, prototype distances, fusion.

The final logit for class k is

    q(x, k) = Dec(h, k) + lambda * s_hat_k

where Dec is either a hypersphere-prototype head (negative distance to the
class center plus a per-class radius) or a two-layer MLP baseline, and s_hat
are the calibrated model scores.  Everything here is a pure function of its
inputs; a DecoderModel is never mutated during scoring.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    CalibrationDegenerateError,
    NumericsError,
    SchemaError,
)

# Smoothing inside the Euclidean norm so its gradient exists at zero.
NORM_EPS = 1e-12

SCORE_SPACES = ("prob", "logprob")
DECODER_KINDS = ("proto", "mlp")


@dataclass(frozen=True)
class FeatureRecord:
    """One example's frozen-model outputs.

    hidden is the final-layer state at the mask position; scores are the
    label-word probabilities (positive, summing to 1).  label is -1 for
    unlabeled test inputs.
    """

    id: str
    label: int
    hidden: np.ndarray
    scores: np.ndarray
    text: str | None = None

    def validate(self, k: int, dim: int) -> None:
        if self.hidden.shape != (dim,):
            raise SchemaError(f"record {self.id}: hidden has {self.hidden.shape[0] if self.hidden.ndim == 1 else '?'} entries, expected {dim}")
        if not np.all(np.isfinite(self.hidden)):
            raise SchemaError(f"record {self.id}: non-finite hidden entries")
        if self.scores.shape != (k,):
            raise SchemaError(f"record {self.id}: scores has {self.scores.shape[0] if self.scores.ndim == 1 else '?'} entries, expected {k}")
        if not np.all(self.scores > 0):
            raise SchemaError(f"record {self.id}: scores must be strictly positive")
        if abs(float(self.scores.sum()) - 1.0) > 1e-6:
            raise SchemaError(f"record {self.id}: scores sum to {self.scores.sum()}, expected 1")
        if not (-1 <= self.label < k):
            raise SchemaError(f"record {self.id}: label {self.label} out of range for K={k}")


@dataclass(frozen=True)
class CalibrationRecord:
    """Label-word scores elicited from the empty calibration input."""

    scores: np.ndarray

    def validate(self) -> None:
        if self.scores.ndim != 1 or self.scores.shape[0] < 2:
            raise SchemaError("calibration scores must be a vector of length >= 2")
        if not np.all(self.scores > 0):
            raise CalibrationDegenerateError("calibration scores contain a non-positive entry")
        if abs(float(self.scores.sum()) - 1.0) > 1e-6:
            raise SchemaError(f"calibration scores sum to {self.scores.sum()}, expected 1")


@dataclass
class MlpParams:
    """Two-layer rectifier MLP head: w2 @ relu(w1 @ h + b1) + b2."""

    w1: np.ndarray  # (hidden, D)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (K, hidden)
    b2: np.ndarray  # (K,)


@dataclass
class DecoderModel:
    """Trainable decoder parameters plus the fusion weight lambda."""

    weight: np.ndarray          # (d, D) projection
    centers: np.ndarray         # (K, d) prototype centers
    radii: np.ndarray           # (K,) prototype radii
    fusion_lambda: float
    decoder_kind: str = "proto"
    score_space: str = "prob"
    mlp: MlpParams | None = None

    @property
    def n_classes(self) -> int:
        return self.centers.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def proj_dim(self) -> int:
        return self.weight.shape[0]

    def validate(self) -> None:
        k, d = self.centers.shape
        if k < 2:
            raise SchemaError(f"K={k} < 2")
        if d < 1 or self.input_dim < 1:
            raise SchemaError("projection dimensions must be >= 1")
        if self.weight.shape[0] != d:
            raise SchemaError("projection and centers disagree on d")
        if self.radii.shape != (k,):
            raise SchemaError("radii length must equal K")
        if self.fusion_lambda < 0:
            raise SchemaError("lambda must be nonnegative")
        if self.decoder_kind not in DECODER_KINDS:
            raise SchemaError(f"unknown decoder kind {self.decoder_kind!r}")
        if self.score_space not in SCORE_SPACES:
            raise SchemaError(f"unknown score space {self.score_space!r}")
        if (self.mlp is None) == (self.decoder_kind == "mlp"):
            raise SchemaError("mlp params present iff decoder_kind == 'mlp'")
        tensors = [self.weight, self.centers, self.radii]
        if self.mlp is not None:
            tensors += [self.mlp.w1, self.mlp.b1, self.mlp.w2, self.mlp.b2]
        for t in tensors:
            if not np.all(np.isfinite(t)):
                raise SchemaError("non-finite model parameter")


@dataclass(frozen=True)
class ScoredExample:
    """Full scoring breakdown for one example."""

    q: np.ndarray       # final logits, dec + lambda * s_hat
    p: np.ndarray       # softmax probabilities
    dec: np.ndarray     # decoder scores
    s_hat: np.ndarray   # calibrated model scores


def calibrate(s: np.ndarray, s_c: np.ndarray) -> np.ndarray:
    """Rescale scores by the empty-input calibration scores.

    s_hat_k = s_k * mean(s_c) / s_c_k, which removes the per-label-word
    frequency bias; calibrating s_c by itself yields a constant vector.
    """
    s = np.asarray(s, dtype=float)
    s_c = np.asarray(s_c, dtype=float)
    if s.shape != s_c.shape:
        raise SchemaError(f"score length {s.shape} != calibration length {s_c.shape}")
    if np.any(s_c <= 0):
        raise CalibrationDegenerateError("calibration scores contain a non-positive entry")
    return s * _calibration_factor(s_c)


def _calibration_factor(s_c: np.ndarray) -> np.ndarray:
    # constant vectors get an exact mean, so uniform s_c is exactly identity
    mean = s_c[0] if np.all(s_c == s_c[0]) else s_c.mean()
    return mean / s_c


def project(model: DecoderModel, h: np.ndarray) -> np.ndarray:
    """Linear projection v = W h into the decoder space."""
    h = np.asarray(h, dtype=float)
    if h.shape != (model.input_dim,):
        raise SchemaError(f"hidden length {h.shape} != model input dim {model.input_dim}")
    return model.weight @ h


def smooth_norm(u: np.ndarray, axis=-1) -> np.ndarray:
    """sqrt(||u||^2 + eps^2): the Euclidean norm, differentiable at zero."""
    return np.sqrt(np.sum(np.square(u), axis=axis) + NORM_EPS**2)


def proto_score(model: DecoderModel, h: np.ndarray, k: int) -> float:
    """Hypersphere score for class k: -(distance to center) + radius."""
    if model.decoder_kind != "proto":
        raise SchemaError("proto_score requires a proto decoder")
    if not 0 <= k < model.n_classes:
        raise SchemaError(f"class index {k} out of range")
    v = project(model, h)
    return float(-smooth_norm(v - model.centers[k]) + model.radii[k])


def mlp_score(model: DecoderModel, h: np.ndarray) -> np.ndarray:
    """Two-layer MLP baseline head, scores for all K classes at once."""
    if model.decoder_kind != "mlp" or model.mlp is None:
        raise SchemaError("mlp_score requires an mlp decoder")
    h = np.asarray(h, dtype=float)
    m = model.mlp
    if h.shape != (m.w1.shape[1],):
        raise SchemaError(f"hidden length {h.shape} != mlp input dim {m.w1.shape[1]}")
    a = m.w1 @ h + m.b1
    return m.w2 @ np.maximum(a, 0.0) + m.b2


def decoder_scores(model: DecoderModel, h: np.ndarray) -> np.ndarray:
    """Dec(h, .) for all classes, dispatching on the decoder kind."""
    if model.decoder_kind == "mlp":
        return mlp_score(model, h)
    v = project(model, h)
    return -smooth_norm(v[None, :] - model.centers) + model.radii


def softmax(q: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax."""
    e = np.exp(q - np.max(q, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def fusion_term(s_hat: np.ndarray, score_space: str) -> np.ndarray:
    """The calibrated-score term entering the final logit."""
    if score_space == "logprob":
        return np.log(s_hat)
    return s_hat


def fuse_and_softmax(dec: np.ndarray, s_hat: np.ndarray, lam: float,
                     score_space: str = "prob") -> ScoredExample:
    """Combine decoder and calibrated scores, then normalize."""
    dec = np.asarray(dec, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    if dec.shape != s_hat.shape:
        raise SchemaError(f"decoder scores {dec.shape} != calibrated scores {s_hat.shape}")
    if lam < 0:
        raise SchemaError("lambda must be nonnegative")
    if not (np.all(np.isfinite(dec)) and np.all(np.isfinite(s_hat))):
        raise NumericsError("non-finite input to fusion")
    q = dec + lam * fusion_term(s_hat, score_space)
    if not np.all(np.isfinite(q)):
        raise NumericsError("non-finite fused logits")
    return ScoredExample(q=q, p=softmax(q), dec=dec, s_hat=s_hat)


def score_record(model: DecoderModel, record: FeatureRecord,
                 cal: CalibrationRecord) -> ScoredExample:
    """Run the full chain calibrate -> decode -> fuse for one record."""
    s_hat = calibrate(record.scores, cal.scores)
    dec = decoder_scores(model, record.hidden)
    return fuse_and_softmax(dec, s_hat, model.fusion_lambda, model.score_space)


def predict(model: DecoderModel, record: FeatureRecord,
            cal: CalibrationRecord) -> int:
    """Predicted class: argmax of the final logits, lowest index on ties."""
    return int(np.argmax(score_record(model, record, cal).q))


def batch_logits(model: DecoderModel, hidden: np.ndarray, scores: np.ndarray,
                 cal: CalibrationRecord) -> np.ndarray:
    """Vectorized final logits for a batch. hidden (N, D), scores (N, K)."""
    if np.any(cal.scores <= 0):
        raise CalibrationDegenerateError("calibration scores contain a non-positive entry")
    if scores.shape[1] != cal.scores.shape[0]:
        raise SchemaError("score width does not match calibration")
    s_hat = scores * _calibration_factor(cal.scores)[None, :]
    if model.decoder_kind == "mlp":
        m = model.mlp
        a = hidden @ m.w1.T + m.b1
        dec = np.maximum(a, 0.0) @ m.w2.T + m.b2
    else:
        v = hidden @ model.weight.T
        dec = -smooth_norm(v[:, None, :] - model.centers[None, :, :]) + model.radii
    return dec + model.fusion_lambda * fusion_term(s_hat, model.score_space)


def batch_predict(model: DecoderModel, hidden: np.ndarray, scores: np.ndarray,
                  cal: CalibrationRecord) -> np.ndarray:
    """Vectorized predict; identical to predict() per row."""
    return np.argmax(batch_logits(model, hidden, scores, cal), axis=1)
