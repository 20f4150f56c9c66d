"""Decoder initialization, loss, analytic gradients and the Adam loop.

Training is full-batch: few-shot sets are tiny, so every epoch is one exact
gradient step over the whole training set.  Everything is deterministic
given the config seed.  Gradients are derived by hand and checked against
finite differences in the test suite; with u_k = W h - z_k,
rho_k = sqrt(||u_k||^2 + eps^2) and g_k = p_k - [k == y]:

    dL/dr_k += g_k / N
    dL/dW   += -(g_k / N) * (u_k / rho_k) h^T
    dL/dz_k += (g_k / N) * (u_k / rho_k)
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .decoder import (
    CalibrationRecord,
    DecoderModel,
    FeatureRecord,
    MlpParams,
    batch_logits,
    smooth_norm,
    softmax,
)
from .errors import ConfigError, MissingClassError, NumericsError, SchemaError


@dataclass
class TrainingConfig:
    epochs: int = 30
    learning_rate: float = 0.01
    proj_dim: int = 128
    seed: int = 0
    # None means the auto policy lambda = 1 / min_k N_k.
    fusion_lambda: float | None = None
    train_centers: bool = False
    ablate_radius: bool = False
    ablate_scores: bool = False
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    decoder_kind: str = "proto"
    score_space: str = "prob"

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.proj_dim < 1:
            raise ConfigError("projected dimension must be >= 1")
        if self.fusion_lambda is not None and self.fusion_lambda < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.decoder_kind not in ("proto", "mlp"):
            raise ConfigError(f"unknown decoder kind {self.decoder_kind!r}")
        if self.score_space not in ("prob", "logprob"):
            raise ConfigError(f"unknown score space {self.score_space!r}")


@dataclass
class TrainState:
    model: DecoderModel
    config: TrainingConfig
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    step: int = 0
    loss_history: list = field(default_factory=list)


def _class_counts(train: list[FeatureRecord], k: int) -> np.ndarray:
    counts = np.zeros(k, dtype=int)
    for rec in train:
        if not 0 <= rec.label < k:
            raise SchemaError(f"record {rec.id}: label {rec.label} invalid for training")
        counts[rec.label] += 1
    return counts


def trainable_params(model: DecoderModel, cfg: TrainingConfig) -> list[str]:
    """Names of the tensors the optimizer updates, in a fixed order."""
    if model.decoder_kind == "mlp":
        return ["w1", "b1", "w2", "b2"]
    names = ["weight"]
    if not cfg.ablate_radius:
        names.append("radii")
    if cfg.train_centers:
        names.append("centers")
    return names


def get_param(model: DecoderModel, name: str) -> np.ndarray:
    if name in ("weight", "centers", "radii"):
        return getattr(model, name)
    return getattr(model.mlp, name)


def set_param(model: DecoderModel, name: str, value: np.ndarray) -> None:
    if name in ("weight", "centers", "radii"):
        setattr(model, name, value)
    else:
        setattr(model.mlp, name, value)


def init_model(train: list[FeatureRecord], cal: CalibrationRecord,
               cfg: TrainingConfig) -> DecoderModel:
    """Draw W and centers, set radii to mean in-class distance, pick lambda.

    Radii follow the average distance between each center and the projected
    training instances of its class, computed with the freshly drawn W.
    The auto lambda policy sets lambda = 1/n with n the smallest per-class
    shot count.
    """
    cfg.validate()
    cal.validate()
    if not train:
        raise MissingClassError("empty training set")
    k = cal.scores.shape[0]
    dim = train[0].hidden.shape[0]
    for rec in train:
        rec.validate(k, dim)
    counts = _class_counts(train, k)
    if np.any(counts == 0):
        missing = [i for i in range(k) if counts[i] == 0]
        raise MissingClassError(f"no training records for classes {missing}")

    d = cfg.proj_dim
    rng = np.random.default_rng(cfg.seed)
    weight = rng.uniform(-1.0 / np.sqrt(dim), 1.0 / np.sqrt(dim), size=(d, dim))
    centers = rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(k, d))

    if cfg.ablate_scores:
        lam = 0.0
    elif cfg.fusion_lambda is not None:
        lam = float(cfg.fusion_lambda)
    else:
        lam = 1.0 / float(counts.min())

    if cfg.decoder_kind == "mlp":
        w2 = rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(k, d))
        mlp = MlpParams(w1=weight, b1=np.zeros(d), w2=w2, b2=np.zeros(k))
        model = DecoderModel(
            weight=weight, centers=np.zeros((k, d)), radii=np.zeros(k),
            fusion_lambda=lam, decoder_kind="mlp",
            score_space=cfg.score_space, mlp=mlp)
        model.validate()
        return model

    hidden = np.stack([rec.hidden for rec in train])
    labels = np.array([rec.label for rec in train])
    v = hidden @ weight.T
    radii = np.zeros(k)
    if not cfg.ablate_radius:
        for c in range(k):
            dists = np.linalg.norm(v[labels == c] - centers[c], axis=1)
            radii[c] = dists.mean()

    model = DecoderModel(
        weight=weight, centers=centers, radii=radii, fusion_lambda=lam,
        decoder_kind="proto", score_space=cfg.score_space)
    model.validate()
    return model


def _batch_arrays(batch: list[FeatureRecord], model: DecoderModel):
    if not batch:
        raise SchemaError("empty batch")
    for rec in batch:
        if rec.label < 0:
            raise SchemaError(f"record {rec.id}: unlabeled record in training batch")
    hidden = np.stack([rec.hidden for rec in batch])
    scores = np.stack([rec.scores for rec in batch])
    labels = np.array([rec.label for rec in batch])
    return hidden, scores, labels


def loss(model: DecoderModel, batch: list[FeatureRecord],
         cal: CalibrationRecord) -> float:
    """Mean cross-entropy of the fused softmax over the batch."""
    hidden, scores, labels = _batch_arrays(batch, model)
    q = batch_logits(model, hidden, scores, cal)
    logp = q - np.max(q, axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    value = -float(logp[np.arange(len(batch)), labels].mean())
    if not np.isfinite(value):
        raise NumericsError("non-finite loss")
    return value


def gradients(model: DecoderModel, batch: list[FeatureRecord],
              cal: CalibrationRecord, cfg: TrainingConfig) -> dict:
    """Analytic dL/d(param) for every trainable tensor."""
    hidden, scores, labels = _batch_arrays(batch, model)
    n = len(batch)
    q = batch_logits(model, hidden, scores, cal)
    p = softmax(q)
    g = p.copy()
    g[np.arange(n), labels] -= 1.0
    g /= n  # (N, K)

    grads = {}
    if model.decoder_kind == "mlp":
        m = model.mlp
        a = hidden @ m.w1.T + m.b1            # (N, hidden) preactivations
        z = np.maximum(a, 0.0)
        grads["w2"] = g.T @ z
        grads["b2"] = g.sum(axis=0)
        da = (g @ m.w2) * (a > 0)
        grads["w1"] = da.T @ hidden
        grads["b1"] = da.sum(axis=0)
    else:
        v = hidden @ model.weight.T                      # (N, d)
        u = v[:, None, :] - model.centers[None, :, :]    # (N, K, d)
        rho = smooth_norm(u)                             # (N, K)
        unit = u / rho[:, :, None]
        gu = g[:, :, None] * unit                        # (N, K, d)
        grads["weight"] = -np.einsum("nkd,nD->dD", gu, hidden)
        if not cfg.ablate_radius:
            grads["radii"] = g.sum(axis=0)
        if cfg.train_centers:
            grads["centers"] = gu.sum(axis=0)
    return {name: grads[name] for name in trainable_params(model, cfg)}


def adam_step(state: TrainState, grads: dict) -> TrainState:
    """One bias-corrected Adam update over the trainable tensors, in place."""
    cfg = state.config
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericsError(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for name in trainable_params(state.model, cfg):
        grad = grads[name]
        m = state.adam_m.setdefault(name, np.zeros_like(grad))
        v = state.adam_v.setdefault(name, np.zeros_like(grad))
        m[...] = b1 * m + (1 - b1) * grad
        v[...] = b2 * v + (1 - b2) * grad**2
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        update = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        set_param(state.model, name, get_param(state.model, name) - update)
    return state


def train(train_set: list[FeatureRecord], cal: CalibrationRecord,
          cfg: TrainingConfig) -> tuple[DecoderModel, list[float]]:
    """Full-batch Adam for cfg.epochs steps; returns model and loss history."""
    model = init_model(train_set, cal, cfg)
    state = TrainState(model=model, config=cfg)
    for _ in range(cfg.epochs):
        grads = gradients(state.model, train_set, cal, cfg)
        state.loss_history.append(loss(state.model, train_set, cal))
        adam_step(state, grads)
    return state.model, state.loss_history


def timed_train(train_set, cal, cfg) -> tuple[DecoderModel, list[float], float]:
    """train() plus wall-clock seconds, for efficiency reporting."""
    t0 = time.perf_counter()
    model, history = train(train_set, cal, cfg)
    return model, history, time.perf_counter() - t0
