"""Synthetic benchmark data: Gaussian clusters plus noisy prior scores.

Stands in for frozen-model outputs at desk scale.  Hidden states are K
isotropic Gaussian clusters whose intra-class spread (expected deviation
norm) is 1 and whose centers sit exactly `separation` apart, so
`separation` is the inter-center distance in units of cluster spread.
Prior scores are the softmax of logits biased toward the true class by
`prior_strength`, so their usefulness is controllable.
"""

from dataclasses import dataclass

import numpy as np

from .data import FeatureHeader
from .decoder import CalibrationRecord, FeatureRecord, softmax


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 4
    hidden_dim: int = 64
    n_per_class: int = 64
    separation: float = 5.0
    prior_strength: float = 1.6
    score_noise: float = 1.0
    seed: int = 0


def _cluster_centers(rng, k: int, dim: int, separation: float) -> np.ndarray:
    # K orthonormal directions scaled so every pairwise distance is exactly
    # `separation`; recentered so the simplex straddles the origin.
    q, _ = np.linalg.qr(rng.normal(size=(dim, k)))
    centers = q.T * (separation / np.sqrt(2))
    return centers - centers.mean(axis=0)


def make_synthetic(spec: SyntheticSpec) -> tuple[FeatureHeader, list[FeatureRecord], CalibrationRecord]:
    """Generate a balanced synthetic feature set plus a calibration record."""
    rng = np.random.default_rng(spec.seed)
    k, dim = spec.n_classes, spec.hidden_dim
    centers = _cluster_centers(rng, k, dim, spec.separation)
    noise_std = 1.0 / np.sqrt(dim)  # unit expected deviation norm

    # Per-label-word frequency bias the calibration should undo.
    bias = rng.normal(scale=0.5, size=k)
    cal = CalibrationRecord(scores=softmax(bias))

    records = []
    for label in range(k):
        for i in range(spec.n_per_class):
            hidden = centers[label] + rng.normal(scale=noise_std, size=dim)
            logits = bias + rng.normal(scale=spec.score_noise, size=k)
            logits[label] += spec.prior_strength
            records.append(FeatureRecord(
                id=f"c{label}-{i}", label=label,
                hidden=hidden, scores=softmax(logits)))
    header = FeatureHeader(n_classes=k, hidden_dim=dim,
                           labels=tuple(f"class{i}" for i in range(k)),
                           source=f"synthetic seed={spec.seed}")
    return header, records, cal


def prior_accuracy(records: list[FeatureRecord], cal: CalibrationRecord) -> float:
    """Accuracy of argmax over calibrated prior scores alone."""
    correct = 0
    factor = cal.scores.mean() / cal.scores
    for rec in records:
        correct += int(np.argmax(rec.scores * factor) == rec.label)
    return correct / len(records)
