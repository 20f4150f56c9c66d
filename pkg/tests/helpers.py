import copy

import numpy as np

from protofuse.decoder import CalibrationRecord, FeatureRecord, softmax
from protofuse.training import TrainingConfig, get_param, init_model, loss, set_param


def random_scores(rng, k):
    return softmax(rng.normal(size=k))


def random_records(rng, n, k, dim, labeled=True):
    recs = []
    for i in range(n):
        label = int(rng.integers(k)) if labeled else -1
        recs.append(FeatureRecord(
            id=f"r{i}", label=label,
            hidden=rng.normal(size=dim),
            scores=random_scores(rng, k)))
    return recs


def balanced_records(rng, n_per_class, k, dim):
    recs = []
    for label in range(k):
        for i in range(n_per_class):
            recs.append(FeatureRecord(
                id=f"r{label}-{i}", label=label,
                hidden=rng.normal(size=dim),
                scores=random_scores(rng, k)))
    return recs


def random_cal(rng, k):
    return CalibrationRecord(scores=random_scores(rng, k))


def random_instance(seed, dim=8, d=4, k=3, n=6, **cfg_kwargs):
    """A trained-model-shaped setup for gradient and chain oracles."""
    rng = np.random.default_rng(seed)
    cfg = TrainingConfig(proj_dim=d, seed=seed, **cfg_kwargs)
    batch = balanced_records(rng, max(1, n // k), k, dim)
    cal = random_cal(rng, k)
    model = init_model(batch, cal, cfg)
    return model, batch, cal, cfg


def fd_gradient(model, batch, cal, name, step=1e-5):
    """Central finite differences of the loss w.r.t. one parameter tensor."""
    base = get_param(model, name)
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        for sign in (+1, -1):
            m = copy.deepcopy(model)
            p = get_param(m, name).copy()
            p[idx] += sign * step
            set_param(m, name, p)
            grad[idx] += sign * loss(m, batch, cal)
    return grad / (2 * step)
