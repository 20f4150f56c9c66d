import copy

import numpy as np
import pytest

from helpers import (
    balanced_records,
    fd_gradient,
    random_cal,
    random_instance,
)
from protofuse.decoder import CalibrationRecord, FeatureRecord
from protofuse.errors import ConfigError, MissingClassError, NumericsError, SchemaError
from protofuse.synth import SyntheticSpec, make_synthetic
from protofuse.training import (
    TrainState,
    TrainingConfig,
    adam_step,
    gradients,
    init_model,
    loss,
    train,
    trainable_params,
)


def grad_close(analytic, fd, rtol=1e-4, atol=1e-7):
    return np.all(np.abs(analytic - fd) <= rtol * np.abs(fd) + atol)


class TestInitModel:
    def test_radius_zero_when_instances_sit_on_center(self, rng):
        # place each class's single instance so its projection equals the
        # center the seeded init will draw
        cfg = TrainingConfig(proj_dim=3, seed=7)
        probe_recs = balanced_records(rng, 1, 2, 5)
        cal = random_cal(rng, 2)
        probe = init_model(probe_recs, cal, cfg)
        w_pinv = np.linalg.pinv(probe.weight)
        forced = [FeatureRecord(id=f"f{k}", label=k,
                                hidden=w_pinv @ probe.centers[k],
                                scores=probe_recs[0].scores)
                  for k in range(2)]
        model = init_model(forced, cal, cfg)
        np.testing.assert_allclose(model.radii, [0.0, 0.0], atol=1e-8)

    def test_radius_is_mean_distance(self, rng):
        # two instances forced to distances 1 and 3 from the drawn center
        cfg = TrainingConfig(proj_dim=3, seed=11)
        recs = balanced_records(rng, 2, 2, 3)
        cal = random_cal(rng, 2)
        probe = init_model(recs, cal, cfg)
        w_pinv = np.linalg.pinv(probe.weight)
        forced = []
        for k in range(2):
            z = probe.centers[k]
            for dist, i in zip((1.0, 3.0), range(2)):
                v = z + dist * np.eye(3)[0]
                forced.append(FeatureRecord(
                    id=f"f{k}-{i}", label=k, hidden=w_pinv @ v,
                    scores=recs[0].scores))
        model = init_model(forced, cal, cfg)
        # W @ pinv(W) = I for a wide full-rank W, so projections land exactly
        np.testing.assert_allclose(model.radii, [2.0, 2.0], rtol=1e-8)

    def test_lambda_auto_policy(self, rng):
        recs = balanced_records(rng, 4, 3, 5)
        model = init_model(recs, random_cal(rng, 3), TrainingConfig(proj_dim=2, seed=0))
        assert model.fusion_lambda == 0.25

    def test_lambda_auto_uses_min_class_count(self, rng):
        scores = np.array([0.5, 0.5])
        recs = [FeatureRecord(id=f"u{i}", label=0, hidden=rng.normal(size=5),
                              scores=scores) for i in range(6)]
        recs += [FeatureRecord(id=f"w{i}", label=1, hidden=rng.normal(size=5),
                               scores=scores) for i in range(2)]
        model = init_model(recs, random_cal(rng, 2), TrainingConfig(proj_dim=2, seed=0))
        assert model.fusion_lambda == pytest.approx(0.5)

    def test_missing_class_raises(self, rng):
        recs = [r for r in balanced_records(rng, 2, 3, 4) if r.label != 1]
        with pytest.raises(MissingClassError):
            init_model(recs, random_cal(rng, 3), TrainingConfig(proj_dim=2, seed=0))

    def test_fixed_lambda_and_ablate_scores(self, rng):
        recs = balanced_records(rng, 2, 2, 4)
        cal = random_cal(rng, 2)
        m_fixed = init_model(recs, cal, TrainingConfig(proj_dim=2, seed=0, fusion_lambda=0.8))
        assert m_fixed.fusion_lambda == 0.8
        m_abl = init_model(recs, cal, TrainingConfig(proj_dim=2, seed=0, ablate_scores=True))
        assert m_abl.fusion_lambda == 0.0


class TestLoss:
    def test_uniform_prediction_gives_log_k(self, rng):
        k = 4
        recs = balanced_records(rng, 2, k, 5)
        cal = CalibrationRecord(scores=np.full(k, 1 / k))
        cfg = TrainingConfig(proj_dim=3, seed=0, ablate_scores=True)
        model = init_model(recs, cal, cfg)
        model.weight[...] = 0.0
        model.centers[...] = 0.0
        model.radii[...] = 0.0
        assert loss(model, recs, cal) == pytest.approx(np.log(4), abs=1e-12)

    def test_near_perfect_prediction(self, rng):
        recs = balanced_records(rng, 1, 2, 3)
        cal = random_cal(rng, 2)
        model = init_model(recs, cal, TrainingConfig(proj_dim=2, seed=0, fusion_lambda=0.0))
        # equal centers cancel the distance term; the gold-class radius then
        # sets the logit gap so that p_y ~ 1 - 1e-9
        model.centers[...] = 0.0
        model.radii[...] = 0.0
        model.radii[recs[0].label] = np.log((1 - 1e-9) / 1e-9)
        assert loss(model, recs[:1], cal) == pytest.approx(1e-9, rel=0.01)

    def test_matches_raw_formula_chain(self, rng):
        model, batch, cal, _ = random_instance(5, dim=6, d=3, k=3, n=9)
        total = 0.0
        for rec in batch:
            s_hat = rec.scores * cal.scores.mean() / cal.scores
            v = model.weight @ rec.hidden
            q = np.array([
                -np.sqrt(np.sum((v - model.centers[i]) ** 2) + 1e-24)
                + model.radii[i] + model.fusion_lambda * s_hat[i]
                for i in range(3)])
            p = np.exp(q - q.max())
            p /= p.sum()
            total -= np.log(p[rec.label])
        assert loss(model, batch, cal) == pytest.approx(total / len(batch), abs=1e-12)

    def test_unlabeled_record_rejected(self, rng):
        model, batch, cal, _ = random_instance(1)
        bad = FeatureRecord(id="u", label=-1, hidden=batch[0].hidden,
                            scores=batch[0].scores)
        with pytest.raises(SchemaError):
            loss(model, batch + [bad], cal)


class TestGradients:
    @pytest.mark.parametrize("kind,train_centers", [
        ("proto", False), ("proto", True), ("mlp", False)])
    def test_finite_difference_agreement(self, kind, train_centers):
        for seed in range(5):
            model, batch, cal, cfg = random_instance(
                100 + seed, dim=7, d=4, k=3, n=9,
                decoder_kind=kind, train_centers=train_centers)
            grads = gradients(model, batch, cal, cfg)
            for name in trainable_params(model, cfg):
                fd = fd_gradient(model, batch, cal, name)
                assert grad_close(grads[name], fd), f"{kind}/{name} seed {seed}"

    def test_perfect_prediction_zeroes_gradients(self):
        # saturate p at the gold label: true-class center on the instance,
        # wrong-class center pushed far away
        model, batch, cal, cfg = random_instance(10, dim=4, d=2, k=2, n=2,
                                                 fusion_lambda=0.0)
        model.radii[...] = 0.0
        one = batch[0]
        model.centers[one.label] = model.weight @ one.hidden
        model.centers[1 - one.label] = model.weight @ one.hidden + 1000.0
        grads = gradients(model, [one], cal, cfg)
        for g in grads.values():
            assert np.max(np.abs(g)) < 1e-8

    def test_constant_scores_make_lambda_irrelevant(self, rng):
        # a constant s_hat shifts all logits equally, so gradients match
        model, batch, cal, cfg = random_instance(11, dim=5, d=3, k=3, n=6)
        flat_cal = CalibrationRecord(scores=np.full(3, 1 / 3))
        batch_flat = [FeatureRecord(id=r.id, label=r.label, hidden=r.hidden,
                                    scores=np.full(3, 1 / 3)) for r in batch]
        m0 = copy.deepcopy(model)
        m0.fusion_lambda = 0.0
        m5 = copy.deepcopy(model)
        m5.fusion_lambda = 5.0
        g0 = gradients(m0, batch_flat, flat_cal, cfg)
        g5 = gradients(m5, batch_flat, flat_cal, cfg)
        for name in g0:
            np.testing.assert_allclose(g0[name], g5[name], atol=1e-12)


class TestAdamStep:
    def test_zero_gradient_keeps_parameters(self):
        model, batch, cal, cfg = random_instance(3)
        state = TrainState(model=copy.deepcopy(model), config=cfg)
        grads = {n: np.zeros_like(g)
                 for n, g in gradients(model, batch, cal, cfg).items()}
        adam_step(state, grads)
        for name in grads:
            np.testing.assert_array_equal(
                getattr(state.model, name), getattr(model, name))
        assert state.step == 1

    def test_first_step_magnitude_is_lr_sign(self):
        # bias-corrected Adam's first update is lr * g / (|g| + eps')
        model, batch, cal, cfg = random_instance(4)
        before = {n: getattr(model, n).copy()
                  for n in trainable_params(model, cfg)}
        state = TrainState(model=model, config=cfg)
        grads = gradients(model, batch, cal, cfg)
        adam_step(state, grads)
        for name, g in grads.items():
            delta = getattr(state.model, name) - before[name]
            mask = np.abs(g) > 1e-6
            np.testing.assert_allclose(
                delta[mask], -cfg.learning_rate * np.sign(g[mask]), rtol=1e-3)

    def test_matches_scalar_hand_simulation(self):
        # one scalar parameter, constant gradient, two steps
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        g = 0.37
        theta, m, v = 1.0, 0.0, 0.0
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        model, batch, cal, cfg = random_instance(6, dim=2, d=1, k=2, n=2)
        state = TrainState(model=model, config=cfg)
        state.model.radii[...] = np.array([1.0, 1.0])
        grads = {n: np.full_like(getattr(model, n), g)
                 for n in trainable_params(model, cfg)}
        adam_step(state, grads)
        adam_step(state, grads)
        assert state.model.radii[0] == pytest.approx(theta, rel=1e-12)

    def test_nan_gradient_aborts(self):
        model, batch, cal, cfg = random_instance(8)
        state = TrainState(model=model, config=cfg)
        grads = gradients(model, batch, cal, cfg)
        next(iter(grads.values())).flat[0] = np.nan
        with pytest.raises(NumericsError):
            adam_step(state, grads)


class TestTrain:
    def test_deterministic(self, rng):
        _, records, cal = make_synthetic(SyntheticSpec(
            n_classes=3, hidden_dim=10, n_per_class=4, seed=2))
        cfg = TrainingConfig(proj_dim=4, seed=42, epochs=5)
        m1, h1 = train(records, cal, cfg)
        m2, h2 = train(records, cal, cfg)
        np.testing.assert_array_equal(m1.weight, m2.weight)
        np.testing.assert_array_equal(m1.radii, m2.radii)
        assert h1 == h2

    def test_centers_frozen_by_default(self, rng):
        _, records, cal = make_synthetic(SyntheticSpec(
            n_classes=3, hidden_dim=10, n_per_class=4, seed=3))
        cfg = TrainingConfig(proj_dim=4, seed=0, epochs=5)
        init = init_model(records, cal, cfg)
        trained, _ = train(records, cal, cfg)
        np.testing.assert_array_equal(trained.centers, init.centers)
        assert not np.array_equal(trained.weight, init.weight)

    def test_centers_move_when_trained(self):
        _, records, cal = make_synthetic(SyntheticSpec(
            n_classes=3, hidden_dim=10, n_per_class=4, seed=3))
        cfg = TrainingConfig(proj_dim=4, seed=0, epochs=5, train_centers=True)
        init = init_model(records, cal, cfg)
        trained, _ = train(records, cal, cfg)
        assert not np.array_equal(trained.centers, init.centers)

    def test_radius_ablation_keeps_radii_zero(self):
        _, records, cal = make_synthetic(SyntheticSpec(
            n_classes=3, hidden_dim=10, n_per_class=4, seed=4))
        cfg = TrainingConfig(proj_dim=4, seed=0, epochs=5, ablate_radius=True)
        trained, _ = train(records, cal, cfg)
        np.testing.assert_array_equal(trained.radii, np.zeros(3))

    def test_separable_clusters_reach_full_accuracy(self):
        _, records, cal = make_synthetic(SyntheticSpec(
            n_classes=3, hidden_dim=16, n_per_class=16,
            separation=8.0, seed=5))
        cfg = TrainingConfig(proj_dim=8, seed=0)
        model, history = train(records, cal, cfg)
        hidden = np.stack([r.hidden for r in records])
        scores = np.stack([r.scores for r in records])
        from protofuse.decoder import batch_predict
        pred = batch_predict(model, hidden, scores, cal)
        labels = np.array([r.label for r in records])
        assert np.mean(pred == labels) == 1.0

    def test_loss_mostly_decreasing_across_seeds(self):
        ok = 0
        for seed in range(20):
            _, records, cal = make_synthetic(SyntheticSpec(
                n_classes=3, hidden_dim=12, n_per_class=8,
                separation=4.0, seed=seed))
            cfg = TrainingConfig(proj_dim=6, seed=seed, epochs=15)
            _, history = train(records, cal, cfg)
            diffs = np.diff(history)
            if np.all(diffs <= 1e-6):
                ok += 1
        assert ok >= 18

    def test_epoch_budget(self):
        _, records, cal = make_synthetic(SyntheticSpec(
            n_classes=2, hidden_dim=6, n_per_class=2, seed=6))
        with pytest.raises(ConfigError):
            train(records, cal, TrainingConfig(proj_dim=2, seed=0, epochs=0))
        _, history = train(records, cal, TrainingConfig(proj_dim=2, seed=0, epochs=1))
        assert len(history) == 1
