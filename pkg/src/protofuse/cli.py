"""Command-line interface: train, eval, predict, sweep, ablate."""

import json
import sys

import click
import numpy as np

from . import data, experiments, plots
from .decoder import batch_logits, softmax
from .errors import ProtofuseError
from .training import TrainingConfig, train


def _parse_lambda(value: str) -> float | None:
    if value == "auto":
        return None
    try:
        lam = float(value)
    except ValueError:
        raise click.BadParameter(f"--lambda must be 'auto' or a float, got {value!r}")
    if lam < 0:
        raise click.BadParameter("--lambda must be nonnegative")
    return lam


def _parse_list(value: str, cast, name: str):
    try:
        return [cast(tok) for tok in value.split(",") if tok.strip()]
    except ValueError:
        raise click.BadParameter(f"{name} must be a comma-separated list")


def _fail(exc: ProtofuseError):
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Few-shot decoder training over frozen-model output features."""


def _config_options(fn):
    fn = click.option("--dim", default=128, show_default=True,
                      help="projected representation dimension")(fn)
    fn = click.option("--epochs", default=30, show_default=True)(fn)
    fn = click.option("--lr", default=0.01, show_default=True)(fn)
    fn = click.option("--lambda", "lambda_", default="auto", show_default=True,
                      help="fusion weight: 'auto' (1/n) or a float")(fn)
    fn = click.option("--decoder", default="proto", show_default=True,
                      type=click.Choice(["proto", "mlp"]))(fn)
    fn = click.option("--score-space", default="prob", show_default=True,
                      type=click.Choice(["prob", "logprob"]))(fn)
    fn = click.option("--train-centers", is_flag=True,
                      help="also optimize prototype centers")(fn)
    fn = click.option("--no-radius", is_flag=True,
                      help="freeze radii at zero (ablation)")(fn)
    fn = click.option("--no-scores", is_flag=True,
                      help="drop calibrated model scores (lambda = 0)")(fn)
    return fn


def _make_config(dim, epochs, lr, lambda_, decoder, score_space,
                 train_centers, no_radius, no_scores, seed) -> TrainingConfig:
    return TrainingConfig(
        epochs=epochs, learning_rate=lr, proj_dim=dim, seed=seed,
        fusion_lambda=_parse_lambda(lambda_), train_centers=train_centers,
        ablate_radius=no_radius, ablate_scores=no_scores,
        decoder_kind=decoder, score_space=score_space)


@main.command("train")
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--calib", required=True, type=click.Path(exists=True))
@click.option("--shots", type=int, default=None,
              help="n-shot split of the feature file; all records if omitted")
@click.option("--seed", default=0, show_default=True)
@_config_options
@click.option("--out", required=True, type=click.Path())
@click.option("--figure", type=click.Path(), default=None,
              help="write the loss curve to this image file")
def cmd_train(features, calib, shots, seed, dim, epochs, lr, lambda_, decoder,
              score_space, train_centers, no_radius, no_scores, out, figure):
    """Train a decoder on a feature file and write the model."""
    cfg = _make_config(dim, epochs, lr, lambda_, decoder, score_space,
                       train_centers, no_radius, no_scores, seed)
    try:
        _, records = data.load_feature_file(features)
        cal = data.load_calibration(calib)
        if shots is not None:
            split = data.make_shot_split(records, shots, seed)
            records = data.select_records(records, split.train_ids)
        model, history = train(records, cal, cfg)
        data.save_model(out, model, config=_config_json(cfg), loss_history=history)
    except ProtofuseError as exc:
        _fail(exc)
    if figure:
        plots.plot_loss_history(history, figure)
    click.echo(f"trained on {len(records)} records, "
               f"final loss {history[-1]:.6f}, model -> {out}")


def _config_json(cfg: TrainingConfig) -> dict:
    return {
        "epochs": cfg.epochs, "learning_rate": cfg.learning_rate,
        "proj_dim": cfg.proj_dim, "seed": cfg.seed,
        "lambda": "auto" if cfg.fusion_lambda is None else cfg.fusion_lambda,
        "train_centers": cfg.train_centers, "ablate_radius": cfg.ablate_radius,
        "ablate_scores": cfg.ablate_scores, "decoder": cfg.decoder_kind,
        "score_space": cfg.score_space,
    }


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--test", required=True, type=click.Path(exists=True))
@click.option("--calib", required=True, type=click.Path(exists=True))
def cmd_eval(model_path, test, calib):
    """Report accuracy of a saved model on a labeled feature file."""
    try:
        model = data.load_model(model_path)
        _, records = data.load_feature_file(test)
        cal = data.load_calibration(calib)
        acc = experiments.evaluate(model, records, cal)
    except ProtofuseError as exc:
        _fail(exc)
    click.echo(f"accuracy {acc:.4f} ({len(records)} records)")


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--test", required=True, type=click.Path(exists=True))
@click.option("--calib", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="write JSON lines here instead of stdout")
def cmd_predict(model_path, test, calib, out):
    """Emit per-record predicted label and probability vector."""
    try:
        model = data.load_model(model_path)
        _, records = data.load_feature_file(test)
        cal = data.load_calibration(calib)
        hidden = np.stack([r.hidden for r in records])
        scores = np.stack([r.scores for r in records])
        q = batch_logits(model, hidden, scores, cal)
    except ProtofuseError as exc:
        _fail(exc)
    p = softmax(q)
    pred = np.argmax(q, axis=1)
    lines = [json.dumps({"id": rec.id, "label_pred": int(pred[i]),
                         "p": p[i].tolist()})
             for i, rec in enumerate(records)]
    if out:
        with open(out, "w") as f:
            f.write("\n".join(lines) + "\n")
        click.echo(f"{len(lines)} predictions -> {out}")
    else:
        for line in lines:
            click.echo(line)


def _trial_inputs(features, calib, test):
    _, pool = data.load_feature_file(features)
    cal = data.load_calibration(calib)
    _, test_records = data.load_feature_file(test)
    return pool, cal, test_records


@main.command("sweep")
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--calib", required=True, type=click.Path(exists=True))
@click.option("--test", required=True, type=click.Path(exists=True))
@click.option("--shots", required=True, type=int)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--lambdas", required=True,
              help="comma-separated fusion weights to try")
@_config_options
@click.option("--jobs", default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--figure", type=click.Path(), default=None)
def cmd_sweep(features, calib, test, shots, seeds, lambdas, dim, epochs, lr,
              lambda_, decoder, score_space, train_centers, no_radius,
              no_scores, jobs, out, figure):
    """Accuracy as a function of the fusion weight."""
    seed_list = _parse_list(seeds, int, "--seeds")
    lambda_list = _parse_list(lambdas, float, "--lambdas")
    cfg = _make_config(dim, epochs, lr, lambda_, decoder, score_space,
                       train_centers, no_radius, no_scores, seed=0)
    try:
        pool, cal, test_records = _trial_inputs(features, calib, test)
        reports = experiments.lambda_sweep(pool, cal, test_records, shots,
                                           lambda_list, seed_list, cfg, jobs=jobs)
    except ProtofuseError as exc:
        _fail(exc)
    experiments.write_report(out, "lambda-sweep", reports)
    if figure:
        plots.plot_lambda_sweep(lambda_list, reports, figure)
    click.echo(experiments.format_table(reports))


@main.command("ablate")
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--calib", required=True, type=click.Path(exists=True))
@click.option("--test", required=True, type=click.Path(exists=True))
@click.option("--shots", required=True, type=int)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--with-mlp", is_flag=True, help="add an MLP-decoder row")
@_config_options
@click.option("--jobs", default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--figure", type=click.Path(), default=None)
def cmd_ablate(features, calib, test, shots, seeds, with_mlp, dim, epochs, lr,
               lambda_, decoder, score_space, train_centers, no_radius,
               no_scores, jobs, out, figure):
    """Run the scores/radius ablation grid."""
    seed_list = _parse_list(seeds, int, "--seeds")
    cfg = _make_config(dim, epochs, lr, lambda_, decoder, score_space,
                       train_centers, no_radius, no_scores, seed=0)
    try:
        pool, cal, test_records = _trial_inputs(features, calib, test)
        reports = experiments.ablation_suite(pool, cal, test_records, shots,
                                             seed_list, cfg,
                                             include_mlp=with_mlp, jobs=jobs)
    except ProtofuseError as exc:
        _fail(exc)
    experiments.write_report(out, "ablation", reports)
    if figure:
        plots.plot_ablation(reports, figure)
    click.echo(experiments.format_table(reports))


if __name__ == "__main__":
    main()
