"""Multi-seed trials, ablations and lambda sweeps with aggregate reports."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import make_shot_split, select_records
from .decoder import CalibrationRecord, DecoderModel, FeatureRecord, batch_predict
from .errors import SchemaError
from .training import TrainingConfig, timed_train


@dataclass(frozen=True)
class TrialReport:
    label: str
    shots: int
    seeds: tuple[int, ...]
    accuracies: tuple[float, ...]
    mean: float
    std: float                     # population std over seeds
    wall_clocks: tuple[float, ...]

    def to_json(self, include_timing=True) -> dict:
        obj = {"row": self.label, "shots": self.shots,
               "seeds": list(self.seeds),
               "accuracies": list(self.accuracies),
               "mean": self.mean, "std": self.std}
        if include_timing:
            obj["wall_clock_s"] = list(self.wall_clocks)
        return obj


def evaluate(model: DecoderModel, test: list[FeatureRecord],
             cal: CalibrationRecord) -> float:
    """Fraction of test records whose prediction matches the gold label."""
    if not test:
        raise SchemaError("empty test set")
    for rec in test:
        if rec.label < 0:
            raise SchemaError(f"record {rec.id}: unlabeled test record")
    hidden = np.stack([rec.hidden for rec in test])
    scores = np.stack([rec.scores for rec in test])
    labels = np.array([rec.label for rec in test])
    pred = batch_predict(model, hidden, scores, cal)
    return float(np.mean(pred == labels))


def _one_seed(pool, cal, test, shots, seed, cfg):
    split = make_shot_split(pool, shots, seed)
    train_recs = select_records(pool, split.train_ids)
    model, _, elapsed = timed_train(train_recs, cal, replace(cfg, seed=seed))
    return evaluate(model, test, cal), elapsed


def run_trial(pool: list[FeatureRecord], cal: CalibrationRecord,
              test: list[FeatureRecord], shots: int, seeds: list[int],
              cfg: TrainingConfig, label: str = "dect", jobs: int = 1) -> TrialReport:
    """Split/train/evaluate once per seed and aggregate mean and std."""
    if not seeds:
        raise SchemaError("need at least one seed")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(
                lambda s: _one_seed(pool, cal, test, shots, s, cfg), seeds))
    else:
        results = [_one_seed(pool, cal, test, shots, s, cfg) for s in seeds]
    accs = tuple(r[0] for r in results)
    clocks = tuple(r[1] for r in results)
    return TrialReport(
        label=label, shots=shots, seeds=tuple(seeds), accuracies=accs,
        mean=float(np.mean(accs)), std=float(np.std(accs)),
        wall_clocks=clocks)


def lambda_sweep(pool, cal, test, shots, lambdas, seeds, cfg,
                 jobs: int = 1) -> list[TrialReport]:
    """One run_trial per candidate lambda, each with the full epoch budget."""
    if not lambdas:
        raise SchemaError("empty lambda list")
    reports = []
    for lam in lambdas:
        sweep_cfg = replace(cfg, fusion_lambda=float(lam), ablate_scores=False)
        reports.append(run_trial(pool, cal, test, shots, seeds, sweep_cfg,
                                 label=f"lambda={lam:g}", jobs=jobs))
    return reports


ABLATION_ROWS = [
    ("full", dict(ablate_scores=False, ablate_radius=False)),
    ("no-scores", dict(ablate_scores=True, ablate_radius=False)),
    ("no-radius", dict(ablate_scores=False, ablate_radius=True)),
    ("no-scores-no-radius", dict(ablate_scores=True, ablate_radius=True)),
]


def ablation_suite(pool, cal, test, shots, seeds, cfg, include_mlp=False,
                   jobs: int = 1) -> list[TrialReport]:
    """The four scores x radius configurations, optionally plus an MLP head."""
    reports = []
    for label, switches in ABLATION_ROWS:
        row_cfg = replace(cfg, decoder_kind="proto", **switches)
        reports.append(run_trial(pool, cal, test, shots, seeds, row_cfg,
                                 label=label, jobs=jobs))
    if include_mlp:
        mlp_cfg = replace(cfg, decoder_kind="mlp",
                          ablate_scores=False, ablate_radius=False)
        reports.append(run_trial(pool, cal, test, shots, seeds, mlp_cfg,
                                 label="mlp", jobs=jobs))
    return reports


def write_report(path, kind: str, reports: list[TrialReport],
                 include_timing=True) -> None:
    """Line-delimited report: header object then one row object per trial."""
    with open(path, "w") as f:
        f.write(json.dumps({"report": kind, "rows": len(reports)},
                           sort_keys=True) + "\n")
        for rep in reports:
            f.write(json.dumps(rep.to_json(include_timing), sort_keys=True) + "\n")


def format_table(reports: list[TrialReport]) -> str:
    """Human-readable accuracy table."""
    width = max(len(r.label) for r in reports)
    lines = [f"{'row':<{width}}  shots  mean    std     seeds"]
    for r in reports:
        lines.append(f"{r.label:<{width}}  {r.shots:<5d}  "
                     f"{r.mean:.4f}  {r.std:.4f}  {list(r.seeds)}")
    return "\n".join(lines)
