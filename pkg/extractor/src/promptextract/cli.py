"""Command line entry point for feature extraction."""

import sys

import click

from . import io as eio
from .errors import ExtractorError
from .prompts import DEFAULT_TEMPLATES, load_template_file
from .runner import SCORE_MODES, FeatureExtractor


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Extract mask-position features and label-word scores from a frozen LM."""


@main.command()
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Line-delimited JSON examples.")
@click.option("--model", "model_id", required=True,
              help="Model name or local checkpoint directory.")
@click.option("--task", default=None,
              help="Built-in template name (sst2, agnews, rte, ...).")
@click.option("--template-file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON file with custom templates; --task selects the entry.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Feature file to write.")
@click.option("--calib-out", default=None, type=click.Path(dir_okay=False),
              help="Also write the empty-input calibration scores here.")
@click.option("--batch-size", default=32, show_default=True)
@click.option("--score-mode", default="restricted", show_default=True,
              type=click.Choice(SCORE_MODES))
@click.option("--max-length", default=None, type=int,
              help="Token window; defaults to the model's limit.")
@click.option("--device", default="cpu", show_default=True)
def extract(data_path, model_id, task, template_file, out_path, calib_out,
            batch_size, score_mode, max_length, device):
    """Run every example through the model once and write a feature file."""
    try:
        if template_file is not None:
            specs = load_template_file(template_file)
        else:
            specs = DEFAULT_TEMPLATES
        if task is None:
            if len(specs) != 1:
                _fail("--task is required when more than one template is available")
            task = next(iter(specs))
        if task not in specs:
            _fail(f"unknown task {task!r}; choices: {', '.join(sorted(specs))}")
        spec = specs[task]
        examples = eio.read_examples(data_path)
        extractor = FeatureExtractor.from_pretrained(
            model_id, score_mode=score_mode, max_length=max_length,
            device=device)
        records = extractor.extract(examples, spec, batch_size=batch_size)
        eio.write_feature_file(
            out_path, records, k=len(spec.label_words),
            d=extractor.hidden_size, labels=spec.label_words,
            source=f"{model_id}:{task}")
        if calib_out is not None:
            eio.write_calibration(calib_out, extractor.extract_calibration(spec))
        click.echo(f"wrote {len(records)} records ({extractor.queries} queries)")
    except ExtractorError as exc:
        _fail(str(exc))
    except OSError as exc:
        _fail(str(exc))


@main.command()
@click.option("--task", default=None, help="Show one template instead of all.")
def templates(task):
    """List the built-in templates and their label words."""
    names = [task] if task else sorted(DEFAULT_TEMPLATES)
    for name in names:
        if name not in DEFAULT_TEMPLATES:
            _fail(f"unknown task {name!r}")
        spec = DEFAULT_TEMPLATES[name]
        click.echo(f"{name}: {spec.template!r}")
        click.echo(f"  label words: {', '.join(spec.label_words)}")


if __name__ == "__main__":
    main()
