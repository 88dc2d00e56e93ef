"""The `neunets` command

Exit codes: 0 success, 2 invalid request, 3 stopped (budget or user), 4 failure.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv

from neunets.codec import to_dto
from neunets.data.datasets import DatasetError, RawImages
from neunets.data.formats import load_raw
from neunets.data.images import preprocess_images, resolution_for
from neunets.data.text import preprocess_text
from neunets.engine.config import AUTO, SynthesisRequest, ValidationError, validate_request
from neunets.engine.export import evaluate_export
from neunets.engine.pipeline import pipeline_status, resume_pipeline, run_pipeline, stop_pipeline
from neunets.engine.report import pipeline_report
from neunets.engine.settings import Settings, load_settings
from neunets.engine.snapshots import UnknownPipelineError
from neunets.engine.state import PipelineState, Stage
from neunets.errors import NeunetsError
from neunets.search.tapas.lde import LifelongDatabase
from neunets.search.tapas.search import initialize_lde

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_STOPPED = 3
EXIT_FAILED = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
ON_OFF = click.Choice(["on", "off"])


def exit_code(state: PipelineState) -> int:
    if state.stage is Stage.COMPLETED:
        return EXIT_OK
    if state.stage is Stage.STOPPED:
        return EXIT_STOPPED
    return EXIT_FAILED


def fail(message: str, code: int) -> None:
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def echo_outcome(state: PipelineState) -> None:
    click.echo(f"pipeline {state.id}: {state.stage.value}")
    if state.stop_reason:
        click.echo(f"stopped by {state.stop_reason}")
    if state.failure:
        click.echo(f"failure: {state.failure}")
    if state.best is not None:
        click.echo(f"best candidate {state.best} holdout accuracy {state.best_fitness:.4f}")
    if state.export_dir:
        click.echo(f"exported to {state.export_dir}")


@click.group()
@click.option("--state-dir", default=None, help="Where pipelines live, NEUNETS_STATE_DIR or ./.neunets by default")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx: click.Context, state_dir: Optional[str], verbose: bool):
    load_dotenv()
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)
    ctx.obj = load_settings(state_dir)


@cli.command()
@click.option("--dataset", required=True)
@click.option("--domain", type=click.Choice(["image", "text"]), default=None)
@click.option("--algorithm", type=click.Choice([AUTO, "ncevolve", "tapas", "hyperband"]), default=AUTO)
@click.option("--budget", type=click.Choice([AUTO, "low", "medium", "high"]), default=AUTO)
@click.option("--budget-divisor", type=float, default=1.0, show_default=True)
@click.option("--finegrain", type=ON_OFF, default="off", show_default=True)
@click.option("--warm-start", type=ON_OFF, default="on", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="Export directory, inside the pipeline directory by default")
@click.option("--max-cycles", type=int, default=None)
@click.option("--epochs", type=int, default=None, help="Epochs per candidate")
@click.option("--workers", type=int, default=2, show_default=True)
@click.option("--resolution", type=int, default=None, help="Image side length fed to the networks")
@click.option("--embeddings", default=None, help="Pretrained word vectors for text datasets")
@click.pass_obj
def synthesize(settings: Settings, dataset, domain, algorithm, budget, budget_divisor, finegrain, warm_start, seed, out,
               max_cycles, epochs, workers, resolution, embeddings):
    """Synthesize a network for a dataset"""
    request = SynthesisRequest(
        dataset=dataset,
        domain=domain,
        algorithm=algorithm,
        budget=budget,
        budget_divisor=budget_divisor,
        finegrain=finegrain == "on",
        warm_start=warm_start == "on",
        seed=seed,
        out=out,
        max_cycles=max_cycles,
        epochs=epochs,
        max_workers=workers,
        resolution=resolution,
        embeddings=embeddings,
    )
    try:
        config = validate_request(request, settings)
    except ValidationError as e:
        fail(str(e), EXIT_INVALID)
    click.echo(f"{config.algorithm} ({config.selection_reason}), {config.tier.value} budget of {config.cap_seconds:.0f}s")
    state = run_pipeline(config, settings)
    echo_outcome(state)
    sys.exit(exit_code(state))


@cli.command()
@click.argument("pipeline_id")
@click.pass_obj
def resume(settings: Settings, pipeline_id):
    """Continue a pipeline from its last snapshot"""
    try:
        state = resume_pipeline(pipeline_id, settings)
    except UnknownPipelineError as e:
        fail(str(e), EXIT_INVALID)
    echo_outcome(state)
    sys.exit(exit_code(state))


@cli.command()
@click.argument("pipeline_id")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def status(settings: Settings, pipeline_id, as_json):
    try:
        progress = pipeline_status(pipeline_id, settings)
    except UnknownPipelineError as e:
        fail(str(e), EXIT_INVALID)
    if as_json:
        click.echo(json.dumps(to_dto(progress), indent=2, sort_keys=True))
        return
    click.echo(f"pipeline {progress.id}: {progress.stage.value}, cycle {progress.cycle}")
    click.echo(f"algorithm {progress.algorithm} ({progress.selection_reason})")
    click.echo(
        f"budget {progress.tier}: {progress.consumed_seconds:.1f}s used, {progress.remaining_seconds:.1f}s remaining"
    )
    if progress.best_candidate is not None:
        click.echo(f"best candidate {progress.best_candidate}: {progress.best_fitness:.4f}")
    if progress.stop_requested and not progress.stage.terminal:
        click.echo("stop requested")
    if progress.export_dir:
        click.echo(f"exported to {progress.export_dir}")
    for candidate in progress.candidates:
        flag = " failed" if candidate.failed else ""
        click.echo(
            f"  {candidate.id:4d}  cycle {candidate.cycle:3d}  {candidate.fitness:.4f}  {candidate.epochs:3d} epochs  "
            f"{candidate.label}{flag}"
        )


@cli.command()
@click.argument("pipeline_id")
@click.pass_obj
def stop(settings: Settings, pipeline_id):
    """Stop a pipeline at its next cycle boundary"""
    try:
        state = stop_pipeline(pipeline_id, settings)
    except UnknownPipelineError as e:
        fail(str(e), EXIT_INVALID)
    if state.stage.terminal:
        click.echo(f"pipeline {pipeline_id} is already {state.stage.value}")
    else:
        click.echo(f"stop requested for pipeline {pipeline_id}")


@cli.command()
@click.argument("pipeline_id")
@click.pass_obj
def report(settings: Settings, pipeline_id):
    """Metrics and per-cycle history of a pipeline"""
    try:
        click.echo(pipeline_report(pipeline_id, settings))
    except UnknownPipelineError as e:
        fail(str(e), EXIT_INVALID)


@cli.command("eval")
@click.option("--model", "model_path", required=True, help="An exported model.nnsg")
@click.option("--dataset", required=True)
def evaluate(model_path, dataset):
    """Accuracy of an exported model on a labeled dataset"""
    try:
        evaluation = evaluate_export(model_path, dataset)
    except (DatasetError, OSError) as e:
        fail(str(e), EXIT_INVALID)
    except NeunetsError as e:
        fail(str(e), EXIT_FAILED)
    click.echo(f"accuracy {evaluation.accuracy:.4f} on {evaluation.n_examples} examples")
    click.echo("confusion (rows true, columns predicted): " + ", ".join(evaluation.classes))
    for name, row in zip(evaluation.classes, evaluation.confusion):
        click.echo(f"  {name:>12}  " + " ".join(f"{n:6d}" for n in row))


@cli.group()
def lde():
    """The lifelong database of experiments"""


@lde.command("import")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def lde_import(settings: Settings, path):
    try:
        added = LifelongDatabase(settings.lde_path).merge(LifelongDatabase(path))
    except NeunetsError as e:
        fail(str(e), EXIT_INVALID)
    click.echo(f"imported {added} records into {settings.lde_path}")


@lde.command("export")
@click.argument("path", type=click.Path(dir_okay=False))
@click.pass_obj
def lde_export(settings: Settings, path):
    database = LifelongDatabase(settings.lde_path)
    database.export(path)
    click.echo(f"exported {len(database)} records to {path}")


@lde.command("merge")
@click.argument("target", type=click.Path(dir_okay=False))
@click.argument("sources", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
def lde_merge(target, sources):
    """Merge LDE files into TARGET, records known by id are skipped"""
    database = LifelongDatabase(target)
    try:
        added = sum(database.merge(LifelongDatabase(source)) for source in sources)
    except NeunetsError as e:
        fail(str(e), EXIT_INVALID)
    click.echo(f"{target}: {added} new records, {len(database)} in total")


@lde.command("init")
@click.option("--dataset", "datasets", required=True, multiple=True)
@click.option("--networks", type=int, default=30, show_default=True, help="Sampled networks per dataset")
@click.option("--epochs", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def lde_init(settings: Settings, datasets, networks, epochs, seed):
    """Fill the lifelong database by training sampled networks on datasets"""
    try:
        prepared = [_lde_dataset(path, seed) for path in datasets]
    except DatasetError as e:
        fail(str(e), EXIT_INVALID)
    database = LifelongDatabase(settings.lde_path)
    added = initialize_lde(database, prepared, n_networks=networks, epochs=epochs, seed=seed)
    click.echo(f"added {added} records to {settings.lde_path}, {len(database)} in total")


def _lde_dataset(path: str, seed: int):
    # same preprocessing as a tapas run, so the characterization cache applies
    raw, raw_test = load_raw(Path(path))
    raw.validate()
    if isinstance(raw, RawImages):
        return preprocess_images(raw, resolution_for("tapas"), raw_test, seed=seed)
    defaults = SynthesisRequest(dataset=path)
    return preprocess_text(raw, defaults.vocabulary_size, defaults.max_length, raw_test=raw_test, seed=seed)
