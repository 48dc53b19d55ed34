from pathlib import Path
from typing import Annotated, Optional

import typer

from app.repositories import CheckpointRepository, DatasetRepository, ReportRepository
from app.services import EvaluationService, TrainerService
from app.settings import EvalFeature

from .options import DataOption


def evaluate(
        ckpt: Annotated[Path, typer.Option("--ckpt", help="Checkpoint to evaluate")],
        data: DataOption = None,
        out: Annotated[Optional[Path], typer.Option("--out", help="JSON report file")] = None,
        feature: Annotated[
            Optional[EvalFeature], typer.Option("--feature", help="Ranking key; defaults to the stored setting")
        ] = None,
):
    """Rank the gallery for every query and report CMC rank-1/5/10 and mAP."""
    run_config, state = TrainerService.from_checkpoint(CheckpointRepository.load(ckpt))
    if feature is not None:
        run_config = run_config.override("eval.feature", feature.value)
    splits = DatasetRepository.load(data or run_config.paths.dataset)
    report = EvaluationService.evaluate(state.params, splits, run_config.eval)
    ReportRepository.write_report(out or run_config.paths.report, report)
    typer.echo(report.model_dump_json(by_alias=True, indent=2))
