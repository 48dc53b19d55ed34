import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from app.repositories import CheckpointRepository, DatasetRepository, ReportRepository
from app.services import EvaluationService, TrainerService
from app.settings import RunConfig
from app.utils import ConfigError

from .options import ConfigOption, DataOption


logger = logging.getLogger(__name__)


def train(
        config: ConfigOption = None,
        data: DataOption = None,
        out: Annotated[Optional[Path], typer.Option("--out", help="Checkpoint file to write")] = None,
        metrics: Annotated[Optional[Path], typer.Option("--metrics", help="Per-epoch loss CSV")] = None,
        resume: Annotated[Optional[Path], typer.Option("--resume", help="Continue from this checkpoint")] = None,
        stop_after: Annotated[Optional[int], typer.Option("--stop-after", min=1, help="Stop after this epoch count")] = None,
        report: Annotated[Optional[Path], typer.Option("--report", help="Also evaluate and write a JSON report")] = None,
):
    """Train the model without labels and write a checkpoint plus loss metrics."""
    if resume is not None:
        if config is not None:
            raise ConfigError("--config cannot be combined with --resume; the checkpoint carries its config")
        run_config, state = TrainerService.from_checkpoint(CheckpointRepository.load(resume))
        logger.info("Resuming %s after epoch %d", resume, state.epoch)
    else:
        run_config, state = RunConfig.from_file(config), None

    splits = DatasetRepository.load(data or run_config.paths.dataset)
    state = TrainerService.fit(run_config, splits, state=state, stop_after=stop_after)

    checkpoint_path = out or run_config.paths.checkpoint
    CheckpointRepository.save(checkpoint_path, TrainerService.to_checkpoint(state, run_config))
    ReportRepository.write_metrics(metrics or run_config.paths.metrics, state.history)
    logger.info("Checkpoint written to %s after %d epochs", checkpoint_path, state.epoch)

    if report is not None:
        ReportRepository.write_report(report, EvaluationService.evaluate(state.params, splits, run_config.eval))
