import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from app.repositories import DatasetRepository
from app.services import SyntheticDataService
from app.settings import RunConfig

from .options import ConfigOption


logger = logging.getLogger(__name__)


def gen_data(
        config: ConfigOption = None,
        out: Annotated[Optional[Path], typer.Option("--out", help="Destination SCRD file")] = None,
        seed: Annotated[Optional[int], typer.Option("--seed", help="Overrides dataset.seed")] = None,
):
    """Generate the synthetic multi-camera dataset."""
    run_config = RunConfig.from_file(config)
    if seed is not None:
        run_config = run_config.override("dataset.seed", seed)
    splits = SyntheticDataService.generate_dataset(run_config.dataset)
    path = out or run_config.paths.dataset
    DatasetRepository.save(path, splits)
    logger.info("Dataset written to %s", path)
