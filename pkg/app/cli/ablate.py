import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from app.repositories import DatasetRepository, ReportRepository
from app.services import AblationService, SyntheticDataService
from app.settings import RunConfig
from app.utils import ConfigError

from .options import ConfigOption, DataOption


logger = logging.getLogger(__name__)


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def ablate(
        config: ConfigOption = None,
        data: DataOption = None,
        param: Annotated[Optional[str], typer.Option("--param", help="Parameter to sweep, e.g. lambda_c")] = None,
        values: Annotated[Optional[str], typer.Option("--values", help="Comma separated values")] = None,
        preset: Annotated[Optional[str], typer.Option("--preset", help="Named setting table, e.g. table4")] = None,
        seeds: Annotated[str, typer.Option("--seeds", help="Comma separated seeds to average over")] = "0",
        out: Annotated[Path, typer.Option("--out", help="Ablation CSV")] = Path("ablation.csv"),
):
    """Train and evaluate one configuration per setting; write mAP and rank-1 per row."""
    if (param is None) == (preset is None):
        raise typer.BadParameter("give exactly one of --param/--values or --preset")
    run_config = RunConfig.from_file(config)
    if preset is not None:
        settings = AblationService.preset(preset)
    else:
        if values is None:
            raise typer.BadParameter("--param needs --values")
        settings = AblationService.grid(param, _split_list(values))
    try:
        seed_list = [int(seed) for seed in _split_list(seeds)]
    except ValueError:
        raise ConfigError(f"--seeds must be comma separated integers, got '{seeds}'") from None
    if not seed_list:
        raise ConfigError("--seeds is empty")

    if data is not None:
        splits = DatasetRepository.load(data)
    elif run_config.paths.dataset.exists():
        splits = DatasetRepository.load(run_config.paths.dataset)
    else:
        logger.info("No dataset at %s; generating one in memory", run_config.paths.dataset)
        splits = SyntheticDataService.generate_dataset(run_config.dataset)

    rows = AblationService.run(run_config, splits, settings, seed_list)
    ReportRepository.write_ablation(out, rows)
    logger.info("Ablation table written to %s", out)
