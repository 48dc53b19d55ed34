from pathlib import Path
from typing import Annotated, Optional

import typer


ConfigOption = Annotated[
    Optional[Path],
    typer.Option("--config", "-c", help="YAML run configuration (defaults apply to missing keys)")
]
DataOption = Annotated[Optional[Path], typer.Option("--data", help="SCRD dataset file")]
