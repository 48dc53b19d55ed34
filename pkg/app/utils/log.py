import logging

from rich.console import Console
from rich.logging import RichHandler


__all__ = ["setup_logging"]


_console = Console(stderr=True)


def setup_logging(level: str | int = "INFO") -> None:
    """Route all package loggers to a rich handler on stderr.

    Only the log stream carries wall-clock time; result files never do.
    """
    root = logging.getLogger("app")
    root.handlers.clear()
    handler = RichHandler(console=_console, show_path=False, rich_tracebacks=True)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False
