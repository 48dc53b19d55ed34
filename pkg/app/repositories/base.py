from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

from app.utils import DataFormatError


class BinaryFileRepository(ABC):
    MAGIC: bytes
    VERSION: int

    @classmethod
    @abstractmethod
    def encode(cls, payload: Any) -> bytes:
        pass

    @classmethod
    @abstractmethod
    def decode(cls, data: bytes) -> Any:
        pass

    @classmethod
    def save(cls, path: Path, payload: Any) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(cls.encode(payload))

    @classmethod
    def load(cls, path: Path) -> Any:
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise DataFormatError(f"Cannot read {path}: {e}") from e
        return cls.decode(data)
