import json
import struct

import numpy as np

from app.schemas import Checkpoint, CheckpointMeta
from app.utils import DataFormatError

from .base import BinaryFileRepository
from .reader import ByteReader


__all__ = ["CheckpointRepository"]


class CheckpointRepository(BinaryFileRepository):
    """SCCK file: magic, uint32 version, uint32-length JSON metadata, uint32 block
    count, then per block uint16-length name, uint32 rank, uint32 dims and
    float64 little-endian data."""
    MAGIC = b"SCCK"
    VERSION = 1

    @classmethod
    def encode(cls, checkpoint: Checkpoint) -> bytes:
        meta = json.dumps(checkpoint.meta.model_dump(mode="json"), sort_keys=True).encode("utf-8")
        parts = [cls.MAGIC, struct.pack("<I", cls.VERSION), struct.pack("<I", len(meta)), meta]
        parts.append(struct.pack("<I", len(checkpoint.tensors)))
        for name in sorted(checkpoint.tensors):
            value = np.asarray(checkpoint.tensors[name], dtype="<f8")
            encoded_name = name.encode("utf-8")
            parts.append(struct.pack("<H", len(encoded_name)))
            parts.append(encoded_name)
            parts.append(struct.pack("<I", value.ndim))
            parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
            parts.append(np.ascontiguousarray(value).tobytes())
        return b"".join(parts)

    @classmethod
    def decode(cls, data: bytes) -> Checkpoint:
        reader = ByteReader(data, "checkpoint")
        reader.expect_magic(cls.MAGIC)
        reader.expect_version(cls.VERSION)
        (meta_length,) = reader.unpack("<I", "metadata length")
        meta_offset = reader.offset
        try:
            meta = CheckpointMeta.model_validate(json.loads(reader.take(meta_length, "metadata")))
        except ValueError as e:
            raise DataFormatError(f"checkpoint: invalid metadata: {e}", meta_offset) from e

        (count,) = reader.unpack("<I", "block count")
        tensors = {}
        for _ in range(count):
            (name_length,) = reader.unpack("<H", "block name length")
            name = reader.take(name_length, "block name").decode("utf-8", errors="replace")
            (rank,) = reader.unpack("<I", f"rank of {name}")
            shape = reader.unpack(f"<{rank}I", f"shape of {name}")
            size = int(np.prod(shape, dtype=np.int64))
            tensors[name] = reader.array("<f8", size, f"data of {name}").reshape(shape).astype(np.float64)
        reader.expect_end()
        return Checkpoint(meta=meta, tensors=tensors)
