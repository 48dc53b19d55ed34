import struct

import numpy as np

from app.schemas import DatasetSplits, ImageSample
from app.utils import DataFormatError

from .base import BinaryFileRepository
from .reader import ByteReader


__all__ = ["DatasetRepository"]


class DatasetRepository(BinaryFileRepository):
    """SCRD file: magic, uint32 version, uint32 train/query/gallery counts, then
    per sample uint32 identity, uint16 camera, uint16 H, W, C and float32 pixels.
    All little-endian, pixels row-major."""
    MAGIC = b"SCRD"
    VERSION = 1

    @classmethod
    def encode(cls, splits: DatasetSplits) -> bytes:
        parts = [cls.MAGIC, struct.pack("<I", cls.VERSION)]
        parts.append(struct.pack("<III", len(splits.train), len(splits.query), len(splits.gallery)))
        for sample in (*splits.train, *splits.query, *splits.gallery):
            height, width, channels = sample.pixels.shape
            parts.append(struct.pack("<IHHHH", sample.identity, sample.camera, height, width, channels))
            parts.append(np.ascontiguousarray(sample.pixels, dtype="<f4").tobytes())
        return b"".join(parts)

    @classmethod
    def decode(cls, data: bytes) -> DatasetSplits:
        reader = ByteReader(data, "dataset")
        reader.expect_magic(cls.MAGIC)
        reader.expect_version(cls.VERSION)
        counts = reader.unpack("<III", "split counts")

        splits = []
        for count in counts:
            samples = []
            for _ in range(count):
                offset = reader.offset
                identity, camera, height, width, channels = reader.unpack("<IHHHH", "sample header")
                pixels = reader.array("<f4", height * width * channels, "pixels")
                try:
                    samples.append(ImageSample(
                        pixels=pixels.reshape(height, width, channels).astype(np.float32),
                        camera=camera,
                        identity=identity,
                    ))
                except ValueError as e:
                    raise DataFormatError(f"dataset: invalid sample: {e}", offset) from e
            splits.append(samples)
        reader.expect_end()
        train, query, gallery = splits
        return DatasetSplits(train=train, query=query, gallery=gallery)
