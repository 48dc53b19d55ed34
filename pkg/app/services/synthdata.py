import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from app.schemas import DatasetSplits, ImageSample
from app.settings import DatasetSettings
from app.utils import ConfigError, RngPurpose, derive_rng


__all__ = ["SyntheticDataService"]

logger = logging.getLogger(__name__)

MAX_PROTOTYPE_DRAWS = 10_000


class SyntheticDataService:
    """Identities are zero-mean band x channel colour prototypes; cameras add a per-channel tint."""

    @staticmethod
    def sample_prototypes(settings: DatasetSettings) -> np.ndarray:
        rng = derive_rng(settings.seed, RngPurpose.PROTOTYPES)
        max_cosine = np.cos(np.deg2rad(settings.min_separation_deg))
        shape = (settings.n_bands, settings.image_channels)
        accepted: list[np.ndarray] = []
        for _ in range(MAX_PROTOTYPE_DRAWS):
            candidate = rng.standard_normal(shape)
            candidate -= candidate.mean(axis=0, keepdims=True)
            candidate /= np.linalg.norm(candidate)
            if all(np.sum(candidate * other) <= max_cosine for other in accepted):
                accepted.append(candidate)
                if len(accepted) == settings.num_identities:
                    return np.stack(accepted)
        raise ConfigError(
            f"could not place {settings.num_identities} prototypes at least "
            f"{settings.min_separation_deg} degrees apart; lower min_separation_deg"
        )

    @staticmethod
    def camera_tints(settings: DatasetSettings) -> np.ndarray:
        rng = derive_rng(settings.seed, RngPurpose.TINTS)
        return rng.normal(0.0, settings.tint_scale, size=(settings.num_cameras, settings.image_channels))

    @staticmethod
    def render_prototype(prototype: np.ndarray, settings: DatasetSettings) -> np.ndarray:
        band_height = settings.image_height // settings.n_bands
        bands = 0.5 + settings.prototype_scale * prototype
        rows = np.repeat(bands, band_height, axis=0)
        return np.repeat(rows[:, None, :], settings.image_width, axis=1)

    @staticmethod
    def _identity_images(
            identity: int,
            prototypes: np.ndarray,
            tints: np.ndarray,
            settings: DatasetSettings
    ) -> list[ImageSample]:
        rng = derive_rng(settings.seed, RngPurpose.IDENTITY, identity)
        clean = SyntheticDataService.render_prototype(prototypes[identity], settings)
        samples = []
        for camera in range(settings.num_cameras):
            tinted = clean + tints[camera]
            for _ in range(settings.images_per_camera):
                noise = rng.normal(0.0, settings.noise_scale, size=clean.shape) if settings.noise_scale else 0.0
                pixels = np.clip(tinted + noise, 0.0, 1.0).astype(np.float32)
                samples.append(ImageSample(pixels=pixels, camera=camera, identity=identity))
        return samples

    @staticmethod
    def generate_dataset(settings: DatasetSettings) -> DatasetSplits:
        """Train split: the first G - T identities. The last T identities are split
        per camera into one query image and the remaining gallery images."""
        prototypes = SyntheticDataService.sample_prototypes(settings)
        tints = SyntheticDataService.camera_tints(settings)
        with ThreadPoolExecutor(max_workers=settings.workers) as executor:
            per_identity = list(executor.map(
                lambda identity: SyntheticDataService._identity_images(identity, prototypes, tints, settings),
                range(settings.num_identities),
            ))

        splits = DatasetSplits()
        for identity, samples in enumerate(per_identity):
            if identity < settings.num_train_identities:
                splits.train.extend(samples)
                continue
            for offset, sample in enumerate(samples):
                target = splits.query if offset % settings.images_per_camera == 0 else splits.gallery
                target.append(sample)
        logger.info(
            "Generated %d train, %d query and %d gallery images",
            len(splits.train), len(splits.query), len(splits.gallery)
        )
        return splits

    @staticmethod
    def nearest_prototype(pixels: np.ndarray, prototypes: np.ndarray, settings: DatasetSettings) -> int:
        """Identity whose clean render is closest to `pixels`; tint offsets cancel out."""
        centered = pixels - pixels.mean(axis=(0, 1), keepdims=True)
        distances = [
            np.linalg.norm(centered - (render - render.mean(axis=(0, 1), keepdims=True)))
            for render in (SyntheticDataService.render_prototype(p, settings) for p in prototypes)
        ]
        return int(np.argmin(distances))

    @staticmethod
    def augment_flip(sample: ImageSample, probability: float, rng: np.random.Generator) -> ImageSample:
        if rng.random() < probability:
            return ImageSample(pixels=sample.pixels[:, ::-1, :].copy(), camera=sample.camera, identity=sample.identity)
        return sample

    @staticmethod
    def flip_batch(images: np.ndarray, probability: float, rng: np.random.Generator) -> np.ndarray:
        flips = rng.random(images.shape[0]) < probability
        out = images.copy()
        out[flips] = out[flips][:, :, ::-1, :]
        return out
