import numpy as np

from app.repositories import MemoryBanks
from app.schemas import SampleSelection
from app.settings import SimilaritySettings
from app.utils import BankStateError, ConfigError


__all__ = ["SamplingService"]


def _euclidean(diff: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(diff * diff, axis=-1))


class SamplingService:
    """Smaller distance means more alike; same-camera pairs pay an extra `lambda_c`."""

    @staticmethod
    def global_distance(v_global: np.ndarray, banks: MemoryBanks, j: int) -> float:
        if not banks.global_initialized[j]:
            raise BankStateError(f"global bank row {j} was never initialized")
        return float(_euclidean(v_global - banks.global_keys[j]))

    @staticmethod
    def local_distance(v_stripes: np.ndarray, banks: MemoryBanks, j: int) -> float:
        if not banks.local_initialized[j]:
            raise BankStateError(f"local bank row {j} was never initialized")
        return float(np.mean(_euclidean(v_stripes - banks.local_keys[j])))

    @staticmethod
    def camera_term(cam_i: int, cam_j: int, lambda_c: float) -> float:
        return lambda_c if cam_i == cam_j else 0.0

    @staticmethod
    def total_distance(s_global: float, s_local: float, cce: float, beta: float) -> float:
        return beta * s_global + (1.0 - beta) * s_local + cce

    @staticmethod
    def distances_to_all(
            anchor: int,
            v_global: np.ndarray,
            v_stripes: np.ndarray,
            banks: MemoryBanks,
            cameras: np.ndarray,
            cfg: SimilaritySettings
    ) -> np.ndarray:
        """Total distance from the anchor's keys to every bank row (anchor row included)."""
        s_global = _euclidean(v_global - banks.global_keys)
        s_local = np.mean(_euclidean(v_stripes - banks.local_keys), axis=-1)
        cce = np.where(cameras == cameras[anchor], cfg.lambda_c, 0.0)
        return cfg.beta * s_global + (1.0 - cfg.beta) * s_local + cce

    @staticmethod
    def select_from_distances(anchor: int, distances: np.ndarray, n_plus: int, n_minus: int) -> SampleSelection:
        candidates = np.delete(np.arange(distances.shape[0]), anchor)
        if n_plus + n_minus > candidates.size:
            raise ConfigError(
                f"n_plus={n_plus} + n_minus={n_minus} exceeds the {candidates.size} candidates per anchor"
            )
        ranked = candidates[np.argsort(distances[candidates], kind="stable")]
        return SampleSelection(
            anchor=anchor,
            positives=[anchor, *ranked[:n_plus].tolist()],
            negatives=ranked[n_plus:n_plus + n_minus].tolist(),
        )

    @staticmethod
    def partition_and_select(
            anchor: int,
            v_global: np.ndarray,
            v_stripes: np.ndarray,
            banks: MemoryBanks,
            cameras: np.ndarray,
            cfg: SimilaritySettings,
            n_minus: int | None = None
    ) -> SampleSelection:
        others = np.delete(np.arange(banks.size), anchor)
        banks.require_initialized(others)
        if n_minus is None:
            n_minus = cfg.resolve_n_minus(banks.size)
        distances = SamplingService.distances_to_all(anchor, v_global, v_stripes, banks, cameras, cfg)
        return SamplingService.select_from_distances(anchor, distances, cfg.n_plus, n_minus)
