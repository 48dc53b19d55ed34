import logging
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from app.models import ModelParams, embed
from app.schemas import DatasetSplits, EvalReport, ImageSample
from app.settings import EvalFeature, EvalSettings
from app.utils import DataFormatError, ShapeError


__all__ = ["EvaluationService", "RankingStatistics"]

logger = logging.getLogger(__name__)


class RankingStatistics:
    def __init__(self, cmc: np.ndarray, average_precisions: list[float], num_excluded: int, num_skipped: int):
        self.cmc = cmc
        self.average_precisions = average_precisions
        self.num_excluded = num_excluded
        self.num_skipped = num_skipped

    @property
    def num_valid(self) -> int:
        return len(self.average_precisions)

    def rank(self, k: int) -> float:
        if not self.num_valid or not self.cmc.size:
            return 0.0
        return float(self.cmc[min(k, self.cmc.size) - 1] / self.num_valid)

    @property
    def mean_average_precision(self) -> float:
        return float(np.mean(self.average_precisions)) if self.average_precisions else 0.0


class EvaluationService:
    @staticmethod
    def distance_matrix(queries: np.ndarray, gallery: np.ndarray) -> np.ndarray:
        if queries.ndim != 2 or gallery.ndim != 2 or queries.shape[1] != gallery.shape[1]:
            raise ShapeError(f"distance_matrix: cannot compare {queries.shape} with {gallery.shape}")
        return cdist(queries, gallery, metric="euclidean")

    @staticmethod
    def ranking_statistics(
            distances: np.ndarray,
            query_ids: np.ndarray,
            query_cams: np.ndarray,
            gallery_ids: np.ndarray,
            gallery_cams: np.ndarray,
            exclude_same_camera: bool = True
    ) -> RankingStatistics:
        """Per-query gallery ranking with same-identity same-camera entries removed.

        Queries left without any true match are skipped and counted.
        """
        cmc = np.zeros(distances.shape[1])
        average_precisions: list[float] = []
        num_excluded = num_skipped = 0
        for q in range(distances.shape[0]):
            order = np.argsort(distances[q], kind="stable")
            same_id = gallery_ids[order] == query_ids[q]
            keep = np.ones_like(same_id)
            if exclude_same_camera:
                keep = ~(same_id & (gallery_cams[order] == query_cams[q]))
                num_excluded += int((~keep).sum())
            matches = same_id[keep]
            hits = np.flatnonzero(matches)
            if not hits.size:
                num_skipped += 1
                continue
            cmc[hits[0]:] += 1
            average_precisions.append(float(np.mean(np.arange(1, hits.size + 1) / (hits + 1))))
        return RankingStatistics(cmc, average_precisions, num_excluded, num_skipped)

    @staticmethod
    def cmc_rank_k(
            distances: np.ndarray,
            query_ids: np.ndarray,
            query_cams: np.ndarray,
            gallery_ids: np.ndarray,
            gallery_cams: np.ndarray,
            ks: Sequence[int] = (1, 5, 10)
    ) -> dict[int, float]:
        stats = EvaluationService.ranking_statistics(distances, query_ids, query_cams, gallery_ids, gallery_cams)
        return {k: stats.rank(k) for k in ks}

    @staticmethod
    def mean_average_precision(
            distances: np.ndarray,
            query_ids: np.ndarray,
            query_cams: np.ndarray,
            gallery_ids: np.ndarray,
            gallery_cams: np.ndarray
    ) -> float:
        stats = EvaluationService.ranking_statistics(distances, query_ids, query_cams, gallery_ids, gallery_cams)
        return stats.mean_average_precision

    @staticmethod
    def embed_samples(samples: list[ImageSample], params: ModelParams, settings: EvalSettings) -> np.ndarray:
        width = params.settings.key_dim * (2 if settings.feature == EvalFeature.CONCAT else 1)
        if not samples:
            return np.zeros((0, width))
        pixels = DatasetSplits.stack_pixels(samples)
        chunks = []
        for start in range(0, len(samples), settings.batch_size):
            keys = embed(pixels[start:start + settings.batch_size], params, train_mode=False)
            if settings.feature == EvalFeature.GLOBAL:
                chunks.append(keys.v_global.data)
            elif settings.feature == EvalFeature.LOCAL:
                chunks.append(keys.v_local.data)
            else:
                chunks.append(np.concatenate([keys.v_global.data, keys.v_local.data], axis=1))
        return np.concatenate(chunks, axis=0)

    @staticmethod
    def evaluate(params: ModelParams, splits: DatasetSplits, settings: EvalSettings) -> EvalReport:
        if not splits.query or not splits.gallery:
            raise DataFormatError("evaluation needs a non-empty query and gallery split")
        distances = EvaluationService.distance_matrix(
            EvaluationService.embed_samples(splits.query, params, settings),
            EvaluationService.embed_samples(splits.gallery, params, settings),
        )
        stats = EvaluationService.ranking_statistics(
            distances,
            DatasetSplits.identities(splits.query), DatasetSplits.cameras(splits.query),
            DatasetSplits.identities(splits.gallery), DatasetSplits.cameras(splits.gallery),
            exclude_same_camera=settings.exclude_same_camera,
        )
        if stats.num_skipped:
            logger.warning("%d queries have no valid gallery match and were skipped", stats.num_skipped)
        report = EvalReport(
            rank1=stats.rank(1), rank5=stats.rank(5), rank10=stats.rank(10),
            mAP=stats.mean_average_precision,
            num_queries=len(splits.query),
            num_excluded=stats.num_excluded,
            num_skipped=stats.num_skipped,
        )
        logger.info("Rank-1 %.4f, mAP %.4f over %d queries", report.rank1, report.map_score, report.num_queries)
        return report
