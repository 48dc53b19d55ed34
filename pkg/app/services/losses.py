from typing import Sequence

import numpy as np

from app.autodiff import F, Tensor
from app.schemas import SampleSelection
from app.settings import LossSettings
from app.utils import NumericalError


__all__ = ["LossService"]


class LossService:
    @staticmethod
    def contribution_factors(positives: Sequence[int], anchor: int, cfg: LossSettings) -> dict[int, float]:
        """Not normalized; the default factors sum to 1.265625."""
        if anchor not in positives:
            raise ValueError(f"anchor {anchor} is missing from the positives")
        other = cfg.alpha * (1.0 - cfg.lambda_t) / len(positives)
        return {k: (cfg.lambda_t if k == anchor else other) for k in positives}

    @staticmethod
    def _contrastive(
            v: Tensor,
            mixture: np.ndarray,
            positives: Sequence[int],
            negatives: Sequence[int],
            weights: np.ndarray,
            tau: float
    ) -> Tensor:
        keys = np.asarray([*positives, *negatives], dtype=np.int64)
        logits = F.div(F.matmul(Tensor(mixture[keys]), v), tau)
        bad = ~np.isfinite(logits.data)
        if bad.any():
            raise NumericalError(f"non-finite similarity against mixture key {int(keys[bad][0])}")
        numerator = F.logsumexp(F.getitem(logits, slice(0, len(positives))), weights)
        loss = F.sub(F.logsumexp(logits), numerator)
        if not np.isfinite(loss.data):
            raise NumericalError(f"non-finite contrastive loss for anchor key {int(keys[0])}")
        return loss

    @staticmethod
    def selective_contrastive_loss(
            v: Tensor,
            mixture: np.ndarray,
            selection: SampleSelection,
            cfg: LossSettings
    ) -> Tensor:
        factors = LossService.contribution_factors(selection.positives, selection.anchor, cfg)
        weights = np.array([factors[k] for k in selection.positives])
        return LossService._contrastive(v, mixture, selection.positives, selection.negatives, weights, cfg.tau)

    @staticmethod
    def init_contrastive_loss(
            v: Tensor,
            mixture: np.ndarray,
            anchor: int,
            negatives: Sequence[int],
            cfg: LossSettings
    ) -> Tensor:
        if anchor in negatives:
            raise ValueError(f"anchor {anchor} cannot be one of its own negatives")
        return LossService._contrastive(v, mixture, [anchor], negatives, np.ones(1), cfg.tau)

    @staticmethod
    def total_loss(loss_global, loss_local, lambda_p: float):
        return loss_global * (1.0 - lambda_p) + loss_local * lambda_p
