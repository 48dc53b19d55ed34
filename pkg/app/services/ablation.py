import logging
from typing import Any, Callable, Sequence

import numpy as np

from app.schemas import AblationRow, DatasetSplits
from app.settings import RunConfig
from app.utils import ConfigError

from .evaluation import EvaluationService
from .trainer import TrainerService


__all__ = ["AblationService", "PRESET_REGISTRY", "SWEEP_PARAMETERS", "register_preset"]

logger = logging.getLogger(__name__)

Setting = tuple[str, dict[str, Any]]

PRESET_REGISTRY: dict[str, Callable[[], list[Setting]]] = {}

SWEEP_PARAMETERS = {
    "beta": "similarity.beta",
    "lambda_c": "similarity.lambda_c",
    "n_plus": "similarity.n_plus",
    "n_minus": "similarity.n_minus",
    "tau": "loss.tau",
    "lambda_t": "loss.lambda_t",
    "alpha": "loss.alpha",
    "lambda_p": "loss.lambda_p",
}


def register_preset(name: str):
    def register_preset_fn(fn: Callable[[], list[Setting]]):
        if name in PRESET_REGISTRY:
            raise ValueError(f"Cannot register duplicate preset ({name})")
        PRESET_REGISTRY[name] = fn
        return fn
    return register_preset_fn


@register_preset("table4")
def feature_ablation() -> list[Setting]:
    return [
        ("global", {"similarity.beta": 1.0, "loss.lambda_p": 0.0, "train.mixture_source": "global"}),
        ("local", {
            "similarity.beta": 0.0, "loss.lambda_p": 1.0, "train.mixture_source": "local", "eval.feature": "local",
        }),
        ("joint", {}),
    ]


@register_preset("table5")
def selection_ablation() -> list[Setting]:
    return [
        ("n_plus=1,n_minus=all", {"similarity.n_plus": 1, "similarity.n_minus": "all"}),
        ("n_plus=7,n_minus=all", {"similarity.n_plus": 7, "similarity.n_minus": "all"}),
        ("n_plus=7,n_minus=500", {"similarity.n_plus": 7, "similarity.n_minus": 500}),
    ]


class AblationService:
    @staticmethod
    def grid(param: str, values: Sequence[str]) -> list[Setting]:
        key = SWEEP_PARAMETERS.get(param)
        if key is None:
            raise ConfigError(f"Unknown sweep parameter '{param}'; choose from {', '.join(SWEEP_PARAMETERS)}")
        if not values:
            raise ConfigError(f"No values given for '{param}'")
        return [(f"{param}={value}", {key: value}) for value in values]

    @staticmethod
    def preset(name: str) -> list[Setting]:
        if name not in PRESET_REGISTRY:
            raise ConfigError(f"Unknown preset '{name}'; choose from {', '.join(sorted(PRESET_REGISTRY))}")
        return PRESET_REGISTRY[name]()

    @staticmethod
    def apply(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
        for key, value in overrides.items():
            config = config.override(key, value)
        return config

    @staticmethod
    def run(
            config: RunConfig,
            splits: DatasetSplits,
            settings: list[Setting],
            seeds: Sequence[int] = (0,)
    ) -> list[AblationRow]:
        """Train and evaluate every setting once per seed; rows hold the seed means."""
        rows = []
        for name, overrides in settings:
            base = AblationService.apply(config, overrides)
            base.similarity.validate_for(len(splits.train))
            scores = []
            for seed in seeds:
                run_config = base.override("train.seed", seed).override("model.init_seed", seed)
                state = TrainerService.fit(run_config, splits)
                report = EvaluationService.evaluate(state.params, splits, run_config.eval)
                scores.append((report.map_score, report.rank1))
            mean_map, mean_rank1 = np.mean(scores, axis=0)
            logger.info("%s: mAP %.4f, rank-1 %.4f over %d seed(s)", name, mean_map, mean_rank1, len(seeds))
            rows.append(AblationRow(
                setting=name, seeds=";".join(str(s) for s in seeds),
                mAP=float(mean_map), rank1=float(mean_rank1),
            ))
        return rows
