import logging
from typing import Callable

import numpy as np
from tqdm import tqdm

from app.autodiff import F, Graph, diagnostics, l2_normalize_array
from app.models import ModelParams, embed
from app.repositories import MemoryBanks
from app.schemas import Checkpoint, CheckpointMeta, DatasetSplits, EpochRecord, ImageSample
from app.settings import MixtureUpdate, RunConfig
from app.utils import BankStateError, DataFormatError, NumericalError, RngPurpose, derive_rng, get_uow

from .losses import LossService
from .optimizer import SGDMomentum
from .sampling import SamplingService
from .synthdata import SyntheticDataService


__all__ = ["TrainingState", "TrainerService", "CHECKPOINT_VERSION"]

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class TrainingState:
    def __init__(self, config: RunConfig, n_train: int):
        self.params = ModelParams(config.model, config.dataset.image_shape)
        self.banks = MemoryBanks.create(n_train, config.model.key_dim, config.model.n_stripes)
        self.optimizer = SGDMomentum(self.params.parameters(), config.train.learning_rate, config.train.momentum)
        self.epoch = 0
        self.history: list[EpochRecord] = []


class _BatchUpdates:
    """Bank writes collected during a batch and applied after the SGD step."""

    def __init__(self):
        self.anchors: list[tuple[int, np.ndarray, np.ndarray]] = []
        self.mixture: list[tuple[list[int], np.ndarray, np.ndarray]] = []

    def apply(self, banks: MemoryBanks, config: RunConfig) -> None:
        source = config.train.mixture_source
        for index, v_global, v_stripes in self.anchors:
            banks.update_anchor_global(index, v_global)
            banks.update_anchor_local(index, v_stripes)
        if config.train.mixture_update == MixtureUpdate.PER_SAMPLE:
            for positives, v_global, v_local in self.mixture:
                banks.update_mixture_positives(positives, v_global, v_local, source)
            return
        # per_batch: one write per row, from the mean of every key that selected it
        contributions: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
        for positives, v_global, v_local in self.mixture:
            for row in positives:
                contributions.setdefault(row, []).append((v_global, v_local))
        for row in sorted(contributions):
            keys = contributions[row]
            mean_global = l2_normalize_array(np.mean([k[0] for k in keys], axis=0))
            mean_local = l2_normalize_array(np.mean([k[1] for k in keys], axis=0))
            banks.update_mixture_positives([row], mean_global, mean_local, source)


class TrainerService:
    @staticmethod
    def create_state(config: RunConfig, n_train: int) -> TrainingState:
        config.similarity.validate_for(n_train)
        return TrainingState(config, n_train)

    @staticmethod
    def _check_samples(samples: list[ImageSample], config: RunConfig) -> None:
        if not samples:
            raise DataFormatError("training split is empty")
        shape = samples[0].pixels.shape
        if shape != config.dataset.image_shape:
            raise DataFormatError(f"images are {shape}, configuration expects {config.dataset.image_shape}")

    @staticmethod
    def _run_epoch(samples: list[ImageSample], state: TrainingState, config: RunConfig, phase: str) -> EpochRecord:
        n = len(samples)
        seed, epoch = config.train.seed, state.epoch
        pixels = DatasetSplits.stack_pixels(samples)
        cameras = DatasetSplits.cameras(samples)
        n_minus = config.similarity.resolve_n_minus(n)
        order = derive_rng(seed, RngPurpose.SHUFFLE, epoch).permutation(n)
        flip_rng = derive_rng(seed, RngPurpose.FLIP, epoch)
        uow = get_uow()
        degenerate_before = diagnostics["degenerate_l2"]

        sums = np.zeros(3)
        batches = [order[start:start + config.train.batch_size] for start in range(0, n, config.train.batch_size)]
        for batch in tqdm(batches, desc=f"epoch {epoch} [{phase}]", leave=False, disable=not config.train.progress):
            images = SyntheticDataService.flip_batch(pixels[batch], config.train.flip_probability, flip_rng)
            updates = _BatchUpdates()
            graph = Graph()
            with graph.recording():
                keys = embed(images, state.params, train_mode=True)
                batch_loss = None
                for row, index in enumerate(batch.tolist()):
                    v_global, v_stripes, v_local = keys.detached(row)
                    if phase == "init":
                        negatives = derive_rng(seed, RngPurpose.NEGATIVES, epoch, index).choice(
                            np.delete(np.arange(n), index), size=n_minus, replace=False
                        ).tolist()
                        loss_global = LossService.init_contrastive_loss(
                            F.getitem(keys.v_global, row), state.banks.mixture_keys, index, negatives, config.loss
                        )
                        loss_local = LossService.init_contrastive_loss(
                            F.getitem(keys.v_local, row), state.banks.mixture_keys, index, negatives, config.loss
                        )
                        positives = [index]
                    else:
                        selection = SamplingService.partition_and_select(
                            index, v_global, v_stripes, state.banks, cameras, config.similarity, n_minus
                        )
                        loss_global = LossService.selective_contrastive_loss(
                            F.getitem(keys.v_global, row), state.banks.mixture_keys, selection, config.loss
                        )
                        loss_local = LossService.selective_contrastive_loss(
                            F.getitem(keys.v_local, row), state.banks.mixture_keys, selection, config.loss
                        )
                        positives = selection.positives
                    loss = LossService.total_loss(loss_global, loss_local, config.loss.lambda_p)
                    sums += (loss_global.item(), loss_local.item(), loss.item())
                    batch_loss = loss if batch_loss is None else F.add(batch_loss, loss)
                    updates.anchors.append((index, v_global, v_stripes))
                    updates.mixture.append((positives, v_global, v_local))

            if not np.isfinite(batch_loss.item()):
                raise NumericalError(f"non-finite loss in epoch {epoch}")
            state.optimizer.zero_grad()
            graph.backward(batch_loss)
            state.optimizer.step()
            with uow.begin(state.banks) as unit:
                updates.apply(unit.get_banks(), config)

        degenerate = diagnostics["degenerate_l2"] - degenerate_before
        if degenerate:
            logger.warning("Epoch %d: %d near-zero vectors left unnormalized", epoch, degenerate)
        means = sums / n
        return EpochRecord(
            epoch=epoch, phase=phase,
            loss_global=float(means[0]), loss_local=float(means[1]), loss_total=float(means[2]),
        )

    @staticmethod
    def run_init_epoch(samples: list[ImageSample], state: TrainingState, config: RunConfig) -> EpochRecord:
        return TrainerService._run_epoch(samples, state, config, "init")

    @staticmethod
    def run_train_epoch(samples: list[ImageSample], state: TrainingState, config: RunConfig) -> EpochRecord:
        if not state.banks.fully_initialized():
            raise BankStateError("selective training started before every bank row was initialized")
        return TrainerService._run_epoch(samples, state, config, "train")

    @staticmethod
    def fit(
            config: RunConfig,
            splits: DatasetSplits,
            state: TrainingState | None = None,
            stop_after: int | None = None,
            on_epoch: Callable[[TrainingState], None] | None = None
    ) -> TrainingState:
        """Passing the state of an earlier run continues it exactly where it stopped."""
        samples = splits.train
        TrainerService._check_samples(samples, config)
        if state is None:
            state = TrainerService.create_state(config, len(samples))
        elif state.banks.size != len(samples):
            raise DataFormatError(f"state holds {state.banks.size} bank rows, dataset has {len(samples)} train images")

        last = config.train.epochs if stop_after is None else min(stop_after, config.train.epochs)
        while state.epoch < last:
            if state.epoch < config.train.init_epochs:
                record = TrainerService.run_init_epoch(samples, state, config)
            else:
                record = TrainerService.run_train_epoch(samples, state, config)
            state.history.append(record)
            state.epoch += 1
            logger.info(
                "Epoch %d [%s] loss %.5f (global %.5f, local %.5f)",
                record.epoch, record.phase, record.loss_total, record.loss_global, record.loss_local
            )
            if on_epoch is not None:
                on_epoch(state)
        return state

    @staticmethod
    def to_checkpoint(state: TrainingState, config: RunConfig) -> Checkpoint:
        tensors = {f"params/{name}": value for name, value in state.params.state_dict().items()}
        tensors.update({f"optimizer/{name}": value for name, value in state.optimizer.state.state_dict().items()})
        tensors.update({
            f"banks/{name}": value.astype(np.float64) for name, value in state.banks.snapshot().items()
        })
        meta = CheckpointMeta(
            version=CHECKPOINT_VERSION,
            config=config.snapshot(),
            epoch=state.epoch,
            seed=config.train.seed,
            history=list(state.history),
        )
        return Checkpoint(meta=meta, tensors=tensors)

    @staticmethod
    def from_checkpoint(checkpoint: Checkpoint) -> tuple[RunConfig, TrainingState]:
        config = RunConfig.load(checkpoint.meta.config)
        banks = checkpoint.group("banks")
        if "global" not in banks:
            raise DataFormatError("checkpoint holds no memory banks")
        state = TrainingState(config, banks["global"].shape[0])
        state.params.load_state_dict(checkpoint.group("params"))
        state.optimizer.state.load_state_dict(checkpoint.group("optimizer"))
        state.banks.restore(banks)
        state.epoch = checkpoint.meta.epoch
        state.history = list(checkpoint.meta.history)
        return config, state
