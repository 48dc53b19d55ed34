import math

import numpy as np
import pytest

from app.autodiff import F, Graph
from app.models import ModelParams, embed
from app.repositories import CheckpointRepository
from app.services import LossService, SamplingService, TrainerService
from app.utils import BankStateError, ConfigError, DataFormatError, NumericalError


def state_arrays(state):
    arrays = dict(state.params.state_dict())
    arrays.update({f"banks/{k}": v for k, v in state.banks.snapshot().items()})
    arrays.update({f"optimizer/{k}": v for k, v in state.optimizer.state.state_dict().items()})
    return arrays


class TestFit:
    def test_deterministic(self, tiny_config, tiny_splits):
        first = TrainerService.fit(tiny_config, tiny_splits)
        second = TrainerService.fit(tiny_config, tiny_splits)
        assert first.history == second.history
        for name, value in state_arrays(first).items():
            np.testing.assert_array_equal(value, state_arrays(second)[name], err_msg=name)

    def test_phases_and_losses(self, tiny_config, tiny_splits):
        state = TrainerService.fit(tiny_config, tiny_splits)
        assert [r.phase for r in state.history] == ["init", "train", "train"]
        assert [r.epoch for r in state.history] == [0, 1, 2]
        for record in state.history:
            assert math.isfinite(record.loss_total)
            assert record.loss_total == pytest.approx(0.5 * record.loss_global + 0.5 * record.loss_local)
        assert state.history[0].loss_total >= 0.0

    def test_one_init_epoch_fills_banks(self, tiny_config, tiny_splits):
        state = TrainerService.fit(tiny_config, tiny_splits, stop_after=1)
        assert state.epoch == 1
        assert state.banks.fully_initialized()
        assert state.banks.mixture_initialized.all()
        np.testing.assert_allclose(np.linalg.norm(state.banks.global_keys, axis=1), 1.0, atol=1e-6)
        assert not state.banks.writeable

    def test_steps_per_epoch(self, tiny_config, tiny_splits):
        config = tiny_config.override("train.batch_size", 3)
        state = TrainerService.create_state(config, len(tiny_splits.train))
        steps = []
        step = state.optimizer.step
        state.optimizer.step = lambda: (steps.append(state.epoch), step())
        TrainerService.fit(config, tiny_splits, state=state)
        assert len(tiny_splits.train) == 8
        assert [steps.count(epoch) for epoch in range(3)] == [3, 3, 3]

    def test_default_projection_setting_trains(self, tiny_config, tiny_splits):
        assert not tiny_config.model.share_projection
        initial = ModelParams(tiny_config.model, tiny_config.dataset.image_shape).parameters()
        state = TrainerService.fit(tiny_config, tiny_splits)
        assert state.epoch == 3
        trained = state.params.parameters()
        for name in ("proj_stripe.fc.weight", "proj_stripe.fc.bias", "proj_stripe.bn.gamma", "proj_stripe.bn.beta"):
            np.testing.assert_array_equal(trained[name].data, initial[name].data, err_msg=name)
        assert not np.array_equal(trained["proj_global.fc.weight"].data, initial["proj_global.fc.weight"].data)

    def test_shared_projection_trains(self, tiny_config, tiny_splits):
        config = tiny_config.override("model.share_projection", True)
        state = TrainerService.fit(config, tiny_splits)
        assert [r.phase for r in state.history] == ["init", "train", "train"]

    @pytest.mark.parametrize("mixture_update", ["per_sample", "per_batch"])
    def test_bank_writes_are_audited_every_epoch(self, tiny_config, tiny_splits, bank_audit, mixture_update):
        config = tiny_config.override("train.mixture_update", mixture_update)
        TrainerService.fit(config, tiny_splits, on_epoch=bank_audit.end_epoch)
        assert bank_audit.failures == []
        assert bank_audit.epochs == [1, 2, 3]
        assert bank_audit.updates == 3 * 2

    def test_per_batch_mixture_updates(self, tiny_config, tiny_splits):
        config = tiny_config.override("train.mixture_update", "per_batch")
        state = TrainerService.fit(config, tiny_splits)
        np.testing.assert_allclose(np.linalg.norm(state.banks.mixture_keys, axis=1), 1.0, atol=1e-6)
        assert len(state.history) == 3

    def test_resume_is_bit_identical(self, tiny_config, tiny_splits, tmp_path):
        full = TrainerService.fit(tiny_config, tiny_splits)
        partial = TrainerService.fit(tiny_config, tiny_splits, stop_after=2)
        path = tmp_path / "partial.scck"
        CheckpointRepository.save(path, TrainerService.to_checkpoint(partial, tiny_config))
        config, state = TrainerService.from_checkpoint(CheckpointRepository.load(path))
        resumed = TrainerService.fit(config, tiny_splits, state=state)
        assert resumed.history == full.history
        for name, value in state_arrays(full).items():
            np.testing.assert_array_equal(value, state_arrays(resumed)[name], err_msg=name)

    def test_too_many_negatives(self, tiny_config, tiny_splits):
        config = tiny_config.override("similarity.n_minus", 7)
        with pytest.raises(ConfigError):
            TrainerService.fit(config, tiny_splits)

    def test_image_shape_mismatch(self, tiny_config, tiny_splits):
        config = tiny_config.override("dataset.image_height", 32)
        with pytest.raises(DataFormatError):
            TrainerService.fit(config, tiny_splits)

    def test_train_epoch_needs_initialized_banks(self, tiny_config, tiny_splits):
        state = TrainerService.create_state(tiny_config, len(tiny_splits.train))
        with pytest.raises(BankStateError):
            TrainerService.run_train_epoch(tiny_splits.train, state, tiny_config)

    def test_diverging_loss_is_reported(self, tiny_config, tiny_splits):
        config = tiny_config.override("loss.tau", 1e-320)
        with pytest.raises(NumericalError):
            with np.errstate(all="ignore"):
                TrainerService.fit(config, tiny_splits)


class TestBankIsolation:
    def test_backward_leaves_banks_untouched(self, tiny_config, tiny_splits):
        state = TrainerService.fit(tiny_config, tiny_splits, stop_after=1)
        before = state.banks.snapshot()
        pixels = np.stack([s.pixels for s in tiny_splits.train[:4]]).astype(np.float64)
        cameras = np.array([s.camera for s in tiny_splits.train])
        graph = Graph()
        with graph.recording():
            keys = embed(pixels, state.params, train_mode=True)
            v_global, v_stripes, _ = keys.detached(0)
            selection = SamplingService.partition_and_select(
                0, v_global, v_stripes, state.banks, cameras, tiny_config.similarity
            )
            loss = LossService.selective_contrastive_loss(
                F.getitem(keys.v_global, 0), state.banks.mixture_keys, selection, tiny_config.loss
            )
        graph.backward(loss)
        assert state.params.encoder.stage1.weight.grad is not None
        for name, array in state.banks.arrays().items():
            assert array.tobytes() == before[name].tobytes(), name
