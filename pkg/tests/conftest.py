import numpy as np
import pytest
import yaml

from app.repositories import MemoryBanks
from app.services import SyntheticDataService
from app.services.trainer import _BatchUpdates
from app.settings import RunConfig


TINY_CONFIG = {
    "model": {
        "hidden_channels": 8, "feature_channels": 8, "feature_height": 4, "feature_width": 2,
        "n_stripes": 4, "key_dim": 8,
    },
    "dataset": {
        "num_identities": 4, "num_cameras": 2, "images_per_camera": 2, "num_test_identities": 2,
        "image_height": 16, "image_width": 8, "image_channels": 3, "n_bands": 4, "workers": 2,
    },
    "similarity": {"n_plus": 1, "n_minus": 3},
    "train": {"epochs": 3, "init_epochs": 1, "batch_size": 4, "progress": False},
}


@pytest.fixture
def tiny_config() -> RunConfig:
    return RunConfig.load(TINY_CONFIG)


@pytest.fixture
def tiny_splits(tiny_config):
    return SyntheticDataService.generate_dataset(tiny_config.dataset)


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY_CONFIG), encoding="utf-8")
    return path


def unit_rows(rng: np.random.Generator, *shape: int) -> np.ndarray:
    rows = rng.standard_normal(shape)
    return rows / np.linalg.norm(rows, axis=-1, keepdims=True)


def filled_banks(rng: np.random.Generator, size: int, key_dim: int, n_stripes: int) -> MemoryBanks:
    """Banks with random unit keys in every row, all marked initialized."""
    banks = MemoryBanks.create(size, key_dim, n_stripes)
    banks.restore({
        "global": unit_rows(rng, size, key_dim),
        "local": unit_rows(rng, size, n_stripes, key_dim),
        "mixture": unit_rows(rng, size, key_dim),
        "global_initialized": np.ones(size, dtype=bool),
        "local_initialized": np.ones(size, dtype=bool),
        "mixture_initialized": np.ones(size, dtype=bool),
    })
    return banks


class BankAudit:
    """Wraps the per-batch bank write: touched rows must stay unit norm, every other row bit-identical."""

    def __init__(self):
        self.updates = 0
        self.epochs: list[int] = []
        self.failures: list[str] = []

    def wrap(self, apply):
        def audited(updates, banks, config):
            before = banks.snapshot()
            apply(updates, banks, config)
            self.updates += 1
            anchors = sorted({index for index, _, _ in updates.anchors})
            mixture = sorted({row for positives, _, _ in updates.mixture for row in positives})
            self._check(before, "global", banks.global_keys, anchors)
            self._check(before, "local", banks.local_keys, anchors)
            self._check(before, "mixture", banks.mixture_keys, mixture)
        return audited

    def _check(self, before, name, array, touched):
        if touched:
            norms = np.linalg.norm(array[touched], axis=-1)
            if np.max(np.abs(norms - 1.0)) > 1e-6:
                self.failures.append(f"update {self.updates}: touched {name} rows are not unit norm")
        untouched = np.setdiff1d(np.arange(array.shape[0]), touched)
        if array[untouched].tobytes() != before[name][untouched].tobytes():
            self.failures.append(f"update {self.updates}: untouched {name} rows changed")

    def end_epoch(self, state):
        banks = state.banks
        for name, array, rows in (
                ("global", banks.global_keys, banks.global_initialized),
                ("local", banks.local_keys, banks.local_initialized),
                ("mixture", banks.mixture_keys, banks.mixture_initialized),
        ):
            norms = np.linalg.norm(array[rows], axis=-1)
            if norms.size and np.max(np.abs(norms - 1.0)) > 1e-6:
                self.failures.append(f"epoch {state.epoch}: initialized {name} rows are not unit norm")
        self.epochs.append(state.epoch)


@pytest.fixture
def bank_audit():
    audit = BankAudit()
    with pytest.MonkeyPatch.context() as patch:
        patch.setattr(_BatchUpdates, "apply", audit.wrap(_BatchUpdates.apply))
        yield audit
