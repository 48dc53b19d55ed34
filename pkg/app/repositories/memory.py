from typing import Sequence

import numpy as np

from app.autodiff import l2_normalize_array
from app.settings import MixtureSource
from app.utils import BankStateError


__all__ = ["MemoryBanks"]


def _average_into(row: np.ndarray, key: np.ndarray) -> None:
    row[...] = l2_normalize_array((row + key) / 2.0)


class MemoryBanks:
    """The global, per-stripe local and mixture dictionaries.

    Keys are plain arrays, never part of a graph. Arrays are read-only except
    inside a `UnitOfWork.begin(banks)` phase.
    """

    def __init__(self, size: int, key_dim: int, n_stripes: int):
        if min(size, key_dim, n_stripes) <= 0:
            raise BankStateError(f"bank dimensions must be positive, got N={size}, d={key_dim}, N_l={n_stripes}")
        self.global_keys = np.zeros((size, key_dim))
        self.local_keys = np.zeros((size, n_stripes, key_dim))
        self.mixture_keys = np.zeros((size, key_dim))
        self.global_initialized = np.zeros(size, dtype=bool)
        self.local_initialized = np.zeros(size, dtype=bool)
        self.mixture_initialized = np.zeros(size, dtype=bool)
        self.set_writeable(False)

    @classmethod
    def create(cls, size: int, key_dim: int, n_stripes: int) -> "MemoryBanks":
        return cls(size, key_dim, n_stripes)

    @property
    def size(self) -> int:
        return self.global_keys.shape[0]

    @property
    def key_dim(self) -> int:
        return self.global_keys.shape[1]

    @property
    def n_stripes(self) -> int:
        return self.local_keys.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "global": self.global_keys,
            "local": self.local_keys,
            "mixture": self.mixture_keys,
            "global_initialized": self.global_initialized,
            "local_initialized": self.local_initialized,
            "mixture_initialized": self.mixture_initialized,
        }

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: array.copy() for name, array in self.arrays().items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, array in self.arrays().items():
            if snapshot[name].shape != array.shape:
                raise BankStateError(f"bank '{name}': snapshot shape {snapshot[name].shape} != {array.shape}")
            writeable = array.flags.writeable
            array.flags.writeable = True
            np.copyto(array, snapshot[name].astype(array.dtype))
            array.flags.writeable = writeable

    def set_writeable(self, flag: bool) -> None:
        for array in self.arrays().values():
            array.flags.writeable = flag

    @property
    def writeable(self) -> bool:
        return bool(self.global_keys.flags.writeable)

    def fully_initialized(self) -> bool:
        return bool(self.global_initialized.all() and self.local_initialized.all())

    def require_initialized(self, rows: np.ndarray) -> None:
        missing = rows[~(self.global_initialized[rows] & self.local_initialized[rows])]
        if missing.size:
            raise BankStateError(f"bank rows {missing[:10].tolist()} were never initialized")

    def __check_update(self, indices: Sequence[int], *keys: np.ndarray) -> None:
        if not self.writeable:
            raise BankStateError("bank update outside an update phase; use 'with uow.begin(banks)'")
        for index in indices:
            if not 0 <= index < self.size:
                raise BankStateError(f"bank index {index} out of range [0, {self.size})")
        for key in keys:
            if not np.all(np.isfinite(key)):
                raise BankStateError("non-finite key passed to a bank update")

    def update_anchor_global(self, index: int, v_global: np.ndarray) -> None:
        self.__check_update([index], v_global)
        _average_into(self.global_keys[index], v_global)
        self.global_initialized[index] = True

    def update_anchor_local(self, index: int, v_stripes: np.ndarray) -> None:
        self.__check_update([index], v_stripes)
        if v_stripes.shape != self.local_keys.shape[1:]:
            raise BankStateError(f"stripe keys of shape {v_stripes.shape} != bank rows {self.local_keys.shape[1:]}")
        for stripe in range(self.n_stripes):
            _average_into(self.local_keys[index, stripe], v_stripes[stripe])
        self.local_initialized[index] = True

    def update_mixture_positives(
            self,
            positives: Sequence[int],
            v_global: np.ndarray,
            v_local: np.ndarray,
            source: MixtureSource = MixtureSource.JOINT
    ) -> None:
        if len(positives) == 0:
            raise BankStateError("mixture update needs at least one positive")
        self.__check_update(positives, v_global, v_local)
        for index in positives:
            row = self.mixture_keys[index]
            if source != MixtureSource.LOCAL:
                _average_into(row, v_global)
            if source != MixtureSource.GLOBAL:
                _average_into(row, v_local)
            self.mixture_initialized[index] = True
