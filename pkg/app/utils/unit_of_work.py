from contextlib import contextmanager
from contextvars import ContextVar
from typing import TYPE_CHECKING, Iterator

from .exceptions import BankStateError

if TYPE_CHECKING:
    from app.repositories.memory import MemoryBanks


__all__ = ["UnitOfWork", "get_uow"]


class UnitOfWork:
    """Serializes memory bank update phases.

    Inside `begin` the bank arrays are writable; on success the new state is
    kept, on any exception every bank is restored to its state at phase start.
    """
    __banks = ContextVar("banks", default=None)

    @contextmanager
    def begin(self, banks: "MemoryBanks") -> Iterator["UnitOfWork"]:
        if self.__banks.get() is not None:
            raise BankStateError("A bank update phase is already open")
        snapshot = banks.snapshot()
        token = self.__banks.set(banks)
        banks.set_writeable(True)
        try:
            yield self
        except Exception:
            banks.restore(snapshot)
            raise
        finally:
            banks.set_writeable(False)
            self.__banks.reset(token)

    def get_banks(self) -> "MemoryBanks":
        current_banks = self.__banks.get()
        if current_banks is None:
            raise BankStateError("No bank update phase. Use 'with uow.begin(banks)'.")
        return current_banks


def get_uow() -> UnitOfWork:
    return UnitOfWork()
