import numpy as np


__all__ = ["derive_rng", "derive_seed", "RngPurpose"]


def derive_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, *keys])


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (seed, purpose, epoch, sample, ...) path.

    Every random draw in the package goes through here, so a run can be resumed
    from nothing more than the base seed and the epoch counter.
    """
    return np.random.default_rng(derive_seed(seed, *keys))


class RngPurpose:
    SHUFFLE = 1
    FLIP = 2
    NEGATIVES = 3
    PARAMS = 4
    PROTOTYPES = 5
    TINTS = 6
    IDENTITY = 7
