"""Per-epoch committee shuffling and proposer selection.

Each epoch gets its own permutation of validator ids, drawn with a
Fisher-Yates shuffle from a PCG64 stream seeded by (seed, epoch). Slot k of
the epoch is served by the validators at shuffled positions congruent to k
modulo the number of slots per epoch, and the member at the smallest such
position proposes.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional

import numpy as np


def _check(n: int, slots_per_epoch: int) -> None:
    if n <= 0 or slots_per_epoch <= 0:
        raise ValueError("validator count and slots per epoch must be positive")
    if n % slots_per_epoch:
        raise ValueError(f"slots per epoch {slots_per_epoch} must divide validator count {n}")


@lru_cache(maxsize=4096)
def shuffle(seed: Optional[int], epoch: int, n: int) -> tuple[int, ...]:
    """The permutation for an epoch; ``seed=None`` gives the identity."""
    perm = list(range(n))
    if seed is None:
        return tuple(perm)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return tuple(perm)


def committee(seed: Optional[int], epoch: int, k: int, n: int, slots_per_epoch: int) -> list[int]:
    """Validators attesting in slot k of the epoch, in shuffled-position order."""
    _check(n, slots_per_epoch)
    if not 0 <= k < slots_per_epoch:
        raise ValueError(f"slot offset {k} outside [0, {slots_per_epoch})")
    perm = shuffle(seed, epoch, n)
    return [perm[s] for s in range(k, n, slots_per_epoch)]


def slot_committee(seed: Optional[int], slot: int, n: int, slots_per_epoch: int) -> list[int]:
    return committee(seed, slot // slots_per_epoch, slot % slots_per_epoch, n, slots_per_epoch)


def proposer(seed: Optional[int], slot: int, n: int, slots_per_epoch: int) -> int:
    return slot_committee(seed, slot, n, slots_per_epoch)[0]
