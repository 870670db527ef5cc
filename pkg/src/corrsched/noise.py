"""Counter-addressed Gaussian noise shared by all schedule arms of a seed."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# address lanes within one seed; each (t, lane) pair owns an independent block
STEP = 0
EPISODE = 1
INIT = 2


@lru_cache(maxsize=65536)
def _block(seed: int, t: int, lane: int, n: int, uniform: bool = False) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, t, lane, int(uniform)]))
    out = gen.random(n) if uniform else gen.standard_normal(n)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class NoiseStream:
    """Standard normals addressed by ``(seed, t, lane)``.

    Draw ``k`` of block ``t`` does not depend on which other blocks were
    requested before, so projecting or skipping a step never shifts the noise
    seen later in the rollout.
    """

    seed: int

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def normal(self, t: int, n: int, lane: int = STEP) -> np.ndarray:
        if t < 0:
            raise ValueError("negative step index")
        return _block(self.seed, t, lane, n)

    def uniform(self, t: int, n: int, lane: int = EPISODE) -> np.ndarray:
        if t < 0:
            raise ValueError("negative step index")
        return _block(self.seed, t, lane, n, True)
