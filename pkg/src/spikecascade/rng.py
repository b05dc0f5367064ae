"""Per-particle counter-based random substreams.

Stream (seed, i) drives particle i only, so draws never depend on the
population size, on the worker count, or on how particles are chunked.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

_NOISE = 0
_INIT = 1


def particle_generator(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_NOISE, index))
    return np.random.Generator(np.random.Philox(ss))


def init_generator(seed: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_INIT,))
    return np.random.Generator(np.random.Philox(ss))


class NoiseStreams:
    """Standard normals for n particles, served one time step at a time.

    Draws are produced in blocks of ``block`` steps per particle; the
    values handed out do not depend on ``block`` or ``threads``.
    """

    def __init__(self, seed: int, n: int, block: int = 256, threads: int = 1):
        self.n = n
        self.block = block
        self.threads = max(1, int(threads))
        self._gens = [particle_generator(seed, i) for i in range(n)]
        self._buf = np.empty((block, n))
        self._pos = block

    def _fill_range(self, raw, lo, hi):
        for i in range(lo, hi):
            self._gens[i].standard_normal(out=raw[i])

    def _refill(self):
        raw = np.empty((self.n, self.block))
        if self.threads == 1 or self.n < 2 * self.threads:
            self._fill_range(raw, 0, self.n)
        else:
            edges = np.linspace(0, self.n, self.threads + 1).astype(int)
            with ThreadPoolExecutor(self.threads) as pool:
                list(pool.map(lambda k: self._fill_range(raw, edges[k], edges[k + 1]),
                              range(self.threads)))
        self._buf = np.ascontiguousarray(raw.T)
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._pos == self.block:
            self._refill()
        row = self._buf[self._pos]
        self._pos += 1
        return row
