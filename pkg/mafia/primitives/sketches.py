"""
Count-min, store, PCSA and HyperLogLog sketches
"""
import math

import numpy as np

from ..core.hashing import hash_values
from .base import HashedStructure, Structure, aggregate

PCSA_PHI = 0.77351
PCSA_MAX_RANK = 31
PCSA_SMALL_RANGE = 2.5
HLL_MAX_RANK = 63


class SketchState(HashedStructure):
    """H rows by m columns; row i is addressed by hash function i."""

    def position(self, row):
        return row, self.column(row)

    def query(self, method, args=()):
        return aggregate(method or 'min', self.values(), *args)


class CountMinSketch(SketchState):
    pass


class StoreSketch(SketchState):
    """Like count-min but the update expression is arbitrary."""


def cms_update(sketch, fn):
    sketch.update(fn)


def cms_query(sketch, op='min', arg=None):
    return aggregate(op, sketch.values(), arg)


def store_ops(sketch, op, arg=None):
    return aggregate(op, sketch.values(), arg)


class CardinalitySketch(Structure):
    """One bucket array of m = 2^b entries fed by a single 64-bit hash."""

    def __init__(self, decl, block, seeds=(), key_values=()):
        super().__init__(decl, block, seeds, key_values)
        self.buckets = block.shape[1]
        self.bucket_bits = self.buckets.bit_length() - 1

    def key_hash(self):
        return hash_values(self.key_values, self.seeds[0])

    def split(self):
        h = self.key_hash()
        return h & (self.buckets - 1), h >> self.bucket_bits

    def query(self, method, args=()):
        return self.estimate()


class PcsaSketch(CardinalitySketch):
    """Probabilistic counting with stochastic averaging."""

    def update(self, fn=None):
        j, rest = self.split()
        rank = (rest & -rest).bit_length() - 1 if rest else PCSA_MAX_RANK
        rank = min(rank, PCSA_MAX_RANK)
        self.block[0, j] = int(self.block[0, j]) | (1 << rank)

    def estimate(self):
        m = self.buckets
        bitmaps = [int(x) for x in self.block[0, :]]
        empty = bitmaps.count(0)
        if empty:
            # linear counting over empty bitmaps while it stays in its range
            small = m * math.log(m / empty)
            if small <= PCSA_SMALL_RANGE * m:
                return round(small)
        # index of the lowest unset bit in each bitmap
        lowest = [((~x) & (x + 1)).bit_length() - 1 for x in bitmaps]
        return round(m * 2 ** (sum(lowest) / m) / PCSA_PHI)


def hll_alpha(m):
    if m <= 16:
        return 0.673
    if m == 32:
        return 0.697
    if m == 64:
        return 0.709
    return 0.7213 / (1 + 1.079 / m)


class HyperLogLogSketch(CardinalitySketch):
    def update(self, fn=None):
        j, w = self.split()
        bits = 64 - self.bucket_bits
        rank = min(bits - w.bit_length() + 1, HLL_MAX_RANK)
        if rank > int(self.block[0, j]):
            self.block[0, j] = rank

    def estimate(self):
        registers = self.block[0, :].astype(np.float64)
        m = self.buckets
        raw = hll_alpha(m) * m * m / float(np.sum(np.power(2.0, -registers)))
        zeros = int(np.count_nonzero(registers == 0))
        if raw <= 2.5 * m and zeros:
            raw = m * math.log(m / zeros)
        return round(raw)


def pcsa_update(sketch):
    sketch.update()


def pcsa_estimate(sketch):
    return sketch.estimate()


def hll_update(sketch):
    sketch.update()


def hll_estimate(sketch):
    return sketch.estimate()
