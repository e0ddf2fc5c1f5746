"""
Membership and counting Bloom filters

Both variants keep one array of m cells; the H hash functions each select
one column. A membership filter serializes to an m-bit integer with cell j
as bit j.
"""
import numpy as np

from ..errors import FilterTooWide
from .base import HashedStructure, aggregate

MAX_SERIALIZED_BITS = 64


class BloomFilterState(HashedStructure):
    def position(self, row):
        return 0, self.column(row)


class MembershipBloom(BloomFilterState):
    def insert(self):
        for row in range(self.hash_rows):
            self.put(row, 1)

    def test(self):
        return int(all(self.values()))

    def _check_width(self):
        if self.block.shape[1] > MAX_SERIALIZED_BITS:
            raise FilterTooWide(self.decl.name, self.block.shape[1])

    def init(self, raw):
        """Load the bit array from the low m bits of `raw`."""
        self._check_width()
        m = self.block.shape[1]
        bits = [(raw >> j) & 1 for j in range(m)]
        self.block[0, :] = np.array(bits, dtype=np.uint64)

    def serialize(self):
        self._check_width()
        return sum(int(bit) << j for j, bit in enumerate(self.block[0, :]))

    def query(self, method, args=()):
        if method == 'test':
            return self.test()
        return self.serialize()


class CountingBloom(BloomFilterState):
    def init(self, value):
        """Bulk-load one value into every cell (experimental)."""
        self.block[...] = value & self.mask

    def query(self, method, args=()):
        return aggregate(method or 'min', self.values(), *args)


def bloom_insert(bloom):
    bloom.insert()


def bloom_init(bloom, raw):
    bloom.init(raw)


def cbf_aggregate(bloom, op, arg=None):
    return aggregate(op, bloom.values(), arg)
