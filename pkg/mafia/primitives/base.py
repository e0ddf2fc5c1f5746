"""
Common behaviour of stateful structures.

A structure is a short-lived view over one instance's cell block (a
numpy uint64 array of shape (rows, cols)) for one packet's key values.
Row i of a hashed structure is addressed by the i-th hash function.
"""
from ..core.expr import M64
from ..core.hashing import hash_values


def aggregate(op, values, arg=None):
    """sum/avg/min/max over selected cells; all(v)/any(v) compare against v.

    `sum` wraps modulo 2^64 and `avg` truncates.
    """
    if op == 'sum':
        return sum(values) & M64
    if op == 'avg':
        return (sum(values) & M64) // len(values)
    if op == 'min':
        return min(values)
    if op == 'max':
        return max(values)
    if op == 'all':
        return int(all(v == arg for v in values))
    if op == 'any':
        return int(any(v == arg for v in values))
    raise ValueError(f'unknown aggregate {op!r}')


class Structure:
    hash_rows = 1

    def __init__(self, decl, block, seeds=(), key_values=()):
        self.decl = decl
        self.block = block
        self.seeds = seeds
        self._key_values = key_values
        self.mask = (1 << decl.cell_bits) - 1

    @property
    def key_values(self):
        """Key component values; resolved on first use when given as a callable."""
        if callable(self._key_values):
            self._key_values = tuple(self._key_values())
        return self._key_values

    def position(self, row):
        return 0, 0

    def get(self, row=0):
        return int(self.block[self.position(row)])

    def put(self, row, value):
        self.block[self.position(row)] = value & self.mask

    def values(self):
        return [self.get(row) for row in range(self.hash_rows)]

    def update(self, fn):
        """Read-modify-write every selected cell, row by row."""
        for row in range(self.hash_rows):
            self.put(row, fn(self.get(row)))

    def reset(self):
        self.block[...] = 0

    def query(self, method, args=()):
        raise NotImplementedError


class HashedStructure(Structure):
    """A structure whose H selected cells come from H seeded hashes of the key."""

    def __init__(self, decl, block, seeds=(), key_values=()):
        super().__init__(decl, block, seeds, key_values)
        self.hash_rows = len(seeds)
        self._columns = {}

    def column(self, row):
        if row not in self._columns:
            self._columns[row] = hash_values(self.key_values, self.seeds[row]) % self.block.shape[1]
        return self._columns[row]
