"""
Per-switch state storage

Every declared variable owns one zero-initialized numpy uint64 array of
shape (slots, rows, cols): slots > 1 only for HashMaps, rows are hash
functions of count-min/store sketches. Structures from the sibling
modules are views over one slot of that array.
"""
import logging

import numpy as np

from ..core.decls import (
    COUNT_MIN, COUNTING, HYPERLOGLOG, MEMBERSHIP, PCSA, STORE, HashMapKind, structure_of,
)
from ..core.expr import evaluate
from ..core.hashing import derive_seed, hash_values
from ..errors import UnknownState
from .bloom import CountingBloom, MembershipBloom
from .counters import CounterState, TimestampState
from .sketches import CountMinSketch, HyperLogLogSketch, PcsaSketch, StoreSketch

log = logging.getLogger(__name__)

STRUCTURES = {
    'counter': CounterState,
    'timestamp': TimestampState,
    MEMBERSHIP: MembershipBloom,
    COUNTING: CountingBloom,
    COUNT_MIN: CountMinSketch,
    STORE: StoreSketch,
    PCSA: PcsaSketch,
    HYPERLOGLOG: HyperLogLogSketch,
}


class StateView:
    """Read and update access to state variables on behalf of one packet.

    Subclasses provide `array(name)` for reads and `writable(name)` for
    writes, plus the `decls`, `seed` and `_seeds` attributes.
    """

    def decl(self, name):
        try:
            return self.decls[name]
        except KeyError:
            raise UnknownState(name) from None

    def row_seeds(self, name):
        if name not in self._seeds:
            decl = self.decl(name)
            rows = decl.hash_rows if decl.base.kind in ('bloom', 'sketch') else 0
            self._seeds[name] = tuple(derive_seed(self.seed, name, row) for row in range(rows))
        return self._seeds[name]

    def slot(self, name, packet):
        decl = self.decl(name)
        if not isinstance(decl.kind, HashMapKind):
            return 0
        values = decl.kind.key.values(packet)
        return hash_values(values, derive_seed(self.seed, name, 0)) % decl.kind.size

    def structure(self, name, packet, write=False):
        decl = self.decl(name)
        arr = self.writable(name) if write else self.array(name)
        base_key = getattr(decl.base, 'key', None)
        key_values = (lambda: base_key.values(packet)) if base_key is not None else ()
        cls = STRUCTURES[structure_of(decl)]
        return cls(decl, arr[self.slot(name, packet)], self.row_seeds(name), key_values)

    # ─── reads ────────────────────────────────────────────────────────

    def query(self, ref, packet, rng=None):
        """Value of a StateRef; method arguments are evaluated first."""
        args = tuple(evaluate(a, packet, self, rng) for a in ref.args)
        return self.read(ref.var, packet, ref.method, args)

    def read(self, name, packet, method=None, args=()):
        return self.structure(name, packet).query(method, args)

    def read_row(self, name, packet, row):
        return self.structure(name, packet).get(row)

    # ─── updates ──────────────────────────────────────────────────────

    def update(self, name, packet, fn):
        self.structure(name, packet, write=True).update(fn)

    def update_row(self, name, packet, row, fn):
        s = self.structure(name, packet, write=True)
        s.put(row, fn(s.get(row)))

    def reset(self, name, packet):
        """Clear a whole variable, or only the keyed slot of a HashMap."""
        self.structure(name, packet, write=True).reset()

    def init(self, name, packet, value):
        self.structure(name, packet, write=True).init(value)

    def insert(self, name, packet):
        self.structure(name, packet, write=True).insert()

    def sketch_update(self, name, packet):
        self.structure(name, packet, write=True).update()

    def stamp(self, name, packet):
        self.structure(name, packet, write=True).stamp(packet.ts)


class StateStore(StateView):
    def __init__(self, decls, seed=0):
        self.decls = {d.name: d for d in decls}
        self.seed = seed
        self._seeds = {}
        self.arrays = {d.name: np.zeros(d.array_shape, dtype=np.uint64) for d in decls}
        self.cursors = dict.fromkeys(self.arrays, 0)

    def array(self, name):
        try:
            return self.arrays[name]
        except KeyError:
            raise UnknownState(name) from None

    writable = array

    def reset_chunk(self, name, chunk):
        """Zero the next `chunk` cells of `name` in slot, row, column order.

        Returns True once the whole variable has been cleared; the cursor
        then starts over.
        """
        flat = self.array(name).reshape(-1)
        start = self.cursors[name]
        end = min(start + max(chunk, 1), flat.size)
        flat[start:end] = 0
        if end >= flat.size:
            self.cursors[name] = 0
            return True
        self.cursors[name] = end
        return False

    def is_clear(self, name):
        return not self.array(name).any()

    def dump(self):
        return {
            name: {
                'kind': self.decls[name].kind_label(),
                'shape': list(arr.shape),
                'cell_bits': self.decls[name].cell_bits,
                'cursor': self.cursors[name],
                'cells': arr.tolist(),
            }
            for name, arr in sorted(self.arrays.items())
        }


class StateOverlay(StateView):
    """Copy-on-write view used by one branch of a parallel composition.

    Reads fall through to the parent until the branch first writes a
    variable. commit() copies back the cells whose value the branch
    changed.
    """

    def __init__(self, parent):
        self.parent = parent
        self.decls = parent.decls
        self.seed = parent.seed
        self._seeds = parent._seeds
        self._copies = {}

    def array(self, name):
        if name in self._copies:
            return self._copies[name][0]
        return self.parent.array(name)

    def writable(self, name):
        if name not in self._copies:
            base = self.parent.array(name)
            self._copies[name] = (base.copy(), base.copy())
        return self._copies[name][0]

    def commit(self):
        for name, (own, snapshot) in self._copies.items():
            changed = own != snapshot
            if changed.any():
                target = self.parent.writable(name)
                target[changed] = own[changed]
                log.debug('overlay commit: %s (%d cells)', name, int(changed.sum()))


def reset_chunk(store, name, chunk):
    return store.reset_chunk(name, chunk)
