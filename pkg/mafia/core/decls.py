"""
Flow keys and state declarations
"""
from dataclasses import dataclass, field

from ..errors import DeclarationError

MEMBERSHIP = 'membership'
COUNTING = 'counting'
COUNT_MIN = 'count-min'
STORE = 'store'
PCSA = 'pcsa'
HYPERLOGLOG = 'hyperloglog'

BLOOM_ALGS = (MEMBERSHIP, COUNTING)
SKETCH_ALGS = (COUNT_MIN, PCSA, HYPERLOGLOG, STORE)
ALG_ALIASES = {'countmin': COUNT_MIN, 'cm': COUNT_MIN, 'hll': HYPERLOGLOG}

PCSA_BITS = 32
HLL_BITS = 6
DEFAULT_WIDTH = 32


@dataclass(frozen=True)
class FlowKey:
    name: str
    components: tuple

    def values(self, packet):
        return tuple(packet.get(c) for c in self.components)


def _check_width(width, what):
    if not 1 <= width <= 64:
        raise DeclarationError(f'{what}: width must be in [1, 64], got {width}')


def _is_power_of_two(n):
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class CounterKind:
    width: int = DEFAULT_WIDTH
    kind = 'counter'

    def check(self):
        _check_width(self.width, 'Counter')

    def shape(self):
        """(rows, cols, bits per cell)"""
        return 1, 1, self.width


@dataclass(frozen=True)
class TimestampKind:
    kind = 'timestamp'
    width = 64

    def check(self):
        pass

    def shape(self):
        return 1, 1, 64


@dataclass(frozen=True)
class BloomKind:
    alg: str
    key: FlowKey
    nhash: int
    size: int
    width: int = DEFAULT_WIDTH
    kind = 'bloom'

    def check(self):
        if self.alg not in BLOOM_ALGS:
            raise DeclarationError(f'BloomFilter: unknown alg {self.alg!r}')
        if self.nhash < 1:
            raise DeclarationError('BloomFilter: nhash must be >= 1')
        if self.size < 1:
            raise DeclarationError('BloomFilter: size must be >= 1')
        _check_width(self.width, 'BloomFilter')

    @property
    def rows(self):
        return self.nhash

    def shape(self):
        bits = 1 if self.alg == MEMBERSHIP else self.width
        return 1, self.size, bits


@dataclass(frozen=True)
class SketchKind:
    alg: str
    key: FlowKey
    nhash: int
    size: int
    width: int = DEFAULT_WIDTH
    kind = 'sketch'

    def check(self):
        if self.alg not in SKETCH_ALGS:
            raise DeclarationError(f'Sketch: unknown alg {self.alg!r}')
        if self.nhash < 1:
            raise DeclarationError('Sketch: nhash must be >= 1')
        if self.size < 1:
            raise DeclarationError('Sketch: size must be >= 1')
        _check_width(self.width, 'Sketch')
        if self.alg in (PCSA, HYPERLOGLOG):
            if not _is_power_of_two(self.size):
                raise DeclarationError(f'Sketch({self.alg}): size must be a power of two, got {self.size}')
            if self.nhash != 1:
                raise DeclarationError(f'Sketch({self.alg}): nhash must be 1')

    @property
    def rows(self):
        return self.nhash

    def shape(self):
        if self.alg == PCSA:
            return 1, self.size, PCSA_BITS
        if self.alg == HYPERLOGLOG:
            return 1, self.size, HLL_BITS
        return self.nhash, self.size, self.width


@dataclass(frozen=True)
class HashMapKind:
    key: FlowKey
    size: int
    inner: object
    kind = 'hashmap'

    def check(self):
        if self.size < 1:
            raise DeclarationError('HashMap: size must be >= 1')
        if not isinstance(self.inner, (CounterKind, TimestampKind)):
            raise DeclarationError('HashMap: type must be Counter(...) or Timestamp()')
        self.inner.check()

    def shape(self):
        return self.inner.shape()


@dataclass(frozen=True)
class StateDecl:
    name: str
    kind: object
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def slots(self):
        return self.kind.size if isinstance(self.kind, HashMapKind) else 1

    @property
    def base(self):
        """The per-instance kind (the inner type of a HashMap)."""
        return self.kind.inner if isinstance(self.kind, HashMapKind) else self.kind

    @property
    def key(self):
        return getattr(self.kind, 'key', None)

    @property
    def array_shape(self):
        rows, cols, _ = self.kind.shape()
        return self.slots, rows, cols

    @property
    def cell_bits(self):
        return self.kind.shape()[2]

    @property
    def cells(self):
        slots, rows, cols = self.array_shape
        return slots * rows * cols

    @property
    def memory_bits(self):
        return self.cells * self.cell_bits

    @property
    def hash_rows(self):
        """Number of hash functions addressing the structure."""
        return getattr(self.base, 'nhash', 1)

    @property
    def alg(self):
        return getattr(self.base, 'alg', self.base.kind)

    def describe(self):
        return f'{self.name}: {self.kind_label()} ({self.memory_bits} bits)'

    def kind_label(self):
        base = self.base
        label = base.alg if hasattr(base, 'alg') else base.kind
        if isinstance(self.kind, HashMapKind):
            return f'hashmap[{self.kind.size}] of {label}'
        return label


def decl_to_dict(decl):
    kind = decl.kind
    out = {'name': decl.name}
    if isinstance(kind, HashMapKind):
        out['hashmap'] = {'key': kind.key.name, 'size': kind.size}
        kind = kind.inner
    out['kind'] = kind.kind
    for attr in ('alg', 'nhash', 'size', 'width'):
        if attr in kind.__dataclass_fields__:
            out[attr] = getattr(kind, attr)
    if hasattr(kind, 'key'):
        out['key'] = kind.key.name
    return out


def decl_from_dict(d, keys):
    """Inverse of decl_to_dict; `keys` maps key names to FlowKeys."""
    def key(name):
        if name not in keys:
            raise DeclarationError(f'unknown key {name!r}')
        return keys[name]

    kind_name = d['kind']
    if kind_name == 'counter':
        kind = CounterKind(int(d.get('width', DEFAULT_WIDTH)))
    elif kind_name == 'timestamp':
        kind = TimestampKind()
    elif kind_name == 'bloom':
        kind = BloomKind(d['alg'], key(d['key']), int(d['nhash']), int(d['size']), int(d.get('width', DEFAULT_WIDTH)))
    elif kind_name == 'sketch':
        kind = SketchKind(d['alg'], key(d['key']), int(d['nhash']), int(d['size']), int(d.get('width', DEFAULT_WIDTH)))
    else:
        raise DeclarationError(f'unknown state kind {kind_name!r}')
    if 'hashmap' in d:
        kind = HashMapKind(key(d['hashmap']['key']), int(d['hashmap']['size']), kind)
    kind.check()
    return StateDecl(d['name'], kind)


# Method tables per structure: name -> number of arguments.
# Updates mutate state (usable as primitives); queries return a value.
_UPDATES = {
    'counter': {'set': 1, 'add': 1, 'reset': 0},
    'timestamp': {'reset': 0},
    MEMBERSHIP: {'insert': 0, 'init': 1, 'reset': 0},
    COUNTING: {'set': 1, 'init': 1, 'reset': 0},
    COUNT_MIN: {'set': 1, 'reset': 0},
    STORE: {'set': 1, 'reset': 0},
    PCSA: {'update': 0, 'reset': 0},
    HYPERLOGLOG: {'update': 0, 'reset': 0},
}
_AGGREGATES = {'sum': 0, 'avg': 0, 'min': 0, 'max': 0}
_QUERIES = {
    'counter': {},
    'timestamp': {},
    MEMBERSHIP: {'test': 0, 'read': 0},
    COUNTING: {'all': 1, 'any': 1, **_AGGREGATES},
    COUNT_MIN: dict(_AGGREGATES),
    STORE: {'all': 1, 'any': 1, **_AGGREGATES},
    PCSA: {'test': 0},
    HYPERLOGLOG: {'test': 0},
}
_ALIASES = {
    MEMBERSHIP: {'set': 'insert'},
    PCSA: {'estimate': 'test'},
    HYPERLOGLOG: {'estimate': 'test'},
}


def structure_of(decl):
    """'counter', 'timestamp' or the alg of a Bloom filter or sketch."""
    base = decl.base
    return base.alg if hasattr(base, 'alg') else base.kind


def update_methods(decl):
    return _UPDATES[structure_of(decl)]


def query_methods(decl):
    return _QUERIES[structure_of(decl)]


def canonical_method(decl, method):
    return _ALIASES.get(structure_of(decl), {}).get(method, method)
