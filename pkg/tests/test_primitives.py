import numpy as np
import pytest

from mafia.core.expr import M64
from mafia.core.hashing import derive_seed, hash_values
from mafia.errors import FilterTooWide, UnknownState
from mafia.frontend import parse
from mafia.primitives import StateOverlay, StateStore, aggregate

KEY = 'flowid = Key(ip.src, ip.dest, tcp.src, tcp.dest, ip.proto)\n'


def store_for(source, seed=1):
    return StateStore(parse(KEY + source).decls, seed)


def flow(i):
    return (0x0A000000 + i, 0x0A100000 + (i * 7919) % 65536, 1024 + i % 60000, 80, 6)


def plus(n):
    return lambda v: v + n


# ─── counters and timestamps ──────────────────────────────────────────

def test_counter_wraps_at_its_width(packet):
    store = store_for('c = Counter(width=8)')
    p = packet()
    store.update('c', p, plus(300))
    assert store.read('c', p) == 300 % 256
    store.update('c', p, plus(M64))
    assert store.read('c', p) == 43


def test_timestamp_records_packet_time(packet):
    store = store_for('t = Timestamp()')
    store.stamp('t', packet(12345))
    assert store.read('t', packet()) == 12345


def test_unknown_variable(packet):
    with pytest.raises(UnknownState):
        store_for('c = Counter()').read('d', packet())


def test_hashmap_keeps_one_cell_per_flow(packet):
    store = store_for('h = HashMap(key=flowid, size=65536, type=Counter(width=32))')
    a, b = packet(flow=flow(1)), packet(flow=flow(2))
    for _ in range(3):
        store.update('h', a, plus(1))
    store.update('h', b, plus(10))
    assert store.read('h', a) == 3
    assert store.read('h', b) == 10
    assert store.slot('h', a) != store.slot('h', b)
    assert int(store.array('h').sum()) == 13


def test_hashmap_reset_clears_one_slot(packet):
    store = store_for('h = HashMap(key=flowid, size=1024, type=Timestamp())')
    a, b = packet(5, flow=flow(1)), packet(6, flow=flow(2))
    store.stamp('h', a)
    store.stamp('h', b)
    store.reset('h', a)
    assert store.read('h', a) == 0
    assert store.read('h', b) == 6


def test_slots_depend_on_seed(packet):
    source = 'h = HashMap(key=flowid, size=65536, type=Counter())'
    slots = {store_for(source, seed).slot('h', packet(flow=flow(3))) for seed in range(8)}
    assert len(slots) > 1


# ─── Bloom filters ────────────────────────────────────────────────────

def test_membership_insert_and_test(packet):
    store = store_for('b = BloomFilter(alg="membership", key=flowid, nhash=4, size=64)')
    a, other = packet(flow=flow(1)), packet(flow=flow(2))
    assert store.read('b', a, 'test') == 0
    store.insert('b', a)
    assert store.read('b', a, 'test') == 1
    assert store.read('b', other, 'test') == 0
    bits = store.read('b', a, 'read')
    assert 1 <= bin(bits).count('1') <= 4


def test_membership_init_loads_low_bits(packet):
    store = store_for('b = BloomFilter(alg="membership", key=flowid, nhash=2, size=16)')
    p = packet()
    store.init('b', p, 0xABCD1)
    assert store.read('b', p, 'read') == 0xBCD1
    store.reset('b', p)
    assert store.read('b', p, 'read') == 0


def test_wide_membership_filter_cannot_serialize(packet):
    store = store_for('b = BloomFilter(alg="membership", key=flowid, nhash=2, size=128)')
    p = packet()
    store.insert('b', p)
    assert store.read('b', p, 'test') == 1
    with pytest.raises(FilterTooWide):
        store.read('b', p, 'read')
    with pytest.raises(FilterTooWide):
        store.init('b', p, 1)


def test_counting_bloom_aggregates(packet):
    store = store_for('b = BloomFilter(alg="counting", key=flowid, nhash=1, size=16, width=8)')
    p = packet()
    store.init('b', p, 5)
    assert int(store.array('b').min()) == 5
    store.update('b', p, plus(1))
    assert store.read('b', p) == 6
    assert store.read('b', p, 'sum') == 6
    assert store.read('b', p, 'all', (6,)) == 1
    assert store.read('b', p, 'any', (5,)) == 0
    store.update('b', p, plus(255))
    assert store.read('b', p, 'max') == 5


# ─── sketches ─────────────────────────────────────────────────────────

def test_count_min_never_underestimates(packet):
    store = store_for('s = Sketch(alg="count-min", key=flowid, nhash=3, size=64)')
    rng = np.random.default_rng(7)
    truth = {}
    for i in rng.integers(0, 200, size=2000):
        i = int(i)
        truth[i] = truth.get(i, 0) + 1
        store.update('s', packet(flow=flow(i)), plus(1))
    for i, count in truth.items():
        p = packet(flow=flow(i))
        assert store.read('s', p, 'min') >= count
        assert store.read('s', p, 'max') >= store.read('s', p, 'min')
    assert int(store.array('s').sum()) == 3 * 2000


def test_store_sketch_membership_queries(packet):
    store = store_for('s = Sketch(alg="store", key=flowid, nhash=4, size=256)')
    p = packet()
    store.update('s', p, lambda v: 42)
    assert store.read('s', p, 'all', (42,)) == 1
    assert store.read('s', p, 'any', (41,)) == 0


@pytest.mark.parametrize('alg,bound', [('pcsa', 0.3), ('hyperloglog', 0.25)])
def test_cardinality_estimates(packet, alg, bound):
    store = store_for(f's = Sketch(alg="{alg}", key=flowid, nhash=1, size=128)')
    for i in range(5000):
        p = packet(flow=flow(i))
        store.sketch_update('s', p)
        if i % 3 == 0:
            store.sketch_update('s', p)
    estimate = store.read('s', packet())
    assert abs(estimate - 5000) / 5000 < bound


@pytest.mark.parametrize('alg', ['pcsa', 'hyperloglog'])
def test_empty_cardinality_sketch_estimates_zero(packet, alg):
    store = store_for(f's = Sketch(alg="{alg}", key=flowid, nhash=1, size=64)')
    assert store.read('s', packet(), 'test') == 0


def flow_packets(packet, start, count):
    return [packet(flow=flow(i)) for i in range(start, start + count)]


def test_pcsa_single_key_estimates_small(packet):
    p = packet(flow=flow(1))
    for seed in range(20):
        store = store_for('s = Sketch(alg="pcsa", key=flowid, nhash=1, size=128)', seed)
        store.sketch_update('s', p)
        assert 1 <= store.read('s', p) <= 8


@pytest.mark.parametrize('alg,size,bound', [('hyperloglog', 256, 0.195), ('pcsa', 128, 0.21)])
def test_cardinality_error_over_twenty_seeds(packet, alg, size, bound):
    packets = flow_packets(packet, 0, 10 ** 4)
    errors = []
    for seed in range(20):
        store = store_for(f's = Sketch(alg="{alg}", key=flowid, nhash=1, size={size})', seed)
        for p in packets:
            store.sketch_update('s', p)
        errors.append(abs(store.read('s', packets[0]) - len(packets)) / len(packets))
    assert max(errors) <= bound


@pytest.mark.slow
def test_pcsa_error_at_a_hundred_thousand_keys(packet):
    packets = flow_packets(packet, 0, 10 ** 5)
    for seed in range(20):
        store = store_for('s = Sketch(alg="pcsa", key=flowid, nhash=1, size=128)', seed)
        for p in packets:
            store.sketch_update('s', p)
        assert abs(store.read('s', packets[0]) - len(packets)) / len(packets) <= 0.21


def test_hll_insert_is_idempotent(packet):
    store = store_for('s = Sketch(alg="hyperloglog", key=flowid, nhash=1, size=256)')
    p = packet(flow=flow(4))
    store.sketch_update('s', p)
    registers = store.array('s').copy()
    store.sketch_update('s', p)
    assert np.array_equal(store.array('s'), registers)


def test_membership_false_positive_rate_matches_bit_occupancy(packet):
    store = store_for('b = BloomFilter(alg="membership", key=flowid, nhash=4, size=64)')
    inserted = flow_packets(packet, 0, 20)
    for p in inserted:
        store.insert('b', p)
    assert all(store.read('b', p, 'test') for p in inserted)
    # each of the 4 hashed positions lands on a set bit with probability ones / m
    expected = (np.count_nonzero(store.array('b')) / 64) ** 4
    lookups = flow_packets(packet, 1000, 10 ** 5)
    observed = sum(store.read('b', p, 'test') for p in lookups) / len(lookups)
    assert abs(observed - expected) <= 0.2 * expected


def test_membership_init_insert_serialize_on_32_bits(packet):
    store = store_for('b = BloomFilter(alg="membership", key=flowid, nhash=4, size=32)', seed=5)
    key = flow(9)
    p = packet(flow=key)
    checksum = 0x80000001
    store.init('b', p, checksum)
    store.insert('b', p)
    location = 0
    for row in range(4):
        location |= 1 << (hash_values(key, derive_seed(5, 'b', row)) % 32)
    assert store.read('b', p, 'read') == checksum | location
    assert 1 <= bin(location).count('1') <= 4


def test_count_min_bound_over_twenty_seeds(packet):
    packets = flow_packets(packet, 0, 1000)
    for seed in range(20):
        store = store_for('s = Sketch(alg="count-min", key=flowid, nhash=4, size=256, width=32)', seed)
        sizes = np.random.default_rng(seed).integers(64, 1501, size=len(packets))
        for p, size in zip(packets, sizes):
            store.update('s', p, plus(int(size)))
        slack = 2 * int(sizes.sum()) / 256
        estimates = [store.read('s', p, 'min') for p in packets]
        assert all(e >= int(s) for e, s in zip(estimates, sizes))
        within = sum(e <= int(s) + slack for e, s in zip(estimates, sizes))
        assert within >= 0.95 * len(packets)


def test_aggregate():
    assert aggregate('sum', [M64, 2]) == 1
    assert aggregate('avg', [1, 2]) == 1
    assert aggregate('min', [4, 2, 9]) == 2
    assert aggregate('max', [4, 2, 9]) == 9
    assert aggregate('all', [3, 3], 3) == 1
    assert aggregate('any', [1, 2], 3) == 0
    with pytest.raises(ValueError):
        aggregate('median', [1])


# ─── store mechanics ──────────────────────────────────────────────────

def test_reset_chunk_walks_the_cells():
    store = store_for('s = Sketch(alg="count-min", key=flowid, nhash=1, size=10)')
    store.array('s')[...] = 1
    assert store.reset_chunk('s', 4) is False
    assert store.cursors['s'] == 4
    assert int(store.array('s').sum()) == 6
    assert store.reset_chunk('s', 4) is False
    assert store.cursors['s'] == 8
    assert store.reset_chunk('s', 4) is True
    assert store.cursors['s'] == 0
    assert store.is_clear('s')


def test_dump_lists_every_variable(packet):
    store = store_for('c = Counter(width=16)\nh = HashMap(key=flowid, size=4, type=Counter())')
    store.update('c', packet(), plus(7))
    dump = store.dump()
    assert sorted(dump) == ['c', 'h']
    assert dump['c']['cells'] == [[[7]]]
    assert dump['c']['cell_bits'] == 16
    assert dump['h']['shape'] == [4, 1, 1]


def test_overlay_is_copy_on_write(packet):
    store = store_for('c = Counter()\nd = Counter()')
    p = packet()
    store.update('c', p, plus(5))
    branch = StateOverlay(store)
    branch.update('c', p, plus(1))
    assert branch.read('c', p) == 6
    assert store.read('c', p) == 5
    branch.commit()
    assert store.read('c', p) == 6


def test_overlay_commit_only_copies_changed_cells(packet):
    store = store_for('c = Counter()\nd = Counter()')
    p = packet()
    first, second = StateOverlay(store), StateOverlay(store)
    first.update('c', p, plus(1))
    second.update('c', p, plus(0))
    second.update('d', p, plus(2))
    first.commit()
    second.commit()
    assert store.read('c', p) == 1
    assert store.read('d', p) == 2


def test_later_overlay_wins_on_the_same_cell(packet):
    store = store_for('c = Counter()')
    p = packet()
    first, second = StateOverlay(store), StateOverlay(store)
    first.update('c', p, plus(1))
    second.update('c', p, plus(2))
    first.commit()
    second.commit()
    assert store.read('c', p) == 2
