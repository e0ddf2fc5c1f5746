import numpy as np
import pytest
from scipy.stats import chisquare

from mafia.core.decls import (
    BloomKind, CounterKind, FlowKey, HashMapKind, SketchKind, StateDecl, TimestampKind,
)
from mafia.core.expr import (
    M64, BinOp, Cell, FieldRef, Lit, Not, StateRef, apply_binop, bind_residual, evaluate, mentions,
    to_source,
)
from mafia.core.hashing import derive_seed, fmix64, hash_values, key_index
from mafia.core.packet import Packet
from mafia.core.schema import HeaderSchema
from mafia.errors import ConfigError, DeclarationError, DivisionByZero, UnknownField, UnknownState

FLOWID = FlowKey('flowid', ('ipv4.src', 'ipv4.dst', 'tcp.src', 'tcp.dst', 'ipv4.proto'))


# ─── expressions ──────────────────────────────────────────────────────

def test_arithmetic_wraps_at_64_bits():
    assert apply_binop('-', 0, 1) == M64
    assert apply_binop('+', M64, 2) == 1
    assert apply_binop('*', 1 << 63, 2) == 0


def test_division_truncates_and_rejects_zero():
    assert apply_binop('/', 7, 2) == 3
    with pytest.raises(DivisionByZero):
        apply_binop('/', 7, 0)


def test_wide_shifts_yield_zero():
    assert apply_binop('<<', 1, 64) == 0
    assert apply_binop('>>', M64, 70) == 0
    assert apply_binop('<<', 1, 3) == 8


def test_comparisons_and_logic_are_zero_or_one():
    assert apply_binop('<', 1, 2) == 1
    assert apply_binop('>=', 1, 2) == 0
    assert apply_binop('&&', 5, 3) == 1
    assert apply_binop('||', 0, 0) == 0
    assert apply_binop('max', 3, 9) == 9


def test_evaluate_reads_packet_fields(packet):
    p = packet(size=1500)
    e = BinOp('+', FieldRef('pkt.size'), Lit(4))
    assert evaluate(e, p) == 1504
    assert evaluate(Not(FieldRef('pkt.size')), p) == 0


def test_evaluate_unknown_field_and_state(packet):
    p = packet()
    with pytest.raises(UnknownField):
        evaluate(FieldRef('vlan.id'), p)
    with pytest.raises(UnknownState):
        evaluate(StateRef('c'), p)


def test_printer_parenthesizes_by_precedence():
    a, b, c = FieldRef('pkt.size'), FieldRef('ipv4.tos'), Lit(3)
    assert to_source(BinOp('*', BinOp('+', a, b), c)) == '(pkt.size + ipv4.tos) * 3'
    assert to_source(BinOp('-', a, BinOp('-', b, c))) == 'pkt.size - (ipv4.tos - 3)'
    assert to_source(BinOp('max', a, c)) == 'max(pkt.size, 3)'


def test_bind_residual_replaces_the_bound_symbol():
    e = BinOp('+', StateRef('x'), FieldRef('pkt.size'))
    assert bind_residual(e, 'x', lambda sub: Lit(0)) == BinOp('+', Cell(), FieldRef('pkt.size'))


def test_bind_residual_settles_other_state_once():
    settled = []

    def settle(sub):
        settled.append(sub)
        return Lit(42)

    e = BinOp('max', BinOp('+', StateRef('x'), Lit(1)), StateRef('y'))
    assert bind_residual(e, 'x', settle) == BinOp('max', BinOp('+', Cell(), Lit(1)), Lit(42))
    assert settled == [StateRef('y')]


def test_mentions_only_counts_the_bare_symbol():
    assert mentions(BinOp('+', StateRef('x'), Lit(1)), 'x')
    assert not mentions(StateRef('x', 'min'), 'x')


# ─── hashing ──────────────────────────────────────────────────────────

def test_hashing_is_deterministic_and_seeded():
    assert fmix64(0) == 0
    assert hash_values((1, 2), 7) == hash_values((1, 2), 7)
    assert hash_values((1, 2), 7) != hash_values((1, 2), 8)
    assert hash_values((1, 2), 7) != hash_values((2, 1), 7)


def test_row_seeds_differ_per_name_and_row():
    seeds = {derive_seed(1, name, row) for name in ('a', 'b') for row in range(4)}
    assert len(seeds) == 8


def test_key_index_stays_in_range(packet):
    for ts in range(50):
        p = packet(ts, flow=(ts, ts + 1, 1000 + ts, 80, 6))
        assert 0 <= key_index(FLOWID, p, 17, 3) < 17
    with pytest.raises(ValueError):
        key_index(FLOWID, packet(), 0, 3)


# ─── packets and schema ───────────────────────────────────────────────

def test_packet_from_record_resolves_aliases(schema):
    p = Packet.from_record({'ts': 5, 'meta': {'size': 64}, 'headers': {'ip.src': 7, 'ipv4.identification': 3}},
                           schema, 0)
    assert p.ts == 5
    assert p.get('ipv4.src') == 7
    assert p.get('ipv4.id') == 3
    assert p.get('pkt.size') == 64
    assert p.get('switch.id') == 0


def test_packet_from_record_rejects_unknown_meta(schema):
    with pytest.raises(UnknownField):
        Packet.from_record({'ts': 0, 'meta': {'vlan': 1}}, schema)


def test_tag_values_are_masked_to_field_width(packet, schema):
    p = packet()
    p.set('ipv4.tos', 0x1FF, schema)
    assert p.get('ipv4.tos') == 0xFF
    p.set('ipv4.checksum', (1 << 40) + 5, schema)
    assert p.get('ipv4.checksum') == 5


def test_enter_switch_applies_hop_overrides():
    p = Packet(hops=({'input_port': 3, 'in_queue_length': 9},))
    p.enter_switch(7, 0)
    assert p.get('switch.id') == 7
    assert p.get('pkt.input_port') == 3
    assert p.get('pkt.in_queue_length') == 9
    p.enter_switch(8, 1)
    assert p.get('switch.id') == 8
    assert p.get('pkt.input_port') == 3


def test_packet_copy_is_independent(packet, schema):
    p = packet()
    q = p.copy('samples')
    q.set('ipv4.tos', 4, schema)
    assert q.stream == 'samples'
    assert p.stream == 'pkts'
    assert p.get('ipv4.tos') == 0


def test_default_schema_widths_and_aliases(schema):
    assert schema.resolve('ip.dest') == 'ipv4.dst'
    assert schema.resolve('switchid') == 'switch.id'
    assert schema.width('ipv4.checksum') == 32
    assert schema.mask('ipv4.tos') == 0xFF
    assert schema.knows('pkt.in_queue_length')
    with pytest.raises(UnknownField):
        schema.resolve('vlan.id')


def test_schema_rejects_bad_widths_and_dangling_aliases():
    with pytest.raises(ConfigError):
        HeaderSchema({'a.b': 0})
    with pytest.raises(ConfigError):
        HeaderSchema({'a.b': 65})
    with pytest.raises(ConfigError):
        HeaderSchema({'a.b': 8}, {'c': 'missing.field'})


# ─── declarations ─────────────────────────────────────────────────────

def test_cardinality_sketches_need_power_of_two_and_one_hash():
    with pytest.raises(DeclarationError):
        SketchKind('pcsa', FLOWID, 1, 100).check()
    with pytest.raises(DeclarationError):
        SketchKind('hyperloglog', FLOWID, 2, 128).check()
    SketchKind('hyperloglog', FLOWID, 1, 128).check()


def test_declaration_limits():
    with pytest.raises(DeclarationError):
        CounterKind(65).check()
    with pytest.raises(DeclarationError):
        BloomKind('quotient', FLOWID, 2, 16).check()
    with pytest.raises(DeclarationError):
        HashMapKind(FLOWID, 16, BloomKind('membership', FLOWID, 2, 16)).check()
    HashMapKind(FLOWID, 16, TimestampKind()).check()


def test_memory_accounting():
    assert StateDecl('h', HashMapKind(FLOWID, 1024, CounterKind(32))).memory_bits == 1024 * 32
    assert StateDecl('s', SketchKind('count-min', FLOWID, 4, 256, 32)).memory_bits == 4 * 256 * 32
    assert StateDecl('b', BloomKind('membership', FLOWID, 4, 64)).memory_bits == 64
    assert StateDecl('t', TimestampKind()).memory_bits == 64
    assert StateDecl('h', HashMapKind(FLOWID, 8, CounterKind(16))).array_shape == (8, 1, 1)


def test_key_index_passes_chi_square_on_random_tuples(packet):
    rng = np.random.default_rng(2024)
    tuples = rng.integers(0, 1 << 32, size=(10 ** 5, 5))
    tuples[:, 2:4] %= 1 << 16
    tuples[:, 4] %= 1 << 8
    buckets = np.zeros(1024, dtype=np.int64)
    for t in tuples:
        p = packet(flow=tuple(int(v) for v in t))
        buckets[key_index(FLOWID, p, 1024, 17)] += 1
    assert chisquare(buckets).pvalue > 0.01


def test_key_index_single_bucket_and_determinism(packet):
    p = packet(flow=(1, 2, 3, 4, 6))
    assert key_index(FLOWID, p, 1, 99) == 0
    assert key_index(FLOWID, p, 4096, 99) == key_index(FLOWID, packet(flow=(1, 2, 3, 4, 6)), 4096, 99)


def test_hash_mixes_every_component():
    base = hash_values((10, 20, 30), 1)
    assert len({base, hash_values((11, 20, 30), 1), hash_values((10, 21, 30), 1),
                hash_values((10, 20, 31), 1), hash_values((10, 20), 1)}) == 5
    # flipping one low input bit changes about half the output bits
    flips = [bin(hash_values((i,), 3) ^ hash_values((i ^ 1,), 3)).count('1') for i in range(0, 2000, 2)]
    assert 30 < sum(flips) / len(flips) < 34
