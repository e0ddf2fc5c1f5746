import pytest

from conftest import COUNTER_SOURCE, make_record
from mafia.compiler import (
    Atom, TargetModel, emit, emit_json, emit_pseudo_p4, format_metrics, ir_from_json,
    ir_interpret, ir_to_json, load_target, lower, optimize, parse_json, schedule,
)
from mafia.compiler.ir import ALU, UPDATE
from mafia.core.expr import FieldRef, Lit
from mafia.errors import ConfigError, IRFormatError, TopologyError
from mafia.frontend import parse
from mafia.interpreter import packets_from_records, run_trace, single_switch
from mafia.services import tracegen
from mafia.services.corpus import load_manifest
from mafia.services.helpers import compile_segments

TOY = TargetModel('toy', max_stages=2, max_width=63, memory_bits_per_stage=1 << 25)

MIXED = '''
flowid = Key(ip.src, ip.dest, tcp.src, tcp.dest, ip.proto)
total = Counter()
cms = Sketch(alg="count-min", key=flowid, nhash=3, size=64)
seen = BloomFilter(alg="membership", key=flowid, nhash=2, size=32)
window(1s)

pkts
  >> total.set(total + pkt.size)
  >> ( (match(!seen.test()) >> seen.insert() >> duplicate(fresh))
     + (cms.set(cms + 1) >> match(cms.min() > 5) >> tag(ipv4.tos, cms.min())) )

fresh >> tag(ipv4.checksum, seen) >> collect(NEW)

pkts >> match(random(0:10) < 3) >> tag(ipv4.id, max(total, 7) / 2) >> collect(SAMPLE)
'''


def atoms_of(ir):
    return [a for t in ir.tables for a in t.atoms]


def compiled(source, defines=None):
    return optimize(lower(parse(source, defines)))


# ─── lowering and optimization ────────────────────────────────────────

def test_lowering_makes_one_table_per_primitive():
    ir = lower(parse(COUNTER_SOURCE))
    assert len(ir.tables) == 1
    (atom,) = ir.tables[0].atoms
    assert (atom.kind, atom.var, atom.row) == (UPDATE, 'c', 0)


def test_sketch_updates_touch_every_row():
    ir = lower(parse(MIXED))
    rows = sorted(a.row for a in atoms_of(ir) if a.kind == UPDATE and a.var == 'cms')
    assert rows == [0, 1, 2]


def test_lowering_needs_a_role_when_roles_exist():
    program = parse('@role("a") { pkts >> collect(X) }')
    with pytest.raises(TopologyError):
        lower(program)
    assert lower(program.for_role('a')).role == 'a'


def test_constants_fold_into_moves():
    ir = compiled('pkts >> tag(ipv4.tos, 2 + 3) >> collect(OUT)')
    assert Atom(ALU, FieldRef('ipv4.tos'), 'move', (Lit(5),)) in atoms_of(ir)


def test_false_guard_prunes_the_rest_of_the_sequence():
    source = 'c = Counter()\npkts >> match(1 == 0) >> c.set(c + 1)'
    raw = lower(parse(source))
    assert any(a.kind == UPDATE for a in atoms_of(raw))
    assert not any(a.kind == UPDATE for a in atoms_of(optimize(raw)))


def test_true_guard_disappears():
    ir = compiled('c = Counter()\npkts >> match(1 == 1) >> c.set(c + 1)')
    assert all(t.guard is None for t in ir.tables)
    assert len(atoms_of(ir)) == 1


@pytest.mark.parametrize('entry', load_manifest(), ids=lambda e: e.name)
def test_optimization_never_adds_atoms(entry):
    for segment in compile_segments(entry.load()):
        assert segment.ir.atom_count <= segment.raw.atom_count


# ─── equivalence with the reference interpreter ───────────────────────

@pytest.mark.parametrize('optimized', [False, True])
def test_ir_run_matches_ast_run(schema, tmp_path, optimized):
    program = parse(MIXED)
    ir = lower(program)
    if optimized:
        ir = optimize(ir)
    packets = packets_from_records(tracegen.generate('mixed', 800, seed=5, flows=30), schema)
    ast = run_trace(single_switch(program), packets, seed=4, sink_dir=str(tmp_path / 'ast'))
    compiled_run = ir_interpret(ir, packets, seed=4, sink_dir=str(tmp_path / 'ir'))
    assert compiled_run.engine == 'ir'
    assert ast.records > 0
    assert compiled_run.digest == ast.digest
    assert compiled_run.states == ast.states
    assert compiled_run.transitions == ast.transitions


def test_ir_interpret_rejects_other_defines(tmp_path, schema):
    ir = compiled('pkts >> match(pkt.input_port == PORT) >> collect(OUT)', {'PORT': 1})
    packets = packets_from_records([make_record(0)], schema)
    with pytest.raises(ConfigError):
        ir_interpret(ir, packets, defines={'PORT': 2}, sink_dir=str(tmp_path))
    report = ir_interpret(ir, packets, defines={'PORT': 1}, sink_dir=str(tmp_path))
    assert report.records == 1


# ─── scheduling ───────────────────────────────────────────────────────

def test_dependent_updates_take_later_stages():
    report = schedule(compiled('c = Counter()\nd = Counter()\npkts >> c.set(c + 1) >> d.set(c)'))
    assert report.depth >= 2


def test_parallel_branches_share_a_stage():
    report = schedule(compiled('c = Counter()\nd = Counter()\npkts >> (c.set(c + 1) + d.set(d + 1))'))
    assert (report.depth, report.width, report.atoms) == (1, 2, 2)


def test_small_target_reports_depth_overrun():
    heavy = [e for e in load_manifest() if e.name == 'heavy_hitter'][0].load()
    report = schedule(optimize(lower(heavy)), TOY)
    assert report.depth > 2
    assert 'envelope-depth' in [w.code for w in report.warnings]
    assert all(w.severity == 'warning' for w in report.warnings)


def test_stage_width_is_capped():
    ir = compiled('c = Counter()\nd = Counter()\ne = Counter()\npkts >> (c.set(1) + d.set(2) + e.set(3))')
    report = schedule(ir, TargetModel('narrow', max_stages=24, max_width=1, memory_bits_per_stage=1 << 20))
    assert report.width == 1
    assert report.depth == 3


def test_memory_overrun_is_reported():
    report = schedule(compiled(COUNTER_SOURCE), TargetModel('tiny', 24, 63, 8))
    assert [w.code for w in report.warnings] == ['envelope-memory']


def test_resource_report_accounts_memory():
    report = schedule(compiled(MIXED))
    assert report.memory_bits == {'total': 32, 'cms': 3 * 64 * 32, 'seen': 32}
    data = report.to_dict()
    assert data['total_memory_bits'] == 32 + 3 * 64 * 32 + 32
    assert data['warnings'] == []
    assert sum(s['memory_bits'] for s in data['stages']) == data['total_memory_bits']


def test_format_metrics():
    text = format_metrics([('counter', schedule(compiled(COUNTER_SOURCE)))])
    assert text.splitlines()[0].split() == ['program', 'depth', 'width', 'atoms', 'tables', 'memory', '(bits)']
    assert text.splitlines()[2].split() == ['counter', '1', '1', '1', '1', '32']


# ─── targets ──────────────────────────────────────────────────────────

def test_default_target():
    target = load_target()
    assert (target.name, target.max_stages, target.max_width) == ('tofino-envelope', 24, 63)


def test_target_from_yaml(tmp_path):
    path = tmp_path / 'toy.yml'
    path.write_text('name: toy\nmax_stages: 4\nmax_width: 2\nmemory_bits_per_stage: 1024\n')
    assert load_target(str(path)) == TargetModel('toy', 4, 2, 1024)


@pytest.mark.parametrize('text', [
    'max_stages: 4\nmax_width: 2\n',
    'max_stages: four\nmax_width: 2\nmemory_bits_per_stage: 1\n',
    'max_stages: 0\nmax_width: 2\nmemory_bits_per_stage: 1\n',
    'max_stages: [\n',
])
def test_bad_targets(tmp_path, text):
    path = tmp_path / 'bad.yml'
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_target(str(path))


def test_missing_target(tmp_path):
    with pytest.raises(ConfigError):
        load_target(str(tmp_path / 'absent.json'))


# ─── emission ─────────────────────────────────────────────────────────

def test_json_emission_is_stable():
    ir = compiled(MIXED)
    text = emit_json(ir)
    assert emit_json(parse_json(text)) == text
    assert parse_json(text) == ir
    assert emit(ir, 'json') == text


def test_json_rejects_foreign_documents():
    with pytest.raises(IRFormatError):
        ir_from_json({'version': 99})
    with pytest.raises(IRFormatError):
        ir_from_json([])
    data = ir_to_json(compiled(COUNTER_SOURCE))
    data['control'] = {'pkts': {'apply': 42}}
    with pytest.raises(IRFormatError):
        ir_from_json(data)


def test_pseudo_p4_lists_registers_and_control():
    ir = compiled(COUNTER_SOURCE)
    text = emit_pseudo_p4(ir, schedule(ir))
    assert 'register<bit<32>>(1) c;' in text
    assert 'control Measurement' in text
    assert 'STREAM_PKTS' in text
    assert emit(ir, 'pseudo-p4', schedule(ir)) == text


def test_unknown_backend():
    with pytest.raises(ValueError):
        emit(compiled(COUNTER_SOURCE), 'verilog')
