import json
import os

import pytest
from scipy.stats import chisquare

from conftest import FLOW_B, make_record
from mafia.errors import ConfigError, DivisionByZero, StepError, TopologyError, TraceFormatError
from mafia.frontend import parse
from mafia.interpreter import (
    MEASURING, RESETTING, chain, load_topology, packets_from_records, parse_trace_lines, read_trace,
    run_trace, single_switch, write_trace,
)
from mafia.interpreter.sinks import parse_address
from mafia.services import tracegen
from mafia.services.corpus import CORPUS_DIR


def ts_of(sink):
    return [s['ts'] for s in sink]


# ─── primitives on one switch ─────────────────────────────────────────

def test_counter_match_duplicate_collect(run, record):
    source = '''
c = Counter()
pkts >> c.set(c + 1) >> match(c > 2) >> duplicate(alerts)
alerts >> collect(OUT)
'''
    result = run(source, [record(ts) for ts in range(5)])
    out = result.sink('OUT')
    assert ts_of(out) == [2, 3, 4]
    assert {s['stream'] for s in out} == {'alerts'}
    assert {s['endpoint'] for s in out} == {'OUT'}
    assert result.read('c', result.records[0]) == 5


def test_collect_halts_the_branch(run, record):
    source = '''
c = Counter()
pkts >> collect(OUT) >> c.set(c + 1)
'''
    result = run(source, [record(0), record(1)])
    assert ts_of(result.sink('OUT')) == [0, 1]
    assert result.read('c', result.records[0]) == 0


def test_tag_masks_to_field_width(run, record):
    result = run('pkts >> tag(ipv4.tos, pkt.size) >> collect(OUT)', [record(0, size=300)])
    packet = result.sink('OUT')[0]['packet']
    assert packet['headers']['ipv4.tos'] == 300 & 0xFF
    assert packet['meta']['size'] == 300


def test_sink_records_keep_every_header(run, record):
    result = run('pkts >> collect(OUT)', [record(7, flow=FLOW_B)])
    packet = result.sink('OUT')[0]['packet']
    assert packet['ts'] == 7
    assert packet['headers']['ipv4.src'] == FLOW_B[0]
    assert packet['headers']['tcp.dst'] == FLOW_B[3]


def test_hashmap_counts_per_flow(run, record):
    source = '''
flowid = Key(ip.src, ip.dest, tcp.src, tcp.dest, ip.proto)
bytes = HashMap(key=flowid, size=65536, type=Counter())
pkts >> bytes.set(bytes + pkt.size)
'''
    records = [record(0, size=100), record(1, flow=FLOW_B, size=40), record(2, size=60)]
    result = run(source, records)
    assert result.read('bytes', records[0]) == 160
    assert result.read('bytes', records[1]) == 40


def test_control_stream_runs_its_own_task(run, record):
    source = '''
c = Counter()
pkts >> c.set(c + 1)
ctrl >> tag(pkt.hh_volume, c) >> collect(CTRL)
'''
    records = [record(0), record(1), record(2, stream='ctrl')]
    result = run(source, records)
    assert [s['packet']['headers']['pkt.hh_volume'] for s in result.sink('CTRL')] == [2]


# ─── parallel composition ─────────────────────────────────────────────

def test_parallel_branches_read_the_entry_snapshot(run, record):
    source = '''
c = Counter()
d = Counter()
pkts >> (c.set(c + 1) + d.set(c + 10))
'''
    result = run(source, [record(0)])
    assert result.read('c', result.records[0]) == 1
    assert result.read('d', result.records[0]) == 10


def test_later_branch_wins_a_write_conflict(run, record):
    result = run('c = Counter()\npkts >> (c.set(5) + c.set(7))', [record(0)])
    assert result.read('c', result.records[0]) == 7


def test_unchanged_branch_does_not_clobber(run, record):
    source = '''
c = Counter()
d = Counter()
pkts >> (c.set(c + 1) + d.set(3))
'''
    result = run(source, [record(0), record(1)])
    assert result.read('c', result.records[0]) == 2
    assert result.read('d', result.records[0]) == 3


def test_parallel_tags_are_merged(run, record):
    source = 'pkts >> (tag(ipv4.tos, 1) + tag(ipv4.id, 2)) >> collect(OUT)'
    headers = run(source, [record(0)]).sink('OUT')[0]['packet']['headers']
    assert (headers['ipv4.tos'], headers['ipv4.id']) == (1, 2)


def test_parallel_continues_while_one_branch_lives(run, record):
    source = '''
pkts >> (collect(A) + match(pkt.size > 50)) >> collect(B)
'''
    result = run(source, [record(0, size=10), record(1, size=100)])
    assert ts_of(result.sink('A')) == [0, 1]
    assert ts_of(result.sink('B')) == [1]


# ─── windows ──────────────────────────────────────────────────────────

WINDOWED = '''
flowid = Key(ip.src, ip.dest, tcp.src, tcp.dest, ip.proto)
h = HashMap(key=flowid, size=256, type=Counter())
window(100ns)
pkts >> h.set(h + 1)
'''


def test_window_reset_consumes_packets_in_chunks(schema, tmp_path):
    program = parse(WINDOWED)
    packets = packets_from_records([make_record(ts) for ts in (0, 10, 20, 100, 110, 120, 130, 140)], schema)
    report = run_trace(single_switch(program), packets, sink_dir=str(tmp_path), chunk=64)
    assert report.transitions == [
        {'switch_id': 0, 'packet': 3, 'ts': 100, 'mode': RESETTING},
        {'switch_id': 0, 'packet': 6, 'ts': 130, 'mode': MEASURING},
    ]
    cells = report.states['0']['h']['cells']
    assert sum(c[0][0] for c in cells) == 1


def test_window_without_state_returns_immediately(schema, tmp_path):
    program = parse('window(10ns)\npkts >> collect(OUT)')
    packets = packets_from_records([make_record(ts) for ts in (0, 10, 20)], schema)
    report = run_trace(single_switch(program), packets, sink_dir=str(tmp_path))
    assert [t['mode'] for t in report.transitions] == [RESETTING, MEASURING, RESETTING, MEASURING]
    assert report.records == 3


def test_five_second_window_resets_twice_in_twelve_seconds(schema, tmp_path):
    program = parse('''
flowid = Key(ip.src, ip.dest, tcp.src, tcp.dest, ip.proto)
c = Counter()
s = Sketch(alg="count-min", key=flowid, nhash=2, size=64)
window(5s)
pkts >> c.set(c + 1) >> s.set(s + pkt.size)
''')
    records = [make_record(ts * 10 ** 8) for ts in range(120)]
    report = run_trace(single_switch(program), packets_from_records(records, schema),
                       sink_dir=str(tmp_path), chunk=16)
    resets = [t for t in report.transitions if t['mode'] == RESETTING]
    assert len(resets) >= 2
    assert [t['ts'] for t in resets[:2]] == [5 * 10 ** 9, 10 * 10 ** 9]


def test_deterministic_sampling_takes_packets_eleven_and_twelve(run, record):
    with open(os.path.join(CORPUS_DIR, 'deterministic_sampling.mafia'), encoding='utf-8') as f:
        source = f.read()
    result = run(source, [record(ts) for ts in range(40)],
                 defines={'SKIP': 10, 'NUM_SAMPLES': 2, 'NUM_PACKETS': 20})
    assert ts_of(result.sink('COLLECTOR')) == [10, 11, 30, 31]


# ─── seeds and determinism ────────────────────────────────────────────

SAMPLING = '''
pkts >> match(random(0:100) < 20) >> duplicate(samples)
samples >> collect(OUT)
'''


def test_random_needs_a_seed(schema, tmp_path):
    packets = packets_from_records([make_record(0)], schema)
    with pytest.raises(ConfigError):
        run_trace(single_switch(parse(SAMPLING)), packets, sink_dir=str(tmp_path))


def test_same_seed_same_digest(schema, tmp_path):
    records = tracegen.generate('mixed', 500, seed=3, flows=20)
    digests = set()
    sampled = []
    for attempt in range(2):
        packets = packets_from_records(records, schema)
        report = run_trace(single_switch(parse(SAMPLING)), packets, seed=11,
                           sink_dir=str(tmp_path / str(attempt)))
        digests.add(report.digest)
        sampled.append(report.records)
    assert len(digests) == 1
    assert 40 < sampled[0] < 160


def test_different_seeds_sample_differently(schema, tmp_path):
    records = tracegen.generate('mixed', 500, seed=3, flows=20)
    digests = {
        run_trace(single_switch(parse(SAMPLING)), packets_from_records(records, schema), seed=seed,
                  sink_dir=str(tmp_path / str(seed))).digest
        for seed in (1, 2)
    }
    assert len(digests) == 2


CHAIN = '''
@role("mark") {
  c = Counter()
  pkts >> c.set(c + pkt.size) >> tag(ipv4.tos, c)
}

@role("count") {
  d = Counter()
  pkts >> match(ipv4.tos > 100) >> d.set(d + 1) >> duplicate(hits)
  hits >> tag(ipv4.id, switch.id) >> collect(OUT)
}
'''


def test_threaded_chain_matches_sequential(schema, tmp_path):
    program = parse(CHAIN)
    records = tracegen.generate('mixed', 400, seed=9, flows=12)
    reports = [
        run_trace(chain(program, ['mark', 'count', 'count']), packets_from_records(records, schema),
                  sink_dir=str(tmp_path / str(threads)), threads=threads)
        for threads in (False, True)
    ]
    assert reports[0].digest == reports[1].digest
    assert reports[0].states == reports[1].states
    assert sorted(reports[0].states) == ['1', '2', '3']


def test_chain_passes_tags_downstream(run, record):
    result = run(CHAIN, [record(0, size=200)], roles=['mark', 'count'])
    (out,) = result.sink('OUT')
    assert out['packet']['headers']['ipv4.tos'] == 200
    assert out['packet']['headers']['ipv4.id'] == 2


def test_hop_overrides_apply_per_switch(run, record):
    source = '''
@role("a") { pkts >> tag(ipv4.tos, pkt.input_port) }
@role("b") { pkts >> tag(ipv4.id, pkt.input_port) >> collect(OUT) }
'''
    hops = [{'input_port': 4}, {'input_port': 9}]
    result = run(source, [record(0, hops=hops)], roles=['a', 'b'])
    headers = result.sink('OUT')[0]['packet']['headers']
    assert (headers['ipv4.tos'], headers['ipv4.id']) == (4, 9)


def test_evaluation_errors_name_packet_and_switch(schema, tmp_path):
    program = parse('pkts >> tag(ipv4.tos, pkt.size / pkt.input_port)')
    packets = packets_from_records([make_record(0), make_record(1, input_port=0)], schema)
    with pytest.raises(StepError) as excinfo:
        run_trace(single_switch(program), packets, sink_dir=str(tmp_path))
    assert excinfo.value.packet_index == 1
    assert excinfo.value.switch_id == 0
    assert isinstance(excinfo.value.cause, DivisionByZero)


# ─── traces ───────────────────────────────────────────────────────────

def test_trace_file_round_trip(schema, tmp_path):
    path = str(tmp_path / 'trace.jsonl')
    records = [make_record(0), make_record(5, flow=FLOW_B)]
    write_trace(path, records)
    packets = read_trace(path, schema)
    assert [p.index for p in packets] == [0, 1]
    assert packets[1].get('ipv4.src') == FLOW_B[0]


@pytest.mark.parametrize('lines,message', [
    ([json.dumps(make_record(5)), json.dumps(make_record(4))], 'backwards'),
    ([json.dumps(make_record(0, **{'ipv4.tos': 256}))], 'does not fit'),
    ([json.dumps(make_record(0, **{'vlan.id': 1}))], 'unknown field'),
    (['{"ts": 0,'], 'invalid JSON'),
    (['[1, 2]'], 'JSON object'),
    ([json.dumps({'ts': -1})], 'non-negative'),
])
def test_bad_trace_lines(schema, lines, message):
    with pytest.raises(TraceFormatError) as excinfo:
        parse_trace_lines(lines, schema)
    assert message in str(excinfo.value)


def test_trace_limit(schema):
    lines = [json.dumps(make_record(ts)) for ts in range(3)]
    assert len(parse_trace_lines(lines, schema, limit=3)) == 3
    with pytest.raises(TraceFormatError):
        parse_trace_lines(lines, schema, limit=2)


def test_missing_trace_file(schema, tmp_path):
    with pytest.raises(TraceFormatError):
        read_trace(str(tmp_path / 'absent.jsonl'), schema)


# ─── topologies and sinks ─────────────────────────────────────────────

def test_load_topology_resolves_programs(tmp_path):
    (tmp_path / 'prog.mafia').write_text(CHAIN)
    (tmp_path / 'chain.yml').write_text(
        'switches:\n'
        '  - {switch_id: 7, program: prog.mafia, role: mark}\n'
        '  - {switch_id: 8, program: prog.mafia, role: count}\n'
        'sinks: {OUT: out/hits.jsonl}\n'
    )
    topology = load_topology(str(tmp_path / 'chain.yml'))
    assert [s.switch_id for s in topology.switches] == [7, 8]
    assert topology.describe() == '7:mark -> 8:count'
    assert topology.endpoints() == ['OUT']
    assert topology.sinks['OUT'] == str(tmp_path / 'out' / 'hits.jsonl')


@pytest.mark.parametrize('text', [
    'switches: []\n',
    'switches:\n  - {switch_id: 1}\n',
    'switches:\n  - {switch_id: 1, program: prog.mafia, role: mark}\n'
    '  - {switch_id: 1, program: prog.mafia, role: count}\n',
    'switches:\n  - {program: missing.mafia}\n',
    'switches:\n  - {program: prog.mafia, role: spine}\n',
    'switches: [\n',
])
def test_bad_topologies(tmp_path, text):
    (tmp_path / 'prog.mafia').write_text(CHAIN)
    (tmp_path / 'topo.yml').write_text(text)
    with pytest.raises(TopologyError):
        load_topology(str(tmp_path / 'topo.yml'))


def test_bundled_topologies_load():
    topology = load_topology(os.path.join(CORPUS_DIR, 'topologies', 'path_changes.yml'))
    assert [s.role for s in topology.switches] == ['intermediate', 'intermediate', 'last_hop']


def test_every_endpoint_gets_a_sink_file(run, record):
    result = run('pkts >> match(pkt.size > 1000) >> collect(BIG)', [record(0)])
    assert result.sinks == {'BIG': []}


def test_parse_address():
    assert parse_address('localhost:9000') == ('localhost', 9000)
    assert parse_address('::1:9000') == ('::1', 9000)
    for bad in ('localhost', ':9000', 'host:port'):
        with pytest.raises(ConfigError):
            parse_address(bad)


def test_random_draws_are_uniform(schema, tmp_path):
    program = parse('pkts >> tag(ipv4.tos, random(0:10)) >> collect(OUT)')
    packets = packets_from_records([make_record(ts) for ts in range(5000)], schema)
    report = run_trace(single_switch(program), packets, seed=21, sink_dir=str(tmp_path))
    with open(report.sinks['OUT'], encoding='utf-8') as f:
        values = [json.loads(line)['packet']['headers']['ipv4.tos'] for line in f]
    counts = [values.count(v) for v in range(10)]
    assert sum(counts) == 5000
    assert chisquare(counts).pvalue > 0.001
