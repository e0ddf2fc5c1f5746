"""
Bundled use-case corpus and its acceptance matrix

For every program in corpus/corpus.yml the runner checks:

    parse        parses, and validation reports exactly the expected diagnostics
    envelope     every segment schedules within the target's depth and width
    optimize     optimization never adds atoms
    equivalence  AST and optimized-IR runs give identical sinks and final state
                 on seeded random traces
    oracle       the measurement agrees with an exact offline oracle on the
                 program's own trace profile
"""
import json
import logging
import os
import tempfile
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import yaml

from ..compiler import ir_switch, load_target
from ..config import Config
from ..core.packet import Packet
from ..core.schema import default_schema
from ..errors import ConfigError, MafiaError
from ..frontend import parse_defines, parse_file, validate_composition
from ..interpreter import ast_switch, packets_from_records, run_trace
from . import oracles, tracegen
from .helpers import compile_segments, ir_by_role, topology_for

log = logging.getLogger(__name__)

CORPUS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'corpus')
MANIFEST = os.path.join(CORPUS_DIR, 'corpus.yml')

PROPERTIES = ('parse', 'envelope', 'optimize', 'equivalence', 'oracle')
PASS, FAIL, SKIP = 'pass', 'FAIL', '-'


@dataclass
class CorpusEntry:
    name: str
    file: str
    title: str = ''
    tags: list = field(default_factory=list)
    defines: dict = field(default_factory=dict)
    roles: list = None
    trace: dict = field(default_factory=dict)
    oracle: str = None
    diagnostics: list = field(default_factory=list)

    @property
    def path(self):
        return os.path.join(CORPUS_DIR, self.file)

    def matches(self, pattern):
        if not pattern:
            return True
        pattern = pattern.lower()
        return pattern in self.name.lower() or any(pattern in t.lower() for t in self.tags)

    def load(self, schema=None):
        return parse_file(self.path, parse_defines(self.defines), schema)

    def topology(self, program):
        return topology_for(program, self.roles)

    def to_dict(self):
        return {
            'name': self.name, 'title': self.title, 'file': self.file, 'tags': list(self.tags),
            'defines': dict(self.defines), 'roles': self.roles, 'trace': dict(self.trace),
            'oracle': self.oracle,
        }


def load_manifest(path=MANIFEST):
    try:
        with open(path, encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f'cannot load corpus manifest {path}: {e}') from e
    try:
        return [CorpusEntry(**item) for item in data.get('programs', [])]
    except TypeError as e:
        raise ConfigError(f'corpus manifest {path}: {e}') from e


def select(pattern=None, path=MANIFEST):
    return [e for e in load_manifest(path) if e.matches(pattern)]


@dataclass
class CorpusResult:
    name: str
    checks: dict = field(default_factory=dict)
    details: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return FAIL not in self.checks.values()

    def record(self, prop, problems):
        self.checks[prop] = FAIL if problems else PASS
        self.details.extend(f'{prop}: {p}' for p in problems)

    def to_dict(self):
        return {'name': self.name, 'passed': self.passed, 'checks': dict(self.checks),
                'details': list(self.details), 'metrics': list(self.metrics),
                'seconds': round(self.seconds, 3)}


# ─── running a trace with access to the switches ──────────────────────

class TraceRun:
    """One AST run kept open for oracle queries."""

    def __init__(self, topology, records, seed, sink_dir, schema=None):
        self.schema = schema or default_schema()
        self.records = records
        self.switches = []

        def make(spec, hop, run_seed, chunk, run_schema):
            switch = ast_switch(spec, hop, run_seed, chunk, run_schema)
            self.switches.append(switch)
            return switch

        packets = packets_from_records(records, self.schema)
        self.report = run_trace(topology, packets, seed, sink_dir=sink_dir, make_switch=make)
        self.sinks = {}
        for endpoint, path in self.report.sinks.items():
            with open(path, encoding='utf-8') as f:
                self.sinks[endpoint] = [json.loads(line) for line in f if line.strip()]

    def packet(self, record):
        return Packet.from_record(record, self.schema)

    def read(self, var, record, method=None, args=(), switch=-1):
        return self.switches[switch].store.read(var, self.packet(record), method, args)

    def slot_key(self, var, switch=-1):
        store = self.switches[switch].store
        return lambda record: store.slot(var, self.packet(record))

    def sink(self, endpoint, stream=None):
        return [s for s in self.sinks.get(endpoint, []) if stream is None or s['stream'] == stream]


def _first_per_flow(records):
    firsts = {}
    for r in records:
        if r.get('stream', 'pkts') == 'pkts':
            firsts.setdefault(oracles.flow_of(r), r)
    return firsts


def _ts_of(records, indices):
    return [records[i]['ts'] for i in indices]


# ─── oracle checks: (entry, run) -> list of problems ─────────────────

def check_flow_stats(entry, run):
    problems = []
    for var, what in (('byte_counter', 'bytes'), ('packet_counter', 'packets')):
        expected = oracles.flow_stats(run.records, run.slot_key(var))
        for r in _first_per_flow(run.records).values():
            want = expected[run.slot_key(var)(r)][what] & oracles.M32
            got = run.read(var, r)
            if got != want:
                problems.append(f'{var} for {oracles.flow_of(r)} is {got}, expected {want}')
    durations = oracles.flow_durations(run.records, run.slot_key('start_ts'), run.slot_key('flow_duration'))
    for r in _first_per_flow(run.records).values():
        want = durations.get(run.slot_key('flow_duration')(r), 0)
        got = run.read('flow_duration', r)
        if got != want:
            problems.append(f'flow_duration for {oracles.flow_of(r)} is {got}, expected {want}')
    return problems


def check_count_min(entry, run):
    exact = oracles.flow_stats(run.records)
    firsts = _first_per_flow(run.records)
    decl = run.switches[-1].store.decl('flow_size')
    total = sum(s['bytes'] for s in exact.values())
    bound = 2 * total / decl.kind.size
    problems, within = [], 0
    for flow, r in firsts.items():
        estimate = run.read('flow_size', r)
        if estimate < exact[flow]['bytes']:
            problems.append(f'estimate {estimate} below exact {exact[flow]["bytes"]} for {flow}')
        within += estimate <= exact[flow]['bytes'] + bound
    if firsts and within < 0.95 * len(firsts):
        problems.append(f'only {within}/{len(firsts)} estimates within exact + 2*total/m')
    return problems


CARDINALITY_BOUNDS = {'pcsa': 0.21, 'hyperloglog': 0.195}


def check_cardinality(entry, run):
    decl = run.switches[-1].store.decl('num_flows')
    bound = CARDINALITY_BOUNDS[decl.kind.alg]
    exact = oracles.distinct_flows(run.records)
    estimate = run.read('num_flows', run.records[0])
    error = abs(estimate - exact) / exact
    if error > bound:
        return [f'estimate {estimate} for {exact} distinct flows: relative error {error:.3f} > {bound}']
    return []


def check_counter_thresholds(entry, run):
    defines = entry.defines
    by_packets, by_bytes = oracles.threshold_crossings(
        run.records, defines['PACKET_THRESHOLD'], defines['BYTE_THRESHOLD'],
        run.slot_key('packet_counter'), run.slot_key('byte_counter'))
    expected = sorted([(run.records[i]['ts'], i, 0, 'pkts_exceeded') for i in by_packets]
                      + [(run.records[i]['ts'], i, 1, 'bytes_exceeded') for i in by_bytes])
    got = [(s['ts'], s['stream']) for s in run.sink('COLLECTOR')]
    want = [(ts, stream) for ts, _, _, stream in expected]
    if got != want:
        return [f'{len(got)} reports, expected {len(want)}; first difference at '
                f'{next((n for n, (a, b) in enumerate(zip(got, want)) if a != b), min(len(got), len(want)))}']
    return []


def check_sampling_ratio(entry, run):
    packets = sum(1 for r in run.records if r.get('stream', 'pkts') == 'pkts')
    ratio = len(run.sink('COLLECTOR')) / packets
    want = entry.defines['SamplingRatio'] / 100
    if abs(ratio - want) > 0.01:
        return [f'sampled {ratio:.4f} of packets, expected {want:.2f} +- 0.01']
    return []


def check_deterministic_sampling(entry, run):
    d = entry.defines
    keys = {name: run.slot_key(name) for name in ('n', 'm', 'delta')}
    indices = oracles.deterministic_samples(run.records, d['SKIP'], d['NUM_SAMPLES'], d['NUM_PACKETS'], keys)
    got = [s['ts'] for s in run.sink('COLLECTOR')]
    want = _ts_of(run.records, indices)
    if got != want:
        return [f'{len(got)} samples, expected {len(want)}']
    return []


def check_postcards(entry, run):
    packets = [r for r in run.records if r.get('stream', 'pkts') == 'pkts']
    cards = run.sink('COLLECTOR')
    problems = []
    if len(cards) != len(packets):
        problems.append(f'{len(cards)} postcards for {len(packets)} packets')
    for card, r in zip(cards, packets):
        port = (r.get('hops') or [r['meta']])[0].get('input_port', r['meta']['input_port'])
        if card['packet']['headers']['ipv4.checksum'] != port:
            problems.append(f'postcard at ts {card["ts"]} carries port {card["packet"]["headers"]["ipv4.checksum"]}, '
                            f'expected {port}')
            break
    return problems


def check_trajectory(entry, run):
    marks = oracles.trajectory_marks(run.records, entry.defines['THRESHOLD'], run.slot_key('verify_time', 0))
    reports = run.sink('COLLECTOR')
    problems = []
    if [s['ts'] for s in reports] != _ts_of(run.records, marks):
        problems.append(f'{len(reports)} trajectory reports, expected {len(marks)}')
    egress = run.switches[-1].switch_id
    for s in reports:
        h = s['packet']['headers']
        if h['ipv4.tos'] != egress or h['ipv4.checksum'] == 0:
            problems.append(f'report at ts {s["ts"]} lacks the egress id or the path bits')
            break
    return problems


def check_heavy_hitter(entry, run):
    d = entry.defines
    alarms = oracles.heavy_hitter_alarms(run.records, d['PORT'], d['GAMMA_PCT'])
    want = [(run.records[i]['ts'], flow) for i, flow in alarms]
    got = [(s['ts'], oracles.flow_of(s['packet'])) for s in run.sink('CONTROLLER', 'hh_alarms')]
    problems = []
    if got != want:
        problems.append(f'alarms {got[:3]}..., expected {want[:3]}...')
    volumes = run.sink('CONTROLLER', 'get_hh_volume')
    if len(volumes) != 1 or volumes[0]['packet']['headers']['pkt.hh_volume'] == 0:
        problems.append(f'expected one non-zero volume report, got {len(volumes)}')
    return problems


def check_queue_accumulation(entry, run):
    exact = oracles.queue_accumulation(run.records, len(entry.roles) - 1)
    problems = []
    for flow, r in _first_per_flow(run.records).items():
        packets, queue = exact[flow]
        got_packets, got_queue = run.read('total_pkts', r), run.read('path_q_len', r)
        if got_packets < packets or got_queue < queue & oracles.M32:
            problems.append(f'{flow}: sketches ({got_packets}, {got_queue}) below exact ({packets}, {queue})')
    return problems


def check_path_changes(entry, run):
    changes = oracles.path_changes(run.records, len(entry.roles) - 1)
    problems = []
    for flow, r in _first_per_flow(run.records).items():
        # the first packet of a flow registers as a new path
        got = run.read('n_change_sketch', r) - 1
        if got != changes[flow]:
            problems.append(f'{flow}: {got} path changes, expected {changes[flow]}')
    return problems


def check_lamport(entry, run):
    return oracles.lamport_mismatches(run.records, run.sink('SEGWAY_CONTROLLER'), entry.defines['GoodToMove'])


ORACLES = {
    'flow-stats': check_flow_stats,
    'count-min-volume': check_count_min,
    'cardinality': check_cardinality,
    'counter-thresholds': check_counter_thresholds,
    'sampling-ratio': check_sampling_ratio,
    'deterministic-sampling': check_deterministic_sampling,
    'postcards': check_postcards,
    'trajectory': check_trajectory,
    'heavy-hitter': check_heavy_hitter,
    'queue-accumulation': check_queue_accumulation,
    'path-changes': check_path_changes,
    'lamport': check_lamport,
}


# ─── the five properties ──────────────────────────────────────────────

def _check_parse(entry, program, result):
    got = Counter((d.severity, d.code) for d in validate_composition(program))
    want = Counter(tuple(d) for d in entry.diagnostics)
    problems = []
    if got != want:
        problems.append(f'diagnostics {sorted(got.elements())}, expected {sorted(want.elements())}')
    result.record('parse', problems)


def _check_compile(entry, program, result, target):
    segments = compile_segments(program, target)
    envelope, grew = [], []
    for seg in segments:
        report = seg.report
        result.metrics.append({'role': seg.role, 'depth': report.depth, 'width': report.width,
                               'atoms': report.atoms, 'atoms_unoptimized': seg.raw.atom_count,
                               'memory_bits': report.total_memory_bits})
        if report.depth > target.max_stages or report.width > target.max_width:
            envelope.append(f'{seg.role or "program"}: depth {report.depth}, width {report.width}')
        if seg.ir.atom_count > seg.raw.atom_count:
            grew.append(f'{seg.role or "program"}: {seg.raw.atom_count} -> {seg.ir.atom_count} atoms')
    result.record('envelope', envelope)
    result.record('optimize', grew)
    return segments


def _check_equivalence(entry, program, segments, result, packets, seeds, workdir):
    topology = entry.topology(program)
    problems = []
    for seed in seeds:
        records = tracegen.generate('mixed', packets, seed)
        trace = packets_from_records(records, default_schema())
        ast = run_trace(topology, trace, seed, sink_dir=os.path.join(workdir, f'ast-{seed}'))
        ir = run_trace(topology, trace, seed, sink_dir=os.path.join(workdir, f'ir-{seed}'),
                       make_switch=ir_switch(ir_by_role(segments)), engine='ir')
        if ast.digest != ir.digest:
            problems.append(f'seed {seed}: sink digests differ')
        if ast.states != ir.states:
            differing = sorted(name for sid in ast.states for name in ast.states[sid]
                               if ast.states[sid][name] != ir.states.get(sid, {}).get(name))
            problems.append(f'seed {seed}: final state differs in {differing}')
    result.record('equivalence', problems)


def _check_oracle(entry, program, result, workdir):
    check = ORACLES.get(entry.oracle)
    if check is None:
        result.checks['oracle'] = SKIP
        return
    params = dict(entry.trace)
    profile = params.pop('profile', 'mixed')
    records = tracegen.generate(profile, seed=params.pop('seed', 1), **params)
    run = TraceRun(entry.topology(program), records, 1, os.path.join(workdir, 'oracle'))
    result.record('oracle', check(entry, run))


def check_entry(entry, packets=None, seeds=None, target=None):
    """Run all acceptance properties for one corpus program."""
    packets = packets or Config.CORPUS_PACKETS
    seeds = seeds or Config.CORPUS_SEEDS
    target = target or load_target()
    result = CorpusResult(entry.name)
    started = time.perf_counter()
    try:
        program = entry.load()
    except MafiaError as e:
        result.record('parse', [str(e)])
        for prop in PROPERTIES[1:]:
            result.checks[prop] = SKIP
        return result
    with tempfile.TemporaryDirectory(prefix=f'mafia-{entry.name}-') as workdir:
        try:
            _check_parse(entry, program, result)
            segments = _check_compile(entry, program, result, target)
            _check_equivalence(entry, program, segments, result, packets, seeds, workdir)
            _check_oracle(entry, program, result, workdir)
        except MafiaError as e:
            log.exception('%s: %s', entry.name, e)
            result.details.append(f'error: {e}')
            for prop in PROPERTIES:
                result.checks.setdefault(prop, FAIL)
    result.seconds = time.perf_counter() - started
    log.info('%s: %s (%.1fs)', entry.name, 'pass' if result.passed else 'FAIL', result.seconds)
    return result


def _check_named(name, packets, seeds, target):
    entry = next(e for e in load_manifest() if e.name == name)
    return check_entry(entry, packets, seeds, target)


def run_corpus(pattern=None, packets=None, seeds=None, jobs=1, target=None):
    """Check every matching corpus program; results come back in manifest order."""
    entries = select(pattern)
    target = target or load_target()
    if jobs and jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_check_named, e.name, packets, seeds, target) for e in entries]
            return [f.result() for f in futures]
    return [check_entry(e, packets, seeds, target) for e in entries]


def format_matrix(results):
    header = f'{"program":<26}' + ''.join(f'{p:>13}' for p in PROPERTIES) + f'{"seconds":>9}'
    lines = [header, '-' * len(header)]
    for r in results:
        lines.append(f'{r.name:<26}' + ''.join(f'{r.checks.get(p, SKIP):>13}' for p in PROPERTIES)
                     + f'{r.seconds:>9.1f}')
    passed = sum(r.passed for r in results)
    lines.append(f'{passed}/{len(results)} programs pass')
    return '\n'.join(lines)
