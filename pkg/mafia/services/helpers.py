"""
Compile and run helpers shared by the command line and the HTTP API

The `*_source` functions follow the (ok, payload, status) convention:
payload is a JSON-ready dict, status an HTTP status code.
"""
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field

from ..compiler import IRSwitch, emit_json, emit_pseudo_p4, ir_switch, ir_to_json, lower, optimize, schedule
from ..config import Config
from ..core.schema import default_schema
from ..errors import ConfigError, Diagnostic, FrontendError, MafiaError
from ..frontend import parse, parse_defines, parse_file, validate_composition
from ..interpreter import chain, load_topology, packets_from_records, run_trace, single_switch

log = logging.getLogger(__name__)

ENGINES = ('ast', 'ir')


@dataclass
class Segment:
    """One compiled program segment (the whole program, or one role)."""
    role: str
    raw: object       # PipelineIR straight from lowering
    ir: object        # optimized PipelineIR
    report: object    # ResourceReport of the optimized IR

    def stem(self, base):
        return f'{base}.{self.role}' if self.role else base


@dataclass
class RunConfig:
    program: str = None
    topology: str = None
    trace: str = None
    seed: int = None
    defines: dict = field(default_factory=dict)
    chunk: int = None
    sink_dir: str = None
    target: str = None
    role: str = None
    engine: str = 'ast'
    threads: bool = False
    sink_tcp: str = None
    report: str = None

    def validate(self):
        if bool(self.program) == bool(self.topology):
            raise ConfigError('give either a program or --topology')
        if not self.trace:
            raise ConfigError('a trace file is required (--trace)')
        if self.engine not in ENGINES:
            raise ConfigError(f'unknown engine {self.engine!r} (choose from {", ".join(ENGINES)})')
        if self.chunk is not None and self.chunk < 1:
            raise ConfigError('--chunk must be at least 1')
        if self.topology and self.role:
            raise ConfigError('--role applies to single-program runs; a topology names its roles')
        return self

    def build_topology(self, schema=None):
        defines = parse_defines(self.defines)
        if self.topology:
            return load_topology(self.topology, defines, schema)
        return single_switch(parse_file(self.program, defines, schema), self.role)


def compiled_switch(schema=None):
    """Switch factory for run_trace compiling each switch's own program segment."""
    cache = {}

    def make(spec, hop, seed, chunk, run_schema):
        key = id(spec.program)
        if key not in cache:
            cache[key] = optimize(lower(spec.program, schema))
        return IRSwitch(cache[key], spec.switch_id, hop, seed, chunk, run_schema)
    return make


def execute_run(config, schema=None):
    """Run a validated RunConfig; writes sinks (and the report when asked)."""
    config.validate()
    topology = config.build_topology(schema)
    options = {}
    if config.engine == 'ir':
        options = {'make_switch': compiled_switch(schema), 'engine': 'ir'}
    report = run_trace(
        topology, config.trace, config.seed, sink_dir=config.sink_dir, chunk=config.chunk,
        schema=schema, threads=config.threads, sink_tcp=config.sink_tcp, **options,
    )
    if config.report:
        report.write(config.report)
        log.info('run report -> %s', config.report)
    return report


def roles_of(program):
    return sorted(program.roles) or [None]


def compile_segments(program, target=None, schema=None, optimize_ir=True):
    """Lower, optimize and schedule every segment of `program`."""
    segments = []
    for role in roles_of(program):
        started = time.perf_counter()
        raw = lower(program.for_role(role), schema)
        ir = optimize(raw) if optimize_ir else raw
        report = schedule(ir, target)
        log.debug('compiled %s in %.1f ms: %d -> %d atoms, depth %d',
                  role or 'program', (time.perf_counter() - started) * 1000,
                  raw.atom_count, ir.atom_count, report.depth)
        segments.append(Segment(role, raw, ir, report))
    return segments


def write_artifacts(segments, stem, build_dir):
    """`<stem>[.<role>].ir.json`, `.p4` and `.report.json` per segment."""
    os.makedirs(build_dir, exist_ok=True)
    paths = []
    for seg in segments:
        base = os.path.join(build_dir, seg.stem(stem))
        outputs = {
            f'{base}.ir.json': emit_json(seg.ir),
            f'{base}.p4': emit_pseudo_p4(seg.ir, seg.report),
            f'{base}.report.json': _report_json(seg.report),
        }
        for path, text in outputs.items():
            with open(path, 'w', encoding='utf-8') as f:
                f.write(text)
            paths.append(path)
    log.info('wrote %d artifacts to %s', len(paths), build_dir)
    return paths


def _report_json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n'


def topology_for(program, roles=None, role=None):
    """Chain over `roles`, or a single switch running `role` (or the whole program)."""
    if roles:
        return chain(program, roles)
    return single_switch(program, role)


def ir_by_role(segments):
    return {seg.role: seg.ir for seg in segments}


def diagnostic_of(error):
    if isinstance(error, FrontendError):
        return Diagnostic('error', type(error).__name__, error.message, error.line, error.col)
    return Diagnostic('error', type(error).__name__, str(error))


# ─── (ok, payload, status) helpers ──────────────────────────────────────

def _parse_request(source, defines):
    try:
        return parse(source, parse_defines(defines or {})), None
    except MafiaError as e:
        return None, diagnostic_of(e)


def validate_source(source, defines=None):
    program, error = _parse_request(source, defines)
    if error:
        return False, {'valid': False, 'diagnostics': [error.to_dict()]}, 400
    diagnostics = validate_composition(program)
    return True, {
        'valid': True,
        'roles': sorted(program.roles),
        'streams': sorted({s for _, tasks in program.segments() for s in tasks}),
        'state': [d.name for d in program.all_decls()],
        'endpoints': program.endpoints(),
        'diagnostics': [d.to_dict() for d in diagnostics],
    }, 200


def compile_source(source, defines=None, target=None, backend='json'):
    program, error = _parse_request(source, defines)
    if error:
        return False, {'diagnostics': [error.to_dict()]}, 400
    try:
        segments = compile_segments(program, target)
    except MafiaError as e:
        return False, {'diagnostics': [diagnostic_of(e).to_dict()]}, 422
    diagnostics = [d.to_dict() for d in validate_composition(program)]
    out = []
    for seg in segments:
        entry = {
            'role': seg.role,
            'report': seg.report.to_dict(),
            'atoms_unoptimized': seg.raw.atom_count,
            'ir': ir_to_json(seg.ir),
        }
        if backend == 'pseudo-p4':
            entry['p4'] = emit_pseudo_p4(seg.ir, seg.report)
        diagnostics.extend(w.to_dict() for w in seg.report.warnings)
        out.append(entry)
    return True, {'segments': out, 'diagnostics': diagnostics}, 200


def run_source(source, records, defines=None, seed=None, roles=None, role=None, engine='ast',
               limit=None):
    """Run a program over inline trace records; sink contents are returned
    instead of being left on disk."""
    if engine not in ENGINES:
        return False, {'error': f'unknown engine {engine!r}'}, 400
    program, error = _parse_request(source, defines)
    if error:
        return False, {'diagnostics': [error.to_dict()]}, 400
    limit = limit or Config.MAX_TRACE_RECORDS
    try:
        packets = packets_from_records(records, default_schema(), limit)
        topology = topology_for(program, roles, role)
        options = {}
        if engine == 'ir':
            options = {'make_switch': ir_switch(ir_by_role(compile_segments(program))), 'engine': 'ir'}
        with tempfile.TemporaryDirectory(prefix='mafia-run-') as sink_dir:
            report = run_trace(topology, packets, seed, sink_dir=sink_dir, **options)
            sinks = {}
            for endpoint, path in report.sinks.items():
                with open(path, encoding='utf-8') as f:
                    sinks[endpoint] = [json.loads(line) for line in f if line.strip()]
    except MafiaError as e:
        return False, {'error': str(e)}, 422
    payload = report.to_dict()
    payload['sinks'] = sinks
    return True, payload, 200
