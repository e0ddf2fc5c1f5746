"""
Command line: compile, run, corpus, trace-gen, serve

Exit codes: 0 on success (warnings included), 1 on any error or, for
`corpus`, on any failing property.
"""
import logging
import os
import sys

import click
import yaml

from . import __version__, setup_logging
from .compiler import format_metrics, load_target
from .config import Config
from .errors import FrontendError, MafiaError
from .frontend import parse_defines, parse_file, validate_composition
from .services import tracegen
from .services.corpus import format_matrix, run_corpus
from .services.helpers import RunConfig, compile_segments, execute_run, write_artifacts

log = logging.getLogger(__name__)

define_option = click.option(
    '-D', '--define', 'defines', multiple=True, metavar='NAME=VALUE',
    help='Bind a named constant (repeatable).',
)


def fail(message):
    click.echo(message, err=True)
    sys.exit(1)


def report_error(error, filename=None):
    if isinstance(error, FrontendError) and filename:
        fail(f'{filename}:{error.line}:{error.col}: error: {error.message}')
    fail(f'error: {error}')


def echo_diagnostics(diagnostics, filename):
    for d in diagnostics:
        click.echo(d.format(filename), err=True)


@click.group()
@click.option('--log-level', default=None, help=f'Logging level (default {Config.LOG_LEVEL}).')
@click.option('-v', '--verbose', is_flag=True, help='Shortcut for --log-level DEBUG.')
@click.version_option(__version__, prog_name='mafia')
def cli(log_level, verbose):
    """Compile and simulate MAFIA measurement programs."""
    setup_logging('DEBUG' if verbose else (log_level or Config.LOG_LEVEL).upper())


# ─── compile ───────────────────────────────────────────────────────────

@cli.command('compile')
@click.argument('program', type=click.Path(dir_okay=False))
@define_option
@click.option('--target', type=click.Path(dir_okay=False), help='Target model (default $MAFIA_TARGET_MODEL).')
@click.option('--build-dir', default=None, help=f'Output directory (default {Config.BUILD_DIR}).')
@click.option('--no-optimize', is_flag=True, help='Schedule the unoptimized IR.')
def compile_cmd(program, defines, target, build_dir, no_optimize):
    """Compile PROGRAM to pipeline IR, pseudo-P4 and a resource report."""
    try:
        parsed = parse_file(program, parse_defines(defines))
        model = load_target(target)
        segments = compile_segments(parsed, model, optimize_ir=not no_optimize)
    except OSError as e:
        fail(f'error: cannot read {program}: {e.strerror}')
    except MafiaError as e:
        report_error(e, program)

    echo_diagnostics(validate_composition(parsed), program)
    for seg in segments:
        echo_diagnostics(seg.report.warnings, program)

    stem = os.path.splitext(os.path.basename(program))[0]
    write_artifacts(segments, stem, build_dir or Config.BUILD_DIR)
    click.echo(format_metrics([(seg.stem(stem), seg.report) for seg in segments]))


# ─── run ───────────────────────────────────────────────────────────────

@cli.command('run')
@click.argument('program', required=False, type=click.Path(dir_okay=False))
@click.option('--topology', type=click.Path(dir_okay=False), help='Switch chain file instead of PROGRAM.')
@click.option('--trace', required=True, type=click.Path(dir_okay=False), help='JSONL trace file.')
@click.option('--seed', type=int, help='Seed for random() and hashing; required when the program uses random().')
@define_option
@click.option('--chunk', type=int, help=f'Cells cleared per packet while resetting (default {Config.RESET_CHUNK}).')
@click.option('--sink-dir', default=None, help=f'Sink file directory (default {Config.SINK_DIR}).')
@click.option('--role', help='Role to run when PROGRAM defines roles.')
@click.option('--engine', type=click.Choice(['ast', 'ir']), default='ast', show_default=True)
@click.option('--threads', is_flag=True, help='One thread per switch along the chain.')
@click.option('--sink-tcp', metavar='HOST:PORT', help='Also stream sink records over TCP.')
@click.option('--report', type=click.Path(dir_okay=False), help='Write the run report as JSON.')
def run_cmd(program, topology, trace, seed, defines, chunk, sink_dir, role, engine, threads, sink_tcp, report):
    """Replay a trace through PROGRAM (or a --topology) and write the sinks."""
    config = RunConfig(
        program=program, topology=topology, trace=trace, seed=seed, defines=list(defines),
        chunk=chunk, sink_dir=sink_dir, role=role, engine=engine, threads=threads,
        sink_tcp=sink_tcp, report=report,
    )
    try:
        result = execute_run(config)
    except OSError as e:
        fail(f'error: {e.filename or ""}: {e.strerror}')
    except MafiaError as e:
        report_error(e, program)

    for endpoint, path in result.sinks.items():
        click.echo(f'{endpoint}: {path}')
    click.echo(f'{result.packets} packets, {result.records} sink records')
    click.echo(f'digest {result.digest}')


# ─── corpus ────────────────────────────────────────────────────────────

def _seed_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(s) for s in value.split(',') if s.strip()]
    except ValueError:
        raise click.BadParameter('expected comma-separated integers') from None


@cli.command('corpus')
@click.argument('pattern', required=False)
@click.option('--packets', type=int, default=None, help=f'Equivalence trace length (default {Config.CORPUS_PACKETS}).')
@click.option('--seeds', callback=_seed_list, help='Comma-separated equivalence seeds (default 1,2,3).')
@click.option('--jobs', '-j', type=int, default=1, show_default=True, help='Programs checked in parallel.')
@click.option('--target', type=click.Path(dir_okay=False), help='Target model (default $MAFIA_TARGET_MODEL).')
def corpus_cmd(pattern, packets, seeds, jobs, target):
    """Check the bundled programs; PATTERN filters by name or tag."""
    try:
        results = run_corpus(pattern, packets, seeds, jobs, load_target(target))
    except MafiaError as e:
        report_error(e)
    click.echo(format_matrix(results))
    failed = [r for r in results if not r.passed]
    for r in failed:
        for detail in r.details:
            click.echo(f'{r.name}: {detail}', err=True)
    if failed:
        sys.exit(1)


# ─── trace-gen ─────────────────────────────────────────────────────────

def _params(ctx, param, value):
    out = {}
    for item in value:
        key, sep, raw = item.partition('=')
        if not sep or not key.strip():
            raise click.BadParameter(f'{item!r} must look like KEY=VALUE')
        out[key.strip().replace('-', '_')] = yaml.safe_load(raw)
    return out


@cli.command('trace-gen')
@click.argument('output', type=click.Path(dir_okay=False))
@click.option('--profile', type=click.Choice(sorted(tracegen.PROFILES)), default='mixed', show_default=True)
@click.option('--packets', type=int, default=10000, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--param', 'params', multiple=True, callback=_params, metavar='KEY=VALUE',
              help='Profile parameter, e.g. flows=200 or share=0.6 (repeatable).')
def trace_gen_cmd(output, profile, packets, seed, params):
    """Write a seeded synthetic trace to OUTPUT."""
    try:
        count = tracegen.generate_file(output, profile, packets, seed, **params)
    except MafiaError as e:
        report_error(e)
    except OSError as e:
        fail(f'error: cannot write {output}: {e.strerror}')
    click.echo(f'{count} records -> {output}')


# ─── serve ─────────────────────────────────────────────────────────────

@cli.command('serve')
@click.option('--host', default='0.0.0.0', show_default=True)
@click.option('--port', type=int, default=5000, show_default=True)
@click.option('--debug', is_flag=True)
def serve_cmd(host, port, debug):
    """Serve the HTTP API (use gunicorn app:app in production)."""
    from . import create_app

    create_app().run(host=host, port=port, debug=debug)


def main():
    cli(prog_name='mafia')


if __name__ == '__main__':
    main()
