import json
import os
import re

import pytest
from click.testing import CliRunner

from mafia import __version__
from mafia.cli import cli
from mafia.services.corpus import CORPUS_DIR

HEAVY = os.path.join(CORPUS_DIR, 'heavy_hitter.mafia')
HEAVY_DEFINES = ['-D', 'PORT=1', '-D', 'GAMMA_PCT=50', '-D', 'HH_VOLUME=1', '-D', 'mment_interval=5']
SAMPLING = os.path.join(CORPUS_DIR, 'stochastic_sampling.mafia')


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def trace(runner, tmp_path):
    path = str(tmp_path / 'trace.jsonl')
    result = runner.invoke(cli, ['trace-gen', path, '--packets', '300', '--seed', '3', '--param', 'flows=12'])
    assert result.exit_code == 0, result.output
    assert '300 records' in result.output
    return path


def digest_of(output):
    return re.search(r'digest ([0-9a-f]+)', output).group(1)


def test_version(runner):
    result = runner.invoke(cli, ['--version'])
    assert result.exit_code == 0
    assert __version__ in result.output


# ─── compile ──────────────────────────────────────────────────────────

def test_compile_writes_artifacts(runner, tmp_path):
    build = tmp_path / 'build'
    result = runner.invoke(cli, ['compile', HEAVY, *HEAVY_DEFINES, '--build-dir', str(build)])
    assert result.exit_code == 0, result.output
    assert sorted(os.listdir(build)) == ['heavy_hitter.ir.json', 'heavy_hitter.p4', 'heavy_hitter.report.json']
    report = json.loads((build / 'heavy_hitter.report.json').read_text())
    assert report['depth'] <= 24
    assert 'heavy_hitter' in result.output


def test_compile_reports_source_errors(runner, tmp_path):
    program = tmp_path / 'broken.mafia'
    program.write_text('pkts >> c.set(1)\n')
    result = runner.invoke(cli, ['compile', str(program), '--build-dir', str(tmp_path / 'build')])
    assert result.exit_code == 1
    assert 'broken.mafia:1:' in result.output
    assert 'error:' in result.output
    assert not (tmp_path / 'build').exists()


def test_compile_missing_constant(runner, tmp_path):
    result = runner.invoke(cli, ['compile', HEAVY, '--build-dir', str(tmp_path)])
    assert result.exit_code == 1


def test_compile_missing_file(runner, tmp_path):
    result = runner.invoke(cli, ['compile', str(tmp_path / 'absent.mafia')])
    assert result.exit_code == 1
    assert 'cannot read' in result.output


def test_envelope_overrun_is_a_warning(runner, tmp_path):
    target = tmp_path / 'toy.yml'
    target.write_text('name: toy\nmax_stages: 1\nmax_width: 63\nmemory_bits_per_stage: 33554432\n')
    result = runner.invoke(cli, ['compile', HEAVY, *HEAVY_DEFINES, '--target', str(target),
                                 '--build-dir', str(tmp_path / 'build')])
    assert result.exit_code == 0, result.output
    assert 'pipeline needs' in result.output


# ─── run ──────────────────────────────────────────────────────────────

def test_random_program_needs_a_seed(runner, trace, tmp_path):
    result = runner.invoke(cli, ['run', SAMPLING, '-D', 'SamplingRatio=10', '--trace', trace,
                                 '--sink-dir', str(tmp_path / 'sinks')])
    assert result.exit_code == 1
    assert 'seed' in result.output


def test_seeded_runs_are_reproducible_on_both_engines(runner, trace, tmp_path):
    args = ['run', SAMPLING, '-D', 'SamplingRatio=10', '--trace', trace, '--seed', '7']
    first = runner.invoke(cli, args + ['--sink-dir', str(tmp_path / 'a')])
    second = runner.invoke(cli, args + ['--sink-dir', str(tmp_path / 'b')])
    compiled = runner.invoke(cli, args + ['--sink-dir', str(tmp_path / 'c'), '--engine', 'ir'])
    for result in (first, second, compiled):
        assert result.exit_code == 0, result.output
    assert digest_of(first.output) == digest_of(second.output) == digest_of(compiled.output)
    assert '300 packets' in first.output
    assert os.path.exists(tmp_path / 'a' / 'COLLECTOR.jsonl')


def test_run_writes_a_report(runner, trace, tmp_path):
    report = tmp_path / 'report.json'
    result = runner.invoke(cli, ['run', HEAVY, *HEAVY_DEFINES, '--trace', trace,
                                 '--sink-dir', str(tmp_path / 'sinks'), '--report', str(report)])
    assert result.exit_code == 0, result.output
    data = json.loads(report.read_text())
    assert data['packets'] == 300
    assert data['digest'] == digest_of(result.output)


def test_run_topology(runner, trace, tmp_path):
    topology = os.path.join(CORPUS_DIR, 'topologies', 'path_changes.yml')
    result = runner.invoke(cli, ['run', '--topology', topology, '--trace', trace,
                                 '--sink-dir', str(tmp_path / 'sinks'), '--threads'])
    assert result.exit_code == 0, result.output


def test_run_needs_program_or_topology(runner, trace):
    result = runner.invoke(cli, ['run', '--trace', trace])
    assert result.exit_code == 1
    assert 'topology' in result.output


# ─── corpus and trace-gen ─────────────────────────────────────────────

def test_corpus_with_no_matches(runner):
    result = runner.invoke(cli, ['corpus', 'no-such-program'])
    assert result.exit_code == 0
    assert '0/0 programs pass' in result.output


def test_corpus_rejects_bad_seed_lists(runner):
    result = runner.invoke(cli, ['corpus', '--seeds', 'one,two'])
    assert result.exit_code == 2


def test_trace_gen_rejects_malformed_params(runner, tmp_path):
    result = runner.invoke(cli, ['trace-gen', str(tmp_path / 't.jsonl'), '--param', 'flows'])
    assert result.exit_code == 2


def test_trace_gen_rejects_unknown_params(runner, tmp_path):
    result = runner.invoke(cli, ['trace-gen', str(tmp_path / 't.jsonl'), '--param', 'colour=blue'])
    assert result.exit_code == 1
