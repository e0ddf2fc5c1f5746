"""
REST API v1 routes for the MAFIA toolchain
JSON endpoints for validating, compiling and running measurement programs.
"""
import os

import yaml
from flask import Blueprint, current_app, jsonify, request

from ..compiler import BACKENDS, load_target
from ..errors import ConfigError
from ..services.corpus import load_manifest
from ..services.helpers import ENGINES, compile_source, run_source, validate_source

api_bp = Blueprint('api_v1', __name__)

SWAGGER = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'swagger', 'api_v1.yml')


def _body():
    """JSON body with a string `source`, or an error response."""
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        return None, (jsonify({'error': 'Expected a JSON object'}), 400)
    if not isinstance(data.get('source'), str):
        return None, (jsonify({'error': 'source (program text) is required'}), 400)
    defines = data.get('defines') or {}
    if not isinstance(defines, dict):
        return None, (jsonify({'error': 'defines must be an object'}), 400)
    return data, None


# ─── Health ────────────────────────────────────────────────────────────

@api_bp.route('/health')
def health():
    return jsonify({
        'status': 'healthy',
        'service': 'mafia',
        'api_version': 'v1'
    })


@api_bp.route('/openapi.json')
def openapi_spec():
    with open(SWAGGER, encoding='utf-8') as f:
        spec = yaml.safe_load(f)
    return jsonify(spec)


# ─── Corpus ────────────────────────────────────────────────────────────

@api_bp.route('/corpus')
def list_corpus():
    """Bundled use cases. Filter: ?filter=substring of name or tag"""
    pattern = request.args.get('filter')
    programs = [e.to_dict() for e in load_manifest() if e.matches(pattern)]
    return jsonify({
        'programs': programs,
        'total': len(programs)
    })


# ─── Programs ──────────────────────────────────────────────────────────

@api_bp.route('/validate', methods=['POST'])
def validate():
    """Parse a program and report its composition diagnostics"""
    data, error = _body()
    if error:
        return error
    ok, payload, status = validate_source(data['source'], data.get('defines'))
    return jsonify(payload), status


@api_bp.route('/compile', methods=['POST'])
def compile_program():
    """Compile to the pipeline IR and schedule it on the configured target"""
    data, error = _body()
    if error:
        return error
    backend = data.get('backend', 'json')
    if backend not in BACKENDS:
        return jsonify({'error': f'backend must be one of {", ".join(BACKENDS)}'}), 400
    try:
        target = load_target(current_app.config['TARGET_MODEL'])
    except ConfigError as e:
        return jsonify({'error': str(e)}), 500
    ok, payload, status = compile_source(data['source'], data.get('defines'), target, backend)
    return jsonify(payload), status


@api_bp.route('/run', methods=['POST'])
def run_program():
    """Run a program over inline trace records and return the sink contents"""
    data, error = _body()
    if error:
        return error
    records = data.get('records')
    if not isinstance(records, list):
        return jsonify({'error': 'records (list of trace records) is required'}), 400
    limit = current_app.config['MAX_TRACE_RECORDS']
    if len(records) > limit:
        return jsonify({'error': f'at most {limit} trace records per request'}), 413
    engine = data.get('engine', 'ast')
    if engine not in ENGINES:
        return jsonify({'error': f'engine must be one of {", ".join(ENGINES)}'}), 400
    seed = data.get('seed')
    if seed is not None and not isinstance(seed, int):
        return jsonify({'error': 'seed must be an integer'}), 400
    roles = data.get('roles')
    if roles is not None and not (isinstance(roles, list) and all(isinstance(r, str) for r in roles)):
        return jsonify({'error': 'roles must be a list of role names'}), 400

    ok, payload, status = run_source(
        data['source'], records, data.get('defines'), seed=seed, roles=roles,
        role=data.get('role'), engine=engine, limit=limit,
    )
    return jsonify(payload), status
