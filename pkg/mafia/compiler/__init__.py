"""
Pipeline compiler: lowering, optimization, scheduling and code emission.
"""
from .emit import BACKENDS, emit, emit_json, emit_pseudo_p4, parse_json
from .ir import Apply, Atom, ParNode, PipelineIR, SeqNode, Table, ir_from_json, ir_to_json
from .ir_interp import IRSwitch, ir_interpret, ir_switch
from .lower import lower
from .optimize import optimize
from .schedule import ResourceReport, format_metrics, schedule
from .target import TargetModel, load_target

__all__ = [
    'BACKENDS', 'emit', 'emit_json', 'emit_pseudo_p4', 'parse_json', 'Apply', 'Atom', 'ParNode',
    'PipelineIR', 'SeqNode', 'Table', 'ir_from_json', 'ir_to_json', 'IRSwitch', 'ir_interpret',
    'ir_switch', 'lower', 'optimize', 'ResourceReport', 'format_metrics', 'schedule', 'TargetModel',
    'load_target',
]
