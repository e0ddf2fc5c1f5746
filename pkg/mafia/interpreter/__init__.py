"""
Reference interpreter: executes programs over packet traces.
"""
from .runner import RunReport, ast_switch, check_seed, run_trace
from .sinks import SinkRecord, TcpSink, sink_digest, sink_path, write_sinks
from .switch import MEASURING, RESETTING, Step, SwitchInstance, advance_window, step_packet
from .topology import SwitchSpec, Topology, chain, load_topology, single_switch
from .trace import packets_from_records, parse_trace_lines, read_trace, write_trace

__all__ = [
    'RunReport', 'ast_switch', 'check_seed', 'run_trace', 'SinkRecord', 'TcpSink', 'sink_digest',
    'sink_path', 'write_sinks', 'MEASURING', 'RESETTING', 'Step', 'SwitchInstance', 'advance_window',
    'step_packet', 'SwitchSpec', 'Topology', 'chain', 'load_topology', 'single_switch',
    'packets_from_records', 'parse_trace_lines', 'read_trace', 'write_trace',
]
