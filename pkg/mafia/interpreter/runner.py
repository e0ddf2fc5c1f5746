"""
Trace replay through a chain of switches
"""
import json
import logging
import os
import queue
import threading
from dataclasses import asdict, dataclass, field

from ..config import Config
from ..core.schema import default_schema
from ..errors import ConfigError, EvalError, StepError
from .sinks import TcpSink, sink_digest, write_sinks
from .switch import SwitchInstance
from .trace import read_trace

log = logging.getLogger(__name__)

_DONE = object()


@dataclass
class RunReport:
    engine: str = 'ast'
    topology: str = ''
    packets: int = 0
    records: int = 0
    sinks: dict = field(default_factory=dict)
    digest: str = ''
    transitions: list = field(default_factory=list)
    states: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')


def check_seed(topology, seed):
    if seed is None and topology.uses_random():
        raise ConfigError('program uses random(); pass --seed for a reproducible run')


def ast_switch(spec, hop, seed, chunk, schema):
    return SwitchInstance(spec.program, spec.switch_id, hop, seed, chunk, schema)


def _step(switch, packet):
    try:
        return switch.step_packet(packet)
    except EvalError as e:
        raise StepError(packet.index, switch.switch_id, e) from e


def _run_sequential(switches, packets):
    records = []
    for packet in packets:
        current = packet.copy()
        for switch in switches:
            records.extend(_step(switch, current))
    return records


def _run_threaded(switches, packets):
    """One thread per switch, connected by FIFO queues."""
    queues = [queue.Queue() for _ in range(len(switches) + 1)]
    outputs = [[] for _ in switches]
    errors = []

    def work(position, switch):
        failed = False
        while True:
            packet = queues[position].get()
            if packet is _DONE:
                queues[position + 1].put(_DONE)
                return
            if failed:
                continue
            try:
                outputs[position].extend(_step(switch, packet))
            except Exception as e:  # re-raised by the caller after join
                errors.append((packet.index, position, e))
                failed = True
                continue
            queues[position + 1].put(packet)

    threads = [
        threading.Thread(target=work, args=(i, sw), name=f'switch-{sw.switch_id}', daemon=True)
        for i, sw in enumerate(switches)
    ]
    for t in threads:
        t.start()
    for packet in packets:
        queues[0].put(packet.copy())
    queues[0].put(_DONE)
    for t in threads:
        t.join()
    if errors:
        raise min(errors, key=lambda e: e[:2])[2]
    return [record for output in outputs for record in output]


def run_trace(topology, trace, seed=None, sink_dir=None, chunk=None, schema=None,
              make_switch=ast_switch, engine='ast', threads=False, sink_tcp=None):
    """Replay `trace` (a path or a list of Packets) and write the sink files."""
    schema = schema or default_schema()
    check_seed(topology, seed)
    packets = read_trace(trace, schema) if isinstance(trace, (str, os.PathLike)) else list(trace)
    switches = [make_switch(spec, hop, seed, chunk, schema) for hop, spec in enumerate(topology.switches)]

    if threads and len(switches) > 1:
        records = _run_threaded(switches, packets)
    else:
        records = _run_sequential(switches, packets)

    paths = write_sinks(records, topology.endpoints(), sink_dir or Config.SINK_DIR, topology.sinks)
    if sink_tcp:
        TcpSink(sink_tcp).send(records)

    transitions = sorted((t for sw in switches for t in sw.transitions),
                         key=lambda t: (t['packet'], t['switch_id']))
    report = RunReport(
        engine=engine,
        topology=topology.describe(),
        packets=len(packets),
        records=len(records),
        sinks=paths,
        digest=sink_digest(paths),
        transitions=transitions,
        states={str(sw.switch_id): sw.state_dump() for sw in switches},
    )
    log.info('%s run: %d packets, %d sink records, digest %s',
             engine, report.packets, report.records, report.digest[:12])
    return report
