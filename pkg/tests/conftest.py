"""
Shared fixtures: trace records, packets and small program runs
"""
import pytest

from mafia.core.packet import Packet
from mafia.core.schema import default_schema
from mafia.frontend import parse
from mafia.services import tracegen
from mafia.services.corpus import TraceRun
from mafia.services.helpers import topology_for

FLOW_A = (0x0A000001, 0x0A100001, 40000, 80, 6)
FLOW_B = (0x0A000002, 0x0A100002, 40001, 443, 17)

COUNTER_SOURCE = '''
c = Counter(width=32)
pkts >> c.set(c + 1)
'''


def make_record(ts, flow=FLOW_A, size=100, input_port=1, output_port=2, queue=0,
                stream='pkts', hops=None, **headers):
    meta = {'input_port': input_port, 'output_port': output_port, 'size': size, 'in_queue_length': queue}
    return tracegen.record(ts, flow, meta, stream, hops, **headers)


@pytest.fixture
def schema():
    return default_schema()


@pytest.fixture
def record():
    return make_record


@pytest.fixture
def packet(schema):
    def _packet(ts=0, index=0, **kwargs):
        return Packet.from_record(make_record(ts, **kwargs), schema, index)
    return _packet


@pytest.fixture
def run(tmp_path):
    """Run program text over trace records on one switch (or a role chain)."""
    def _run(source, records, defines=None, seed=None, roles=None):
        program = parse(source, defines)
        return TraceRun(topology_for(program, roles), records, seed, str(tmp_path / 'sinks'))
    return _run
