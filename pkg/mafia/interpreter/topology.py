"""
Linear switch chains

A topology file (JSON or YAML) is either a list of switch entries or

    {"switches": [{"switch_id": 1, "program": "prog.mafia", "role": "first_hop",
                   "defines": {"THRESHOLD": 5}}, ...],
     "sinks": {"CONTROLLER": "out/controller.jsonl"}}

Program paths are relative to the topology file.
"""
import logging
import os
from dataclasses import dataclass, field

import yaml

from ..errors import TopologyError
from ..frontend import parse_defines, parse_file

log = logging.getLogger(__name__)


@dataclass
class SwitchSpec:
    switch_id: int
    program: object  # single-switch Program segment
    role: str = None
    source: str = None


@dataclass
class Topology:
    switches: list
    sinks: dict = field(default_factory=dict)

    def endpoints(self):
        names = set()
        for spec in self.switches:
            names.update(spec.program.endpoints())
        return sorted(names)

    def uses_random(self):
        return any(spec.program.uses_random() for spec in self.switches)

    def describe(self):
        return ' -> '.join(f'{s.switch_id}:{s.role or "-"}' for s in self.switches)


def single_switch(program, role=None, switch_id=0, sinks=None):
    return Topology([SwitchSpec(switch_id, program.for_role(role), role)], dict(sinks or {}))


def chain(program, roles, sinks=None, first_id=1):
    """One switch per role, in order, all running segments of one program."""
    specs = [SwitchSpec(first_id + i, program.for_role(role), role) for i, role in enumerate(roles)]
    return Topology(specs, dict(sinks or {}))


def load_topology(path, defines=None, schema=None):
    try:
        with open(path, encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise TopologyError(f'cannot read topology {path}: {e}') from e
    except yaml.YAMLError as e:
        raise TopologyError(f'topology {path} is not valid JSON/YAML: {e}') from e

    if isinstance(data, list):
        data = {'switches': data}
    if not isinstance(data, dict) or not data.get('switches'):
        raise TopologyError(f'topology {path} lists no switches')

    base = os.path.dirname(os.path.abspath(path))
    specs = []
    seen = set()
    for index, entry in enumerate(data['switches']):
        if not isinstance(entry, dict) or 'program' not in entry:
            raise TopologyError(f'switch entry #{index + 1} needs a "program"')
        switch_id = int(entry.get('switch_id', index + 1))
        if switch_id in seen:
            raise TopologyError(f'switch id {switch_id} appears twice')
        seen.add(switch_id)
        source = os.path.join(base, entry['program'])
        merged = {**parse_defines(entry.get('defines') or {}), **(defines or {})}
        try:
            program = parse_file(source, merged, schema)
        except OSError as e:
            raise TopologyError(f'cannot read program {source}: {e}') from e
        specs.append(SwitchSpec(switch_id, program.for_role(entry.get('role')), entry.get('role'), source))

    sinks = {name: os.path.join(base, target) for name, target in (data.get('sinks') or {}).items()}
    topology = Topology(specs, sinks)
    log.debug('topology %s: %s', path, topology.describe())
    return topology
