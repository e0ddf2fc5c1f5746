"""
Interpreter for the pipeline IR

Shares the window machine, state store and sinks of the reference
interpreter; only task execution differs. Used to check that compiled
pipelines behave exactly like the source program.
"""
import logging

from ..core.expr import Temp, apply_binop, evaluate
from ..errors import ConfigError
from ..interpreter.runner import run_trace
from ..interpreter.switch import SwitchInstance
from ..interpreter.topology import SwitchSpec, Topology
from ..primitives import StateOverlay
from .ir import (
    ALU, DUPLICATE, EMIT, ESTIMATE, HLL_UPDATE, INIT, PCSA_UPDATE, READ, RESET, SERIALIZE, UPDATE,
    Apply, ParNode, SeqNode,
)

log = logging.getLogger(__name__)


class IRSwitch(SwitchInstance):
    engine = 'ir'

    def __init__(self, ir, switch_id=0, hop=0, seed=0, chunk=None, schema=None):
        super().__init__(ir, switch_id, hop, seed, chunk, schema)
        self.ir = ir
        self.tables = {t.id: t for t in ir.tables}

    def run_task(self, packet, step):
        node = self.ir.control.get(packet.stream)
        if node is not None:
            self.run_control(node, packet, self.store, step, {})

    def run_control(self, node, packet, view, step, temps):
        if isinstance(node, Apply):
            return self.run_table(self.tables[node.table], packet, view, step, temps)
        if isinstance(node, SeqNode):
            for item in node.items:
                if not self.run_control(item, packet, view, step, temps):
                    return False
            return True
        entry = packet.copy()
        results = []
        for branch in node.branches:
            overlay = StateOverlay(view)
            branch_packet = entry.copy()
            alive = self.run_control(branch, branch_packet, overlay, step, temps)
            results.append((overlay, branch_packet, alive))
        for overlay, branch_packet, _ in results:
            overlay.commit()
            packet.fields.update(branch_packet.changed_fields(entry))
        return any(alive for _, _, alive in results)

    def run_table(self, table, packet, view, step, temps):
        for atom in table.atoms:
            if not self.run_atom(atom, packet, view, step, temps):
                return False
        if table.guard is not None:
            return bool(evaluate(table.guard, packet, temps=temps))
        return True

    def _store(self, dst, value, packet, temps):
        if isinstance(dst, Temp):
            temps[dst.name] = value
            return
        width = self.ir.field_widths.get(dst.name) or self.schema.width(dst.name)
        packet.fields[dst.name] = value & ((1 << width) - 1)

    def run_atom(self, atom, packet, view, step, temps):
        kind = atom.kind
        if kind == ALU:
            self._store(atom.dst, self.alu(atom, packet, temps), packet, temps)
        elif kind == READ:
            temps[atom.dst.name] = view.read_row(atom.var, packet, atom.row)
        elif kind == UPDATE:
            view.update_row(atom.var, packet, atom.row,
                            lambda cur: evaluate(atom.expr, packet, temps=temps, cell=cur))
        elif kind == RESET:
            view.reset(atom.var, packet)
        elif kind == INIT:
            view.init(atom.var, packet, evaluate(atom.args[0], packet, temps=temps))
        elif kind == SERIALIZE:
            temps[atom.dst.name] = view.read(atom.var, packet, 'read')
        elif kind == ESTIMATE:
            temps[atom.dst.name] = view.read(atom.var, packet, 'test')
        elif kind in (PCSA_UPDATE, HLL_UPDATE):
            view.sketch_update(atom.var, packet)
        elif kind == DUPLICATE:
            step.spawn(packet.copy(atom.target))
        elif kind == EMIT:
            step.emit(atom.target, packet)
            return False
        return True

    def alu(self, atom, packet, temps):
        if atom.op == 'random':
            lo, hi = (a.value for a in atom.args)
            return int(self.rng.integers(lo, hi))
        values = [evaluate(a, packet, temps=temps) for a in atom.args]
        if atom.op == 'move':
            return values[0]
        if atom.op == '!':
            return int(not values[0])
        return apply_binop(atom.op, values[0], values[1])


def ir_switch(ir_by_role):
    """Switch factory for run_trace: IR per role (None for single-switch programs)."""
    def make(spec, hop, seed, chunk, schema):
        return IRSwitch(ir_by_role[spec.role], spec.switch_id, hop, seed, chunk, schema)
    return make


def _check_defines(ir, defines):
    for name, value in (defines or {}).items():
        if name in ir.defines and ir.defines[name] != value:
            raise ConfigError(f'define {name}={value} differs from {ir.defines[name]} compiled into the IR')


def ir_interpret(ir, trace, seed=None, defines=None, **options):
    """Run one compiled segment over a trace; same report as run_trace."""
    _check_defines(ir, defines)
    topology = Topology([SwitchSpec(0, ir, ir.role)], dict(options.pop('sinks', None) or {}))
    return run_trace(topology, trace, seed, make_switch=ir_switch({ir.role: ir}), engine='ir', **options)
