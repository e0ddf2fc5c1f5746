"""
One switch running one program segment

The switch alternates between measuring and resetting. While measuring,
each packet runs the task of its stream; while resetting, each packet
clears one chunk of state and is otherwise ignored.
"""
import logging
from collections import deque

import numpy as np

from ..config import Config
from ..core.expr import BinOp, Lit, StateRef, bind_residual, evaluate
from ..core.schema import default_schema
from ..frontend.ast import Collect, Duplicate, Match, Par, Seq, Stamp, Tag, Update
from ..primitives import StateOverlay, StateStore
from .sinks import SinkRecord

log = logging.getLogger(__name__)

MEASURING = 'measuring'
RESETTING = 'resetting'


def switch_rng(seed, hop):
    """Per-switch generator; the hop position keeps chained switches independent."""
    return np.random.default_rng([seed or 0, hop])


class Step:
    """Bookkeeping for one trace packet at one switch."""

    def __init__(self, index, hop):
        self.index = index
        self.hop = hop
        self.records = []
        self.spawned = []

    def emit(self, endpoint, packet):
        order = (self.index, self.hop, len(self.records))
        self.records.append(SinkRecord(endpoint, packet.ts, packet.to_record(), packet.stream, order))

    def spawn(self, packet):
        self.spawned.append(packet)


class SwitchInstance:
    engine = 'ast'

    def __init__(self, program, switch_id=0, hop=0, seed=0, chunk=None, schema=None):
        self.program = program
        self.switch_id = switch_id
        self.hop = hop
        self.schema = schema or default_schema()
        self.chunk = chunk or Config.RESET_CHUNK
        self.store = StateStore(program.decls, seed or 0)
        self.rng = switch_rng(seed, hop)
        self.window_ns = program.window_ns
        self.mode = MEASURING
        self.deadline = self.window_ns
        self.pending = deque()
        self.transitions = []

    # ─── window machine ───────────────────────────────────────────────

    def _transition(self, mode, packet):
        self.mode = mode
        self.transitions.append({
            'switch_id': self.switch_id, 'packet': packet.index, 'ts': packet.ts, 'mode': mode,
        })
        log.info('switch %s: %s at ts=%d (packet #%d)', self.switch_id, mode, packet.ts, packet.index)

    def advance_window(self, packet):
        """Enter resetting once the packet's timestamp reaches the deadline."""
        if self.mode != MEASURING or self.deadline is None:
            return
        if packet.ts >= self.deadline:
            self.pending = deque(self.store.decls)
            self._transition(RESETTING, packet)

    def _finish_reset(self, packet):
        self.deadline += self.window_ns
        self._transition(MEASURING, packet)

    def _reset_step(self, packet):
        """One chunk of round-robin reset; True when the packet was consumed."""
        if not self.pending:
            self._finish_reset(packet)
            return False
        name = self.pending.popleft()
        if not self.store.reset_chunk(name, self.chunk):
            self.pending.append(name)
        if not self.pending:
            self._finish_reset(packet)
        return True

    # ─── packet processing ────────────────────────────────────────────

    def step_packet(self, packet):
        """Process one trace packet (and its logical copies); returns SinkRecords."""
        step = Step(packet.index, self.hop)
        packet.enter_switch(self.switch_id, self.hop)
        self.advance_window(packet)
        if self.mode == RESETTING and self._reset_step(packet):
            return step.records
        self._measure(packet, step)
        return step.records

    def _measure(self, packet, step):
        outer = step.spawned
        step.spawned = []
        self.run_task(packet, step)
        children, step.spawned = step.spawned, outer
        for child in children:
            self._measure(child, step)

    def run_task(self, packet, step):
        node = self.program.tasks.get(packet.stream)
        if node is not None:
            self.run_node(node, packet, self.store, step)

    def run_node(self, node, packet, view, step):
        """Execute a composition node; False when the branch was halted."""
        if isinstance(node, Seq):
            for item in node.items:
                if not self.run_node(item, packet, view, step):
                    return False
            return True
        if isinstance(node, Par):
            return self._run_par(node, packet, view, step)
        return self.run_prim(node, packet, view, step)

    def _run_par(self, node, packet, view, step):
        entry = packet.copy()
        results = []
        for branch in node.branches:
            overlay = StateOverlay(view)
            branch_packet = entry.copy()
            alive = self.run_node(branch, branch_packet, overlay, step)
            results.append((overlay, branch_packet, alive))
        for overlay, branch_packet, _ in results:
            overlay.commit()
            packet.fields.update(branch_packet.changed_fields(entry))
        return any(alive for _, _, alive in results)

    def run_prim(self, prim, packet, view, step):
        if isinstance(prim, Match):
            return bool(evaluate(prim.pred, packet, view, self.rng))
        if isinstance(prim, Tag):
            packet.set(prim.field_name, evaluate(prim.value, packet, view, self.rng), self.schema)
        elif isinstance(prim, Stamp):
            view.stamp(prim.var, packet)
        elif isinstance(prim, Update):
            self.apply_update(prim, packet, view)
        elif isinstance(prim, Duplicate):
            step.spawn(packet.copy(prim.stream))
        elif isinstance(prim, Collect):
            step.emit(prim.endpoint, packet)
            return False
        return True

    def apply_update(self, prim, packet, view):
        var, method = prim.var, prim.method
        if method == 'reset':
            view.reset(var, packet)
        elif method == 'init':
            view.init(var, packet, evaluate(prim.args[0], packet, view, self.rng))
        elif method == 'insert':
            view.insert(var, packet)
        elif method == 'update':
            view.sketch_update(var, packet)
        else:
            expr = prim.args[0]
            if method == 'add':
                expr = BinOp('+', StateRef(var), expr)
            residual = bind_residual(
                expr, var, lambda sub: Lit(evaluate(sub, packet, view, self.rng)))
            view.update(var, packet, lambda cur: evaluate(residual, packet, cell=cur))

    def state_dump(self):
        return self.store.dump()


def step_packet(switch, packet):
    return switch.step_packet(packet)


def advance_window(switch, packet):
    switch.advance_window(packet)
