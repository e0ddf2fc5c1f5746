"""
Stage scheduling and resource accounting

Atoms are placed greedily, as early as possible, in program order:

  * read-after-write and write-after-write push an atom to a later stage,
    write-after-read allows the same stage;
  * atoms on different branches of a parallel composition are ordered
    only by write-after-write;
  * atoms with side effects wait for the guards that precede them, reads
    and temporaries run speculatively;
  * a stage holds at most `max_width` atoms; guards take a stage but no atom.

All streams share one stage grid. A variable's memory is charged to the
stage of its first stateful atom.
"""
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field

from ..errors import Diagnostic
from .ir import Apply, ParNode, SeqNode, any_conflict, atom_resources, guard_resources
from .target import TargetModel

log = logging.getLogger(__name__)


@dataclass
class StageReport:
    stage: int
    atoms: int = 0
    guards: int = 0
    memory_bits: int = 0
    tables: list = field(default_factory=list)


@dataclass
class ResourceReport:
    target: str
    depth: int
    width: int
    atoms: int
    tables: int
    memory_bits: dict
    stages: list
    warnings: list = field(default_factory=list)

    @property
    def total_memory_bits(self):
        return sum(self.memory_bits.values())

    def to_dict(self):
        out = asdict(self)
        out['warnings'] = [w.to_dict() for w in self.warnings]
        out['total_memory_bits'] = self.total_memory_bits
        return out


@dataclass
class _Placed:
    reads: set
    writes: set
    stage: int
    path: tuple


def _diverged(a, b):
    """True when two control paths sit on different branches of one Par."""
    for x, y in zip(a, b):
        if x != y:
            return x[0] == y[0]
    return False


class Scheduler:
    def __init__(self, ir, target=None):
        self.ir = ir
        self.target = target or TargetModel()
        self.load = defaultdict(int)
        self.guards = defaultdict(int)
        self.tables_at = defaultdict(set)
        self.first_stateful = {}
        self.last_stage = -1
        self.placed = []
        self._pars = 0

    def earliest(self, reads, writes, path):
        stage = 0
        for p in self.placed:
            if _diverged(p.path, path):
                if any_conflict(p.writes, writes):
                    stage = max(stage, p.stage + 1)
            elif any_conflict(p.writes, reads) or any_conflict(p.writes, writes):
                stage = max(stage, p.stage + 1)
            elif any_conflict(p.reads, writes):
                stage = max(stage, p.stage)
        return stage

    def place_atom(self, atom, table, path, floor):
        reads, writes = atom_resources(atom, self.ir)
        stage = self.earliest(reads, writes, path)
        if atom.side_effect:
            stage = max(stage, floor)
        while self.load[stage] >= self.target.max_width:
            stage += 1
        self.load[stage] += 1
        self.tables_at[stage].add(table.id)
        self.placed.append(_Placed(reads, writes, stage, path))
        if atom.stateful:
            self.first_stateful[atom.var] = min(stage, self.first_stateful.get(atom.var, stage))
        self.last_stage = max(self.last_stage, stage)

    def place_guard(self, table, path):
        reads = guard_resources(table.guard)
        stage = self.earliest(reads, set(), path)
        self.guards[stage] += 1
        self.tables_at[stage].add(table.id)
        self.placed.append(_Placed(reads, set(), stage, path))
        self.last_stage = max(self.last_stage, stage)
        return stage

    def walk(self, node, path, floor):
        """Place a control subtree; returns the control floor after it."""
        if isinstance(node, Apply):
            table = self.ir.table(node.table)
            for atom in table.atoms:
                self.place_atom(atom, table, path, floor)
            if table.guard is not None:
                floor = max(floor, self.place_guard(table, path) + 1)
            return floor
        if isinstance(node, SeqNode):
            for item in node.items:
                floor = self.walk(item, path, floor)
            return floor
        self._pars += 1
        par_id = self._pars
        out = floor
        for index, branch in enumerate(node.branches):
            out = max(out, self.walk(branch, path + ((par_id, index),), floor))
        return out

    def run(self):
        for stream in sorted(self.ir.control):
            self.placed = []
            self.walk(self.ir.control[stream], (), 0)
        return self.report()

    def report(self):
        depth = self.last_stage + 1
        memory = {d.name: d.memory_bits for d in self.ir.decls}
        stages = [StageReport(s, self.load[s], self.guards[s], 0, sorted(self.tables_at[s])) for s in range(depth)]
        for d in self.ir.decls:
            stage = self.first_stateful.get(d.name, 0)
            if stage >= len(stages):
                stages.extend(StageReport(s) for s in range(len(stages), stage + 1))
            stages[stage].memory_bits += d.memory_bits

        warnings = []
        target = self.target
        if depth > target.max_stages:
            warnings.append(Diagnostic(
                'warning', 'envelope-depth',
                f'pipeline needs {depth} stages; target {target.name} has {target.max_stages}'))
        for s in stages:
            if s.memory_bits > target.memory_bits_per_stage:
                warnings.append(Diagnostic(
                    'warning', 'envelope-memory',
                    f'stage {s.stage} needs {s.memory_bits} bits of memory; '
                    f'target {target.name} has {target.memory_bits_per_stage}'))
        for w in warnings:
            log.warning(w.message)

        return ResourceReport(
            target=target.name,
            depth=depth,
            width=max(self.load.values(), default=0),
            atoms=self.ir.atom_count,
            tables=len(self.ir.tables),
            memory_bits=memory,
            stages=stages,
            warnings=warnings,
        )


def schedule(ir, target=None):
    return Scheduler(ir, target).run()


def format_metrics(rows):
    """Plain-text metrics table; rows are (program, ResourceReport) pairs."""
    header = f'{"program":<32} {"depth":>5} {"width":>5} {"atoms":>5} {"tables":>6} {"memory (bits)":>14}'
    lines = [header, '-' * len(header)]
    for name, report in rows:
        lines.append(f'{name:<32} {report.depth:>5} {report.width:>5} {report.atoms:>5} '
                     f'{report.tables:>6} {report.total_memory_bits:>14}')
    return '\n'.join(lines)
