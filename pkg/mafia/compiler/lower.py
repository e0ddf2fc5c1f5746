"""
Lowering of a single-switch program into the pipeline IR

Each primitive becomes one table. Expressions are flattened into ALU
atoms over fresh temporaries in evaluation order; state queries become
per-row reads followed by a balanced reduction.
"""
import logging

from ..core.decls import COUNT_MIN, COUNTING, HYPERLOGLOG, MEMBERSHIP, PCSA, STORE, structure_of
from ..core.expr import BinOp, FieldRef, Lit, Not, Random, StateRef, Temp, bind_residual
from ..core.schema import default_schema
from ..errors import TopologyError, UnsupportedExpr
from ..frontend.ast import Collect, Duplicate, Match, Par, Seq, Stamp, Tag, Update
from .ir import (
    ALU, DUPLICATE, EMIT, ESTIMATE, HLL_UPDATE, INIT, PCSA_UPDATE, READ, RESET, SERIALIZE, UPDATE,
    Apply, Atom, ParNode, PipelineIR, SeqNode, Table,
)

log = logging.getLogger(__name__)

REDUCE_OPS = {'min': 'min', 'max': 'max', 'sum': '+', 'avg': '+', 'test': 'min', 'all': 'min', 'any': 'max'}
ROW_QUERIES = (COUNTING, COUNT_MIN, STORE)


def _reduce(values, op, atoms, fresh):
    """Balanced pairwise reduction of operands."""
    while len(values) > 1:
        paired = []
        for i in range(0, len(values) - 1, 2):
            t = fresh()
            atoms.append(Atom(ALU, t, op, (values[i], values[i + 1])))
            paired.append(t)
        if len(values) % 2:
            paired.append(values[-1])
        values = paired
    return values[0]


class Lowerer:
    def __init__(self, program, schema=None):
        if program.roles:
            raise TopologyError(f'select a role before lowering (roles: {sorted(program.roles)})')
        self.program = program
        self.schema = schema or default_schema()
        self.decls = {d.name: d for d in program.decls}
        self.tables = []
        self.field_widths = {}
        self._temps = 0

    def fresh(self):
        self._temps += 1
        return Temp(f't{self._temps}')

    # ─── expressions ──────────────────────────────────────────────────

    def operand(self, e, atoms):
        """Lower `e` into atoms; returns a Lit, FieldRef or Temp holding its value."""
        if isinstance(e, (Lit, FieldRef)):
            return e
        if isinstance(e, BinOp):
            a = self.operand(e.left, atoms)
            b = self.operand(e.right, atoms)
            t = self.fresh()
            atoms.append(Atom(ALU, t, e.op, (a, b)))
            return t
        if isinstance(e, Not):
            a = self.operand(e.operand, atoms)
            t = self.fresh()
            atoms.append(Atom(ALU, t, '!', (a,)))
            return t
        if isinstance(e, Random):
            t = self.fresh()
            atoms.append(Atom(ALU, t, 'random', (Lit(e.lo), Lit(e.hi))))
            return t
        if isinstance(e, StateRef):
            return self.query(e, atoms)
        raise UnsupportedExpr(f'cannot decompose {e!r} into pipeline atoms')

    def query(self, ref, atoms):
        decl = self.decls[ref.var]
        args = [self.operand(a, atoms) for a in ref.args]
        structure = structure_of(decl)
        method = ref.method

        if structure in (PCSA, HYPERLOGLOG):
            t = self.fresh()
            atoms.append(Atom(ESTIMATE, t, var=ref.var))
            return t
        if structure == MEMBERSHIP and method != 'test':
            t = self.fresh()
            atoms.append(Atom(SERIALIZE, t, var=ref.var))
            return t

        rows = []
        for row in range(decl.hash_rows):
            t = self.fresh()
            atoms.append(Atom(READ, t, var=ref.var, row=row))
            rows.append(t)
        if structure not in ROW_QUERIES and structure != MEMBERSHIP:
            return rows[0]

        method = method or 'min'
        if method in ('all', 'any'):
            compared = []
            for r in rows:
                t = self.fresh()
                atoms.append(Atom(ALU, t, '==', (r, args[0])))
                compared.append(t)
            rows = compared
        result = _reduce(rows, REDUCE_OPS[method], atoms, self.fresh)
        if method == 'avg' and len(rows) > 1:
            t = self.fresh()
            atoms.append(Atom(ALU, t, '/', (result, Lit(len(rows)))))
            result = t
        return result

    # ─── primitives ───────────────────────────────────────────────────

    def table(self, primitive, name, atoms, guard=None, line=0):
        t = Table(len(self.tables) + 1, f'{name}_{len(self.tables) + 1}', primitive, tuple(atoms), guard, line)
        self.tables.append(t)
        return Apply(t.id)

    def prim(self, p):
        atoms = []
        if isinstance(p, Match):
            guard = self.operand(p.pred, atoms)
            return self.table('match', 'match', atoms, guard, p.line)
        if isinstance(p, Tag):
            value = self.operand(p.value, atoms)
            dst = FieldRef(p.field_name)
            self.field_widths[p.field_name] = self.schema.width(p.field_name)
            if isinstance(value, Temp) and atoms and atoms[-1].kind == ALU and atoms[-1].dst == value:
                last = atoms.pop()
                atoms.append(Atom(ALU, dst, last.op, last.args))
            else:
                atoms.append(Atom(ALU, dst, 'move', (value,)))
            return self.table('tag', f'tag_{p.field_name.replace(".", "_")}', atoms, line=p.line)
        if isinstance(p, Stamp):
            atoms.append(Atom(UPDATE, var=p.var, row=0, expr=FieldRef('pkt.ts')))
            return self.table('timestamp', f'timestamp_{p.var}', atoms, line=p.line)
        if isinstance(p, Update):
            self.update(p, atoms)
            return self.table('update', f'{p.var}_{p.method}', atoms, line=p.line)
        if isinstance(p, Duplicate):
            atoms.append(Atom(DUPLICATE, target=p.stream))
            return self.table('duplicate', f'duplicate_{p.stream}', atoms, line=p.line)
        if isinstance(p, Collect):
            atoms.append(Atom(EMIT, target=p.endpoint))
            return self.table('collect', f'collect_{p.endpoint}', atoms, line=p.line)
        raise UnsupportedExpr(f'unknown primitive {p!r}')

    def update(self, p, atoms):
        decl = self.decls[p.var]
        structure = structure_of(decl)
        if p.method == 'reset':
            atoms.append(Atom(RESET, var=p.var))
        elif p.method == 'init':
            atoms.append(Atom(INIT, var=p.var, args=(self.operand(p.args[0], atoms),)))
        elif p.method == 'insert':
            atoms.extend(Atom(UPDATE, var=p.var, row=row, expr=Lit(1)) for row in range(decl.hash_rows))
        elif p.method == 'update':
            atoms.append(Atom(PCSA_UPDATE if structure == PCSA else HLL_UPDATE, var=p.var))
        else:
            expr = p.args[0]
            if p.method == 'add':
                expr = BinOp('+', StateRef(p.var), expr)
            residual = bind_residual(expr, p.var, lambda sub: self.operand(sub, atoms))
            atoms.extend(Atom(UPDATE, var=p.var, row=row, expr=residual) for row in range(decl.hash_rows))

    def node(self, n):
        if isinstance(n, Seq):
            return SeqNode(tuple(self.node(item) for item in n.items))
        if isinstance(n, Par):
            return ParNode(tuple(self.node(b) for b in n.branches))
        return self.prim(n)

    def lower(self):
        control = {stream: self.node(node) for stream, node in self.program.tasks.items()}
        ir = PipelineIR(
            tables=tuple(self.tables),
            control=control,
            decls=tuple(self.program.decls),
            keys=dict(self.program.keys),
            window_ns=self.program.window_ns,
            role=self.program.role,
            defines=dict(self.program.defines),
            field_widths=dict(self.field_widths),
        )
        log.debug('lowered %d tables, %d atoms', len(ir.tables), ir.atom_count)
        return ir


def lower(program, schema=None):
    return Lowerer(program, schema).lower()
