"""
Match-action pipeline IR

A pipeline is a list of tables, one per primitive, and a control tree
per stream. A table runs its atoms in order and then tests its guard;
a false guard halts the enclosing sequence.

Atoms:

    alu          dst <- op(args)       op: binary operators, '!', 'move', 'random'
    read         dst <- var[row]
    update       var[row] <- expr      expr over cell, literals, fields, temporaries
    reset        var <- 0              (keyed slot only for HashMaps)
    init         var <- args[0]
    serialize    dst <- bits of var
    estimate     dst <- cardinality estimate of var
    pcsa_update, hll_update
    duplicate    copy the packet to logical stream `target`
    emit         send the packet to endpoint `target` and halt

JSON layout (version 1): {"version", "role", "window_ns", "defines",
"keys", "decls", "registers", "field_widths", "tables", "control"}.
"""
from dataclasses import dataclass, field
from fractions import Fraction

from ..core.decls import FlowKey, decl_from_dict, decl_to_dict
from ..core.expr import Expr, FieldRef, Temp, expr_from_json, expr_to_json
from ..errors import DeclarationError, IRFormatError

IR_VERSION = 1

ALU = 'alu'
READ = 'read'
UPDATE = 'update'
RESET = 'reset'
INIT = 'init'
SERIALIZE = 'serialize'
ESTIMATE = 'estimate'
PCSA_UPDATE = 'pcsa_update'
HLL_UPDATE = 'hll_update'
DUPLICATE = 'duplicate'
EMIT = 'emit'

STATEFUL = (READ, UPDATE, RESET, INIT, SERIALIZE, ESTIMATE, PCSA_UPDATE, HLL_UPDATE)
WHOLE_STRUCTURE = (RESET, INIT, SERIALIZE, ESTIMATE, PCSA_UPDATE, HLL_UPDATE)
STATE_WRITES = (UPDATE, RESET, INIT, PCSA_UPDATE, HLL_UPDATE)
ATOM_KINDS = (ALU,) + STATEFUL + (DUPLICATE, EMIT)
ALL_ROWS = '*'


@dataclass(frozen=True)
class Atom:
    kind: str
    dst: Expr = None        # Temp or FieldRef
    op: str = None
    args: tuple = ()
    var: str = None
    row: int = None
    expr: Expr = None
    target: str = None

    @property
    def stateful(self):
        return self.kind in STATEFUL

    @property
    def side_effect(self):
        """True for atoms that must not run speculatively ahead of a guard."""
        if self.kind in STATE_WRITES or self.kind in (DUPLICATE, EMIT):
            return True
        return isinstance(self.dst, FieldRef)


@dataclass(frozen=True)
class Table:
    id: int
    name: str
    primitive: str
    atoms: tuple = ()
    guard: Expr = None
    line: int = 0


@dataclass(frozen=True)
class Apply:
    table: int


@dataclass(frozen=True)
class SeqNode:
    items: tuple


@dataclass(frozen=True)
class ParNode:
    branches: tuple


def control_tables(node):
    """Table ids in a control tree, in program order."""
    if isinstance(node, Apply):
        return [node.table]
    children = node.items if isinstance(node, SeqNode) else node.branches
    return [t for child in children for t in control_tables(child)]


@dataclass(frozen=True)
class PipelineIR:
    tables: tuple = ()
    control: dict = field(default_factory=dict)
    decls: tuple = ()
    keys: dict = field(default_factory=dict)
    window_ns: int = None
    role: str = None
    defines: dict = field(default_factory=dict)
    field_widths: dict = field(default_factory=dict)
    version: int = IR_VERSION

    def table(self, table_id):
        for t in self.tables:
            if t.id == table_id:
                return t
        raise IRFormatError(f'control references missing table {table_id}')

    def decl(self, name):
        for d in self.decls:
            if d.name == name:
                return d
        raise IRFormatError(f'atom references undeclared register {name!r}')

    @property
    def atom_count(self):
        return sum(len(t.atoms) for t in self.tables)

    def endpoints(self):
        return sorted({a.target for t in self.tables for a in t.atoms if a.kind == EMIT})

    def uses_random(self):
        return any(a.kind == ALU and a.op == 'random' for t in self.tables for a in t.atoms)

    def registers(self):
        return [
            {
                'name': d.name,
                'kind': d.kind_label(),
                'shape': list(d.array_shape),
                'cell_bits': d.cell_bits,
                'memory_bits': d.memory_bits,
            }
            for d in self.decls
        ]


# ─── dependency resources ─────────────────────────────────────────────

def _operand_resources(e):
    out = set()
    if e is None:
        return out
    if isinstance(e, FieldRef):
        out.add(('field', e.name, None))
    elif isinstance(e, Temp):
        out.add(('temp', e.name, None))
    for child in e.children():
        out |= _operand_resources(child)
    return out


def _dst_resource(dst):
    if isinstance(dst, FieldRef):
        return ('field', dst.name, None)
    return ('temp', dst.name, None)


def _key_fields(decl):
    out = set()
    for key in (decl.key, getattr(decl.base, 'key', None)):
        if key is not None:
            out |= {('field', c, None) for c in key.components}
    return out


def atom_resources(atom, ir):
    """(reads, writes) resource sets of one atom.

    Resources are ('field', name, None), ('temp', name, None) and
    ('state', var, row); row ALL_ROWS covers the whole structure and
    field name ALL_ROWS every header field.
    """
    reads, writes = set(), set()
    for arg in atom.args:
        reads |= _operand_resources(arg)
    reads |= _operand_resources(atom.expr)
    if atom.kind == ALU:
        writes.add(_dst_resource(atom.dst))
    elif atom.kind in (DUPLICATE, EMIT):
        reads.add(('field', ALL_ROWS, None))
    else:
        decl = ir.decl(atom.var)
        reads |= _key_fields(decl)
        cell = ('state', atom.var, ALL_ROWS if atom.kind in WHOLE_STRUCTURE else atom.row)
        reads.add(cell)
        if atom.kind in STATE_WRITES:
            writes.add(cell)
        if atom.dst is not None:
            writes.add(_dst_resource(atom.dst))
    return reads, writes


def guard_resources(guard):
    return _operand_resources(guard)


def resources_conflict(a, b):
    if a[0] != b[0]:
        return False
    if a[1] != b[1] and ALL_ROWS not in (a[1], b[1]):
        return False
    return a[2] == b[2] or ALL_ROWS in (a[2], b[2])


def any_conflict(xs, ys):
    return any(resources_conflict(x, y) for x in xs for y in ys)


# ─── JSON codec ───────────────────────────────────────────────────────

def _opt_expr(e):
    return None if e is None else expr_to_json(e)


def atom_to_json(a):
    out = {'kind': a.kind}
    if a.dst is not None:
        out['dst'] = expr_to_json(a.dst)
    if a.op is not None:
        out['op'] = a.op
    if a.args:
        out['args'] = [expr_to_json(x) for x in a.args]
    if a.var is not None:
        out['var'] = a.var
    if a.row is not None:
        out['row'] = a.row
    if a.expr is not None:
        out['expr'] = expr_to_json(a.expr)
    if a.target is not None:
        out['target'] = a.target
    return out


def atom_from_json(d):
    if d.get('kind') not in ATOM_KINDS:
        raise IRFormatError(f'unknown atom kind {d.get("kind")!r}')
    return Atom(
        kind=d['kind'],
        dst=expr_from_json(d['dst']) if 'dst' in d else None,
        op=d.get('op'),
        args=tuple(expr_from_json(x) for x in d.get('args', ())),
        var=d.get('var'),
        row=d.get('row'),
        expr=expr_from_json(d['expr']) if 'expr' in d else None,
        target=d.get('target'),
    )


def control_to_json(node):
    if isinstance(node, Apply):
        return {'apply': node.table}
    if isinstance(node, SeqNode):
        return {'seq': [control_to_json(n) for n in node.items]}
    return {'par': [control_to_json(n) for n in node.branches]}


def control_from_json(d):
    if 'apply' in d:
        return Apply(int(d['apply']))
    if 'seq' in d:
        return SeqNode(tuple(control_from_json(n) for n in d['seq']))
    if 'par' in d:
        return ParNode(tuple(control_from_json(n) for n in d['par']))
    raise IRFormatError(f'malformed control node {d!r}')


def _define_to_json(value):
    return value if isinstance(value, int) else str(value)


def _define_from_json(value):
    return value if isinstance(value, int) else Fraction(value)


def ir_to_json(ir):
    return {
        'version': ir.version,
        'role': ir.role,
        'window_ns': ir.window_ns,
        'defines': {k: _define_to_json(v) for k, v in sorted(ir.defines.items())},
        'keys': {name: list(key.components) for name, key in sorted(ir.keys.items())},
        'decls': [decl_to_dict(d) for d in ir.decls],
        'registers': ir.registers(),
        'field_widths': dict(sorted(ir.field_widths.items())),
        'tables': [
            {
                'id': t.id,
                'name': t.name,
                'primitive': t.primitive,
                'line': t.line,
                'guard': _opt_expr(t.guard),
                'atoms': [atom_to_json(a) for a in t.atoms],
            }
            for t in ir.tables
        ],
        'control': {stream: control_to_json(node) for stream, node in sorted(ir.control.items())},
    }


def ir_from_json(data):
    if not isinstance(data, dict):
        raise IRFormatError('IR document must be an object')
    if data.get('version') != IR_VERSION:
        raise IRFormatError(f'unsupported IR version {data.get("version")!r}')
    try:
        keys = {name: FlowKey(name, tuple(comps)) for name, comps in data.get('keys', {}).items()}
        tables = tuple(
            Table(
                id=int(t['id']),
                name=t['name'],
                primitive=t['primitive'],
                atoms=tuple(atom_from_json(a) for a in t.get('atoms', ())),
                guard=expr_from_json(t['guard']) if t.get('guard') is not None else None,
                line=int(t.get('line', 0)),
            )
            for t in data.get('tables', ())
        )
        ir = PipelineIR(
            tables=tables,
            control={s: control_from_json(n) for s, n in data.get('control', {}).items()},
            decls=tuple(decl_from_dict(d, keys) for d in data.get('decls', ())),
            keys=keys,
            window_ns=data.get('window_ns'),
            role=data.get('role'),
            defines={k: _define_from_json(v) for k, v in data.get('defines', {}).items()},
            field_widths={k: int(v) for k, v in data.get('field_widths', {}).items()},
        )
    except (KeyError, TypeError, ValueError, DeclarationError) as e:
        raise IRFormatError(f'malformed IR: {e}') from e
    for node in ir.control.values():
        for table_id in control_tables(node):
            ir.table(table_id)
    return ir
