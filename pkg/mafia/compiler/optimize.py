"""
Semantics-preserving IR passes

    fold_constants     evaluate ALU atoms over literals, propagate results
    simplify_guards    drop guards that are constant true
    prune_unreachable  drop tables after a constant-false guard in a sequence
    drop_empty         remove tables with neither atoms nor guard
    merge_guards       remove a guard-only table repeating the previous guard
    fuse_tables        merge adjacent independent tables when the first has no guard

No pass adds atoms.
"""
import logging
from dataclasses import replace

from ..core.expr import BinOp, Lit, Not, Temp, apply_binop
from .ir import (
    ALU, Apply, ParNode, SeqNode, any_conflict, atom_resources, guard_resources,
)

log = logging.getLogger(__name__)


# ─── constant folding ────────────────────────────────────────────────

def _subst(e, env):
    if e is None:
        return None
    if isinstance(e, Temp):
        return env.get(e.name, e)
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst(e.left, env), _subst(e.right, env))
    if isinstance(e, Not):
        return Not(_subst(e.operand, env))
    return e


def _fold(atom):
    """Literal result of an ALU atom over literals, or None."""
    if atom.op == 'random' or not all(isinstance(a, Lit) for a in atom.args):
        return None
    values = [a.value for a in atom.args]
    if atom.op == 'move':
        return values[0]
    if atom.op == '!':
        return int(not values[0])
    if atom.op == '/' and values[1] == 0:
        return None
    return apply_binop(atom.op, values[0], values[1])


def fold_constants(ir):
    env = {}
    tables = []
    for table in ir.tables:
        atoms = []
        for atom in table.atoms:
            atom = replace(atom, args=tuple(_subst(a, env) for a in atom.args), expr=_subst(atom.expr, env))
            if atom.kind == ALU:
                value = _fold(atom)
                if value is not None and isinstance(atom.dst, Temp):
                    env[atom.dst.name] = Lit(value)
                    continue
                if value is not None:
                    atom = replace(atom, op='move', args=(Lit(value),))
                elif atom.op == 'move' and isinstance(atom.dst, Temp) and isinstance(atom.args[0], Temp):
                    env[atom.dst.name] = atom.args[0]
                    continue
            atoms.append(atom)
        tables.append(replace(table, atoms=tuple(atoms), guard=_subst(table.guard, env)))
    return replace(ir, tables=tuple(tables))


def simplify_guards(ir):
    tables = tuple(
        replace(t, guard=None) if isinstance(t.guard, Lit) and t.guard.value else t
        for t in ir.tables
    )
    return replace(ir, tables=tables)


# ─── control rewrites ────────────────────────────────────────────────

def _map_seqs(control, seq_fn):
    """Apply seq_fn(list of items) to every SeqNode, bottom-up."""
    def walk(node):
        if isinstance(node, Apply):
            return node
        if isinstance(node, ParNode):
            return ParNode(tuple(walk(b) for b in node.branches))
        return SeqNode(tuple(seq_fn([walk(item) for item in node.items])))

    return {stream: walk(node) for stream, node in control.items()}


def _rewrite(ir, seq_fn):
    return _gc(replace(ir, control=_map_seqs(ir.control, seq_fn)))


def _gc(ir):
    """Drop tables no control tree applies."""
    used = set()

    def mark(node):
        if isinstance(node, Apply):
            used.add(node.table)
        else:
            for child in (node.items if isinstance(node, SeqNode) else node.branches):
                mark(child)

    for node in ir.control.values():
        mark(node)
    return replace(ir, tables=tuple(t for t in ir.tables if t.id in used))


def prune_unreachable(ir):
    def seq_fn(items):
        for i, item in enumerate(items):
            if isinstance(item, Apply):
                guard = ir.table(item.table).guard
                if isinstance(guard, Lit) and not guard.value:
                    return items[:i + 1]
        return items
    return _rewrite(ir, seq_fn)


def drop_empty(ir):
    empty = {t.id for t in ir.tables if not t.atoms and t.guard is None}

    def seq_fn(items):
        return [i for i in items if not (isinstance(i, Apply) and i.table in empty)]
    return _rewrite(ir, seq_fn)


def merge_guards(ir):
    def seq_fn(items):
        out = []
        for item in items:
            if out and isinstance(item, Apply) and isinstance(out[-1], Apply):
                prev, cur = ir.table(out[-1].table), ir.table(item.table)
                if not cur.atoms and cur.guard is not None and cur.guard == prev.guard:
                    continue
            out.append(item)
        return out
    return _rewrite(ir, seq_fn)


def _independent(a, b, ir):
    ra, wa = set(), set()
    for atom in a.atoms:
        r, w = atom_resources(atom, ir)
        ra |= r
        wa |= w
    rb, wb = guard_resources(b.guard), set()
    for atom in b.atoms:
        r, w = atom_resources(atom, ir)
        rb |= r
        wb |= w
    return not (any_conflict(wa, rb) or any_conflict(wa, wb) or any_conflict(ra, wb))


def fuse_tables(ir):
    tables = {t.id: t for t in ir.tables}

    def seq_fn(items):
        out = []
        for item in items:
            if out and isinstance(item, Apply) and isinstance(out[-1], Apply):
                first, second = tables[out[-1].table], tables[item.table]
                if first.guard is None and _independent(first, second, ir):
                    tables[first.id] = replace(
                        first,
                        name=f'{first.name}__{second.name}',
                        atoms=first.atoms + second.atoms,
                        guard=second.guard,
                    )
                    continue
            out.append(item)
        return out

    control = _map_seqs(ir.control, seq_fn)
    fused = replace(ir, tables=tuple(tables[t.id] for t in ir.tables), control=control)
    return _gc(fused)


PASSES = (fold_constants, simplify_guards, prune_unreachable, drop_empty, merge_guards, fuse_tables)


def optimize(ir, passes=PASSES):
    for p in passes:
        before = (len(ir.tables), ir.atom_count)
        ir = p(ir)
        log.debug('%s: tables %d -> %d, atoms %d -> %d',
                  p.__name__, before[0], len(ir.tables), before[1], ir.atom_count)
    return ir
