"""
Static checks over composition trees: Par conflicts, dead primitives,
unconsumed logical streams. Diagnostics only, never blocking.
"""
from ..core.expr import COMPARISONS, NEGATED_COMPARISON, BinOp, Not
from ..errors import Diagnostic
from .ast import Collect, Match, Par, Seq, prims, state_reads, state_writes, walk


def _conjuncts(e):
    if isinstance(e, BinOp) and e.op == '&&':
        return _conjuncts(e.left) + _conjuncts(e.right)
    return [e]


def _negates(a, b):
    if a == Not(b) or b == Not(a):
        return True
    if isinstance(a, BinOp) and isinstance(b, BinOp) and a.op in COMPARISONS:
        return b == BinOp(NEGATED_COMPARISON[a.op], a.left, a.right)
    return False


def complementary(a, b):
    """True when guards `a` and `b` can never hold together (syntactically)."""
    if a is None or b is None:
        return False
    return any(_negates(x, y) for x in _conjuncts(a) for y in _conjuncts(b))


def leading_guard(branch):
    if isinstance(branch, Match):
        return branch.pred
    if isinstance(branch, Seq) and branch.items and isinstance(branch.items[0], Match):
        return branch.items[0].pred
    return None


def _position(node):
    for prim in prims(node):
        return prim.line, prim.col
    return 0, 0


def par_conflicts(node):
    diagnostics = []
    branches = node.branches
    for i in range(len(branches)):
        for j in range(i + 1, len(branches)):
            a, b = branches[i], branches[j]
            wa, wb = state_writes(a), state_writes(b)
            ra, rb = state_reads(a), state_reads(b)
            both = wa & wb
            read_write = ((wa & rb) | (ra & wb)) - both
            if not both and not read_write:
                continue
            exclusive = complementary(leading_guard(a), leading_guard(b))
            severity = 'info' if exclusive else 'warning'
            suffix = ' (complementary guards)' if exclusive else ''
            line, col = _position(b)
            for var in sorted(both):
                diagnostics.append(Diagnostic(
                    severity, 'conflict-write-write',
                    f'branches {i + 1} and {j + 1} of a parallel composition both write {var!r}{suffix}',
                    line, col))
            for var in sorted(read_write):
                diagnostics.append(Diagnostic(
                    severity, 'conflict-read-write',
                    f'branches {i + 1} and {j + 1} of a parallel composition read and write {var!r}{suffix}',
                    line, col))
    return diagnostics


def dead_after_collect(node):
    for index, item in enumerate(node.items[:-1]):
        if isinstance(item, Collect):
            line, col = _position(node.items[index + 1])
            return [Diagnostic('warning', 'unreachable-after-collect',
                               f'primitives after collect({item.endpoint}) never run', line, col)]
    return []


def validate_composition(program):
    """Conflict report for every Par node plus dead-code and stream warnings."""
    diagnostics = []
    consumed = set()
    for _, tasks in program.segments():
        consumed.update(tasks)
        for node in tasks.values():
            for n in walk(node):
                if isinstance(n, Par):
                    diagnostics.extend(par_conflicts(n))
                elif isinstance(n, Seq):
                    diagnostics.extend(dead_after_collect(n))
    for prim in program.all_prims():
        if getattr(prim, 'stream', None) and prim.stream not in consumed:
            diagnostics.append(Diagnostic('warning', 'unconsumed-stream',
                                          f'no task consumes logical stream {prim.stream!r}',
                                          prim.line, prim.col))
    return diagnostics
