"""
Program and composition tree
"""
from dataclasses import dataclass, field, replace
from fractions import Fraction

from ..core.expr import StateRef, Random
from ..errors import TopologyError

BUILTIN_STREAMS = ('pkts', 'ctrl')
NS_PER_SECOND = 10 ** 9


class Node:
    __slots__ = ()

    def children(self):
        return ()


@dataclass(frozen=True)
class Seq(Node):
    items: tuple

    def children(self):
        return self.items


@dataclass(frozen=True)
class Par(Node):
    branches: tuple

    def children(self):
        return self.branches


@dataclass(frozen=True)
class Prim(Node):
    """Base class of primitive calls; positions are not part of equality."""

    def exprs(self):
        return ()


@dataclass(frozen=True)
class Match(Prim):
    pred: object
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def exprs(self):
        return (self.pred,)


@dataclass(frozen=True)
class Tag(Prim):
    field_name: str
    value: object
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def exprs(self):
        return (self.value,)


@dataclass(frozen=True)
class Stamp(Prim):
    """timestamp(var): store the local clock."""
    var: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Update(Prim):
    """A state-mutating method call: set, insert, init, reset, update."""
    var: str
    method: str
    args: tuple = ()
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def exprs(self):
        return self.args


@dataclass(frozen=True)
class Duplicate(Prim):
    stream: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Collect(Prim):
    endpoint: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


def seq(items):
    """Build a Seq, flattening nested Seqs."""
    flat = []
    for item in items:
        flat.extend(item.items if isinstance(item, Seq) else (item,))
    return Seq(tuple(flat))


def par(branches):
    """Build a Par, flattening nested Pars; a single branch is returned as is."""
    flat = []
    for branch in branches:
        if isinstance(branch, Par):
            flat.extend(branch.branches)
        elif isinstance(branch, Seq) and len(branch.items) == 1 and isinstance(branch.items[0], Par):
            flat.extend(branch.items[0].branches)
        else:
            flat.append(branch)
    if len(flat) == 1:
        return flat[0]
    return Par(tuple(flat))


def walk(node):
    """Pre-order traversal of a composition tree."""
    yield node
    for child in node.children():
        yield from walk(child)


def prims(node):
    return [n for n in walk(node) if isinstance(n, Prim)]


def walk_expr(e):
    yield e
    for child in e.children():
        yield from walk_expr(child)


def state_reads(node):
    """State variables read by expressions under `node`."""
    names = set()
    for prim in prims(node):
        for e in prim.exprs():
            names.update(x.var for x in walk_expr(e) if isinstance(x, StateRef))
    return names


def state_writes(node):
    names = set()
    for prim in prims(node):
        if isinstance(prim, (Update, Stamp)):
            names.add(prim.var)
    return names


@dataclass(frozen=True)
class Program:
    """A parsed measurement program, or one role segment of it."""
    keys: dict = field(default_factory=dict)
    decls: tuple = ()
    window_ns: int = None
    tasks: dict = field(default_factory=dict)
    roles: dict = field(default_factory=dict)
    role: str = None
    defines: dict = field(default_factory=dict, compare=False)

    @property
    def window(self):
        """Window length in seconds, or None."""
        if self.window_ns is None:
            return None
        return Fraction(self.window_ns, NS_PER_SECOND)

    @property
    def state_names(self):
        return [d.name for d in self.decls]

    def decl(self, name):
        for d in self.decls:
            if d.name == name:
                return d
        return None

    def all_decls(self):
        decls = list(self.decls)
        for segment in self.roles.values():
            decls.extend(segment.decls)
        return decls

    def for_role(self, role=None):
        """The single-switch program installed for `role`."""
        if role is None:
            if self.roles:
                raise TopologyError(f'program defines roles {sorted(self.roles)}; a role is required')
            return self
        if role not in self.roles:
            raise TopologyError(f'program has no role {role!r} (roles: {sorted(self.roles)})')
        segment = self.roles[role]
        tasks = dict(self.tasks)
        for stream, node in segment.tasks.items():
            tasks[stream] = seq([par([tasks[stream], node])]) if stream in tasks else node
        return Program(
            keys={**self.keys, **segment.keys},
            decls=self.decls + segment.decls,
            window_ns=segment.window_ns if segment.window_ns is not None else self.window_ns,
            tasks=tasks,
            role=role,
            defines=self.defines,
        )

    def segments(self):
        """(role, task map) pairs for the shared part and every role block."""
        yield None, self.tasks
        for role, segment in self.roles.items():
            yield role, segment.tasks

    def all_prims(self):
        for _, tasks in self.segments():
            for node in tasks.values():
                yield from prims(node)

    def produced_streams(self):
        return {p.stream for p in self.all_prims() if isinstance(p, Duplicate)}

    def endpoints(self):
        return sorted({p.endpoint for p in self.all_prims() if isinstance(p, Collect)})

    def uses_random(self):
        for prim in self.all_prims():
            for e in prim.exprs():
                if any(isinstance(x, Random) for x in walk_expr(e)):
                    return True
        return False

    def without_defines(self):
        return replace(self, defines={})
