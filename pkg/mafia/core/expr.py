"""
Expression trees over packet fields and state, with the evaluator
and the source printer.

Values are unsigned 64-bit integers; arithmetic wraps modulo 2^64,
comparisons and logical operators yield 0 or 1, `/` truncates and
division by zero raises DivisionByZero. `&&` and `||` evaluate both
operands.
"""
from dataclasses import dataclass

from ..errors import DivisionByZero, UnknownState

M64 = (1 << 64) - 1

# Binding strength, loosest first. Unary `!` is 9, atoms 10.
PRECEDENCE = {
    '||': 1, '&&': 2,
    '==': 3, '!=': 3, '<': 3, '<=': 3, '>': 3, '>=': 3,
    '|': 4, '&': 5, '<<': 6, '>>': 6,
    '+': 7, '-': 7, '*': 8, '/': 8,
}
FUNCTION_OPS = ('max', 'min')
BINARY_OPS = tuple(PRECEDENCE) + FUNCTION_OPS
COMPARISONS = ('==', '!=', '<', '<=', '>', '>=')
NEGATED_COMPARISON = {'==': '!=', '!=': '==', '<': '>=', '>=': '<', '>': '<=', '<=': '>'}


class Expr:
    __slots__ = ()

    def children(self):
        return ()


@dataclass(frozen=True)
class Lit(Expr):
    value: int


@dataclass(frozen=True)
class FieldRef(Expr):
    name: str


@dataclass(frozen=True)
class StateRef(Expr):
    """Read of a state variable, bare (method None) or through a query method."""
    var: str
    method: str = None
    args: tuple = ()

    def children(self):
        return self.args


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Random(Expr):
    """Uniform draw on [lo, hi) from the run's seeded generator."""
    lo: int
    hi: int


@dataclass(frozen=True)
class Temp(Expr):
    """Compiler temporary (pipeline metadata field)."""
    name: str


@dataclass(frozen=True)
class Cell(Expr):
    """The state cell a set-expression or stateful atom is updating."""


def apply_binop(op, a, b):
    if op == '+':
        return (a + b) & M64
    if op == '-':
        return (a - b) & M64
    if op == '*':
        return (a * b) & M64
    if op == '/':
        if b == 0:
            raise DivisionByZero(f'{a} / 0')
        return a // b
    if op == '&':
        return a & b
    if op == '|':
        return a | b
    if op == '<<':
        return (a << b) & M64 if b < 64 else 0
    if op == '>>':
        return a >> b if b < 64 else 0
    if op == '==':
        return int(a == b)
    if op == '!=':
        return int(a != b)
    if op == '<':
        return int(a < b)
    if op == '<=':
        return int(a <= b)
    if op == '>':
        return int(a > b)
    if op == '>=':
        return int(a >= b)
    if op == '&&':
        return int(bool(a) and bool(b))
    if op == '||':
        return int(bool(a) or bool(b))
    if op == 'max':
        return max(a, b)
    if op == 'min':
        return min(a, b)
    raise ValueError(f'unknown operator {op!r}')


def evaluate(e, packet, state=None, rng=None, temps=None, cell=None):
    """Evaluate `e` against a packet.

    `state` answers StateRef reads through `state.query(ref, packet, rng)`,
    `temps` maps compiler temporaries, `cell` is the bound cell value.
    """
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, FieldRef):
        return packet.get(e.name)
    if isinstance(e, BinOp):
        a = evaluate(e.left, packet, state, rng, temps, cell)
        b = evaluate(e.right, packet, state, rng, temps, cell)
        return apply_binop(e.op, a, b)
    if isinstance(e, Not):
        return int(not evaluate(e.operand, packet, state, rng, temps, cell))
    if isinstance(e, StateRef):
        if state is None:
            raise UnknownState(e.var)
        return state.query(e, packet, rng)
    if isinstance(e, Temp):
        return temps[e.name]
    if isinstance(e, Cell):
        return cell
    if isinstance(e, Random):
        return int(rng.integers(e.lo, e.hi))
    raise TypeError(f'cannot evaluate {e!r}')


def eval_expr(e, p, s, rng):
    return evaluate(e, p, s, rng)


def mentions(e, var):
    """True when `e` reads the bare symbol `var`."""
    if isinstance(e, StateRef) and e.var == var and e.method is None:
        return True
    return any(mentions(c, var) for c in e.children())


def bind_residual(e, var, settle):
    """Split a set-expression for variable `var`.

    Every maximal sub-expression that does not mention the bare symbol
    is replaced by whatever `settle(sub)` returns (a literal in the
    interpreter, a temporary in the compiler), left to right;
    the bare symbol becomes Cell(). Literals and field reads are kept.
    """
    if isinstance(e, StateRef) and e.var == var and e.method is None:
        return Cell()
    if not mentions(e, var):
        if isinstance(e, (Lit, FieldRef)):
            return e
        return settle(e)
    if isinstance(e, BinOp):
        left = bind_residual(e.left, var, settle)
        right = bind_residual(e.right, var, settle)
        return BinOp(e.op, left, right)
    if isinstance(e, Not):
        return Not(bind_residual(e.operand, var, settle))
    # A query method of `var` that takes the bare symbol as argument.
    return settle(e)


def precedence(e):
    if isinstance(e, BinOp) and e.op in PRECEDENCE:
        return PRECEDENCE[e.op]
    if isinstance(e, Not):
        return 9
    return 10


def to_source(e):
    """Render an expression in MAFIA concrete syntax."""
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, FieldRef):
        return e.name
    if isinstance(e, StateRef):
        if e.method is None:
            return e.var
        return f'{e.var}.{e.method}({", ".join(to_source(a) for a in e.args)})'
    if isinstance(e, Random):
        return f'random({e.lo}:{e.hi})'
    if isinstance(e, Temp):
        return f'${e.name}'
    if isinstance(e, Cell):
        return '@cell'
    if isinstance(e, Not):
        inner = to_source(e.operand)
        return f'!{inner}' if precedence(e.operand) >= 9 else f'!({inner})'
    if isinstance(e, BinOp):
        if e.op in FUNCTION_OPS:
            return f'{e.op}({to_source(e.left)}, {to_source(e.right)})'
        p = PRECEDENCE[e.op]
        left = to_source(e.left)
        right = to_source(e.right)
        if precedence(e.left) < p:
            left = f'({left})'
        if precedence(e.right) <= p:
            right = f'({right})'
        return f'{left} {e.op} {right}'
    raise TypeError(f'cannot print {e!r}')


def expr_to_json(e):
    if isinstance(e, Lit):
        return {'lit': e.value}
    if isinstance(e, FieldRef):
        return {'field': e.name}
    if isinstance(e, Temp):
        return {'temp': e.name}
    if isinstance(e, Cell):
        return {'cell': True}
    if isinstance(e, Random):
        return {'random': [e.lo, e.hi]}
    if isinstance(e, Not):
        return {'op': '!', 'args': [expr_to_json(e.operand)]}
    if isinstance(e, BinOp):
        return {'op': e.op, 'args': [expr_to_json(e.left), expr_to_json(e.right)]}
    if isinstance(e, StateRef):
        return {'state': e.var, 'method': e.method, 'args': [expr_to_json(a) for a in e.args]}
    raise TypeError(f'cannot serialize {e!r}')


def expr_from_json(d):
    if 'lit' in d:
        return Lit(int(d['lit']))
    if 'field' in d:
        return FieldRef(d['field'])
    if 'temp' in d:
        return Temp(d['temp'])
    if 'cell' in d:
        return Cell()
    if 'random' in d:
        lo, hi = d['random']
        return Random(int(lo), int(hi))
    if 'state' in d:
        return StateRef(d['state'], d.get('method'), tuple(expr_from_json(a) for a in d.get('args', [])))
    if d.get('op') == '!':
        return Not(expr_from_json(d['args'][0]))
    if d.get('op') in BINARY_OPS:
        left, right = d['args']
        return BinOp(d['op'], expr_from_json(left), expr_from_json(right))
    raise ValueError(f'malformed expression {d!r}')
