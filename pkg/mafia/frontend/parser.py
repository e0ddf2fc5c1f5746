"""
Recursive-descent parser for MAFIA programs
"""
import logging
from contextlib import contextmanager
from fractions import Fraction

from ..core.decls import (
    ALG_ALIASES, BloomKind, CounterKind, FlowKey, HashMapKind, SketchKind,
    StateDecl, TimestampKind, canonical_method, query_methods, update_methods,
)
from ..core.expr import M64, PRECEDENCE, BinOp, FieldRef, Lit, Not, Random, StateRef
from ..errors import (
    ArityError, DeclarationError, DuplicateDecl, MafiaSyntaxError,
    UnboundConstant, UndeclaredState, UnknownField, UnknownStream,
)
from .ast import (
    BUILTIN_STREAMS, NS_PER_SECOND, Collect, Duplicate, Match, Par, Prim, Program,
    Seq, Stamp, Tag, Update, par, seq, walk,
)
from .lexer import DURATION, EOF, IDENT, NUMBER, OP, STRING, tokenize

log = logging.getLogger(__name__)

KEY_CTORS = ('Key', 'key')
MAX_NESTING = 100
KWARG_ALIASES = {'w': 'width'}
DURATION_UNITS = {'ns': Fraction(1, 10 ** 9), 'us': Fraction(1, 10 ** 6), 'ms': Fraction(1, 1000), 's': Fraction(1)}

# Constructor name -> (required kwargs, optional kwargs)
CTOR_KWARGS = {
    'Counter': ((), ('width',)),
    'Timestamp': ((), ()),
    'BloomFilter': (('alg', 'key', 'nhash', 'size'), ('width',)),
    'Sketch': (('alg', 'key', 'nhash', 'size'), ('width',)),
    'HashMap': (('key', 'size', 'type'), ()),
}


class _Scope:
    """Declarations and tasks of the shared program or of one role block."""

    def __init__(self):
        self.keys = {}
        self.decls = []
        self.window_ns = None
        self.tasks = {}
        self.task_tokens = {}

    def build(self, role=None):
        return Program(
            keys=dict(self.keys),
            decls=tuple(self.decls),
            window_ns=self.window_ns,
            tasks=dict(self.tasks),
            role=role,
        )


def parse_number(text):
    if text.lower().startswith('0x'):
        return int(text, 16)
    return int(text, 10)


class Parser:
    def __init__(self, source, schema, defines=None):
        self.tokens = tokenize(source)
        self.pos = 0
        self.schema = schema
        self.defines = dict(defines or {})
        self.names = {}          # declared name -> token
        self.decls = {}          # state name -> StateDecl
        self.keys = {}
        self.positions = {}      # id(StateRef) -> token
        self.depth = 0
        self._prescan()

    # ─── Token helpers ─────────────────────────────────────────────────

    def peek(self, k=0):
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self):
        tok = self.peek()
        if tok.type != EOF:
            self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return MafiaSyntaxError(message, tok.line, tok.col)

    def expect_op(self, value):
        tok = self.next()
        if not tok.is_op(value):
            raise self.error(f"expected '{value}', got {tok}", tok)
        return tok

    def expect(self, type_, what):
        tok = self.next()
        if tok.type != type_:
            raise self.error(f'expected {what}, got {tok}', tok)
        return tok

    def accept_op(self, value):
        if self.peek().is_op(value):
            return self.next()
        return None

    @contextmanager
    def nested(self, tok):
        """Count one level of parentheses or negation opened at `tok`."""
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self.error(f'nested more than {MAX_NESTING} levels deep', tok)
        try:
            yield
        finally:
            self.depth -= 1

    def _prescan(self):
        """Collect declared names, key names, state-like uses and produced streams."""
        toks = self.tokens
        self.declared = set()
        self.key_names = set()
        self.state_uses = set()
        for i, tok in enumerate(toks[:-1]):
            if tok.type != IDENT:
                continue
            prev = toks[i - 1] if i else None
            if toks[i + 1].is_op('=') and not (prev is not None and prev.is_op('(', ',')):
                self.declared.add(tok.value)
                if toks[i + 2].type == IDENT and toks[i + 2].value in KEY_CTORS:
                    self.key_names.add(tok.value)
            elif '.' in tok.value and toks[i + 1].is_op('('):
                self.state_uses.add(tok.value.rsplit('.', 1)[0])
            elif tok.value == 'timestamp' and toks[i + 1].is_op('(') and toks[i + 2].type == IDENT:
                self.state_uses.add(toks[i + 2].value)
        self.state_names = self.declared - self.key_names

    # ─── Program ───────────────────────────────────────────────────────

    def parse_program(self):
        shared = _Scope()
        roles = {}
        while self.peek().type != EOF:
            if self.peek().is_op('@'):
                name, scope = self._role_block()
                if name in roles:
                    raise DuplicateDecl(f'@role("{name}")', self.peek().line, self.peek().col)
                roles[name] = scope
            else:
                self._statement(shared)
        self._check_streams(shared, roles)
        self._check_methods(shared, roles)
        return Program(
            keys=dict(shared.keys),
            decls=tuple(shared.decls),
            window_ns=shared.window_ns,
            tasks=dict(shared.tasks),
            roles={name: scope.build(role=name) for name, scope in roles.items()},
            defines=dict(self.defines),
        )

    def _role_block(self):
        self.expect_op('@')
        tok = self.expect(IDENT, "'role'")
        if tok.value != 'role':
            raise self.error(f"unknown annotation @{tok.value}", tok)
        self.expect_op('(')
        name = self.expect(STRING, 'role name').value
        self.expect_op(')')
        self.expect_op('{')
        scope = _Scope()
        while not self.peek().is_op('}'):
            if self.peek().type == EOF:
                raise self.error("unterminated role block, expected '}'")
            if self.peek().is_op('@'):
                raise self.error('role blocks cannot be nested')
            self._statement(scope)
        self.expect_op('}')
        return name, scope

    def _statement(self, scope):
        tok = self.peek()
        if tok.is_op(';'):
            self.next()
            return
        if tok.type != IDENT:
            raise self.error(f'expected a declaration, window or task, got {tok}', tok)
        if self.peek(1).is_op('='):
            self._declaration(scope)
        elif tok.value == 'window' and self.peek(1).is_op('('):
            self.next()
            self._set_window(scope, tok)
        elif self.peek(1).is_op('>>') or (tok.value.endswith('.window') and self.peek(1).is_op('(')):
            self._task(scope)
        else:
            raise self.error(f'expected a declaration, window or task, got {tok}', tok)
        self.accept_op(';')

    # ─── Declarations ──────────────────────────────────────────────────

    def _declaration(self, scope):
        name_tok = self.next()
        name = name_tok.value
        if '.' in name:
            raise self.error(f'invalid declaration name {name!r}', name_tok)
        if name in self.names or name in BUILTIN_STREAMS:
            raise DuplicateDecl(name, name_tok.line, name_tok.col)
        self.names[name] = name_tok
        self.expect_op('=')
        ctor = self.expect(IDENT, 'a constructor')
        if ctor.value in KEY_CTORS:
            key = FlowKey(name, self._key_components())
            scope.keys[name] = key
            self.keys[name] = key
            return
        kind = self._kind(ctor)
        decl = StateDecl(name, kind, name_tok.line, name_tok.col)
        scope.decls.append(decl)
        self.decls[name] = decl

    def _key_components(self):
        self.expect_op('(')
        components = []
        while not self.peek().is_op(')'):
            tok = self.expect(IDENT, 'a field name')
            components.append(self._field(tok))
            if not self.accept_op(','):
                break
        close = self.expect_op(')')
        if not components:
            raise DeclarationError('a key needs at least one field', close.line, close.col)
        return tuple(components)

    def _field(self, tok):
        try:
            return self.schema.resolve(tok.value)
        except UnknownField:
            raise UnknownField(tok.value, tok.line, tok.col) from None

    def _kwargs(self):
        self.expect_op('(')
        kwargs = {}
        while not self.peek().is_op(')'):
            name_tok = self.expect(IDENT, 'a keyword argument')
            name = KWARG_ALIASES.get(name_tok.value, name_tok.value)
            self.expect_op('=')
            value = self._kwarg_value()
            if name in kwargs and kwargs[name][0] != value:
                raise DeclarationError(f'conflicting values for {name!r}', name_tok.line, name_tok.col)
            kwargs[name] = (value, name_tok)
            if not self.accept_op(','):
                break
        self.expect_op(')')
        return kwargs

    def _kwarg_value(self):
        tok = self.next()
        if tok.type == NUMBER:
            return self._int_literal(tok)
        if tok.type == STRING:
            return tok.value
        if tok.type == IDENT:
            if self.peek().is_op('('):
                return self._kind(tok)
            if tok.value in self.keys:
                return self.keys[tok.value]
            if tok.value in self.key_names:
                raise DeclarationError(f'key {tok.value!r} is used before its definition', tok.line, tok.col)
            return self._constant(tok)
        raise self.error(f'expected a value, got {tok}', tok)

    def _kind(self, ctor):
        if ctor.value not in CTOR_KWARGS:
            raise self.error(f'unknown constructor {ctor.value!r}', ctor)
        required, optional = CTOR_KWARGS[ctor.value]
        kwargs = self._kwargs()
        for name, (_, tok) in kwargs.items():
            if name not in required + optional:
                raise DeclarationError(f'{ctor.value} has no argument {name!r}', tok.line, tok.col)
        missing = [name for name in required if name not in kwargs]
        if missing:
            raise DeclarationError(f'{ctor.value} is missing {", ".join(missing)}', ctor.line, ctor.col)
        args = {name: value for name, (value, _) in kwargs.items()}
        try:
            kind = self._build_kind(ctor.value, args)
            kind.check()
        except DeclarationError as e:
            raise DeclarationError(str(e), ctor.line, ctor.col) from None
        except (TypeError, ValueError) as e:
            raise DeclarationError(f'{ctor.value}: {e}', ctor.line, ctor.col) from None
        return kind

    @staticmethod
    def _build_kind(ctor, args):
        def key():
            if not isinstance(args['key'], FlowKey):
                raise DeclarationError(f'{ctor}: key must name a Key(...) definition')
            return args['key']

        def integer(name, default=None):
            value = args.get(name, default)
            if not isinstance(value, int):
                raise DeclarationError(f'{ctor}: {name} must be an integer')
            return value

        if ctor == 'Counter':
            return CounterKind(integer('width', 32))
        if ctor == 'Timestamp':
            return TimestampKind()
        if ctor == 'HashMap':
            inner = args['type']
            if not isinstance(inner, (CounterKind, TimestampKind)):
                raise DeclarationError('HashMap: type must be Counter(...) or Timestamp()')
            return HashMapKind(key(), integer('size'), inner)
        alg = args['alg']
        if not isinstance(alg, str):
            raise DeclarationError(f'{ctor}: alg must be a string')
        alg = ALG_ALIASES.get(alg.lower(), alg.lower())
        cls = BloomKind if ctor == 'BloomFilter' else SketchKind
        return cls(alg, key(), integer('nhash'), integer('size'), integer('width', 32))

    # ─── Windows and durations ─────────────────────────────────────────

    def _set_window(self, scope, tok):
        self.expect_op('(')
        seconds = self._duration()
        self.expect_op(')')
        ns = seconds * NS_PER_SECOND
        if ns.denominator != 1 or ns <= 0:
            raise DeclarationError(f'window must be a positive whole number of nanoseconds, got {seconds}s',
                                   tok.line, tok.col)
        if scope.window_ns is not None:
            raise DuplicateDecl('window', tok.line, tok.col)
        scope.window_ns = int(ns)

    def _duration(self):
        value = self._duration_term()
        while self.peek().is_op('+', '-'):
            op = self.next().value
            rhs = self._duration_term()
            value = value + rhs if op == '+' else value - rhs
        return value

    def _duration_term(self):
        value = self._duration_factor()
        while self.peek().is_op('*', '/'):
            op = self.next()
            rhs = self._duration_factor()
            if op.value == '/':
                if rhs == 0:
                    raise DeclarationError('division by zero in window length', op.line, op.col)
                value = value / rhs
            else:
                value = value * rhs
        return value

    def _duration_factor(self):
        tok = self.next()
        if tok.type == DURATION:
            for unit in ('ns', 'us', 'ms', 's'):
                if tok.value.endswith(unit):
                    return Fraction(tok.value[:-len(unit)]) * DURATION_UNITS[unit]
        if tok.type == NUMBER:
            if tok.value.lower().startswith('0x'):
                return Fraction(int(tok.value, 16))
            return Fraction(tok.value)
        if tok.type == IDENT:
            if tok.value not in self.defines:
                raise UnboundConstant(tok.value, tok.line, tok.col)
            return Fraction(self.defines[tok.value])
        if tok.is_op('('):
            with self.nested(tok):
                value = self._duration()
            self.expect_op(')')
            return value
        raise self.error(f'expected a duration, got {tok}', tok)

    # ─── Tasks and composition ─────────────────────────────────────────

    def _task(self, scope):
        tok = self.next()
        stream = tok.value
        if stream.endswith('.window'):
            stream = stream[:-len('.window')]
            self._set_window(scope, tok)
        if '.' in stream:
            raise self.error(f'invalid stream name {stream!r}', tok)
        self.expect_op('>>')
        body = seq([self._composition()])
        if stream in scope.tasks:
            body = seq([par([scope.tasks[stream], body])])
        else:
            scope.task_tokens[stream] = tok
        scope.tasks[stream] = body

    def _composition(self):
        branches = [self._sequence()]
        while self.accept_op('+'):
            branches.append(self._sequence())
        return par(branches)

    def _sequence(self):
        items = [self._unit()]
        while self.accept_op('>>'):
            items.append(self._unit())
        return seq(items)

    def _unit(self):
        tok = self.accept_op('(')
        if tok:
            with self.nested(tok):
                node = self._composition()
            self.expect_op(')')
            return node
        return self._primitive()

    def _primitive(self):
        tok = self.next()
        if tok.type != IDENT or not self.peek().is_op('('):
            raise self.error(f'expected a primitive, got {tok}', tok)
        name = tok.value
        pos = dict(line=tok.line, col=tok.col)
        if name == 'match':
            args = self._call_args()
            self._arity('match', 1, args, tok)
            return Match(args[0], **pos)
        if name == 'tag':
            args = self._call_args()
            self._arity('tag', 2, args, tok)
            if not isinstance(args[0], FieldRef):
                raise self.error('tag() expects a header field as first argument', tok)
            return Tag(args[0].name, args[1], **pos)
        if name in ('timestamp', 'duplicate', 'collect'):
            arg = self._name_arg(name, tok)
            if name == 'timestamp':
                if arg.value not in self.state_names:
                    raise UndeclaredState(arg.value, arg.line, arg.col)
                return Stamp(arg.value, **pos)
            if '.' in arg.value:
                raise self.error(f'invalid {name} target {arg.value!r}', arg)
            if name == 'duplicate':
                if arg.value in BUILTIN_STREAMS:
                    raise self.error(f'cannot duplicate into builtin stream {arg.value!r}', arg)
                return Duplicate(arg.value, **pos)
            return Collect(arg.value, **pos)
        if '.' in name:
            var, method = name.rsplit('.', 1)
            if var not in self.state_names:
                raise UndeclaredState(var, tok.line, tok.col)
            args = self._call_args()
            node = Update(var, method, tuple(args), **pos)
            self.positions[id(node)] = tok
            return node
        raise self.error(f'unknown primitive {name!r}', tok)

    def _name_arg(self, primitive, tok):
        self.expect_op('(')
        if self.peek().is_op(')'):
            raise ArityError(primitive, 1, 0, tok.line, tok.col)
        arg = self.expect(IDENT, 'a name')
        if self.peek().is_op(','):
            raise ArityError(primitive, 1, 2, tok.line, tok.col)
        self.expect_op(')')
        return arg

    @staticmethod
    def _arity(primitive, expected, args, tok):
        if len(args) != expected:
            raise ArityError(primitive, expected, len(args), tok.line, tok.col)

    def _call_args(self):
        self.expect_op('(')
        args = []
        while not self.peek().is_op(')'):
            args.append(self.expression())
            if not self.accept_op(','):
                break
        self.expect_op(')')
        return args

    # ─── Expressions ───────────────────────────────────────────────────

    def expression(self, min_prec=1):
        left = self._unary()
        while True:
            tok = self.peek()
            prec = PRECEDENCE.get(tok.value) if tok.type == OP else None
            if prec is None or prec < min_prec:
                return left
            self.next()
            right = self.expression(prec + 1)
            left = BinOp(tok.value, left, right)

    def _unary(self):
        tok = self.accept_op('!')
        if tok:
            with self.nested(tok):
                return Not(self._unary())
        return self._primary()

    def _primary(self):
        tok = self.next()
        if tok.type == NUMBER:
            return Lit(self._int_literal(tok))
        if tok.is_op('('):
            with self.nested(tok):
                e = self.expression()
            self.expect_op(')')
            return e
        if tok.type != IDENT:
            raise self.error(f'expected an expression, got {tok}', tok)
        name = tok.value
        if self.peek().is_op('('):
            return self._call(tok)
        if name in self.state_names:
            return StateRef(name)
        if name in self.key_names:
            raise DeclarationError(f'key {name!r} cannot be used as a value', tok.line, tok.col)
        if self.schema.knows(name):
            return FieldRef(self.schema.resolve(name))
        if name in self.state_uses:
            raise UndeclaredState(name, tok.line, tok.col)
        if '.' in name:
            raise UnknownField(name, tok.line, tok.col)
        return Lit(self._constant(tok))

    def _call(self, tok):
        name = tok.value
        if name in ('max', 'min'):
            args = self._call_args()
            self._arity(name, 2, args, tok)
            return BinOp(name, args[0], args[1])
        if name == 'random':
            return self._random(tok)
        if '.' in name:
            var, method = name.rsplit('.', 1)
            if var not in self.state_names:
                raise UndeclaredState(var, tok.line, tok.col)
            ref = StateRef(var, method, tuple(self._call_args()))
            self.positions[id(ref)] = tok
            return ref
        raise self.error(f'unknown function {name!r}', tok)

    def _random(self, tok):
        self.expect_op('(')
        bracket = self.accept_op('[')
        lo = self._const_int()
        self.expect_op(':')
        hi = self._const_int()
        if bracket:
            self.expect_op(']')
        self.expect_op(')')
        if lo >= hi:
            raise DeclarationError(f'random({lo}:{hi}) is an empty range', tok.line, tok.col)
        return Random(lo, hi)

    def _const_int(self):
        tok = self.next()
        if tok.type == NUMBER:
            return self._int_literal(tok)
        if tok.type == IDENT:
            return self._constant(tok)
        raise self.error(f'expected an integer constant, got {tok}', tok)

    def _int_literal(self, tok):
        if '.' in tok.value:
            raise self.error(f'fractional literal {tok.value} is only allowed in window lengths', tok)
        value = parse_number(tok.value)
        if value > M64:
            raise self.error(f'literal {tok.value} does not fit in 64 bits', tok)
        return value

    def _constant(self, tok):
        if tok.value not in self.defines:
            raise UnboundConstant(tok.value, tok.line, tok.col)
        value = self.defines[tok.value]
        if isinstance(value, Fraction):
            if value.denominator != 1:
                raise DeclarationError(f'constant {tok.value} = {value} is not an integer', tok.line, tok.col)
            value = int(value)
        if value < 0:
            raise DeclarationError(f'constant {tok.value} = {value} is negative', tok.line, tok.col)
        if value > M64:
            raise DeclarationError(f'constant {tok.value} = {value} does not fit in 64 bits', tok.line, tok.col)
        return value

    # ─── Post-parse checks ─────────────────────────────────────────────

    def _check_streams(self, shared, roles):
        produced = set()
        for scope in (shared, *roles.values()):
            for node in scope.tasks.values():
                produced.update(n.stream for n in walk(node) if isinstance(n, Duplicate))
        for scope in (shared, *roles.values()):
            for stream, node in scope.tasks.items():
                if stream not in BUILTIN_STREAMS and stream not in produced:
                    tok = scope.task_tokens[stream]
                    raise UnknownStream(stream, tok.line, tok.col)

    def _check_methods(self, shared, roles):
        """Every method exists for its structure with the right arity, and
        every variable is visible from the segment that uses it."""
        shared_names = {d.name for d in shared.decls}
        for scope in (shared, *roles.values()):
            visible = shared_names | {d.name for d in scope.decls}
            for node in scope.tasks.values():
                for n in walk(node):
                    self._check_node(n, visible)

    def _check_node(self, node, visible):
        tok = self.positions.get(id(node))
        line, col = (tok.line, tok.col) if tok else (getattr(node, 'line', 0), getattr(node, 'col', 0))
        if isinstance(node, (Update, Stamp)):
            if node.var not in visible:
                raise UndeclaredState(node.var, line, col)
            decl = self.decls[node.var]
            if isinstance(node, Stamp):
                if decl.base.kind != 'timestamp':
                    raise DeclarationError(f'timestamp() needs a Timestamp variable, {node.var!r} is a {decl.kind_label()}',
                                           line, col)
            else:
                self._check_call(decl, node.method, len(node.args), update_methods(decl), line, col, 'update')
        for e in (node.exprs() if isinstance(node, Prim) else ()):
            self._check_expr(e, visible, line, col)

    def _check_expr(self, e, visible, line, col):
        if isinstance(e, StateRef):
            tok = self.positions.get(id(e))
            if tok:
                line, col = tok.line, tok.col
            if e.var not in visible:
                raise UndeclaredState(e.var, line, col)
            if e.method is not None:
                decl = self.decls[e.var]
                self._check_call(decl, e.method, len(e.args), query_methods(decl), line, col, 'query')
        for child in e.children():
            self._check_expr(child, visible, line, col)

    @staticmethod
    def _check_call(decl, method, nargs, table, line, col, what):
        canonical = canonical_method(decl, method)
        if canonical not in table:
            raise MafiaSyntaxError(f'{decl.kind_label()} {decl.name!r} has no {what} method {method!r}', line, col)
        if table[canonical] != nargs:
            raise ArityError(f'{decl.name}.{method}', table[canonical], nargs, line, col)


def canonicalize(program):
    """Rewrite method aliases (set -> insert on membership filters,
    estimate -> test on cardinality sketches) to their canonical names."""
    decls = {d.name: d for d in program.all_decls()}

    def expr(e):
        if isinstance(e, StateRef):
            method = canonical_method(decls[e.var], e.method) if e.method else None
            return StateRef(e.var, method, tuple(expr(a) for a in e.args))
        if isinstance(e, BinOp):
            return BinOp(e.op, expr(e.left), expr(e.right))
        if isinstance(e, Not):
            return Not(expr(e.operand))
        return e

    def node(n):
        if isinstance(n, Seq):
            return Seq(tuple(node(c) for c in n.items))
        if isinstance(n, Par):
            return Par(tuple(node(c) for c in n.branches))
        if isinstance(n, Match):
            return Match(expr(n.pred), n.line, n.col)
        if isinstance(n, Tag):
            return Tag(n.field_name, expr(n.value), n.line, n.col)
        if isinstance(n, Update):
            method = canonical_method(decls[n.var], n.method)
            return Update(n.var, method, tuple(expr(a) for a in n.args), n.line, n.col)
        return n

    def segment(p):
        return Program(keys=p.keys, decls=p.decls, window_ns=p.window_ns,
                       tasks={s: node(t) for s, t in p.tasks.items()},
                       roles={r: segment(s) for r, s in p.roles.items()},
                       role=p.role, defines=p.defines)

    return segment(program)


def parse(source, schema, defines=None):
    """Parse MAFIA source into a validated Program."""
    parser = Parser(source, schema, defines)
    try:
        program = canonicalize(parser.parse_program())
    except RecursionError:
        tok = parser.peek()
        raise MafiaSyntaxError('expression chain too long', tok.line, tok.col) from None
    log.debug('parsed %d declarations, %d tasks, %d roles',
              len(program.all_decls()), len(program.tasks), len(program.roles))
    return program
