"""
Error types and diagnostics for the MAFIA toolchain
"""
from dataclasses import dataclass


class MafiaError(Exception):
    """Base class for every error raised by the toolchain"""


# ─── Frontend ──────────────────────────────────────────────────────────

class FrontendError(MafiaError):
    """An error tied to a position in program source."""

    kind = 'error'

    def __init__(self, message, line=0, col=0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def format(self, filename='<source>'):
        return f'{filename}:{self.line}:{self.col}: error: {self.message}'


class MafiaSyntaxError(FrontendError):
    pass


class UndeclaredState(FrontendError):
    def __init__(self, name, line=0, col=0):
        super().__init__(f'undeclared state variable {name!r}', line, col)
        self.name = name


class DuplicateDecl(FrontendError):
    def __init__(self, name, line=0, col=0):
        super().__init__(f'{name!r} is declared more than once', line, col)
        self.name = name


class UnknownStream(FrontendError):
    def __init__(self, name, line=0, col=0):
        super().__init__(f'stream {name!r} is neither builtin nor produced by duplicate()', line, col)
        self.name = name


class ArityError(FrontendError):
    def __init__(self, primitive, expected, got, line=0, col=0):
        super().__init__(f'{primitive} takes {expected} argument(s), got {got}', line, col)
        self.primitive = primitive


class UnboundConstant(FrontendError):
    def __init__(self, name, line=0, col=0):
        super().__init__(f'constant {name!r} is not bound; pass --define {name}=<value>', line, col)
        self.name = name


class DeclarationError(FrontendError):
    pass


# ─── Evaluation ────────────────────────────────────────────────────────

class EvalError(MafiaError):
    pass


class UnknownField(EvalError):
    def __init__(self, name, line=0, col=0):
        super().__init__(f'unknown field {name!r}')
        self.name = name
        self.line = line
        self.col = col

    def format(self, filename='<source>'):
        return f'{filename}:{self.line}:{self.col}: error: unknown field {self.name!r}'


class UnknownState(EvalError):
    def __init__(self, name):
        super().__init__(f'unknown state variable {name!r}')
        self.name = name


class DivisionByZero(EvalError):
    def __init__(self, expr=''):
        super().__init__(f'division by zero in {expr}' if expr else 'division by zero')


class FilterTooWide(EvalError):
    def __init__(self, name, size):
        super().__init__(f'filter {name!r} has {size} cells; init/serialize needs at most 64')
        self.name = name


# ─── Runs ──────────────────────────────────────────────────────────────

class ConfigError(MafiaError):
    pass


class TraceFormatError(MafiaError):
    def __init__(self, message, line=0):
        super().__init__(f'trace line {line}: {message}' if line else message)
        self.line = line


class TopologyError(MafiaError):
    pass


class StepError(MafiaError):
    """An evaluation error raised while a switch processed a trace packet."""

    def __init__(self, packet_index, switch_id, cause):
        super().__init__(f'packet #{packet_index} at switch {switch_id}: {cause}')
        self.packet_index = packet_index
        self.switch_id = switch_id
        self.cause = cause


# ─── Compiler ──────────────────────────────────────────────────────────

class UnsupportedExpr(MafiaError):
    pass


class IRFormatError(MafiaError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    severity: str          # 'error' | 'warning' | 'info'
    code: str
    message: str
    line: int = 0
    col: int = 0

    def format(self, filename='<source>'):
        return f'{filename}:{self.line}:{self.col}: {self.severity}: {self.message}'

    def to_dict(self):
        return {
            'severity': self.severity,
            'code': self.code,
            'message': self.message,
            'line': self.line,
            'col': self.col,
        }
