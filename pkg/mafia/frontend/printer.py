"""
Source formatter: Program -> MAFIA text that parses back to the same Program
"""
from ..core.decls import HYPERLOGLOG, MEMBERSHIP, PCSA, BloomKind, CounterKind, HashMapKind, SketchKind
from ..core.expr import to_source
from .ast import Collect, Duplicate, Match, Par, Seq, Stamp, Tag, Update

INDENT = '    '


def format_window(ns):
    for unit, scale in (('s', 10 ** 9), ('ms', 10 ** 6), ('us', 10 ** 3)):
        if ns % scale == 0:
            return f'{ns // scale}{unit}'
    return f'{ns}ns'


def format_kind(kind):
    if isinstance(kind, CounterKind):
        return f'Counter(width={kind.width})'
    if isinstance(kind, HashMapKind):
        return f'HashMap(key={kind.key.name}, size={kind.size}, type={format_kind(kind.inner)})'
    if isinstance(kind, (BloomKind, SketchKind)):
        ctor = 'BloomFilter' if isinstance(kind, BloomKind) else 'Sketch'
        text = f'{ctor}(alg="{kind.alg}", key={kind.key.name}, nhash={kind.nhash}, size={kind.size}'
        if kind.alg not in (MEMBERSHIP, PCSA, HYPERLOGLOG):
            text += f', width={kind.width}'
        return text + ')'
    return 'Timestamp()'


def format_prim(node):
    if isinstance(node, Match):
        return f'match({to_source(node.pred)})'
    if isinstance(node, Tag):
        return f'tag({node.field_name}, {to_source(node.value)})'
    if isinstance(node, Stamp):
        return f'timestamp({node.var})'
    if isinstance(node, Update):
        return f'{node.var}.{node.method}({", ".join(to_source(a) for a in node.args)})'
    if isinstance(node, Duplicate):
        return f'duplicate({node.stream})'
    if isinstance(node, Collect):
        return f'collect({node.endpoint})'
    raise TypeError(f'cannot format {node!r}')


def format_node(node):
    """Single-line rendering; Par groups are always parenthesized."""
    if isinstance(node, Seq):
        return ' >> '.join(format_node(item) for item in node.items)
    if isinstance(node, Par):
        return '(' + ' + '.join(format_node(b) for b in node.branches) + ')'
    return format_prim(node)


def _segment(program, indent):
    lines = []
    for key in program.keys.values():
        lines.append(f'{indent}{key.name} = Key({", ".join(key.components)})')
    for decl in program.decls:
        lines.append(f'{indent}{decl.name} = {format_kind(decl.kind)}')
    if program.window_ns is not None:
        lines.append(f'{indent}window({format_window(program.window_ns)})')
    for stream, node in program.tasks.items():
        if lines:
            lines.append('')
        lines.append(f'{indent}{stream}')
        items = node.items if isinstance(node, Seq) else (node,)
        lines.extend(f'{indent}  >> {format_node(item)}' for item in items)
    return lines


def program_to_source(program):
    lines = _segment(program, '')
    for role, segment in program.roles.items():
        if lines:
            lines.append('')
        lines.append(f'@role("{role}") {{')
        lines.extend(_segment(segment, INDENT))
        lines.append('}')
    return '\n'.join(lines) + '\n' if lines else ''
