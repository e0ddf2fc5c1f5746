"""
Tokenizer for MAFIA source
"""
import re
from dataclasses import dataclass

from ..errors import MafiaSyntaxError

IDENT = 'IDENT'
NUMBER = 'NUMBER'
DURATION = 'DURATION'
STRING = 'STRING'
OP = 'OP'
EOF = 'EOF'

# Longest operators first.
OPERATORS = (
    '>>', '≫', '<<', '&&', '||', '==', '!=', '<=', '>=',
    '+', '-', '*', '/', '&', '|', '<', '>', '!',
    '(', ')', '[', ']', '{', '}', ',', ':', '=', ';', '@',
)

TOKEN_RE = re.compile(r'''
    (?P<ws>[ \t\r\f]+)
  | (?P<newline>\n)
  | (?P<comment>//[^\n]*)
  | (?P<duration>(?:\d+\.\d+|\d+)(?:ns|us|ms|s)\b)
  | (?P<number>0[xX][0-9a-fA-F]+|\d+\.\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<string>"[^"\n]*")
  | (?P<op>''' + '|'.join(re.escape(op) for op in OPERATORS) + r''')
''', re.VERBOSE)


@dataclass(frozen=True)
class Token:
    type: str
    value: str
    line: int
    col: int

    def is_op(self, *values):
        return self.type == OP and self.value in values

    def __str__(self):
        return 'end of input' if self.type == EOF else repr(self.value)


def tokenize(source):
    """Split source into tokens; comments and whitespace are dropped."""
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = TOKEN_RE.match(source, pos)
        if m is None:
            raise MafiaSyntaxError(f'unexpected character {source[pos]!r}', line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        text = m.group()
        if kind == 'newline':
            line += 1
            line_start = m.end()
        elif kind == 'duration':
            tokens.append(Token(DURATION, text, line, col))
        elif kind == 'number':
            tokens.append(Token(NUMBER, text, line, col))
        elif kind == 'ident':
            tokens.append(Token(IDENT, text, line, col))
        elif kind == 'string':
            tokens.append(Token(STRING, text[1:-1], line, col))
        elif kind == 'op':
            tokens.append(Token(OP, '>>' if text == '≫' else text, line, col))
        pos = m.end()
    tokens.append(Token(EOF, '', line, pos - line_start + 1))
    return tokens
