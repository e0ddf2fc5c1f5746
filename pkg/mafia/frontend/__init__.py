"""
MAFIA frontend: parse, format and statically check measurement programs.
"""
from fractions import Fraction

from ..core.schema import default_schema
from ..errors import ConfigError
from .ast import (
    BUILTIN_STREAMS, Collect, Duplicate, Match, Par, Prim, Program, Seq, Stamp, Tag, Update,
)
from .checks import complementary, validate_composition
from .parser import parse as _parse, parse_number
from .printer import program_to_source


def parse(source, defines=None, schema=None):
    """Parse MAFIA source text into a Program."""
    return _parse(source, schema or default_schema(), defines)


def parse_file(path, defines=None, schema=None):
    with open(path, encoding='utf-8') as f:
        return parse(f.read(), defines, schema)


def parse_define_value(text):
    text = str(text).strip()
    try:
        return parse_number(text)
    except ValueError:
        pass
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f'define value {text!r} is not a number') from None


def parse_defines(items):
    """`NAME=value` strings (or a mapping) to a define table."""
    if isinstance(items, dict):
        return {str(k): parse_define_value(v) for k, v in items.items()}
    defines = {}
    for item in items or ():
        name, sep, value = item.partition('=')
        if not sep or not name.strip():
            raise ConfigError(f'define {item!r} must look like NAME=value')
        defines[name.strip()] = parse_define_value(value)
    return defines


__all__ = [
    'parse', 'parse_file', 'parse_defines', 'parse_define_value', 'program_to_source',
    'validate_composition', 'complementary', 'Program', 'Seq', 'Par', 'Prim', 'Match', 'Tag',
    'Stamp', 'Update', 'Duplicate', 'Collect', 'BUILTIN_STREAMS',
]
