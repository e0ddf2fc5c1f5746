"""
Header schema: field names, bit widths and aliases
"""
from functools import lru_cache

import yaml

from ..config import Config
from ..errors import ConfigError, UnknownField

# Switch metadata exposed to expressions, with the trace `meta` key it comes from.
META_FIELDS = {
    'pkt.input_port': ('input_port', 16),
    'pkt.output_port': ('output_port', 16),
    'pkt.size': ('size', 32),
    'pkt.in_queue_length': ('in_queue_length', 32),
    'switch.id': ('switch_id', 16),
    'pkt.ts': ('ts', 64),
}
META_BY_KEY = {key: name for name, (key, _) in META_FIELDS.items()}


class HeaderSchema:
    """Field widths plus alias spellings; metadata fields are always present."""

    def __init__(self, fields, aliases=None):
        self.fields = {name: int(width) for name, width in fields.items()}
        for name, (_, width) in META_FIELDS.items():
            self.fields.setdefault(name, width)
        self.aliases = dict(aliases or {})
        for name, width in self.fields.items():
            if not 1 <= width <= 64:
                raise ConfigError(f'field {name!r} has width {width}; widths must be in [1, 64]')
        for alias, target in self.aliases.items():
            if target not in self.fields:
                raise ConfigError(f'alias {alias!r} points at undeclared field {target!r}')

    def resolve(self, name):
        """Canonical spelling of a field name; raises UnknownField."""
        name = self.aliases.get(name, name)
        if name not in self.fields:
            raise UnknownField(name)
        return name

    def knows(self, name):
        return self.aliases.get(name, name) in self.fields

    def width(self, name):
        return self.fields[self.resolve(name)]

    def mask(self, name):
        return (1 << self.width(name)) - 1

    def is_meta(self, name):
        return name in META_FIELDS

    def to_dict(self):
        return {'fields': dict(sorted(self.fields.items())), 'aliases': dict(sorted(self.aliases.items()))}

    def __eq__(self, other):
        return isinstance(other, HeaderSchema) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(sorted(self.fields.items())))


def load_schema(path=None):
    """Load a schema file: either {"fields": {...}, "aliases": {...}} or a flat name → width map."""
    path = path or Config.SCHEMA
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f'cannot read schema {path}: {e}') from e
    if 'fields' in data:
        return HeaderSchema(data['fields'], data.get('aliases'))
    return HeaderSchema(data)


@lru_cache(maxsize=None)
def default_schema():
    return load_schema(Config.SCHEMA)
