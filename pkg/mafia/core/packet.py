"""
Packets flowing through measurement tasks
"""
from ..errors import UnknownField
from .schema import META_FIELDS, META_BY_KEY


class Packet:
    """Header fields and switch metadata under canonical dotted names.

    Tags mutate a packet in place; duplicate() hands out copies.
    """

    __slots__ = ('fields', 'stream', 'hops', 'index')

    def __init__(self, fields=None, stream='pkts', hops=(), index=-1):
        self.fields = dict(fields or {})
        for name in META_FIELDS:
            self.fields.setdefault(name, 0)
        self.stream = stream
        self.hops = tuple(hops)
        self.index = index

    @property
    def ts(self):
        return self.fields['pkt.ts']

    def get(self, name):
        try:
            return self.fields[name]
        except KeyError:
            raise UnknownField(name) from None

    def set(self, name, value, schema):
        self.fields[name] = value & schema.mask(name)

    def copy(self, stream=None):
        return Packet(self.fields, stream or self.stream, self.hops, self.index)

    def changed_fields(self, original):
        return {k: v for k, v in self.fields.items() if original.fields.get(k) != v}

    def enter_switch(self, switch_id, hop):
        """Apply the per-hop metadata overrides for the hop-th switch of a chain."""
        self.fields['switch.id'] = switch_id
        if hop < len(self.hops):
            for key, value in self.hops[hop].items():
                self.fields[META_BY_KEY.get(key, key)] = int(value)

    @classmethod
    def from_record(cls, record, schema, index=-1):
        fields = {}
        for key, value in (record.get('meta') or {}).items():
            name = META_BY_KEY.get(key)
            if name is None:
                raise UnknownField(f'meta.{key}')
            fields[name] = int(value)
        fields['pkt.ts'] = int(record.get('ts', 0))
        for name, value in (record.get('headers') or {}).items():
            fields[schema.resolve(name)] = int(value)
        return cls(fields, record.get('stream', 'pkts'), record.get('hops') or (), index)

    def to_record(self):
        meta = {key: self.fields[name] for name, (key, _) in META_FIELDS.items() if key != 'ts'}
        headers = {k: v for k, v in sorted(self.fields.items()) if k not in META_FIELDS}
        record = {'ts': self.ts, 'stream': self.stream, 'meta': meta, 'headers': headers}
        if self.hops:
            record['hops'] = [dict(h) for h in self.hops]
        return record

    def __eq__(self, other):
        return isinstance(other, Packet) and (self.fields, self.stream) == (other.fields, other.stream)

    def __repr__(self):
        return f'Packet(#{self.index}, {self.stream}, ts={self.ts})'
