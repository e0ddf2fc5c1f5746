"""
Packet traces: JSON Lines, one packet per line

    {"ts": <ns>, "stream": "pkts"|"ctrl", "meta": {...}, "headers": {"ipv4.src": ...},
     "hops": [{meta overrides for hop 0}, ...]}

Timestamps must be non-decreasing and every value must fit its field.
"""
import json
import logging

from ..core.packet import Packet
from ..core.schema import META_BY_KEY
from ..errors import TraceFormatError, UnknownField

log = logging.getLogger(__name__)


def _check_record(record, schema, line, last_ts):
    if not isinstance(record, dict):
        raise TraceFormatError('record must be a JSON object', line)
    ts = record.get('ts', 0)
    if not isinstance(ts, int) or ts < 0:
        raise TraceFormatError(f'ts must be a non-negative integer, got {ts!r}', line)
    if ts < last_ts:
        raise TraceFormatError(f'ts {ts} goes backwards (previous {last_ts})', line)
    if not isinstance(record.get('stream', 'pkts'), str):
        raise TraceFormatError('stream must be a string', line)
    values = {}
    for key, value in (record.get('meta') or {}).items():
        values[META_BY_KEY.get(key, f'meta.{key}')] = value
    for hop in record.get('hops') or ():
        if not isinstance(hop, dict):
            raise TraceFormatError('hops entries must be objects', line)
        for key, value in hop.items():
            values.setdefault(META_BY_KEY.get(key, f'meta.{key}'), value)
    values.update(record.get('headers') or {})
    for name, value in values.items():
        try:
            mask = schema.mask(name)
        except UnknownField:
            raise TraceFormatError(f'unknown field {name!r}', line) from None
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= mask:
            raise TraceFormatError(f'{name}={value!r} does not fit in {schema.width(name)} bits', line)
    return ts


def _to_packets(numbered, schema, limit):
    packets = []
    last_ts = 0
    for index, (number, record) in enumerate(numbered):
        if limit is not None and index >= limit:
            raise TraceFormatError(f'trace exceeds {limit} records', number)
        last_ts = _check_record(record, schema, number, last_ts)
        packets.append(Packet.from_record(record, schema, index))
    return packets


def packets_from_records(records, schema, limit=None):
    """Validated Packets from already-decoded trace records."""
    return _to_packets(enumerate(records, start=1), schema, limit)


def parse_trace_lines(lines, schema, limit=None):
    numbered = []
    for number, text in enumerate(lines, start=1):
        text = text.strip()
        if not text:
            continue
        try:
            numbered.append((number, json.loads(text)))
        except json.JSONDecodeError as e:
            raise TraceFormatError(f'invalid JSON: {e.msg}', number) from None
    return _to_packets(numbered, schema, limit)


def read_trace(path, schema, limit=None):
    try:
        with open(path, encoding='utf-8') as f:
            packets = parse_trace_lines(f, schema, limit)
    except OSError as e:
        raise TraceFormatError(f'cannot read trace {path}: {e}') from e
    log.debug('loaded %d packets from %s', len(packets), path)
    return packets


def write_trace(path, records):
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, separators=(',', ':')) + '\n')
