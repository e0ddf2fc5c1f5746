"""
Collect endpoints: sink records, JSONL sink files and the TCP stream
"""
import hashlib
import json
import logging
import os
import socket
from dataclasses import dataclass

from werkzeug.utils import secure_filename

from ..errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SinkRecord:
    endpoint: str
    ts: int
    record: dict
    stream: str
    order: tuple = ()  # (trace index, hop, emission sequence)

    def to_dict(self):
        return {'endpoint': self.endpoint, 'ts': self.ts, 'stream': self.stream, 'packet': self.record}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))


def sink_path(endpoint, sink_dir, bindings=None):
    if bindings and endpoint in bindings:
        return bindings[endpoint]
    name = secure_filename(endpoint) or 'sink'
    return os.path.join(sink_dir, f'{name}.jsonl')


def write_sinks(records, endpoints, sink_dir, bindings=None):
    """Write one file per endpoint, records in order-key order.

    Every endpoint the program can collect to gets a file, possibly empty.
    Returns {endpoint: path}.
    """
    by_endpoint = {name: [] for name in endpoints}
    for record in sorted(records, key=lambda r: r.order):
        by_endpoint.setdefault(record.endpoint, []).append(record)
    paths = {}
    for endpoint in sorted(by_endpoint):
        path = sink_path(endpoint, sink_dir, bindings)
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for record in by_endpoint[endpoint]:
                f.write(record.to_json() + '\n')
        paths[endpoint] = path
        log.info('sink %s: %d records -> %s', endpoint, len(by_endpoint[endpoint]), path)
    return paths


def sink_digest(paths):
    """sha256 over sink file contents, endpoints in sorted order."""
    digest = hashlib.sha256()
    for endpoint in sorted(paths):
        digest.update(endpoint.encode() + b'\0')
        with open(paths[endpoint], 'rb') as f:
            digest.update(f.read())
    return digest.hexdigest()


def parse_address(text):
    host, sep, port = str(text).rpartition(':')
    if not sep or not host or not port.isdigit():
        raise ConfigError(f'sink address {text!r} must look like host:port')
    return host, int(port)


class TcpSink:
    """Streams sink records as JSON lines to host:port."""

    def __init__(self, address, timeout=5.0):
        self.host, self.port = parse_address(address)
        self.timeout = timeout

    def send(self, records):
        lines = ''.join(r.to_json() + '\n' for r in sorted(records, key=lambda r: r.order))
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as conn:
                conn.sendall(lines.encode())
        except OSError as e:
            raise ConfigError(f'cannot stream sinks to {self.host}:{self.port}: {e}') from e
        log.info('streamed %d sink records to %s:%d', len(records), self.host, self.port)
