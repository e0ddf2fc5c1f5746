"""
Seeded synthetic packet traces

Profiles:
    mixed          many flows, Zipf-like popularity, random ports, per-hop
                   queues, some ctrl requests and consistent-update messages
    heavy-hitter   one flow holds `share` of the bytes seen on `port`
    path-flip      flows alternate between two fixed paths every `period` packets
    segway         GoodToMove messages carrying a sender's logical clock
    congestion     flows crossing a chain, random queue length per hop

Every profile returns plain trace records (see interpreter.trace); the same
seed always gives the same trace.
"""
import logging

import numpy as np

from ..errors import ConfigError
from ..interpreter.trace import write_trace

log = logging.getLogger(__name__)

NS = 10 ** 9
PROTOCOLS = (6, 17)
SERVICE_PORTS = (22, 53, 80, 443, 8080)


def flow_table(rng, count):
    """`count` distinct 5-tuples as (src, dst, sport, dport, proto)."""
    flows = []
    seen = set()
    while len(flows) < count:
        flow = (
            0x0A000000 | int(rng.integers(1, 1 << 16)),
            0x0A100000 | int(rng.integers(1, 1 << 16)),
            int(rng.integers(1024, 1 << 16)),
            int(rng.choice(SERVICE_PORTS)),
            int(rng.choice(PROTOCOLS)),
        )
        if flow not in seen:
            seen.add(flow)
            flows.append(flow)
    return flows


def headers(flow, **extra):
    src, dst, sport, dport, proto = flow
    out = {
        'ipv4.src': src, 'ipv4.dst': dst, 'tcp.src': sport, 'tcp.dst': dport, 'ipv4.proto': proto,
        'ipv4.tos': 0, 'ipv4.id': 0, 'ipv4.checksum': 0,
        'pkt.request': 0, 'pkt.hh_volume': 0,
        'segway_header.msg': 0, 'segway_header.ts': 0, 'segway_header.time': 0,
    }
    out.update(extra)
    return out


def record(ts, flow, meta, stream='pkts', hops=None, **extra):
    rec = {'ts': int(ts), 'stream': stream, 'meta': meta, 'headers': headers(flow, **extra)}
    if hops:
        rec['hops'] = hops
    return rec


def timestamps(rng, packets, duration_s):
    return np.sort(rng.integers(0, int(duration_s * NS), size=packets))


def popularity(flows, skew):
    weights = 1.0 / np.arange(1, flows + 1) ** skew
    return weights / weights.sum()


def random_hops(rng, hops, max_queue=64):
    return [
        {
            'input_port': int(rng.integers(1, 5)),
            'output_port': int(rng.integers(1, 5)),
            'in_queue_length': int(rng.integers(0, max_queue)),
        }
        for _ in range(hops)
    ]


def mixed(packets=10000, seed=0, flows=64, skew=1.0, duration_s=12, ports=4, hops=4,
          ctrl_every=97, segway_share=0.3):
    rng = np.random.default_rng(seed)
    table = flow_table(rng, flows)
    picks = rng.choice(flows, size=packets, p=popularity(flows, skew))
    times = timestamps(rng, packets, duration_s)
    out = []
    for i in range(packets):
        flow = table[int(picks[i])]
        meta = {
            'input_port': int(rng.integers(1, ports + 1)),
            'output_port': int(rng.integers(1, ports + 1)),
            'size': int(rng.integers(64, 1501)),
            'in_queue_length': int(rng.integers(0, 64)),
        }
        extra = {
            'segway_header.msg': int(rng.random() < segway_share),
            'segway_header.ts': int(rng.integers(0, 256)),
        }
        stream = 'pkts'
        if ctrl_every and i % ctrl_every == ctrl_every - 1:
            stream = 'ctrl'
            extra['pkt.request'] = int(rng.integers(1, 3))
        out.append(record(times[i], flow, meta, stream, random_hops(rng, hops), **extra))
    return out


def heavy_hitter(packets=5000, seed=0, share=0.6, port=1, background=50, lead=10,
                 off_port=0.2, duration_s=4, request=1):
    """The trace opens with `lead` packets of the heavy flow; after that each
    packet on `port` belongs to it with probability `share`. Two ctrl packets
    close the trace: one asking for the heavy flow's volume, one other request."""
    rng = np.random.default_rng(seed)
    table = flow_table(rng, background + 1)
    heavy, others = table[0], table[1:]
    times = timestamps(rng, packets + 2, duration_s)
    out = []
    for i in range(packets):
        if i < lead:
            flow, in_port, size = heavy, port, 1500
        else:
            in_port = port if rng.random() >= off_port else port + 1
            on_heavy = in_port == port and rng.random() < share
            flow = heavy if on_heavy else others[int(rng.integers(0, background))]
            size = int(rng.integers(64, 1501))
        meta = {'input_port': in_port, 'output_port': 0, 'size': size, 'in_queue_length': 0}
        out.append(record(times[i], flow, meta))
    ctrl_meta = {'input_port': port, 'output_port': 0, 'size': 64, 'in_queue_length': 0}
    out.append(record(times[packets], heavy, ctrl_meta, 'ctrl', **{'pkt.request': request}))
    out.append(record(times[packets + 1], heavy, ctrl_meta, 'ctrl', **{'pkt.request': request + 1}))
    return out


def two_paths(rng, hops):
    first = [{'input_port': int(rng.integers(1, 5)), 'output_port': int(rng.integers(1, 5))}
             for _ in range(hops)]
    second = [dict(h) for h in first]
    second[0]['output_port'] = first[0]['output_port'] % 4 + 1
    if hops > 1:
        second[1]['input_port'] = first[1]['input_port'] % 4 + 1
    return first, second


def path_flip(packets=500, seed=0, flows=1, period=50, hops=3, gap_ns=1000000):
    """Packets round-robin over `flows`; flow k switches path after every
    `period` of its own packets."""
    rng = np.random.default_rng(seed)
    table = flow_table(rng, flows)
    paths = [two_paths(rng, hops) for _ in range(flows)]
    sent = [0] * flows
    out = []
    for i in range(packets):
        k = i % flows
        path = paths[k][(sent[k] // period) % 2]
        sent[k] += 1
        meta = {'input_port': path[0]['input_port'], 'output_port': path[0]['output_port'],
                'size': int(rng.integers(64, 1501)), 'in_queue_length': 0}
        out.append(record(i * gap_ns, table[k], meta, hops=[dict(h) for h in path]))
    return out


def segway(packets=300, seed=0, share=0.5, good_to_move=1, ahead=0.3, gap_ns=100000):
    """Update messages; the sender's clock runs ahead of the switch's for a
    fraction `ahead` of GoodToMove messages. Clocks stay below 256."""
    rng = np.random.default_rng(seed)
    flow = flow_table(rng, 1)[0]
    clock = 0
    out = []
    for i in range(packets):
        is_move = rng.random() < share
        if is_move and rng.random() < ahead and clock + 2 < 250:
            sender = clock + 2
        else:
            sender = int(rng.integers(0, clock + 1))
        if is_move:
            clock = max(clock + 1, sender)
        msg = good_to_move if is_move else good_to_move + 1
        meta = {'input_port': 1, 'output_port': 2, 'size': 128, 'in_queue_length': 0}
        out.append(record(i * gap_ns, flow, meta,
                          **{'segway_header.msg': msg, 'segway_header.ts': sender}))
    return out


def congestion(packets=4000, seed=0, flows=16, hops=4, max_queue=1000, duration_s=4):
    rng = np.random.default_rng(seed)
    table = flow_table(rng, flows)
    picks = rng.integers(0, flows, size=packets)
    times = timestamps(rng, packets, duration_s)
    out = []
    for i in range(packets):
        path = random_hops(rng, hops, max_queue)
        meta = {'input_port': path[0]['input_port'], 'output_port': path[0]['output_port'],
                'size': int(rng.integers(64, 1501)), 'in_queue_length': path[0]['in_queue_length']}
        out.append(record(times[i], table[int(picks[i])], meta, hops=path))
    return out


PROFILES = {
    'mixed': mixed,
    'heavy-hitter': heavy_hitter,
    'path-flip': path_flip,
    'segway': segway,
    'congestion': congestion,
}


def generate(profile='mixed', packets=10000, seed=0, **params):
    """Trace records for `profile`; unknown parameters are a ConfigError."""
    try:
        fn = PROFILES[profile]
    except KeyError:
        raise ConfigError(f'unknown trace profile {profile!r} (choose from {", ".join(PROFILES)})') from None
    try:
        records = fn(packets=packets, seed=seed, **params)
    except TypeError as e:
        raise ConfigError(f'bad parameters for profile {profile!r}: {e}') from e
    log.debug('generated %d %s records (seed %s)', len(records), profile, seed)
    return records


def generate_file(path, profile='mixed', packets=10000, seed=0, **params):
    records = generate(profile, packets, seed, **params)
    write_trace(path, records)
    log.info('wrote %d-packet %s trace to %s', len(records), profile, path)
    return len(records)
