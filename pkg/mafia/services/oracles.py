"""
Exact offline oracles for the bundled use cases

Each oracle replays plain trace records (and, where needed, the sink
records a run produced) without any approximate data structure, so the
measurements can be checked against ground truth. `key` arguments map a
record to the identity state is kept under; the default is the 5-tuple,
callers pass a hash-slot function to mirror HashMap collisions exactly.
"""
from collections import defaultdict

FIVE_TUPLE = ('ipv4.src', 'ipv4.dst', 'tcp.src', 'tcp.dst', 'ipv4.proto')
M16 = 0xFFFF
M8 = 0xFF
M32 = 0xFFFFFFFF
M64 = (1 << 64) - 1


def flow_of(record):
    h = record.get('headers') or {}
    return tuple(h.get(f, 0) for f in FIVE_TUPLE)


def _packets(records):
    return [(i, r) for i, r in enumerate(records) if r.get('stream', 'pkts') == 'pkts']


def flow_stats(records, key=flow_of):
    """Per-key packet count, byte count, first and last timestamp."""
    stats = {}
    for _, r in _packets(records):
        s = stats.setdefault(key(r), {'packets': 0, 'bytes': 0, 'first_ts': r['ts'], 'last_ts': r['ts']})
        s['packets'] += 1
        s['bytes'] += r['meta']['size']
        s['last_ts'] = r['ts']
    return stats


def distinct_flows(records):
    return len({flow_of(r) for _, r in _packets(records)})


def threshold_crossings(records, packet_threshold, byte_threshold, packet_key=flow_of, byte_key=flow_of):
    """Trace indices reported by the counter-thresholds measurement:
    (packet-count crossings, byte-count crossings)."""
    packets, nbytes = defaultdict(int), defaultdict(int)
    by_packets, by_bytes = [], []
    for i, r in _packets(records):
        kp, kb = packet_key(r), byte_key(r)
        packets[kp] = (packets[kp] + 1) & M32
        nbytes[kb] = (nbytes[kb] + r['meta']['size']) & M32
        if packets[kp] > packet_threshold:
            by_packets.append(i)
        if nbytes[kb] > byte_threshold:
            by_bytes.append(i)
    return by_packets, by_bytes


def heavy_hitter_alarms(records, port, gamma_pct):
    """(trace index, flow) of every alarm, using exact per-flow volumes.

    A flow raises one alarm, at the first of its packets on `port` after
    which its bytes exceed gamma_pct percent of all bytes seen on `port`.
    """
    total = 0
    volume = defaultdict(int)
    flagged = set()
    alarms = []
    for i, r in _packets(records):
        if r['meta'].get('input_port') != port:
            continue
        size = r['meta']['size']
        total += size
        flow = flow_of(r)
        if flow in flagged:
            continue
        volume[flow] += size
        if volume[flow] * 100 > gamma_pct * total:
            flagged.add(flow)
            alarms.append((i, flow))
    return alarms


def deterministic_samples(records, skip, num_samples, num_packets, keys=None):
    """Trace indices sampled by the skip/sample/restart counter scheme.

    The three counters are updated as three independent branches that all
    see the state as of the packet's arrival; a branch's result replaces
    a counter only where it changed it, later branches winning. `keys`
    maps each counter name ('n', 'm', 'delta') to its key function.
    """
    keys = {name: flow_of for name in ('n', 'm', 'delta')} | dict(keys or {})
    state = {name: defaultdict(int) for name in keys}
    samples = []
    for i, r in _packets(records):
        slot = {name: keys[name](r) for name in keys}
        entry = {name: state[name][slot[name]] for name in keys}
        branches = []
        if entry['delta'] < skip:
            branches.append({'delta': entry['delta'] + 1})
        if entry['delta'] >= skip and entry['m'] < num_samples:
            branches.append({'m': entry['m'] + 1})
            samples.append(i)
        counted = {'n': entry['n'] + 1}
        if counted['n'] >= num_packets:
            counted = {'n': 0, 'm': 0, 'delta': 0}
        branches.append(counted)
        for branch in branches:
            for name, value in branch.items():
                if value != entry[name]:
                    state[name][slot[name]] = value
    return samples


def flow_durations(records, start_key=flow_of, duration_key=flow_of):
    """Final flow_duration cells: a key's first packet stamps its start, every
    later packet stores its distance from that start (32-bit)."""
    start = defaultdict(int)
    duration = {}
    for _, r in _packets(records):
        ks = start_key(r)
        if start[ks] == 0:
            start[ks] = r['ts']
        else:
            duration[duration_key(r)] = (r['ts'] - start[ks]) & M32
    return duration


def trajectory_marks(records, threshold, key=flow_of):
    """Trace indices the ingress marks for tracing: a key's packet is marked
    when more than `threshold` ns passed since its last marked packet."""
    last = defaultdict(int)
    marks = []
    for i, r in _packets(records):
        k = key(r)
        if (r['ts'] - last[k]) & M64 > threshold:
            last[k] = r['ts']
            marks.append(i)
    return marks


def path_signature(record, hops):
    return tuple(
        (h.get('input_port', 0), h.get('output_port', 0))
        for h in (record.get('hops') or ())[:hops]
    )


def path_changes(records, hops):
    """Per-flow number of path changes over the first `hops` hops; the first
    packet of a flow establishes its path and is not a change."""
    last = {}
    changes = defaultdict(int)
    for _, r in _packets(records):
        flow = flow_of(r)
        path = path_signature(r, hops)
        if flow in last and last[flow] != path:
            changes[flow] += 1
        changes.setdefault(flow, 0)
        last[flow] = path
    return dict(changes)


def queue_accumulation(records, upstream):
    """Per-flow (packets, summed queue) as carried to the last hop: the queue
    lengths of the first `upstream` hops, summed in a 16-bit header field."""
    out = defaultdict(lambda: [0, 0])
    for _, r in _packets(records):
        carried = sum(h.get('in_queue_length', 0) for h in (r.get('hops') or ())[:upstream]) & M16
        acc = out[flow_of(r)]
        acc[0] += 1
        acc[1] += carried
    return {flow: tuple(v) for flow, v in out.items()}


def lamport_clocks(records, good_to_move):
    """Expected (clock, ts) of every GoodToMove report, in trace order."""
    clock = 0
    expected = []
    for _, r in _packets(records):
        h = r['headers']
        if h.get('segway_header.msg') != good_to_move:
            continue
        clock = max(clock + 1, h.get('segway_header.ts', 0)) & M8
        expected.append((clock, r['ts']))
    return expected


def lamport_mismatches(records, sink_records, good_to_move):
    """Differences between the reported clocks and the expected ones; empty
    when the reports carry exactly the expected clocks and times."""
    expected = lamport_clocks(records, good_to_move)
    reported = [
        (s['packet']['headers'].get('segway_header.ts'), s['packet']['headers'].get('segway_header.time'))
        for s in sink_records
    ]
    problems = []
    if len(reported) != len(expected):
        problems.append(f'{len(reported)} reports, expected {len(expected)}')
    for n, (got, want) in enumerate(zip(reported, expected)):
        if got != want:
            problems.append(f'report {n}: clock/time {got}, expected {want}')
    clocks = [c for c, _ in reported]
    if any(b <= a for a, b in zip(clocks, clocks[1:])):
        problems.append('clocks are not strictly increasing')
    return problems
