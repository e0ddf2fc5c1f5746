"""
Seeded hash family for keys, Bloom filters and sketches.

fmix64 is the 64-bit finalizer of MurmurHash3. Each key component is
mixed on its own, then folded into a seeded running state that is mixed
again; a last round folds in the component count. Row seeds of a
structure are derived from (global seed, variable name, row). These
definitions are part of the state-dump format and must not change.
"""
import hashlib

M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def fmix64(x):
    x &= M64
    x ^= x >> 33
    x = (x * 0xFF51AFD7ED558CCD) & M64
    x ^= x >> 33
    x = (x * 0xC4CEB9FE1A85EC53) & M64
    x ^= x >> 33
    return x


def hash_values(values, seed):
    h = fmix64((seed & M64) ^ GOLDEN)
    n = 0
    for v in values:
        h = fmix64(((h + GOLDEN) & M64) ^ fmix64((v + GOLDEN) & M64))
        n += 1
    return fmix64(h ^ n)


def name_hash(name):
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), 'little')


def derive_seed(global_seed, name, row):
    return hash_values((name_hash(name), row), global_seed)


def key_index(key, packet, size, seed):
    """Bucket of a packet's flow key in a table of `size` entries."""
    if size < 1:
        raise ValueError('size must be >= 1')
    return hash_values(key.values(packet), seed) % size
