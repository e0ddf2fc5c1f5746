"""
Stateful structures and the per-switch state store.
"""
from .base import aggregate
from .bloom import BloomFilterState, CountingBloom, MembershipBloom, bloom_init, bloom_insert, cbf_aggregate
from .counters import CounterState, TimestampState, counter_set
from .sketches import (
    CountMinSketch, HyperLogLogSketch, PcsaSketch, SketchState, StoreSketch,
    cms_query, cms_update, hll_estimate, hll_update, pcsa_estimate, pcsa_update, store_ops,
)
from .store import STRUCTURES, StateOverlay, StateStore, StateView, reset_chunk

__all__ = [
    'aggregate', 'BloomFilterState', 'CountingBloom', 'MembershipBloom', 'bloom_init', 'bloom_insert',
    'cbf_aggregate', 'CounterState', 'TimestampState', 'counter_set', 'CountMinSketch',
    'HyperLogLogSketch', 'PcsaSketch', 'SketchState', 'StoreSketch', 'cms_query', 'cms_update',
    'hll_estimate', 'hll_update', 'pcsa_estimate', 'pcsa_update', 'store_ops', 'STRUCTURES',
    'StateOverlay', 'StateStore', 'StateView', 'reset_chunk',
]
