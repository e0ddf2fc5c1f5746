"""
Core model shared by the interpreter and the compiler: header schema,
packets, flow keys, expressions, hashing and state declarations.
"""
from .schema import HeaderSchema, load_schema, default_schema, META_FIELDS
from .packet import Packet
from .hashing import fmix64, hash_values, derive_seed, key_index
from .expr import (
    Expr, Lit, FieldRef, StateRef, BinOp, Not, Random, Temp, Cell,
    evaluate, eval_expr, to_source, bind_residual, mentions,
)
from .decls import (
    FlowKey, StateDecl, CounterKind, TimestampKind, BloomKind, SketchKind, HashMapKind,
)

__all__ = [
    'HeaderSchema', 'load_schema', 'default_schema', 'META_FIELDS', 'Packet',
    'fmix64', 'hash_values', 'derive_seed', 'key_index',
    'Expr', 'Lit', 'FieldRef', 'StateRef', 'BinOp', 'Not', 'Random', 'Temp', 'Cell',
    'evaluate', 'eval_expr', 'to_source', 'bind_residual', 'mentions',
    'FlowKey', 'StateDecl', 'CounterKind', 'TimestampKind', 'BloomKind', 'SketchKind', 'HashMapKind',
]
