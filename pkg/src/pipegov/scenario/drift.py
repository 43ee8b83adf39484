"""Seeded schema mutation for generating drift faults.

Produces a new schema one edit away from the input, guaranteed to
classify as the requested compatibility. Used by scenario builders so a
drift fault always carries a real, well-formed delta.
"""

from __future__ import annotations

import random

from pipegov.core.schema import Column, Dtype, Schema, WIDENINGS

NARROWINGS: frozenset[tuple[Dtype, Dtype]] = frozenset((new, old) for old, new in WIDENINGS)


class NoEligibleChange(ValueError):
    """The schema offers no edit of the requested compatibility."""


def _fresh_name(schema: Schema, rng: random.Random) -> str:
    taken = {c.name for c in schema.columns}
    n = len(schema.columns)
    while f"c{n}" in taken:
        n += 1
    return f"c{n}"


def _with_column(schema: Schema, index: int, column: Column) -> Schema:
    cols = list(schema.columns)
    cols[index] = column
    return Schema(columns=tuple(cols), version=schema.version + 1)


def mutate_schema(schema: Schema, drift_kind: str, seed: int) -> Schema:
    """One seeded edit of the requested kind: 'compatible' or 'incompatible'.

    Compatible edits add a nullable column or widen a numeric type.
    Incompatible edits drop a column, narrow a type, forbid nulls on a
    nullable column, or rename without declaring the alias. The last
    column is never dropped.
    """

    if not schema.columns:
        raise NoEligibleChange("schema has no columns")
    if drift_kind not in ("compatible", "incompatible"):
        raise ValueError(f"drift_kind must be 'compatible' or 'incompatible', got {drift_kind!r}")
    rng = random.Random(seed)
    moves: list[tuple] = []

    if drift_kind == "compatible":
        for i, col in enumerate(schema.columns):
            for old, new in sorted(WIDENINGS):
                if col.dtype is old:
                    moves.append(("widen", i, new))
        moves.append(("add", None, None))
        op, index, arg = rng.choice(moves)
        if op == "widen":
            col = schema.columns[index]
            return _with_column(schema, index, Column(col.name, arg, col.nullable))
        name = _fresh_name(schema, rng)
        dtype = rng.choice(sorted(Dtype, key=lambda d: d.value))
        return Schema(
            columns=schema.columns + (Column(name, dtype, nullable=True),),
            version=schema.version + 1,
        )

    for i, col in enumerate(schema.columns):
        if len(schema.columns) > 1:
            moves.append(("drop", i, None))
        for old, new in sorted(NARROWINGS):
            if col.dtype is old:
                moves.append(("narrow", i, new))
        if col.nullable:
            moves.append(("tighten", i, None))
        moves.append(("rename", i, None))
    if not moves:
        raise NoEligibleChange("no incompatible edit available")
    op, index, arg = rng.choice(moves)
    col = schema.columns[index]
    if op == "drop":
        cols = tuple(c for j, c in enumerate(schema.columns) if j != index)
        return Schema(columns=cols, version=schema.version + 1)
    if op == "narrow":
        return _with_column(schema, index, Column(col.name, arg, col.nullable))
    if op == "tighten":
        return _with_column(schema, index, Column(col.name, col.dtype, nullable=False))
    renamed = _fresh_name(schema, rng)
    return _with_column(schema, index, Column(renamed, col.dtype, col.nullable))
