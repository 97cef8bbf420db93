"""Subspace arithmetic over GF(q) row vectors, on top of galois field arrays."""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import galois
import numpy as np


@lru_cache(maxsize=None)
def field(order: int) -> type[galois.FieldArray]:
    return galois.GF(order)


def empty(gf: type[galois.FieldArray], dim: int) -> galois.FieldArray:
    return gf.Zeros((0, dim))


def stack(gf: type[galois.FieldArray], dim: int, parts: Sequence[galois.FieldArray]) -> galois.FieldArray:
    parts = [p for p in parts if p.shape[0]]
    if not parts:
        return empty(gf, dim)
    return gf(np.vstack([np.asarray(p) for p in parts]))


def rank(rows: galois.FieldArray) -> int:
    if rows.shape[0] == 0:
        return 0
    return int(np.linalg.matrix_rank(rows))


def basis(rows: galois.FieldArray) -> galois.FieldArray:
    """Reduced row echelon basis of the row span (nonzero rows only)."""
    if rows.shape[0] == 0 or not np.any(np.asarray(rows)):
        return type(rows).Zeros((0, rows.shape[1]))
    return rows.row_space()


def contains(space: galois.FieldArray, rows: galois.FieldArray) -> bool:
    """Every row of *rows* lies in the row span of *space*."""
    if rows.shape[0] == 0:
        return True
    if space.shape[0] == 0:
        return not np.any(np.asarray(rows))
    null = space.null_space()
    if null.shape[0] == 0:
        return True
    return not np.any(np.asarray(null @ rows.T))


def innovative(space: galois.FieldArray, row: galois.FieldArray) -> bool:
    return not contains(space, row.reshape(1, -1))


def intersect(a: galois.FieldArray, b: galois.FieldArray) -> galois.FieldArray:
    """Basis of span(a) ∩ span(b), via the left null space of [a; b]."""
    gf = type(a)
    dim = a.shape[1]
    a, b = basis(a), basis(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return empty(gf, dim)
    joint = gf(np.vstack([np.asarray(a), np.asarray(b)]))
    relations = joint.left_null_space()
    if relations.shape[0] == 0:
        return empty(gf, dim)
    return basis(relations[:, : a.shape[0]] @ a)


def random_combination(space: galois.FieldArray, rng: np.random.Generator) -> galois.FieldArray:
    gf = type(space)
    coeffs = gf(rng.integers(0, gf.order, size=space.shape[0]))
    return coeffs @ space


def to_rows(rows: galois.FieldArray) -> list[list[int]]:
    return np.asarray(rows).astype(int).tolist()
