"""Similarity functions on pairs of query results.

The second argument is always the reference result."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .data import Relation, is_numeric
from .errors import InputError, PreconditionError, ValueKindError


@dataclass(frozen=True)
class SimilarityFn:
    name: str
    bounds: Optional[tuple] = None
    left_sensitive: bool = True
    decomposable: bool = False
    symmetric: bool = False
    columns: tuple = ()
    func: Optional[Callable] = None

    def __call__(self, t1, t2) -> Fraction:
        return similarity(self, t1, t2)

    def __str__(self):
        if self.name == "min-diff":
            return f"min-diff:{self.columns[0]}:{self.columns[1]}"
        return self.name


JACCARD = SimilarityFn("jaccard", bounds=(Fraction(0), Fraction(1)), symmetric=True)
INTERSECTION = SimilarityFn("intersection", decomposable=True, symmetric=True)
NEG_SYM_DIFF = SimilarityFn("neg-sym-diff", decomposable=True, symmetric=True)
NEG_SYM_CDIFF = SimilarityFn("neg-sym-cdiff", symmetric=True)
NEG_DIFF = SimilarityFn("neg-diff", decomposable=True)
COUNT = SimilarityFn("count", decomposable=True)

BUILTINS = {f.name: f for f in (JACCARD, INTERSECTION, NEG_SYM_DIFF, NEG_SYM_CDIFF, NEG_DIFF, COUNT)}
DECOMPOSABLE = (COUNT, INTERSECTION, NEG_SYM_DIFF, NEG_DIFF)


def min_diff(col_a, col_b) -> SimilarityFn:
    return SimilarityFn("min-diff", columns=(col_a, col_b))


def custom(name: str, func: Callable, bounds=None) -> SimilarityFn:
    """User-supplied function of two tuple sets, usable on the enumeration paths."""
    return SimilarityFn(name, bounds=bounds, func=func)


def parse_similarity(text: str) -> SimilarityFn:
    text = text.strip()
    if text.startswith("min-diff"):
        parts = text.split(":")
        if len(parts) != 3 or not parts[1] or not parts[2]:
            raise InputError(f"expected min-diff:A:B, got {text!r}")
        return min_diff(parts[1], parts[2])
    try:
        return BUILTINS[text]
    except KeyError:
        names = ", ".join(sorted(BUILTINS)) + ", min-diff:A:B"
        raise InputError(f"unknown similarity {text!r}; expected one of {names}") from None


def is_left_sensitive(fn: SimilarityFn) -> bool:
    return fn.left_sensitive


def _tuples(t):
    if isinstance(t, Relation):
        return t.tuples
    return t if isinstance(t, (set, frozenset)) else frozenset(t)


def similarity(fn: SimilarityFn, t1, t2) -> Fraction:
    if isinstance(t1, Relation) and isinstance(t2, Relation) and t1.schema.arity != t2.schema.arity:
        raise InputError(f"similarity of relations with different arities {t1.schema.arity} and {t2.schema.arity}")
    a, b = _tuples(t1), _tuples(t2)
    name = fn.name
    if fn.func is not None:
        return fn.func(a, b)
    if name == "jaccard":
        union = len(a | b)
        return Fraction(len(a & b), union) if union else Fraction(0)
    if name == "intersection":
        return Fraction(len(a & b))
    if name == "neg-sym-diff":
        return Fraction(-len(a ^ b))
    if name == "neg-sym-cdiff":
        return Fraction(-abs(len(a) - len(b)))
    if name == "neg-diff":
        return Fraction(-len(b - a))
    if name == "count":
        return Fraction(len(a))
    if name == "min-diff":
        return -abs(_min_gap(fn, t1, a) - _min_gap(fn, t2, b))
    raise InputError(f"unknown similarity {name!r}")


def _column_index(rel, col) -> int:
    if isinstance(col, int):
        return col
    if isinstance(rel, Relation):
        names = rel.schema.attribute_names
        if col in names:
            return names.index(col)
    if isinstance(col, str) and col.isdigit():
        return int(col)
    raise InputError(f"min-diff: unknown column {col!r}")


def _min_gap(fn, rel, tuples) -> Fraction:
    if not tuples:
        raise PreconditionError("min-diff is undefined on an empty relation")
    ia, ib = (_column_index(rel, c) for c in fn.columns)
    best = None
    for t in tuples:
        x, y = t[ia], t[ib]
        if not (is_numeric(x) and is_numeric(y)):
            raise ValueKindError(f"min-diff needs numeric columns, got {x!r} and {y!r}")
        d = Fraction(x) - Fraction(y)
        if best is None or d < best:
            best = d
    return best
