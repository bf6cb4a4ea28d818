"""Instance generators built from the hardness reductions.

They are fixtures with known combinatorial answers: a positive DNF's
satisfying assignments, or the covers of a set system.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .data import Database, make_relation
from .distributions import FactorizedDistribution
from .errors import InputError
from .query import Atom, Const, Filter, LinExpr, Param, ParamQuery, Var
from .shap import ShapTask
from .similarity import JACCARD, SimilarityFn
from .whynot import WhyNotInstance

MAX_SCALE = 12


@dataclass(frozen=True)
class PosDnf:
    """Disjunction of conjunctions of positive variables ``X_0..X_{ell-1}``."""

    ell: int
    disjuncts: tuple  # of frozensets of variable indices

    def __post_init__(self):
        object.__setattr__(self, "disjuncts", tuple(frozenset(d) for d in self.disjuncts))
        if self.ell < 1:
            raise InputError("a DNF needs at least one variable")
        if not self.disjuncts:
            raise InputError("a DNF needs at least one disjunct")
        for d in self.disjuncts:
            if not d:
                raise InputError("disjuncts must be non-empty")
            if not all(0 <= x < self.ell for x in d):
                raise InputError(f"disjunct {sorted(d)} mentions a variable outside 0..{self.ell - 1}")

    def satisfied(self, alpha: Sequence) -> bool:
        return any(all(alpha[x] for x in d) for d in self.disjuncts)

    def count_models(self) -> int:
        return sum(self.satisfied(a) for a in itertools.product((0, 1), repeat=self.ell))

    @classmethod
    def random(cls, rng: random.Random, ell: int, n_disjuncts: int, max_width: int = 3) -> "PosDnf":
        ds = []
        for _ in range(n_disjuncts):
            w = rng.randint(1, min(max_width, ell))
            ds.append(frozenset(rng.sample(range(ell), w)))
        return cls(ell, tuple(ds))


def _check_scale(n, what):
    if n > MAX_SCALE:
        raise InputError(f"{what} {n} exceeds the generator limit {MAX_SCALE}")


def _uniform_bits(ell) -> FactorizedDistribution:
    return FactorizedDistribution([{0: Fraction(1, 2), 1: Fraction(1, 2)} for _ in range(ell)])


def gen_dnf_instance(phi: PosDnf, similarity: SimilarityFn = JACCARD) -> ShapTask:
    """Boolean star query ``R_1(x, y_1), ..., R_l(x, y_l)``.  Disjunct ``j`` is
    the value ``x = j``; ``R_i`` accepts ``y_i = 1`` always and ``y_i = 0``
    when ``X_i`` is not in disjunct ``j``."""
    _check_scale(phi.ell, "variable count")
    names = [f"y{i + 1}" for i in range(phi.ell)]
    atoms = tuple(Atom(f"R{i + 1}", (Var("x"), Param(n))) for i, n in enumerate(names))
    q = ParamQuery("Q", (), tuple(names), atoms, ())
    rels = []
    for i in range(phi.ell):
        rows = []
        for j, d in enumerate(phi.disjuncts, start=1):
            rows.append((j, 1))
            if i not in d:
                rows.append((j, 0))
        rels.append(make_relation(f"R{i + 1}", ["D", "V"], rows, ["integer", "integer"]))
    db = Database({r.name: r for r in rels})
    return ShapTask(q, db, (1,) * phi.ell, _uniform_bits(phi.ell), similarity)


def gen_ineq_instance(phi: PosDnf, similarity: SimilarityFn = JACCARD) -> ShapTask:
    """Boolean query ``R(x_1..x_l), [x_j <= y_j]`` with one row per disjunct:
    the indicator vector of its variables."""
    _check_scale(phi.ell, "variable count")
    names = [f"y{i + 1}" for i in range(phi.ell)]
    xs = [Var(f"x{i + 1}") for i in range(phi.ell)]
    filters = tuple(Filter(LinExpr.of(x), "<=", LinExpr.of(Param(n))) for x, n in zip(xs, names))
    q = ParamQuery("Q", (), tuple(names), (Atom("R", tuple(xs)),), filters)
    rows = [tuple(1 if i in d else 0 for i in range(phi.ell)) for d in phi.disjuncts]
    rel = make_relation("R", [f"A{i + 1}" for i in range(phi.ell)], rows, ["integer"] * phi.ell)
    db = Database({"R": rel})
    return ShapTask(q, db, (1,) * phi.ell, _uniform_bits(phi.ell), similarity)


def recover_model_count(task: ShapTask, expected_similarity: Fraction) -> Fraction:
    """Invert ``E[s] = (#phi * s(true) + (2^l - #phi) * s(false)) / 2^l`` where
    ``s(true)`` and ``s(false)`` compare a true and a false Boolean answer to
    the reference answer (true at the all-ones reference)."""
    ref = task.reference_answers()
    true = make_relation(ref.name, ref.schema.attribute_names, [()])
    false = make_relation(ref.name, ref.schema.attribute_names, [])
    s_true = Fraction(task.similarity(true, ref))
    s_false = Fraction(task.similarity(false, ref))
    if s_true == s_false:
        raise InputError(f"similarity {task.similarity} cannot tell true from false answers")
    return 2**task.ell * (Fraction(expected_similarity) - s_false) / (s_true - s_false)


def gen_setcover_instance(m: int, sets: Sequence) -> WhyNotInstance:
    """One column per set, one row per element (1 where the element is in
    the set), and filter ``[x_i = 0]`` per set.  A coalition of filters
    eliminates every row exactly when its sets cover ``1..m``."""
    sets = [frozenset(s) for s in sets]
    _check_scale(m, "universe size")
    _check_scale(len(sets), "set count")
    if not sets:
        raise InputError("need at least one set")
    for s in sets:
        if not s <= set(range(1, m + 1)):
            raise InputError(f"set {sorted(s)} is not a subset of 1..{m}")
    if frozenset().union(*sets) != frozenset(range(1, m + 1)):
        raise InputError("the sets do not cover the universe, so the why-not tuple would be an answer")
    n = len(sets)
    xs = [Var(f"x{i + 1}") for i in range(n)]
    filters = tuple(Filter(LinExpr.of(x), "=", LinExpr.of(Const(0))) for x in xs)
    q = ParamQuery("Q", (), (), (Atom("R", tuple(xs)),), filters)
    rows = [tuple(1 if j in s else 0 for s in sets) for j in range(1, m + 1)]
    rel = make_relation("R", [f"S{i + 1}" for i in range(n)], rows, ["integer"] * n)
    return WhyNotInstance(q, Database({"R": rel}), ())


def count_covers(m: int, sets: Sequence) -> int:
    universe = frozenset(range(1, m + 1))
    total = 0
    for r in range(len(sets) + 1):
        for combo in itertools.combinations(sets, r):
            if frozenset().union(*combo) == universe:
                total += 1
    return total
