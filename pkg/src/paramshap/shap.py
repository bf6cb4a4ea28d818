"""SHAP scores of query parameters.

Three engines share one task object:

* brute force over all coalitions, with the utility computed by enumerating
  the conditioned parameter support;
* the exact pipeline for full p-acyclic queries and similarities that are
  linear in Count and Intersection, which reads the stratified coalition
  sums off an interpolation of expected similarities;
* Monte Carlo sampling from the perturbed distributions with a Hoeffding
  sample size.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .data import Database, Relation
from .distributions import (
    FactorizedDistribution,
    PerturbationDistribution,
    make_rng,
    mix_with_reference,
    sample_perturbation,
    shapley_weight,
)
from .errors import BudgetExceeded, ComputationError, InputError, PreconditionError
from .evaluation import (
    DEFAULT_BUDGET_ROWS,
    DEFAULT_FILTER_ARITY,
    evaluate,
    expected_count,
    materialize_filters,
    variable_domains,
    weighted_count,
)
from .hypergraph import gyo_reduce, hypergraph
from .linalg import InterpolationPlan, fit
from .query import Param, ParamQuery, ground, intersect_with_reference
from .similarity import SimilarityFn

BRUTE_FORCE_LIMIT = 20
SUPPORT_BUDGET = 10**6


class QueryOracle:
    """Memoized ``p -> Q_p(D)``.  Only the used parameters enter the cache key,
    so one oracle can serve several tasks over the same query and database."""

    def __init__(self, query: ParamQuery, db: Database, budget_rows: Optional[int] = DEFAULT_BUDGET_ROWS):
        self.query = query
        self.db = db
        self.budget_rows = budget_rows
        used = query.used_parameters()
        self.used = [j for j, name in enumerate(query.params) if name in used]
        self._cache = {}
        self.evaluations = 0

    def key(self, p) -> tuple:
        return tuple(p[j] for j in self.used)

    def answers(self, p) -> Relation:
        k = self.key(p)
        rel = self._cache.get(k)
        if rel is None:
            rel = evaluate(ground(self.query, p), self.db, self.budget_rows)
            self._cache[k] = rel
            self.evaluations += 1
        return rel


@dataclass
class ShapTask:
    query: ParamQuery
    database: Database
    p_star: tuple
    dist: object
    similarity: SimilarityFn
    budget_rows: Optional[int] = DEFAULT_BUDGET_ROWS
    support_budget: Optional[int] = SUPPORT_BUDGET
    filter_arity_max: Optional[int] = DEFAULT_FILTER_ARITY
    brute_force_limit: int = BRUTE_FORCE_LIMIT
    oracle: Optional[QueryOracle] = None

    def __post_init__(self):
        self.p_star = tuple(self.p_star)
        if len(self.p_star) != self.query.ell:
            raise InputError(f"reference {self.p_star} has length {len(self.p_star)}, query has {self.query.ell} parameters")
        if self.dist.ell != self.query.ell:
            raise InputError(f"distribution has {self.dist.ell} parameters, query has {self.query.ell}")
        if self.dist.prob(self.p_star) == 0:
            raise PreconditionError("reference has probability 0")
        if self.oracle is None:
            self.oracle = QueryOracle(self.query, self.database, self.budget_rows)
        self._sim_cache = {}
        self._nu_cache = {}
        self._exact = None

    @property
    def ell(self) -> int:
        return self.query.ell

    def with_similarity(self, fn: SimilarityFn) -> "ShapTask":
        """Same instance, another similarity; query answers are shared."""
        t = ShapTask(self.query, self.database, self.p_star, self.dist, fn, self.budget_rows,
                     self.support_budget, self.filter_arity_max, self.brute_force_limit, self.oracle)
        t._exact = self._exact
        return t

    def with_distribution(self, dist) -> "ShapTask":
        return ShapTask(self.query, self.database, self.p_star, dist, self.similarity, self.budget_rows,
                        self.support_budget, self.filter_arity_max, self.brute_force_limit, self.oracle)

    def reference_answers(self) -> Relation:
        return self.oracle.answers(self.p_star)

    def sim_at(self, p) -> Fraction:
        k = self.oracle.key(p)
        v = self._sim_cache.get(k)
        if v is None:
            v = Fraction(self.similarity(self.oracle.answers(p), self.reference_answers()))
            self._sim_cache[k] = v
        return v

    def sim_empty(self) -> Fraction:
        ref = self.reference_answers()
        return Fraction(self.similarity(Relation(ref.schema, frozenset()), ref))


@dataclass
class ShapResult:
    params: tuple
    scores: list
    method: str
    nu_full: Optional[object] = None
    nu_empty: Optional[object] = None
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    samples: Optional[int] = None
    details: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.method in ("exact", "brute")

    def as_dict(self) -> dict:
        def enc(x):
            if x is None:
                return None
            return str(x) if isinstance(x, Fraction) else float(x)

        out = {
            "method": self.method,
            "scores": [{"parameter": p, "score": enc(s)} for p, s in zip(self.params, self.scores)],
            "nu_full": enc(self.nu_full),
            "nu_empty": enc(self.nu_empty),
        }
        if self.method == "mc":
            out.update(epsilon=self.epsilon, delta=self.delta, samples_per_side=self.samples)
        return out


# --- utilities ------------------------------------------------------------------

def truncation_sets(task: ShapTask) -> dict:
    """Parameter index -> the values that can yield a nonempty answer.

    Only parameters that occur in atoms and in no filter are truncated; any
    other value of such a parameter leaves some atom without a match."""
    q = task.query
    in_filters = {p for f in q.filters for p in f.parameters()}
    cols = {}
    for a in q.atoms:
        rel = task.database[a.relation]
        for k, t in enumerate(a.terms):
            if isinstance(t, Param) and t.name not in in_filters:
                col = rel.column(k)
                cols[t.name] = col if t.name not in cols else cols[t.name] & col
    return {q.param_index(name): vals for name, vals in cols.items()}


def _conditioned_points(task: ShapTask, J: frozenset, dist=None):
    """Yields (p, weight) over the conditioned support, truncated where
    possible, and returns the truncated mass via the final (None, residual)."""
    dist = dist or task.dist
    if not getattr(dist, "is_factorized", False):
        rows = list(dist.conditional_support(J, task.p_star))
        if task.support_budget is not None and len(rows) > task.support_budget:
            raise BudgetExceeded(f"conditioned support has {len(rows)} points (budget {task.support_budget})")
        yield from rows
        return
    if dist.condition_mass(J, task.p_star) == 0:
        raise PreconditionError("conditioning event has probability 0")
    trunc = truncation_sets(task)
    used = set(task.oracle.used)
    axes = []
    for j, m in enumerate(dist.marginals):
        if j in J or j not in used:
            axes.append([(task.p_star[j], Fraction(1))])
        elif j in trunc:
            axes.append([(v, w) for v, w in m.items() if v in trunc[j]])
        else:
            axes.append(list(m.items()))
    size = math.prod(len(a) for a in axes)
    if task.support_budget is not None and size > task.support_budget:
        raise BudgetExceeded(f"conditioned support has {size} points (budget {task.support_budget})")
    mass = Fraction(0)
    for p, w in _product(axes):
        mass += w
        yield p, w
    if mass != 1:
        yield None, 1 - mass


def _product(axes):
    if not axes:
        yield (), Fraction(1)
        return
    head, rest = axes[0], axes[1:]
    for tail, w in _product(rest):
        for v, x in head:
            yield (v,) + tail, x * w


def expected_similarity(task: ShapTask, J=frozenset(), dist=None) -> Fraction:
    total = Fraction(0)
    for p, w in _conditioned_points(task, frozenset(J), dist):
        total += w * (task.sim_empty() if p is None else task.sim_at(p))
    return total


def nu(task: ShapTask, J) -> Fraction:
    """Expected similarity to the reference output with the parameters in
    ``J`` held at their reference values."""
    J = frozenset(J)
    v = task._nu_cache.get(J)
    if v is None:
        v = expected_similarity(task, J)
        task._nu_cache[J] = v
    return v


def nu_bar(task: ShapTask, J) -> Fraction:
    """Dual utility with constant 0: minus the utility of the complement."""
    return -nu(task, frozenset(range(task.ell)) - frozenset(J))


def shapley_values(ell: int, v: Callable[[frozenset], Fraction]) -> list:
    table = {}
    for mask in range(1 << ell):
        J = frozenset(j for j in range(ell) if mask >> j & 1)
        table[mask] = Fraction(v(J))
    weights = [shapley_weight(ell, k) for k in range(ell)] if ell else []
    out = []
    for i in range(ell):
        bit = 1 << i
        s = Fraction(0)
        for mask in range(1 << ell):
            if not mask & bit:
                s += weights[bin(mask).count("1")] * (table[mask | bit] - table[mask])
        out.append(s)
    return out


def _check_brute_limit(task: ShapTask):
    if task.ell > task.brute_force_limit:
        raise BudgetExceeded(f"brute force over {task.ell} parameters exceeds the limit {task.brute_force_limit}")
    if task.ell > 12:
        warnings.warn(f"brute force over 2^{task.ell} coalitions may be slow")


def shap_bruteforce(task: ShapTask, i: int) -> Fraction:
    _check_brute_limit(task)
    return shapley_values(task.ell, lambda J: nu(task, J))[i]


def shap_bruteforce_all(task: ShapTask, dual: bool = False) -> ShapResult:
    _check_brute_limit(task)
    util = (lambda J: nu_bar(task, J)) if dual else (lambda J: nu(task, J))
    scores = shapley_values(task.ell, util)
    full = nu(task, frozenset(range(task.ell)))
    empty = nu(task, frozenset())
    _assert_efficiency(scores, full, empty)
    return ShapResult(task.query.params, scores, "brute", full, empty)


def _assert_efficiency(scores, full, empty):
    if sum(scores, Fraction(0)) != full - empty:
        raise ComputationError(
            f"efficiency violated: scores sum to {sum(scores, Fraction(0))}, utility gap is {full - empty}"
        )


# --- exact pipeline --------------------------------------------------------------

class _ExactContext:
    """Materialized query, the intersection query and |Q_{p*}(D)|, plus a cache
    of (expected Count, expected Intersection) per distribution."""

    def __init__(self, task: ShapTask):
        self.error = None
        try:
            self._build(task)
        except PreconditionError as exc:
            self.error = str(exc)

    def _build(self, task):
        q = task.query
        if not getattr(task.dist, "is_factorized", False):
            raise PreconditionError("exact computation needs a fully factorized distribution")
        if not q.is_full:
            raise PreconditionError(f"query is not full: bound variables {list(q.bound)}")
        gyo = gyo_reduce(hypergraph(q, True, True))
        if not gyo.acyclic:
            raise PreconditionError(f"query is not p-acyclic: cycle {'-'.join(gyo.residual)}")
        if q.filters:
            try:
                m = materialize_filters(q, task.database, task.dist, task.filter_arity_max, task.budget_rows)
            except InputError as exc:
                raise PreconditionError(str(exc)) from None
            self.query, self.db = m.query, m.database
        else:
            self.query, self.db = q, task.database
        self.cap = intersect_with_reference(self.query, task.p_star)
        self.ref_count = weighted_count(ground(self.query, task.p_star), self.db, {})
        self._cache = {}

    def components(self, dist) -> tuple:
        v = self._cache.get(dist)
        if v is None:
            v = (expected_count(self.query, self.db, dist), expected_count(self.cap, self.db, dist))
            self._cache[dist] = v
        return v


def _exact_context(task: ShapTask) -> _ExactContext:
    if task._exact is None:
        task._exact = _ExactContext(task)
    return task._exact


def exact_applicable(task: ShapTask) -> Optional[str]:
    """None when the exact pipeline applies, else the violated condition."""
    if not task.similarity.decomposable:
        return f"similarity {task.similarity} is not a linear combination of Count and Intersection"
    return _exact_context(task).error


def _combine(fn: SimilarityFn, count, inter, ref_count, with_constant=True) -> Fraction:
    if fn.name == "count":
        return count
    if fn.name == "intersection":
        return inter
    if fn.name == "neg-sym-diff":
        return 2 * inter - count - (ref_count if with_constant else 0)
    if fn.name == "neg-diff":
        # -|Q* minus Q| = |Q cap Q*| - |Q*|; Count does not enter
        return inter - (ref_count if with_constant else 0)
    raise PreconditionError(f"similarity {fn} is not decomposable")


def _esim_fast(task: ShapTask, dist, with_constant=True) -> Fraction:
    ctx = _exact_context(task)
    if ctx.error:
        raise PreconditionError(ctx.error)
    count, inter = ctx.components(dist)
    return _combine(task.similarity, count, inter, ctx.ref_count, with_constant)


def esim(task: ShapTask, method: str = "auto") -> Fraction:
    """Expected similarity of ``Q_p(D)`` to the reference output, p ~ dist."""
    if method in ("auto", "exact"):
        why = exact_applicable(task)
        if why is None:
            return _esim_fast(task, task.dist)
        if method == "exact":
            raise PreconditionError(why)
    return expected_similarity(task, frozenset())


def shap_exact(task: ShapTask) -> ShapResult:
    why = exact_applicable(task)
    if why is not None:
        raise PreconditionError(why)
    ctx = _exact_context(task)
    ell = task.ell
    used = task.query.used_parameters()
    scores = []
    plans = {}
    for i, name in enumerate(task.query.params):
        if name not in used:
            scores.append(Fraction(0))
            continue
        points = [Fraction(r, ell) for r in range(1, ell + 1)]
        sums = {}
        for b in (1, 0):
            values = [
                _esim_fast(task, mix_with_reference(task.dist, task.p_star, q, {(i, b)}), with_constant=False)
                for q in points
            ]
            plan = fit(points, values, "bernstein")
            plans[(name, b)] = plan
            sums[b] = plan.solution
        scores.append(sum((shapley_weight(ell, k) * (sums[1][k] - sums[0][k]) for k in range(ell)), Fraction(0)))
    # utility endpoints from independent computations
    full = _combine(task.similarity, ctx.ref_count, ctx.ref_count, ctx.ref_count)
    empty = _esim_fast(task, task.dist)
    _assert_efficiency(scores, full, empty)
    return ShapResult(task.query.params, scores, "exact", full, empty, details={"interpolation": plans})


# --- Monte Carlo -----------------------------------------------------------------

def hoeffding_sample_count(epsilon: float, delta: float, width=1) -> int:
    if not (epsilon > 0 and 0 < delta < 1):
        raise InputError("need epsilon > 0 and 0 < delta < 1")
    return math.ceil(float(width) ** 2 / epsilon**2 * math.log(2 / delta))


def _bounds(task: ShapTask, bounds):
    if bounds is not None:
        a, b = bounds
        if b < a:
            raise InputError(f"bounds ({a}, {b}) are reversed")
        return a, b
    if task.similarity.bounds is None:
        raise PreconditionError(
            f"similarity {task.similarity} is unbounded; Monte Carlo needs caller-supplied bounds"
        )
    return task.similarity.bounds


def _chunk_sum(task, pd, seed, i, b, c, n) -> Fraction:
    rng = make_rng(seed, i, b, c)
    total = Fraction(0)
    for _ in range(n):
        total += task.sim_at(sample_perturbation(pd, rng))
    return total


def shap_montecarlo(task: ShapTask, i: int, epsilon: float = 0.05, delta: float = 0.05, seed=0,
                    bounds=None, chunk_size: int = 256, threads: int = 1):
    """Returns ``(estimate, N)``.  Chunk ``c`` of side ``b`` draws from stream
    ``(seed, i, b, c)``, so the estimate does not depend on ``threads``."""
    a, b = _bounds(task, bounds)
    n = hoeffding_sample_count(epsilon, delta, b - a)
    means = {}
    for bit in (1, 0):
        pd = PerturbationDistribution(task.dist, i, bit, task.p_star)
        chunks = [(c, min(chunk_size, n - c * chunk_size)) for c in range((n + chunk_size - 1) // chunk_size)]
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(lambda cn: _chunk_sum(task, pd, seed, i, bit, *cn), chunks))
        else:
            parts = [_chunk_sum(task, pd, seed, i, bit, c, k) for c, k in chunks]
        means[bit] = sum(parts, Fraction(0)) / n
    return float(means[1] - means[0]), n


def shap_montecarlo_all(task: ShapTask, epsilon=0.05, delta=0.05, seed=0, bounds=None,
                        chunk_size=256, threads=1) -> ShapResult:
    scores = []
    n = None
    for i in range(task.ell):
        est, n = shap_montecarlo(task, i, epsilon, delta, seed, bounds, chunk_size, threads)
        scores.append(est)
    return ShapResult(task.query.params, scores, "mc", epsilon=epsilon, delta=delta, samples=n)


# --- dispatch ----------------------------------------------------------------------

def compute_shap(task: ShapTask, method: str = "auto", epsilon=0.05, delta=0.05, seed=0, bounds=None,
                 threads=1) -> ShapResult:
    notes = []
    if not task.similarity.left_sensitive:
        notes.append(f"similarity {task.similarity} is not left-sensitive")
    nulls = task.query.null_parameters()
    if nulls:
        notes.append("null-player parameters (score 0): " + ", ".join("$" + p for p in nulls))
    if method == "auto":
        if exact_applicable(task) is None:
            method = "exact"
        elif task.ell <= 12 and _support_estimate(task) <= (task.support_budget or SUPPORT_BUDGET):
            method = "brute"
        else:
            method = "mc"
    if method == "exact":
        res = shap_exact(task)
    elif method == "brute":
        res = shap_bruteforce_all(task)
    elif method == "mc":
        res = shap_montecarlo_all(task, epsilon, delta, seed, bounds, threads=threads)
    else:
        raise InputError(f"unknown method {method!r}")
    res.warnings.extend(notes)
    return res


def _support_estimate(task: ShapTask) -> int:
    if not getattr(task.dist, "is_factorized", False):
        return task.dist.support_size()
    trunc = truncation_sets(task)
    used = set(task.oracle.used)
    size = 1
    for j, m in enumerate(task.dist.marginals):
        if j in used:
            size *= len([v for v in m if j not in trunc or v in trunc[j]])
    return size
