"""Shapley rankings of filters for why-not questions.

Given a query with filters and a tuple ``t`` missing from its answer, the
filters are players.  A coalition ``J`` keeps only the filters in ``J``; the
query is specialized to ``t`` and all variables are kept in the output, so
its answers are the intermediate tuples that survive ``J``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .data import Database
from .distributions import FactorizedDistribution
from .errors import InputError, PreconditionError
from .evaluation import DEFAULT_BUDGET_ROWS, DEFAULT_FILTER_ARITY, evaluate
from .linalg import fit
from .query import Atom, Const, Filter, Param, ParamQuery, Var
from .shap import ShapTask, shap_exact, shapley_values
from .similarity import COUNT

UNDEFINED = None


@dataclass
class WhyNotInstance:
    """``t`` may contain ``None`` for positions left undefined; those head
    variables stay free in the specialized query."""

    query: ParamQuery
    database: Database
    t: tuple
    budget_rows: Optional[int] = DEFAULT_BUDGET_ROWS
    filter_arity_max: Optional[int] = DEFAULT_FILTER_ARITY
    brute_force_limit: int = 20

    def __post_init__(self):
        q = self.query
        if q.params:
            raise InputError("why-not questions are asked about queries without parameters")
        self.t = tuple(self.t)
        if len(self.t) != len(q.free):
            raise InputError(f"tuple {self.t} has length {len(self.t)}, query has {len(q.free)} output variables")
        q.validate(self.filter_arity_max)
        values = {v: x for v, x in zip(q.free, self.t) if x is not UNDEFINED}

        def sub(term):
            if isinstance(term, Var) and term.name in values:
                return Const(values[term.name])
            return term

        atoms = tuple(Atom(a.relation, tuple(sub(x) for x in a.terms)) for a in q.atoms)
        filters = tuple(f.substitute(values) for f in q.filters)
        variables = []
        for a in atoms:
            for v in a.variables():
                if v not in variables:
                    variables.append(v)
        # every variable is output, so answers are whole valuations
        self.base = ParamQuery(q.name, tuple(variables), (), atoms, ())
        self.filters = filters
        self._counts = {}
        if self.count(self.players) != 0:
            raise PreconditionError(f"tuple is an answer: {self.t} is in Q(D)")

    @property
    def players(self) -> frozenset:
        return frozenset(range(len(self.filters)))

    def count(self, J) -> int:
        J = frozenset(J)
        c = self._counts.get(J)
        if c is None:
            c = len(evaluate(q_restricted(self, J), self.database, self.budget_rows))
            self._counts[J] = c
        return c


def q_restricted(inst: WhyNotInstance, J) -> ParamQuery:
    J = sorted(J)
    for j in J:
        if not 0 <= j < len(inst.filters):
            raise InputError(f"filter index {j} out of range")
    b = inst.base
    return ParamQuery(b.name, b.free, (), b.atoms, tuple(inst.filters[j] for j in J))


def nu_qual(inst: WhyNotInstance, J) -> Fraction:
    return Fraction(1 if inst.count(J) == 0 else 0)


def nu_size(inst: WhyNotInstance, J) -> Fraction:
    return Fraction(inst.count(frozenset()) - inst.count(J))


@dataclass
class WhyNotResult:
    filters: tuple  # printed filters
    scores: list
    method: str
    utility: str
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "utility": self.utility,
            "scores": [{"filter": f, "index": k, "score": str(s)} for k, (f, s) in enumerate(zip(self.filters, self.scores))],
        }


def _result(inst, scores, method, utility, **details) -> WhyNotResult:
    return WhyNotResult(tuple(str(f) for f in inst.query.filters), scores, method, utility, dict(details))


def whynot_shapley_bruteforce(inst: WhyNotInstance, utility: str = "size") -> list:
    m = len(inst.filters)
    if m > inst.brute_force_limit:
        raise PreconditionError(f"{m} filters exceed the brute-force limit {inst.brute_force_limit}")
    util = {"size": nu_size, "qual": nu_qual}[utility]
    return shapley_values(m, lambda J: util(inst, J))


def removal_profile(inst: WhyNotInstance) -> list:
    """Pairs (intermediate tuple, set of filter indices rejecting it)."""
    rel = evaluate(inst.base, inst.database, inst.budget_rows)
    out = []
    for u in sorted(rel.tuples, key=repr):
        val = dict(zip(inst.base.free, u))
        rejecting = frozenset(k for k, f in enumerate(inst.filters) if not f.holds(val))
        if not rejecting:
            raise PreconditionError(f"tuple is an answer: intermediate tuple {u} passes every filter")
        out.append((u, rejecting))
    return out


def has_covering_atom(inst: WhyNotInstance) -> bool:
    allv = set(inst.base.free)
    return any(allv <= set(a.variables()) for a in inst.base.atoms)


def whynot_size_closedform(inst: WhyNotInstance) -> list:
    """Each rejected intermediate tuple splits one unit evenly among the
    filters rejecting it."""
    if not has_covering_atom(inst):
        raise PreconditionError("closed form needs a relational atom containing all variables")
    scores = [Fraction(0)] * len(inst.filters)
    for _, rejecting in removal_profile(inst):
        share = Fraction(1, len(rejecting))
        for k in rejecting:
            scores[k] += share
    return scores


def switch_names(inst: WhyNotInstance) -> list:
    taken = set(inst.base.free)
    names = []
    for j in range(len(inst.filters)):
        name = f"y{j + 1}"
        while name in taken:
            name = "_" + name
        taken.add(name)
        names.append(name)
    return names


def build_parameterized(inst: WhyNotInstance):
    """Returns ``(Q', factory)``: filter ``j`` of ``Q'`` holds when its switch
    parameter is 0 or the original filter holds; ``factory(pi)`` gives the
    distribution making switch ``j`` equal 1 with probability ``pi[j]``."""
    names = switch_names(inst)
    filters = tuple(Filter(f.lhs, f.op, f.rhs, Param(n)) for f, n in zip(inst.filters, names))
    b = inst.base
    qp = ParamQuery(b.name + "_switched", b.free, tuple(names), b.atoms, filters)

    def factory(pi: Sequence) -> FactorizedDistribution:
        if len(pi) != len(names):
            raise InputError(f"need {len(names)} probabilities, got {len(pi)}")
        margs = []
        for x in pi:
            x = Fraction(x)
            if not 0 < x <= 1:
                raise InputError(f"switch probability {x} outside (0, 1]")
            margs.append({1: x, 0: 1 - x})
        return FactorizedDistribution(margs)

    return qp, factory


def characteristic(J, m: int) -> tuple:
    return tuple(1 if j in J else 0 for j in range(m))


def whynot_shap_size(inst: WhyNotInstance, pi: Sequence) -> list:
    """Scores of the randomized game in which each filter outside the
    coalition is still switched on with its probability; these are the
    Count-SHAP scores of ``Q'`` with reference all-ones, negated."""
    m = len(inst.filters)
    if m == 0:
        return []
    qp, factory = build_parameterized(inst)
    arity = None if inst.filter_arity_max is None else inst.filter_arity_max + 1
    task = ShapTask(qp, inst.database, (1,) * m, factory(pi), COUNT, inst.budget_rows,
                    filter_arity_max=arity)
    return [-s for s in shap_exact(task).scores]


def whynot_size_acyclic(inst: WhyNotInstance, n_points: Optional[int] = None) -> WhyNotResult:
    """Interpolate ``phi(x) = whynot_shap_size(inst, (x, ..., x))`` and read
    off ``phi(0)``.  ``phi`` has degree up to the number of filters ``m``, so
    ``m + 1`` points are used unless ``n_points`` says otherwise."""
    m = len(inst.filters)
    if m == 0:
        return _result(inst, [], "acyclic", "size")
    n = m + 1 if n_points is None else n_points
    xs = [Fraction(r, n + 1) if n_points is not None else Fraction(r, m + 1) for r in range(1, n + 1)]
    evals = [whynot_shap_size(inst, [x] * m) for x in xs]
    scores = []
    plans = []
    for i in range(m):
        plan = fit(xs, [e[i] for e in evals], "vandermonde")
        plans.append(plan)
        scores.append(plan.solution[0])
    return _result(inst, scores, "acyclic", "size", interpolation=plans)


def compute_whynot(inst: WhyNotInstance, utility: str = "size", method: str = "auto") -> WhyNotResult:
    if utility not in ("size", "qual"):
        raise InputError(f"unknown utility {utility!r}; expected size or qual")
    if utility == "qual":
        if method not in ("auto", "brute"):
            raise PreconditionError("the qualitative utility is only computed by brute force")
        return _result(inst, whynot_shapley_bruteforce(inst, "qual"), "brute", "qual")
    if method == "auto":
        if has_covering_atom(inst):
            method = "closed"
        else:
            try:
                return whynot_size_acyclic(inst)
            except PreconditionError:
                method = "brute"
    if method == "closed":
        return _result(inst, whynot_size_closedform(inst), "closed", "size")
    if method == "acyclic":
        return whynot_size_acyclic(inst)
    if method == "brute":
        return _result(inst, whynot_shapley_bruteforce(inst, "size"), "brute", "size")
    raise InputError(f"unknown why-not method {method!r}")
