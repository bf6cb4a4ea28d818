"""Fixtures from the worked examples and random instance generators."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from paramshap.data import Database, make_relation
from paramshap.distributions import FactorizedDistribution, JointTableDistribution
from paramshap.hypergraph import is_p_acyclic
from paramshap.query import Atom, Filter, LinExpr, Param, ParamQuery, Var, parse_query
from paramshap.shap import ShapTask
from paramshap.similarity import NEG_DIFF
from paramshap.whynot import WhyNotInstance

# --- worked examples -------------------------------------------------------------


def cube_db(n: int) -> Database:
    rows = set()
    for a, b1, b2, b3 in itertools.product(range(1, n + 1), repeat=4):
        rows.add((b1, 1, b3, a))
        rows.add((1, b2, b3, a))
    return Database({"R": make_relation("R", ["B1", "B2", "B3", "A"], rows, ["integer"] * 4)})


CUBE_QUERY = "Q(x; $y1, $y2, $y3) :- R($y1, $y2, $y3, x)"


def cube_task(n: int = 2, sim=NEG_DIFF) -> ShapTask:
    q = parse_query(CUBE_QUERY)
    dist = FactorizedDistribution.uniform([range(1, n + 1)] * 3)
    return ShapTask(q, cube_db(n), (1, 1, 1), dist, sim)


def twohop_db() -> Database:
    rows = [(7, 1, 5), (7, 1, 2), (7, 2, 6)]
    return Database({"TwoHop": make_relation("TwoHop", ["Arr", "T1", "T2"], rows, ["integer"] * 3)})


TWOHOP_QUERY = "Q(tarr;) :- TwoHop(tarr, t1, t2), [t1 + 1 < t2], [t2 < t1 + 4], [tarr <= 8]"


def twohop_instance() -> WhyNotInstance:
    return WhyNotInstance(parse_query(TWOHOP_QUERY), twohop_db(), (7,))


FLIGHTS_QUERY = (
    'Q(x, tdep, tarr; $d, $c) :- Flights(x, $d, a, "CDG", "JFK", tdep, tarr), Airline(a, $c)'
)
CYCLIC_QUERY = "Q(x; $y1, $y2) :- R(x, $y1), U($y1, $y2), V($y2, x)"


# --- random instances ------------------------------------------------------------


def random_join_tree_query(rng: random.Random, n_atoms: int, ell: int, full: bool = True,
                           max_arity: int = 3):
    """A random p-acyclic query built by growing a join tree: every new atom
    shares a subset of vertices with one earlier atom."""
    params = [f"p{j + 1}" for j in range(ell)]
    fresh_vars = (f"x{k}" for k in itertools.count(1))
    atoms_vs = []
    unplaced = list(params)
    rng.shuffle(unplaced)
    for k in range(n_atoms):
        arity = rng.randint(1, max_arity)
        vs = []
        if atoms_vs:
            base = rng.choice(atoms_vs)
            shared = rng.sample(base, rng.randint(0, min(len(base), arity)))
            vs.extend(shared)
        while len(vs) < arity:
            if unplaced and rng.random() < 0.5:
                vs.append("$" + unplaced.pop())
            else:
                vs.append(next(fresh_vars))
        rng.shuffle(vs)
        atoms_vs.append(vs)
    # leftover parameters join the last atoms (keeps acyclicity: new vertices)
    for p in unplaced:
        if rng.random() < 0.8:
            rng.choice(atoms_vs).append("$" + p)
    atoms = []
    for k, vs in enumerate(atoms_vs):
        terms = tuple(Param(v[1:]) if v.startswith("$") else Var(v) for v in vs)
        atoms.append(Atom(f"R{k}", terms))
    variables = []
    for vs in atoms_vs:
        for v in vs:
            if not v.startswith("$") and v not in variables:
                variables.append(v)
    free = variables if full else [v for v in variables if rng.random() < 0.5]
    q = ParamQuery("Q", tuple(free), tuple(params), tuple(atoms), ())
    assert is_p_acyclic(q)
    return q


def random_db(rng: random.Random, q: ParamQuery, domain=(1, 2, 3), max_tuples: int = 6) -> Database:
    rels = {}
    for a in q.atoms:
        arity = len(a.terms)
        n = rng.randint(max_tuples // 2, max_tuples)
        rows = {tuple(rng.choice(domain) for _ in range(arity)) for _ in range(n)}
        rels[a.relation] = make_relation(a.relation, [f"c{j}" for j in range(arity)], rows,
                                         ["integer"] * arity)
    return Database(rels)


def random_factorized(rng: random.Random, ell: int, domain=(1, 2, 3), max_support: int = 3):
    margs = []
    for _ in range(ell):
        k = rng.randint(1, max_support)
        vals = rng.sample(list(domain), min(k, len(domain)))
        raw = [rng.randint(1, 4) for _ in vals]
        tot = sum(raw)
        margs.append({v: Fraction(r, tot) for v, r in zip(vals, raw)})
    return FactorizedDistribution(margs)


def random_joint(rng: random.Random, ell: int, domain=(1, 2, 3), max_support: int = 3, size: int = 6):
    axes = [rng.sample(list(domain), rng.randint(1, max_support)) for _ in range(ell)]
    pts = list(itertools.product(*axes))
    rng.shuffle(pts)
    pts = pts[: max(1, min(size, len(pts)))]
    raw = [rng.randint(1, 4) for _ in pts]
    tot = sum(raw)
    return JointTableDistribution([(p, Fraction(r, tot)) for p, r in zip(pts, raw)])


def random_reference(rng, dist):
    return rng.choice(list(dist.support()))


def random_inequality_filters(rng: random.Random, q: ParamQuery, max_filters: int = 3, max_arity: int = 3):
    """Filters placed inside single atoms (so p-acyclicity is preserved),
    mixing variables and parameters of that atom."""
    filters = []
    for _ in range(rng.randint(1, max_filters)):
        atom = rng.choice(q.atoms)
        verts = [t for t in atom.terms if isinstance(t, (Var, Param))]
        verts = list(dict.fromkeys(verts))
        if not verts:
            continue
        k = rng.randint(1, min(max_arity, len(verts)))
        chosen = rng.sample(verts, k)
        lhs = LinExpr.of(chosen[0])
        if k == 1:
            rhs = LinExpr((), rng.choice([1, 2]))
        else:
            # sums of k-1 values in {1, 2}: centre the comparison on them
            rhs = LinExpr(tuple((Fraction(1), t) for t in chosen[1:]), rng.choice([-1, 0, 1]) - (k - 2))
            rhs = rhs.normalized()
        op = rng.choice(["<", "<=", "<=", ">=", ">=", "!=", "=", ">"])
        filters.append(Filter(lhs, op, rhs))
    return ParamQuery(q.name, q.free, q.params, q.atoms, tuple(filters))


def random_task(rng: random.Random, sim, ell_max=5, atoms_max=4, tuples_max=25, support_max=3,
                full=True, joint=False, filters=False):
    """Supports may reach outside the active domain (exercising truncation).
    The reference prefers a parameter tuple with a nonempty answer."""
    ell = rng.randint(1, ell_max)
    q = random_join_tree_query(rng, rng.randint(1, atoms_max), ell, full=full)
    if filters:
        q = random_inequality_filters(rng, q)
    per_atom = max(1, tuples_max // max(1, len(q.atoms)))
    db = random_db(rng, q, domain=(1, 2), max_tuples=per_atom)
    pdom = (1, 2, 3) if rng.random() < 0.3 else (1, 2)
    if joint:
        dist = random_joint(rng, ell, domain=pdom)
    else:
        dist = random_factorized(rng, ell, domain=pdom, max_support=support_max)
    task = ShapTask(q, db, random_reference(rng, dist), dist, sim)
    good = [p for p in dist.support() if task.oracle.answers(p).tuples]
    if good:
        task = ShapTask(q, db, rng.choice(good), dist, sim, oracle=task.oracle)
    return task


def random_whynot(rng: random.Random, n_filters_max=4, atoms_max=3, tuples_max=20, single_atom=False,
                  tries=200):
    """Random acyclic why-not instance: filters live inside atoms; the
    missing tuple is chosen among values that do not survive."""
    for _ in range(tries):
        n_atoms = 1 if single_atom else rng.randint(1, atoms_max)
        q = random_join_tree_query(rng, n_atoms, 0, full=True)
        db = random_db(rng, q, domain=(0, 1, 2, 3), max_tuples=max(2, tuples_max // n_atoms))
        variables = list(q.free)
        free = tuple(v for v in variables if rng.random() < 0.4)
        qf = random_inequality_filters(rng, q, max_filters=n_filters_max, max_arity=3)
        if not qf.filters:
            continue
        qf = ParamQuery("Q", free, (), qf.atoms, qf.filters)
        from paramshap.evaluation import evaluate

        base = ParamQuery("Q", free, (), qf.atoms, ())
        candidates = sorted(evaluate(base, db).tuples)
        answers = evaluate(qf, db).tuples
        missing = [t for t in candidates if t not in answers]
        if not missing:
            continue
        t = rng.choice(missing)
        return WhyNotInstance(qf, db, t)
    raise RuntimeError("could not generate a why-not instance")
