"""Query answering, weighted answer counting and filter materialization."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .data import Database, Relation, RelationSchema, is_numeric, make_relation
from .errors import BudgetExceeded, DataError, InputError, PreconditionError
from .hypergraph import gyo_reduce, hypergraph
from .query import Atom, Const, Filter, Param, ParamQuery, Var

DEFAULT_BUDGET_ROWS = 10**6
DEFAULT_FILTER_ARITY = 4


def atom_rows(atom: Atom, db: Database):
    """Tuples of ``atom``'s relation matching its constants and repeated
    vertices, projected onto the distinct vertices.  Returns (vertices, rows)."""
    rel = db[atom.relation]
    if rel.schema.arity != len(atom.terms):
        raise DataError(
            f"atom {atom} has {len(atom.terms)} terms but relation {atom.relation} has arity {rel.schema.arity}"
        )
    verts = atom.vertices()
    pos = {v: k for k, v in enumerate(verts)}
    checks_const = [(k, t.value) for k, t in enumerate(atom.terms) if isinstance(t, Const)]
    slots = [None if isinstance(t, Const) else pos[t.key] for t in atom.terms]
    rows = set()
    for tup in rel.tuples:
        if any(tup[k] != c for k, c in checks_const):
            continue
        out = [None] * len(verts)
        seen = [False] * len(verts)
        ok = True
        for k, s in enumerate(slots):
            if s is None:
                continue
            if seen[s]:
                if out[s] != tup[k]:
                    ok = False
                    break
            else:
                out[s] = tup[k]
                seen[s] = True
        if ok:
            rows.add(tuple(out))
    return verts, rows


def _filter_rows(verts, rows, filters):
    if not filters:
        return rows
    out = set()
    for r in rows:
        val = dict(zip(verts, r))
        if all(f.holds(val) for f in filters):
            out.add(r)
    return out


def _require_ground(q: ParamQuery):
    if q.params or q.used_parameters():
        raise PreconditionError(f"query still has parameters {list(q.params)}; ground it first")


# --- evaluation -----------------------------------------------------------------

def evaluate(q: ParamQuery, db: Database, budget: Optional[int] = DEFAULT_BUDGET_ROWS,
             method: str = "auto") -> Relation:
    """Answer relation over the free variables (set semantics).

    ``method`` is ``auto`` (semijoin reduction for acyclic queries whose
    filters each fit in one atom, generic join otherwise), ``yannakakis`` or
    ``generic``."""
    _require_ground(q)
    schema = RelationSchema.untyped(q.name, q.free)
    if not q.atoms:
        ok = all(f.holds({}) for f in q.filters)
        return Relation(schema, frozenset({()}) if ok else frozenset())
    locals_ = [atom_rows(a, db) for a in q.atoms]
    pushed = [[] for _ in q.atoms]
    spread = []
    for f in q.filters:
        need = set(f.vertices())
        for k, (verts, _) in enumerate(locals_):
            if need <= set(verts):
                pushed[k].append(f)
                break
        else:
            spread.append(f)
    locals_ = [(verts, _filter_rows(verts, rows, fs)) for (verts, rows), fs in zip(locals_, pushed)]
    if method == "auto":
        method = "generic"
        if not spread:
            gyo = gyo_reduce(hypergraph(q, True, False))
            if gyo.acyclic:
                method = "yannakakis"
    if method == "yannakakis":
        if spread:
            raise PreconditionError("semijoin evaluation needs every filter inside one atom")
        gyo = gyo_reduce(hypergraph(q, True, False))
        if not gyo.acyclic:
            raise PreconditionError("semijoin evaluation needs an acyclic query")
        rows = _yannakakis(q, locals_, gyo.join_tree, budget)
    elif method == "generic":
        rows = _generic_join(q, locals_, spread, budget)
    else:
        raise InputError(f"unknown evaluation method {method!r}")
    if budget is not None and len(rows) > budget:
        raise BudgetExceeded(f"answer set has {len(rows)} rows (budget {budget})")
    return Relation(schema, frozenset(rows))


def _project(verts, rows, keep):
    idx = [verts.index(v) for v in keep]
    return {tuple(r[k] for k in idx) for r in rows}


def _yannakakis(q, locals_, tree, budget):
    nodes = [(list(v), set(r)) for v, r in locals_]
    order = tree.bottom_up()
    parent = tree.parent

    def semijoin(target, source):
        tv, trows = nodes[target]
        sv, srows = nodes[source]
        shared = [v for v in tv if v in sv]
        if not shared:
            if not srows:
                trows.clear()
            return
        keys = _project(sv, srows, shared)
        ti = [tv.index(v) for v in shared]
        nodes[target] = (tv, {r for r in trows if tuple(r[k] for k in ti) in keys})

    for n in order:
        if parent[n] is not None:
            semijoin(parent[n], n)
    for n in reversed(order):
        if parent[n] is not None:
            semijoin(n, parent[n])

    free = set(q.free)
    results = {}
    for n in order:
        verts, rows = nodes[n]
        verts = list(verts)
        for c in tree.children[n]:
            cv, crows = results.pop(c)
            shared = [v for v in cv if v in verts]
            extra = [v for v in cv if v not in verts]
            ci = [cv.index(v) for v in shared]
            ei = [cv.index(v) for v in extra]
            index = {}
            for r in crows:
                index.setdefault(tuple(r[k] for k in ci), []).append(tuple(r[k] for k in ei))
            ni = [verts.index(v) for v in shared]
            joined = set()
            for r in rows:
                for tail in index.get(tuple(r[k] for k in ni), ()):
                    joined.add(r + tail)
                    if budget is not None and len(joined) > budget:
                        raise BudgetExceeded(f"intermediate result exceeds {budget} rows")
            verts = verts + extra
            rows = joined
        p = parent[n]
        keep = [v for v in verts if v in free or (p is not None and v in tree.node_vertices[p])]
        results[n] = (keep, _project(verts, rows, keep))
    verts, rows = results[tree.root]
    return _project(verts, rows, list(q.free))


def _generic_join(q, locals_, filters, budget):
    remaining = list(range(len(locals_)))
    remaining.sort(key=lambda k: len(locals_[k][1]))
    order = [remaining.pop(0)]
    bound = set(locals_[order[0]][0])
    while remaining:
        best = max(remaining, key=lambda k: (len(bound & set(locals_[k][0])), -len(locals_[k][1])))
        remaining.remove(best)
        order.append(best)
        bound |= set(locals_[best][0])

    steps = []
    seen = []
    pending = list(filters)
    for k in order:
        verts, rows = locals_[k]
        key = [v for v in verts if v in seen]
        new = [v for v in verts if v not in seen]
        ki = [verts.index(v) for v in key]
        ni = [verts.index(v) for v in new]
        index = {}
        for r in rows:
            index.setdefault(tuple(r[j] for j in ki), []).append(tuple(r[j] for j in ni))
        seen = seen + new
        ready = [f for f in pending if set(f.vertices()) <= set(seen)]
        pending = [f for f in pending if f not in ready]
        steps.append((key, new, index, ready))
    if pending:
        raise InputError(f"filter {pending[0]} mentions variables that occur in no atom")

    out = set()
    free = list(q.free)

    def rec(level, val):
        if level == len(steps):
            out.add(tuple(val[v] for v in free))
            if budget is not None and len(out) > budget:
                raise BudgetExceeded(f"answer set exceeds {budget} rows")
            return
        key, new, index, ready = steps[level]
        for tail in index.get(tuple(val[v] for v in key), ()):
            for v, x in zip(new, tail):
                val[v] = x
            if all(f.holds(val) for f in ready):
                rec(level + 1, val)
        for v in new:
            val.pop(v, None)

    rec(0, {})
    return out


def count_answers(q: ParamQuery, db: Database, budget: Optional[int] = DEFAULT_BUDGET_ROWS) -> int:
    """|Q(D)|; full filter-free acyclic queries are counted without enumeration."""
    if q.is_full and not q.filters and gyo_reduce(hypergraph(q, True, False)).acyclic:
        return int(weighted_count(q, db, {}))
    return len(evaluate(q, db, budget))


# --- counting ---------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedCountInstance:
    query: ParamQuery
    database: Database
    weights: Mapping = None  # vertex key -> {value: weight}; absent vertices weigh 1


def weighted_count(q, db: Database = None, weights: Optional[Mapping] = None) -> Fraction:
    """Sum over answers of the product of per-vertex weights.

    Parameters count as vertices (key ``$name``) so a parameterized query is
    summed over all parameter values as well.  The query must be full,
    filter-free and acyclic."""
    if isinstance(q, WeightedCountInstance):
        q, db, weights = q.query, q.database, q.weights
    weights = weights or {}
    if q.filters:
        raise PreconditionError("weighted counting needs a filter-free query (materialize filters first)")
    if not q.is_full:
        raise PreconditionError(f"weighted counting needs a full query; bound variables {list(q.bound)}")
    gyo = gyo_reduce(hypergraph(q, True, False))
    if not gyo.acyclic:
        raise PreconditionError(f"query is not acyclic: cycle among {', '.join(gyo.residual)}")
    if not q.atoms:
        return Fraction(1)
    tree = gyo.join_tree
    wnode = tree.weight_nodes()
    tables = []
    for n, atom in enumerate(q.atoms):
        verts, rows = atom_rows(atom, db)
        mine = [(k, weights[v]) for k, v in enumerate(verts) if wnode[v] == n and v in weights]
        table = {}
        for r in rows:
            w = Fraction(1)
            for k, wt in mine:
                x = wt.get(r[k])
                if not x:
                    w = 0
                    break
                w *= x
            if w:
                table[r] = w
        tables.append((verts, table))

    messages = {}
    for n in tree.bottom_up():
        verts, table = tables[n]
        for c in tree.children[n]:
            shared, msg = messages.pop(c)
            idx = [verts.index(v) for v in shared]
            new = {}
            for r, w in table.items():
                m = msg.get(tuple(r[k] for k in idx))
                if m:
                    new[r] = w * m
            table = new
        p = tree.parent[n]
        if p is None:
            return sum(table.values(), Fraction(0))
        shared = sorted(set(verts) & tree.node_vertices[p])
        idx = [verts.index(v) for v in shared]
        msg = {}
        for r, w in table.items():
            key = tuple(r[k] for k in idx)
            msg[key] = msg.get(key, Fraction(0)) + w
        messages[n] = (shared, msg)
    raise AssertionError("join tree has no root")


def parameter_weights(q: ParamQuery, g) -> dict:
    if not getattr(g, "is_factorized", False):
        raise PreconditionError("expected counting needs a fully factorized distribution")
    if g.ell != q.ell:
        raise InputError(f"distribution has {g.ell} parameters, query has {q.ell}")
    used = q.used_parameters()
    return {"$" + name: g.marginals[j] for j, name in enumerate(q.params) if name in used}


def expected_count(q: ParamQuery, db: Database, g) -> Fraction:
    """E over p ~ g of |Q_p(D)|, for a full filter-free pACQ."""
    if q.filters:
        raise PreconditionError("expected counting needs a filter-free query (materialize filters first)")
    if not q.is_full:
        raise PreconditionError(f"query is not full: bound variables {list(q.bound)}")
    gyo = gyo_reduce(hypergraph(q, True, False))
    if not gyo.acyclic:
        raise PreconditionError(f"query is not p-acyclic: cycle among {', '.join(gyo.residual)}")
    return weighted_count(q, db, parameter_weights(q, g))


# --- filters -----------------------------------------------------------------------

@dataclass(frozen=True)
class MaterializedFilterDb:
    query: ParamQuery
    database: Database
    filter_relations: tuple  # names of the F relations, one per original filter


def variable_domains(q: ParamQuery, db: Database) -> dict:
    """For each variable the values it can take in some answer: the
    intersection of the columns it occurs in."""
    doms = {}
    for a in q.atoms:
        rel = db[a.relation]
        for k, t in enumerate(a.terms):
            if isinstance(t, Var):
                col = rel.column(k)
                doms[t.name] = col if t.name not in doms else doms[t.name] & col
    return doms


def materialize_filters(q: ParamQuery, db: Database, g, arity_max: Optional[int] = DEFAULT_FILTER_ARITY,
                        budget: Optional[int] = DEFAULT_BUDGET_ROWS) -> MaterializedFilterDb:
    """Replace each filter by an atom over a relation listing exactly the
    valuations (variables over their domains, parameters over their
    supports) that pass it."""
    doms = variable_domains(q, db)
    supports = {name: g.marginal_support(j) for j, name in enumerate(q.params)}
    new_atoms = []
    new_rels = []
    names = []
    taken = set(db.relations)
    for k, f in enumerate(q.filters):
        vs, ps = f.variables(), f.parameters()
        for v in vs:
            if v not in doms:
                raise InputError(f"filter {f}: variable {v} is unguarded")
        axes = [sorted(doms[v], key=_sort_key) for v in vs] + [supports[p] for p in ps]
        projected = math.prod(len(a) for a in axes)
        if arity_max is not None and f.arity > arity_max:
            raise InputError(
                f"filter {f} has arity {f.arity} > bound {arity_max}; "
                f"materializing it would enumerate up to {projected} rows"
            )
        if budget is not None and projected > budget:
            raise BudgetExceeded(f"filter {f} would enumerate {projected} rows (budget {budget})")
        keys = vs + ["$" + p for p in ps]
        rows = []
        for combo in itertools.product(*axes):
            if f.holds(dict(zip(keys, combo))):
                rows.append(combo)
        name = f"F{k}"
        while name in taken:
            name = "_" + name
        taken.add(name)
        names.append(name)
        new_rels.append(make_relation(name, [f"c{j}" for j in range(len(keys))], rows))
        new_atoms.append(Atom(name, tuple(Var(v) for v in vs) + tuple(Param(p) for p in ps)))
    rewritten = ParamQuery(q.name, q.free, q.params, q.atoms + tuple(new_atoms), ())
    return MaterializedFilterDb(rewritten, db.with_relations(new_rels), tuple(names))


def _sort_key(v):
    if is_numeric(v):
        return (0, "", v)
    return (1, type(v).__name__, str(v))
