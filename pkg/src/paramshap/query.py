"""Parameterized conjunctive queries with filters.

Concrete syntax::

    Q(x, t ; $d, $c) :- Flights(x, $d, a, "CDG", "JFK", t, u), Airline(a, $c), [u <= $d + 3]

The head lists free variables, then (after ``;``) the parameters.  Body items
are relational atoms and bracketed filters comparing two linear expressions.
A filter may be switched by a Boolean parameter: ``[$y => x < 3]`` holds when
``$y = 0`` or ``x < 3``.  ``#`` starts a comment line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .data import Value, compare, format_value, is_numeric
from .errors import InputError, QueryParseError, ValueKindError


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def key(self) -> str:
        return self.name

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Param:
    name: str

    @property
    def key(self) -> str:
        return "$" + self.name

    def __str__(self):
        return "$" + self.name


@dataclass(frozen=True)
class Const:
    value: Value

    def __str__(self):
        return format_constant(self.value)


Term = Union[Var, Param, Const]


def format_constant(value) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return format_value(value)


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple

    def variables(self) -> list:
        return _unique(t.name for t in self.terms if isinstance(t, Var))

    def parameters(self) -> list:
        return _unique(t.name for t in self.terms if isinstance(t, Param))

    def vertices(self) -> list:
        return _unique(t.key for t in self.terms if not isinstance(t, Const))

    def __str__(self):
        return f"{self.relation}({', '.join(map(str, self.terms))})"


# --- filters ----------------------------------------------------------------

@dataclass(frozen=True)
class LinExpr:
    """``sum(coef * term) + constant``.

    With a single unit-coefficient term and no constant, or with no terms at
    all, the expression denotes a raw value, so strings and booleans may be
    compared too."""

    terms: tuple = ()  # of (Fraction, Var | Param)
    constant: Value = 0

    @classmethod
    def of(cls, item) -> "LinExpr":
        if isinstance(item, (Var, Param)):
            return cls(((Fraction(1), item),), 0)
        if isinstance(item, Const):
            return cls((), item.value)
        return cls((), item)

    def normalized(self) -> "LinExpr":
        acc = {}
        order = []
        for c, t in self.terms:
            if t not in acc:
                order.append(t)
                acc[t] = Fraction(0)
            acc[t] += Fraction(c)
        terms = tuple((acc[t], t) for t in order if acc[t] != 0)
        return LinExpr(terms, self.constant)

    def is_raw(self) -> bool:
        return not self.terms or (
            len(self.terms) == 1 and self.terms[0][0] == 1 and is_numeric(self.constant) and self.constant == 0
        )

    def variables(self) -> list:
        return _unique(t.name for _, t in self.terms if isinstance(t, Var))

    def parameters(self) -> list:
        return _unique(t.name for _, t in self.terms if isinstance(t, Param))

    def evaluate(self, valuation: Mapping[str, Value]) -> Value:
        if not self.terms:
            return self.constant
        if self.is_raw():
            return valuation[self.terms[0][1].key]
        total = Fraction(self.constant) if is_numeric(self.constant) else _not_numeric(self.constant)
        for c, t in self.terms:
            v = valuation[t.key]
            if not is_numeric(v):
                _not_numeric(v)
            total += c * v
        return total.numerator if total.denominator == 1 else total

    def substitute(self, values: Mapping[str, Value]) -> "LinExpr":
        """Replace terms whose key is in ``values`` by constants."""
        if self.is_raw() and self.terms and self.terms[0][1].key in values:
            return LinExpr((), values[self.terms[0][1].key])
        terms = []
        const = self.constant
        for c, t in self.terms:
            if t.key in values:
                v = values[t.key]
                if not is_numeric(v) or not is_numeric(const):
                    _not_numeric(v if not is_numeric(v) else const)
                const = Fraction(const) + c * v
            else:
                terms.append((c, t))
        if isinstance(const, Fraction) and const.denominator == 1:
            const = const.numerator
        return LinExpr(tuple(terms), const).normalized()

    def __str__(self):
        if not self.terms:
            return format_constant(self.constant)
        parts = []
        for k, (c, t) in enumerate(self.terms):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            body = str(t) if mag == 1 else f"{_fmt_rat(mag)}*{t}"
            if k == 0:
                parts.append(("-" if sign == "-" else "") + body)
            else:
                parts.append(f" {sign} {body}")
        if is_numeric(self.constant) and self.constant != 0:
            sign = "-" if self.constant < 0 else "+"
            parts.append(f" {sign} {_fmt_rat(abs(Fraction(self.constant)))}")
        return "".join(parts)


def _fmt_rat(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _not_numeric(v):
    raise ValueKindError(f"arithmetic on non-numeric value {v!r}")


_OPS = {
    "<": lambda c: c < 0,
    "<=": lambda c: c <= 0,
    "=": lambda c: c == 0,
    "!=": lambda c: c != 0,
    ">=": lambda c: c >= 0,
    ">": lambda c: c > 0,
}


@dataclass(frozen=True)
class Filter:
    lhs: LinExpr
    op: str
    rhs: LinExpr
    switch: Optional[Param] = None

    def __post_init__(self):
        if self.op not in _OPS:
            raise InputError(f"unknown comparison operator {self.op!r}")

    def variables(self) -> list:
        return _unique(self.lhs.variables() + self.rhs.variables())

    def parameters(self) -> list:
        ps = self.lhs.parameters() + self.rhs.parameters()
        if self.switch is not None:
            ps = [self.switch.name] + ps
        return _unique(ps)

    def vertices(self) -> list:
        return self.variables() + ["$" + p for p in self.parameters()]

    @property
    def arity(self) -> int:
        return len(self.variables()) + len(self.parameters())

    def holds(self, valuation: Mapping[str, Value]) -> bool:
        if self.switch is not None and valuation[self.switch.key] == 0:
            return True
        return _OPS[self.op](compare(self.lhs.evaluate(valuation), self.rhs.evaluate(valuation)))

    def substitute(self, values: Mapping[str, Value]) -> "Filter":
        switch = self.switch
        if switch is not None and switch.key in values:
            if values[switch.key] == 0:
                return TRUE_FILTER
            switch = None
        return Filter(self.lhs.substitute(values), self.op, self.rhs.substitute(values), switch)

    def is_constant(self) -> bool:
        return not self.vertices()

    def __str__(self):
        prefix = f"{self.switch} => " if self.switch is not None else ""
        return f"[{prefix}{self.lhs} {self.op} {self.rhs}]"


TRUE_FILTER = Filter(LinExpr((), 0), "=", LinExpr((), 0))


# --- queries ----------------------------------------------------------------

@dataclass(frozen=True)
class ParamQuery:
    name: str
    free: tuple
    params: tuple
    atoms: tuple
    filters: tuple = ()

    @property
    def ell(self) -> int:
        return len(self.params)

    @property
    def variables(self) -> list:
        return _unique(v for a in self.atoms for v in a.variables())

    @property
    def bound(self) -> tuple:
        free = set(self.free)
        return tuple(v for v in self.variables if v not in free)

    @property
    def is_full(self) -> bool:
        return not self.bound

    @property
    def is_boolean(self) -> bool:
        return not self.free

    def param_index(self, name: str) -> int:
        """0-based position of parameter ``name``."""
        return self.params.index(name)

    def used_parameters(self) -> set:
        used = set()
        for a in self.atoms:
            used.update(a.parameters())
        for f in self.filters:
            used.update(f.parameters())
        return used

    def null_parameters(self) -> list:
        used = self.used_parameters()
        return [p for p in self.params if p not in used]

    def validate(self, filter_arity_max: Optional[int] = None) -> "ParamQuery":
        atom_vars = set(self.variables)
        for v in self.free:
            if v not in atom_vars:
                raise InputError(f"head variable {v} does not occur in any atom")
        if len(set(self.params)) != len(self.params):
            raise InputError(f"duplicate parameter name in {list(self.params)}")
        if set(self.params) & set(self.free):
            raise InputError("a parameter may not also be a free variable: "
                             f"{sorted(set(self.params) & set(self.free))}")
        declared = set(self.params)
        for p in self.used_parameters():
            if p not in declared:
                raise InputError(f"parameter ${p} is used but not declared in the head")
        for f in self.filters:
            for v in f.variables():
                if v not in atom_vars:
                    raise InputError(f"filter variable {v} in {f} is unguarded (occurs in no atom)")
            if filter_arity_max is not None and f.arity > filter_arity_max:
                raise InputError(f"filter {f} has arity {f.arity} > bound {filter_arity_max}")
        return self

    def __str__(self):
        head = f"{self.name}({', '.join(self.free)}; {', '.join('$' + p for p in self.params)})"
        body = [str(a) for a in self.atoms] + [str(f) for f in self.filters]
        return f"{head} :- {', '.join(body)}"


def _unique(items) -> list:
    seen = []
    s = set()
    for x in items:
        if x not in s:
            s.add(x)
            seen.append(x)
    return seen


# --- transformations ---------------------------------------------------------

def substitute(q: ParamQuery, values: Mapping[str, Value], drop_params: Sequence[str] = ()) -> ParamQuery:
    """Replace vertices (``x`` or ``$y`` keys) by constants.

    Constant filters are decided on the spot: true ones vanish, false ones
    are kept (they make the query unsatisfiable)."""
    def sub_term(t):
        if not isinstance(t, Const) and t.key in values:
            return Const(values[t.key])
        return t

    atoms = tuple(Atom(a.relation, tuple(sub_term(t) for t in a.terms)) for a in q.atoms)
    filters = []
    for f in q.filters:
        g = f.substitute(values)
        if g.is_constant():
            if g.holds({}):
                continue
        filters.append(g)
    free = tuple(v for v in q.free if v not in values)
    params = tuple(p for p in q.params if p not in drop_params)
    return ParamQuery(q.name, free, params, atoms, tuple(filters))


def ground(q: ParamQuery, p: Sequence[Value]) -> ParamQuery:
    """``Q_p``: substitute the parameter tuple ``p``."""
    if len(p) != q.ell:
        raise InputError(f"parameter tuple {tuple(p)} has length {len(p)}, query has {q.ell} parameters")
    values = {"$" + name: v for name, v in zip(q.params, p)}
    return substitute(q, values, drop_params=q.params)


def intersect_with_reference(q: ParamQuery, p_star: Sequence[Value]) -> ParamQuery:
    """``Q ∧ Q_{p*}``: same head, atoms of Q followed by the grounded atoms."""
    from .hypergraph import is_p_acyclic

    if q.filters:
        raise InputError("intersect_with_reference expects a filter-free query (materialize filters first)")
    if not q.is_full:
        raise InputError(f"query is not full: bound variables {list(q.bound)}")
    if not is_p_acyclic(q):
        raise InputError("query is not p-acyclic")
    g = ground(q, p_star)
    return replace(q, name=q.name + "_cap", atoms=q.atoms + g.atoms)


# --- parser -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:-|=>|<=|>=|!=|<>|==|≤|≥|≠|[<>=(),;\[\]$+\-*/.])
    """,
    re.VERBOSE,
)

_CMP_ALIASES = {"<>": "!=", "==": "=", "≤": "<=", "≥": ">=", "≠": "!="}


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QueryParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", pos))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.next()
        if text != value:
            raise QueryParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)
        return pos

    def at(self, value) -> bool:
        return self.peek()[1] == value

    def ident(self):
        kind, text, pos = self.next()
        if kind != "ident":
            raise QueryParseError(f"expected identifier, found {text or 'end of input'!r}", pos)
        return text, pos

    def parse_query(self) -> ParamQuery:
        name, _ = self.ident()
        self.expect("(")
        free, params = [], []
        target = free
        while not self.at(")"):
            if self.at(";"):
                if target is params:
                    raise QueryParseError("second ';' in head", self.peek()[2])
                self.next()
                target = params
                continue
            if self.at(","):
                self.next()
                continue
            if self.at("$"):
                pos = self.next()[2]
                pname, _ = self.ident()
                if target is not params:
                    raise QueryParseError("parameters must follow ';' in the head", pos)
                if pname in params:
                    raise QueryParseError(f"duplicate parameter ${pname}", pos)
                params.append(pname)
            else:
                vname, pos = self.ident()
                if target is params:
                    raise QueryParseError(f"expected parameter ($name) after ';', found {vname!r}", pos)
                if vname in free:
                    raise QueryParseError(f"duplicate head variable {vname}", pos)
                free.append(vname)
        self.expect(")")
        self.expect(":-")
        atoms, filters = [], []
        while True:
            if self.at("["):
                filters.append(self.parse_filter())
            else:
                atoms.append(self.parse_atom())
            if self.at(","):
                self.next()
                continue
            break
        if self.at("."):
            self.next()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise QueryParseError(f"unexpected {text!r} after query body", pos)
        q = ParamQuery(name, tuple(free), tuple(params), tuple(atoms), tuple(filters))
        try:
            return q.validate()
        except InputError as exc:
            raise QueryParseError(str(exc)) from None

    def parse_atom(self) -> Atom:
        rel, _ = self.ident()
        self.expect("(")
        terms = []
        while not self.at(")"):
            terms.append(self.parse_term())
            if self.at(","):
                self.next()
            elif not self.at(")"):
                kind, text, pos = self.peek()
                raise QueryParseError(f"expected ',' or ')' in atom, found {text!r}", pos)
        self.expect(")")
        return Atom(rel, tuple(terms))

    def parse_term(self):
        kind, text, pos = self.peek()
        if text == "$":
            self.next()
            name, _ = self.ident()
            return Param(name)
        if kind == "ident" and text not in ("true", "false"):
            self.next()
            return Var(text)
        return Const(self.parse_constant())

    def parse_constant(self):
        kind, text, pos = self.next()
        if kind == "string":
            return bytes(text[1:-1], "utf-8").decode("unicode_escape") if "\\" in text else text[1:-1]
        if kind == "ident" and text in ("true", "false"):
            return text == "true"
        negative = False
        if text == "-":
            negative = True
            kind, text, pos = self.next()
        if kind != "number":
            raise QueryParseError(f"expected constant, found {text or 'end of input'!r}", pos)
        value = Fraction(int(text))
        if self.at("/") and self.peek(1)[0] == "number":
            self.next()
            den = int(self.next()[1])
            if den == 0:
                raise QueryParseError("zero denominator", pos)
            value = value / den
        if negative:
            value = -value
        return value.numerator if value.denominator == 1 else value

    def parse_filter(self) -> Filter:
        self.expect("[")
        switch = None
        if self.at("$") and self.peek(2)[1] == "=>":
            self.next()
            name, _ = self.ident()
            self.expect("=>")
            switch = Param(name)
        lhs = self.parse_linexpr()
        kind, op, pos = self.next()
        op = _CMP_ALIASES.get(op, op)
        if op not in _OPS:
            raise QueryParseError(f"expected comparison operator, found {op!r}", pos)
        rhs = self.parse_linexpr()
        self.expect("]")
        return Filter(lhs, op, rhs, switch)

    def parse_linexpr(self) -> LinExpr:
        terms = []
        const = None
        raw = None
        sign = 1
        if self.at("-"):
            self.next()
            sign = -1
        elif self.at("+"):
            self.next()
        n_items = 0
        while True:
            coef, item = self.parse_lterm()
            n_items += 1
            if item is None:
                if not is_numeric(coef):
                    if sign != 1 or n_items > 1 or self.at("+") or self.at("-"):
                        raise QueryParseError(f"arithmetic on non-numeric constant {coef!r}", self.peek()[2])
                    raw = coef
                else:
                    const = (const or 0) + sign * Fraction(coef)
            else:
                terms.append((sign * Fraction(coef), item))
            if self.at("+") or self.at("-"):
                sign = 1 if self.next()[1] == "+" else -1
                continue
            break
        if raw is not None:
            return LinExpr((), raw)
        if const is not None and const.denominator == 1:
            const = const.numerator
        return LinExpr(tuple(terms), const if const is not None else 0).normalized()

    def parse_lterm(self):
        coef, item = self.parse_factor()
        while self.at("*"):
            pos = self.next()[2]
            c2, i2 = self.parse_factor()
            if item is not None and i2 is not None:
                raise QueryParseError("product of two variables is not linear", pos)
            if not is_numeric(coef) or not is_numeric(c2):
                raise QueryParseError("non-numeric coefficient", pos)
            coef = Fraction(coef) * Fraction(c2)
            item = item if item is not None else i2
        return coef, item

    def parse_factor(self):
        kind, text, pos = self.peek()
        if text == "$":
            self.next()
            name, _ = self.ident()
            return 1, Param(name)
        if kind == "ident" and text not in ("true", "false"):
            self.next()
            return 1, Var(text)
        return self.parse_constant(), None


def parse_query(text: str) -> ParamQuery:
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    return _Parser("\n".join(lines)).parse_query()


def load_query(path) -> ParamQuery:
    with open(path, encoding="utf-8") as fh:
        return parse_query(fh.read())
