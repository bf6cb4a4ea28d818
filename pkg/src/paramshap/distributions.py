"""Finite parameter distributions with exact rational probabilities.

Parameter indices are 0-based throughout the library.  A coalition is a
``frozenset`` of indices.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .data import guess_value, parse_value
from .errors import InputError, PreconditionError


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InputError(f"probability must be a number, got {x!r}")
    if isinstance(x, (int, str)):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            raise InputError(f"cannot parse probability {x!r}") from None
    if isinstance(x, float):
        raise InputError(f"probability {x!r} is a float; give an exact rational such as '1/3'")
    raise InputError(f"unsupported probability {x!r}")


def sample_weighted(items: Sequence, weights: Sequence[Fraction], rng: random.Random):
    """Exact draw: a uniform integer below the common denominator is compared
    with integer cumulative numerators."""
    den = 1
    for w in weights:
        den = den * w.denominator // math.gcd(den, w.denominator)
    nums = [w.numerator * (den // w.denominator) for w in weights]
    total = sum(nums)
    if total <= 0:
        raise PreconditionError("cannot sample from an empty or zero-mass table")
    r = rng.randrange(total)
    acc = 0
    for item, n in zip(items, nums):
        acc += n
        if r < acc:
            return item
    raise AssertionError("unreachable")


class _Table:
    """A marginal table prepared for repeated sampling."""

    __slots__ = ("items", "nums", "total")

    def __init__(self, table: Mapping):
        items = list(table.items())
        den = 1
        for _, w in items:
            den = den * w.denominator // math.gcd(den, w.denominator)
        self.items = [v for v, _ in items]
        acc = 0
        self.nums = []
        for _, w in items:
            acc += w.numerator * (den // w.denominator)
            self.nums.append(acc)
        self.total = acc

    def draw(self, rng):
        r = rng.randrange(self.total)
        lo, hi = 0, len(self.nums) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if r < self.nums[mid]:
                hi = mid
            else:
                lo = mid + 1
        return self.items[lo]


class FactorizedDistribution:
    """Product of independent per-parameter marginals."""

    def __init__(self, marginals: Sequence[Mapping]):
        clean = []
        for j, m in enumerate(marginals):
            table = {}
            for v, w in m.items():
                w = _as_fraction(w)
                if w < 0:
                    raise InputError(f"parameter {j}: negative probability {w} for {v!r}")
                if w > 0:
                    table[v] = table.get(v, Fraction(0)) + w
            if sum(table.values(), Fraction(0)) != 1:
                raise InputError(f"parameter {j}: marginal sums to {sum(table.values(), Fraction(0))}, not 1")
            clean.append(table)
        self.marginals = tuple(clean)
        self._tables = None
        self._key = tuple(frozenset(m.items()) for m in self.marginals)

    is_factorized = True

    @property
    def ell(self) -> int:
        return len(self.marginals)

    def __eq__(self, other):
        return isinstance(other, FactorizedDistribution) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"FactorizedDistribution({[dict(m) for m in self.marginals]})"

    @classmethod
    def uniform(cls, supports: Sequence[Iterable]) -> "FactorizedDistribution":
        out = []
        for s in supports:
            s = list(dict.fromkeys(s))
            out.append({v: Fraction(1, len(s)) for v in s})
        return cls(out)

    @classmethod
    def point_mass(cls, p: Sequence) -> "FactorizedDistribution":
        return cls([{v: Fraction(1)} for v in p])

    def marginal_support(self, j: int) -> list:
        return list(self.marginals[j])

    def support(self) -> Iterator[tuple]:
        return itertools.product(*(list(m) for m in self.marginals))

    def support_size(self) -> int:
        return math.prod(len(m) for m in self.marginals)

    def prob(self, p: Sequence) -> Fraction:
        _check_len(self, p)
        out = Fraction(1)
        for m, v in zip(self.marginals, p):
            w = m.get(v)
            if w is None:
                return Fraction(0)
            out *= w
        return out

    def condition_mass(self, J, p_star) -> Fraction:
        out = Fraction(1)
        for j in J:
            out *= self.marginals[j].get(p_star[j], Fraction(0))
        return out

    def conditional_prob(self, p, J, p_star) -> Fraction:
        _check_len(self, p)
        if self.condition_mass(J, p_star) == 0:
            raise PreconditionError("conditioning event has probability 0")
        out = Fraction(1)
        for j, (m, v) in enumerate(zip(self.marginals, p)):
            if j in J:
                if v != p_star[j]:
                    return Fraction(0)
            else:
                w = m.get(v)
                if w is None:
                    return Fraction(0)
                out *= w
        return out

    def conditional_support(self, J, p_star) -> Iterator[tuple]:
        """Pairs ``(p, Pr(p | p_J = p*_J))``."""
        if self.condition_mass(J, p_star) == 0:
            raise PreconditionError("conditioning event has probability 0")
        axes = []
        for j, m in enumerate(self.marginals):
            axes.append([(p_star[j], Fraction(1))] if j in J else list(m.items()))
        for combo in itertools.product(*axes):
            w = Fraction(1)
            for _, x in combo:
                w *= x
            yield tuple(v for v, _ in combo), w

    def sample(self, rng, fixed: Optional[Mapping[int, object]] = None) -> tuple:
        if self._tables is None:
            self._tables = [_Table(m) for m in self.marginals]
        fixed = fixed or {}
        out = []
        for j, t in enumerate(self._tables):
            if j in fixed:
                if fixed[j] not in self.marginals[j]:
                    raise PreconditionError("conditioning event has probability 0")
                out.append(fixed[j])
            else:
                out.append(t.draw(rng))
        return tuple(out)

    def to_json(self, names: Sequence[str]) -> dict:
        return {
            "type": "factorized",
            "params": {
                n: [{"value": _value_text(v), "prob": str(w)} for v, w in m.items()]
                for n, m in zip(names, self.marginals)
            },
        }


class JointTableDistribution:
    """Explicit list of (tuple, probability) pairs."""

    is_factorized = False

    def __init__(self, entries: Iterable):
        table = {}
        ell = None
        for p, w in entries:
            p = tuple(p)
            w = _as_fraction(w)
            if ell is None:
                ell = len(p)
            elif len(p) != ell:
                raise InputError(f"joint table mixes tuple lengths {ell} and {len(p)}")
            if p in table:
                raise InputError(f"joint table lists {p} twice")
            if w < 0:
                raise InputError(f"negative probability {w} for {p}")
            if w > 0:
                table[p] = w
        if not table:
            raise InputError("joint table is empty")
        if sum(table.values(), Fraction(0)) != 1:
            raise InputError(f"joint table sums to {sum(table.values(), Fraction(0))}, not 1")
        self.table = table
        self._ell = ell
        self._key = frozenset(table.items())

    @property
    def ell(self) -> int:
        return self._ell

    def __eq__(self, other):
        return isinstance(other, JointTableDistribution) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"JointTableDistribution({self.table})"

    def marginal_support(self, j: int) -> list:
        return list(dict.fromkeys(p[j] for p in self.table))

    def support(self) -> Iterator[tuple]:
        return iter(list(self.table))

    def support_size(self) -> int:
        return len(self.table)

    def prob(self, p) -> Fraction:
        _check_len(self, p)
        return self.table.get(tuple(p), Fraction(0))

    def _restricted(self, J, p_star) -> list:
        return [(p, w) for p, w in self.table.items() if all(p[j] == p_star[j] for j in J)]

    def condition_mass(self, J, p_star) -> Fraction:
        return sum((w for _, w in self._restricted(J, p_star)), Fraction(0))

    def conditional_prob(self, p, J, p_star) -> Fraction:
        _check_len(self, p)
        mass = self.condition_mass(J, p_star)
        if mass == 0:
            raise PreconditionError("conditioning event has probability 0")
        p = tuple(p)
        if any(p[j] != p_star[j] for j in J):
            return Fraction(0)
        return self.table.get(p, Fraction(0)) / mass

    def conditional_support(self, J, p_star) -> Iterator[tuple]:
        rows = self._restricted(J, p_star)
        mass = sum((w for _, w in rows), Fraction(0))
        if mass == 0:
            raise PreconditionError("conditioning event has probability 0")
        for p, w in rows:
            yield p, w / mass

    def sample(self, rng, fixed: Optional[Mapping[int, object]] = None) -> tuple:
        fixed = fixed or {}
        rows = [(p, w) for p, w in self.table.items() if all(p[j] == v for j, v in fixed.items())]
        if not rows:
            raise PreconditionError("conditioning event has probability 0")
        return sample_weighted([p for p, _ in rows], [w for _, w in rows], rng)

    def to_json(self, names=None) -> dict:
        return {
            "type": "joint",
            "support": [{"tuple": [_value_text(v) for v in p], "prob": str(w)} for p, w in self.table.items()],
        }


def _value_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _check_len(dist, p):
    if len(p) != dist.ell:
        raise InputError(f"tuple {tuple(p)} has length {len(p)}, distribution has {dist.ell} parameters")


def prob(dist, p) -> Fraction:
    return dist.prob(p)


def conditional_prob(dist, p, J, p_star) -> Fraction:
    return dist.conditional_prob(p, frozenset(J), p_star)


# --- coalitions ---------------------------------------------------------------

def pi_subset_prob(ell: int, k: int) -> Fraction:
    """Probability of one specific coalition of size ``k`` under the
    Shapley weighting for a game with ``ell`` players."""
    if not 0 <= k <= ell - 1:
        raise InputError(f"coalition size {k} out of range for {ell} players")
    return Fraction(1, ell * math.comb(ell - 1, k))


def shapley_weight(ell: int, k: int) -> Fraction:
    return Fraction(math.factorial(k) * math.factorial(ell - 1 - k), math.factorial(ell))


def sample_coalition(ell: int, i: int, rng) -> frozenset:
    """Size uniform on 0..ell-1, then a uniform subset of that size drawn by
    moving random elements out of the complement one at a time."""
    if not 0 <= i < ell:
        raise InputError(f"player {i} out of range for {ell} players")
    k = rng.randrange(ell)
    rest = [j for j in range(ell) if j != i]
    chosen = []
    for _ in range(k):
        chosen.append(rest.pop(rng.randrange(len(rest))))
    return frozenset(chosen)


@dataclass(frozen=True)
class PerturbationDistribution:
    base: object
    i: int
    b: int
    p_star: tuple

    def __post_init__(self):
        if self.b not in (0, 1):
            raise InputError("bit must be 0 or 1")
        if self.base.prob(self.p_star) == 0:
            raise PreconditionError("reference has probability 0")

    def pinned(self, J) -> frozenset:
        return frozenset(J) | {self.i} if self.b else frozenset(J)

    def law(self) -> dict:
        """Exact probabilities of every outcome, by summing over coalitions."""
        ell = self.base.ell
        others = [j for j in range(ell) if j != self.i]
        out = {}
        for k in range(ell):
            w = pi_subset_prob(ell, k)
            for J in itertools.combinations(others, k):
                for p, pr in self.base.conditional_support(self.pinned(J), self.p_star):
                    out[p] = out.get(p, Fraction(0)) + w * pr
        return {p: w for p, w in out.items() if w}


def sample_perturbation(pd: PerturbationDistribution, rng) -> tuple:
    J = sample_coalition(pd.base.ell, pd.i, rng)
    return pd.base.sample(rng, {j: pd.p_star[j] for j in pd.pinned(J)})


def mix_with_reference(g: FactorizedDistribution, p_star, q, pinned=()) -> FactorizedDistribution:
    """Coordinate ``j`` becomes ``q * delta(p*_j) + (1 - q) * g_j``; pins
    ``(j, 1)`` force the point mass, pins ``(j, 0)`` keep ``g_j``."""
    q = Fraction(q)
    if not 0 <= q <= 1:
        raise InputError(f"mixing weight {q} outside [0, 1]")
    pins = dict(pinned)
    out = []
    for j, m in enumerate(g.marginals):
        if pins.get(j) == 1:
            out.append({p_star[j]: Fraction(1)})
        elif pins.get(j) == 0:
            out.append(dict(m))
        else:
            table = {v: (1 - q) * w for v, w in m.items()}
            table[p_star[j]] = table.get(p_star[j], Fraction(0)) + q
            out.append(table)
    return FactorizedDistribution(out)


def make_rng(seed, *stream) -> random.Random:
    """Independent reproducible stream for ``(seed, *stream)``."""
    return random.Random(":".join(str(s) for s in (seed,) + tuple(stream)))


# --- files ----------------------------------------------------------------------

def load_distribution(path, param_names: Sequence[str], kinds: Optional[Mapping[str, str]] = None):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"distribution file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"distribution file {path} is not valid JSON: {exc}") from None
    return distribution_from_json(doc, param_names, kinds)


def _coerce(text, kind):
    if not isinstance(text, str):
        if isinstance(text, float):
            raise InputError(f"value {text!r} is a float; quote exact values as strings")
        return text
    if kind is None:
        return guess_value(text)
    try:
        return parse_value(text, kind)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"cannot parse {text!r} as {kind}") from None


def distribution_from_json(doc: Mapping, param_names: Sequence[str], kinds=None):
    kinds = kinds or {}
    kind = doc.get("type")
    if kind == "factorized":
        params = {k.lstrip("$"): v for k, v in doc.get("params", {}).items()}
        missing = [n for n in param_names if n not in params]
        extra = [n for n in params if n not in param_names]
        if missing or extra:
            raise InputError(f"distribution parameters do not match the query (missing {missing}, unknown {extra})")
        margs = []
        for n in param_names:
            m = {}
            for entry in params[n]:
                v = _coerce(entry["value"], kinds.get(n))
                m[v] = m.get(v, Fraction(0)) + _as_fraction(entry["prob"])
            margs.append(m)
        return FactorizedDistribution(margs)
    if kind == "joint":
        entries = []
        for entry in doc.get("support", []):
            tup = entry["tuple"]
            if len(tup) != len(param_names):
                raise InputError(f"joint tuple {tup} has length {len(tup)}, query has {len(param_names)} parameters")
            entries.append((tuple(_coerce(x, kinds.get(n)) for x, n in zip(tup, param_names)), entry["prob"]))
        return JointTableDistribution(entries)
    raise InputError(f"unknown distribution type {kind!r}; expected 'factorized' or 'joint'")
