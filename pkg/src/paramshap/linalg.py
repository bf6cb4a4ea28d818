"""Exact linear algebra over the rationals and polynomial interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import ComputationError


def solve(matrix: Sequence[Sequence], rhs: Sequence) -> list:
    """Solve ``matrix @ x = rhs`` by Gaussian elimination with exact pivoting."""
    n = len(matrix)
    a = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(matrix, rhs)]
    if any(len(row) != n + 1 for row in a):
        raise ValueError("solve expects a square system")
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise ComputationError("singular interpolation system")
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def mat_vec(matrix, vec) -> list:
    return [sum((Fraction(m) * v for m, v in zip(row, vec)), Fraction(0)) for row in matrix]


def bernstein_rows(points: Sequence, m: int) -> list:
    """Rows ``[q^k (1-q)^(m-1-k) for k in 0..m-1]``."""
    return [[Fraction(q) ** k * (1 - Fraction(q)) ** (m - 1 - k) for k in range(m)] for q in points]


def vandermonde_rows(points: Sequence, m: int) -> list:
    return [[Fraction(x) ** k for k in range(m)] for x in points]


def poly_eval(coeffs: Sequence, x) -> Fraction:
    out = Fraction(0)
    for c in reversed(coeffs):
        out = out * x + c
    return out


@dataclass(frozen=True)
class InterpolationPlan:
    """Oracle points, the basis matrix, the observed values and the solved
    coefficients."""

    points: tuple
    matrix: tuple
    values: tuple
    solution: tuple

    def reproduces_values(self) -> bool:
        return tuple(mat_vec(self.matrix, self.solution)) == self.values


def fit(points, values, basis: str = "bernstein") -> InterpolationPlan:
    m = len(points)
    if len(set(points)) != m:
        raise ValueError("interpolation points must be distinct")
    rows = bernstein_rows(points, m) if basis == "bernstein" else vandermonde_rows(points, m)
    sol = solve(rows, values)
    plan = InterpolationPlan(
        tuple(Fraction(p) for p in points),
        tuple(tuple(r) for r in rows),
        tuple(Fraction(v) for v in values),
        tuple(sol),
    )
    if not plan.reproduces_values():
        raise ComputationError("interpolation self-check failed")
    return plan
