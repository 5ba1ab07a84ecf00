"""Random members of constrained polynomial spaces, used by tests and
certificate validation.

Boundary conditions and range constraints are linear, so a random polynomial
can be corrected into the space by solving a small exact linear system: the
correction directions are (x - a)^k basis columns, and the correction
coefficients come from Gauss elimination over the rationals.  If the chosen
directions happen to be dependent the draw is rejected and resampled.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

import numpy as np

from .polymat import Interval, PolyMat, X
from .piop import MixedVector
from .bcspace import BoundarySpec, bc_residual
from .maps import StateMaps


class SamplingError(RuntimeError):
    pass


def _rand_fraction(rng) -> Fraction:
    return Fraction(int(rng.integers(-8, 9)), int(rng.integers(1, 5)))


def rand_poly_column(rng, n: int, degree: int) -> PolyMat:
    ent = {}
    for r in range(n):
        cell = {}
        for k in range(degree + 1):
            if rng.random() < 0.75:
                cell[(k, 0)] = _rand_fraction(rng)
        if cell:
            ent[(r, 0)] = cell
    return PolyMat(n, 1, ent)


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]) -> Optional[list[Fraction]]:
    """A particular rational solution of rows @ c = rhs, or None if inconsistent."""
    m = len(rows)
    ncols = len(rows[0]) if m else 0
    work = [list(r) + [v] for r, v in zip(rows, rhs)]
    pivots: list[tuple[int, int]] = []
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, m) if work[r][col] != 0), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        pv = work[rank][col]
        work[rank] = [v / pv for v in work[rank]]
        for r in range(m):
            if r != rank and work[r][col] != 0:
                f = work[r][col]
                work[r] = [v - f * w for v, w in zip(work[r], work[rank])]
        pivots.append((rank, col))
        rank += 1
        if rank == m:
            break
    for r in range(rank, m):
        if work[r][ncols] != 0:
            return None
    sol = [Fraction(0)] * ncols
    for r, col in pivots:
        sol[col] = work[r][ncols]
    return sol


def _column_residuals(columns, residual_of):
    rows = None
    out = []
    for col in columns:
        res = residual_of(col)
        vals = [res.cell(i, 0).get((0, 0), Fraction(0)) for i in range(res.rows)]
        if rows is None:
            rows = len(vals)
        out.append(vals)
    mat = [[out[c][r] for c in range(len(columns))] for r in range(rows or 0)]
    return mat


def random_domain_member(
    bc: BoundarySpec, rng, degree: int = 8, max_tries: int = 25
) -> PolyMat:
    """A random polynomial satisfying every boundary condition exactly."""
    n = bc.n
    a = bc.interval.a

    def residual_of(u):
        return bc_residual(u, bc.endpoint_mat, bc.weight, bc.interval)

    powers = range(0, 2 * n + 3)
    columns = []
    for k in powers:
        base = PolyMat.scalar({(k, 0): 1}) if a == 0 else _shifted_power(a, k)
        for i in range(n):
            columns.append(_embed(base, i, n))
    colres = _column_residuals(columns, residual_of)

    for _ in range(max_tries):
        u0 = rand_poly_column(rng, n, degree)
        r0 = residual_of(u0)
        rhs = [-r0.cell(i, 0).get((0, 0), Fraction(0)) for i in range(2 * n)]
        coeffs = _solve_exact([row[:] for row in colres], rhs)
        if coeffs is None:
            continue
        u = u0
        for c, col in zip(coeffs, columns):
            if c != 0:
                u = u + col * c
        if residual_of(u).is_zero():
            return u
    raise SamplingError("could not project a sample onto the boundary conditions")


def random_range_member(
    maps: StateMaps, rng, degree: int = 6, max_tries: int = 25
) -> MixedVector:
    """A random (v0, v1) satisfying the range constraint on v1 exactly."""
    n, m = maps.n, maps.defect
    v0 = PolyMat(m, 1, {(i, 0): {(0, 0): _rand_fraction(rng)} for i in range(m)})
    if m == 0:
        return MixedVector(v0, rand_poly_column(rng, n, degree))
    iv = maps.interval
    kern = maps.constraint.ri  # m x n in x

    def residual_of(v1):
        return (kern @ v1).integrate(X, iv.a, iv.b)

    columns = []
    for k in range(0, m + 2):
        base = PolyMat.scalar({(k, 0): 1})
        for i in range(n):
            columns.append(_embed(base, i, n))
    colres = _column_residuals(columns, residual_of)

    for _ in range(max_tries):
        v1 = rand_poly_column(rng, n, degree)
        r0 = residual_of(v1)
        rhs = [-r0.cell(i, 0).get((0, 0), Fraction(0)) for i in range(m)]
        coeffs = _solve_exact([row[:] for row in colres], rhs)
        if coeffs is None:
            continue
        for c, col in zip(coeffs, columns):
            if c != 0:
                v1 = v1 + col * c
        if residual_of(v1).is_zero():
            return MixedVector(v0, v1)
    raise SamplingError("could not project a sample onto the range constraint")


def _shifted_power(a, k: int) -> PolyMat:
    """(x - a)^k as a 1x1 PolyMat, expanded exactly."""
    p = PolyMat.scalar({(0, 0): 1})
    step = PolyMat.scalar({(1, 0): 1, (0, 0): -a})
    for _ in range(k):
        p = p.scaled_by(step)
    return p


def _embed(scalar_poly: PolyMat, row: int, n: int) -> PolyMat:
    cell = scalar_poly.entries.get((0, 0), {})
    return PolyMat(n, 1, {(row, 0): dict(cell)})
