"""Shared random generators for the test suite (exact rational data)."""

from fractions import Fraction

from piecert.polymat import PolyMat
from piecert.piop import MixedVector, PiOperator


def rand_frac(rng, num=9, den=4):
    return Fraction(int(rng.integers(-num, num + 1)), int(rng.integers(1, den + 1)))


def rand_polymat(rng, rows, cols, deg=3, theta=True, density=0.7):
    ent = {}
    for r in range(rows):
        for c in range(cols):
            if rng.random() > density:
                continue
            cell = {}
            for _ in range(int(rng.integers(1, 4))):
                ex = int(rng.integers(0, deg + 1))
                et = int(rng.integers(0, deg + 1 - ex)) if theta else 0
                cell[(ex, et)] = rand_frac(rng)
            ent[(r, c)] = cell
    return PolyMat(rows, cols, ent)


def rand_operator(rng, dims_out, dims_in, interval, deg=2):
    m, n = dims_out
    p, q = dims_in
    return PiOperator(
        dims_out, dims_in, interval,
        rr=rand_polymat(rng, m, p, deg=0, theta=False),
        ri=rand_polymat(rng, m, q, deg=deg, theta=False),
        fr=rand_polymat(rng, n, p, deg=deg, theta=False),
        f0=rand_polymat(rng, n, q, deg=deg, theta=False),
        f1=rand_polymat(rng, n, q, deg=deg, theta=True),
        f2=rand_polymat(rng, n, q, deg=deg, theta=True),
    )


def rand_mixed(rng, dims, deg=3):
    p, q = dims
    v0 = rand_polymat(rng, p, 1, deg=0, theta=False, density=1.0)
    v1 = rand_polymat(rng, q, 1, deg=deg, theta=False, density=1.0)
    return MixedVector(v0, v1)
