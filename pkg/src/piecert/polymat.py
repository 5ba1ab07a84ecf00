"""Exact matrix-valued polynomials in the spatial variables x and theta.

A PolyMat is a rows-by-cols matrix whose entries are polynomials in at most
two variables, stored sparsely:

    entries[(r, c)] = {(ex, et): coeff, ...}

where (ex, et) are the exponents of x and theta.  Coefficients are exact
``Fraction`` values whenever the inputs are rational (ints, Fractions); float
inputs fall back to float arithmetic and propagate.  The zero polynomial is
an absent cell, so identity tests on rational data are exact.

Everything downstream (boundary-condition analysis, integral-operator
algebra, the Galerkin oracle) is built on the calculus here: matrix
arithmetic, exact partial derivatives, and definite integration where a
bound may be one of the interval endpoints or the *other* variable
(``integrate(p, "theta", "x", b)`` computes ``int_x^b p dtheta``).

Values are immutable after construction and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

X = "x"
THETA = "theta"
_VARS = (X, THETA)

Scalar = Union[int, float, Fraction]
Bound = Union[int, float, Fraction, str]


class PolyMatError(ValueError):
    """Raised on dimension mismatches and invalid variable usage."""


def coerce(value: Scalar) -> Scalar:
    """Normalize a coefficient: ints become Fractions, floats stay floats."""
    if isinstance(value, bool):
        raise PolyMatError("boolean is not a polynomial coefficient")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, (Fraction, float)):
        return value
    if isinstance(value, np.integer):
        return Fraction(int(value))
    if isinstance(value, np.floating):
        return float(value)
    raise PolyMatError(f"unsupported coefficient type {type(value)!r}")


def _is_zero(c: Scalar) -> bool:
    return c == 0


@dataclass(frozen=True)
class Interval:
    """The spatial domain [a, b]; endpoints exact when given as rationals."""

    a: Scalar
    b: Scalar

    def __post_init__(self):
        object.__setattr__(self, "a", coerce(self.a))
        object.__setattr__(self, "b", coerce(self.b))
        if not self.a < self.b:
            raise PolyMatError(f"interval needs a < b, got [{self.a}, {self.b}]")

    @property
    def length(self) -> Scalar:
        return self.b - self.a


@dataclass(frozen=True)
class PolyMat:
    """Sparse matrix of polynomials in x and theta."""

    rows: int
    cols: int
    entries: Mapping[tuple[int, int], Mapping[tuple[int, int], Scalar]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise PolyMatError("negative dimensions")
        clean: dict[tuple[int, int], dict[tuple[int, int], Scalar]] = {}
        for (r, c), poly in self.entries.items():
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise PolyMatError(f"cell ({r},{c}) outside {self.rows}x{self.cols}")
            cell = {}
            for (ex, et), coeff in poly.items():
                if ex < 0 or et < 0:
                    raise PolyMatError("negative exponent")
                coeff = coerce(coeff)
                if not _is_zero(coeff):
                    cell[(int(ex), int(et))] = coeff
            if cell:
                clean[(r, c)] = cell
        object.__setattr__(self, "entries", clean)

    # -- constructors -------------------------------------------------

    @staticmethod
    def zeros(rows: int, cols: int) -> "PolyMat":
        return PolyMat(rows, cols, {})

    @staticmethod
    def identity(n: int) -> "PolyMat":
        return PolyMat(n, n, {(i, i): {(0, 0): Fraction(1)} for i in range(n)})

    @staticmethod
    def constant(matrix: Sequence[Sequence[Scalar]] | np.ndarray) -> "PolyMat":
        """Constant PolyMat from a nested sequence or ndarray."""
        arr = [list(row) for row in matrix]
        rows = len(arr)
        cols = len(arr[0]) if rows else 0
        ent = {}
        for r in range(rows):
            if len(arr[r]) != cols:
                raise PolyMatError("ragged rows")
            for c in range(cols):
                v = coerce(arr[r][c])
                if not _is_zero(v):
                    ent[(r, c)] = {(0, 0): v}
        return PolyMat(rows, cols, ent)

    @staticmethod
    def scalar(poly: Mapping[tuple[int, int], Scalar]) -> "PolyMat":
        """1x1 PolyMat from an exponent->coefficient map."""
        return PolyMat(1, 1, {(0, 0): dict(poly)})

    @staticmethod
    def from_tuples(
        rows: int, cols: int, tuples: Iterable[tuple[int, int, int, int, Scalar]]
    ) -> "PolyMat":
        """Build from (row, col, exp_x, exp_theta, coefficient) records."""
        ent: dict[tuple[int, int], dict[tuple[int, int], Scalar]] = {}
        for r, c, ex, et, coeff in tuples:
            cell = ent.setdefault((int(r), int(c)), {})
            key = (int(ex), int(et))
            cell[key] = cell.get(key, Fraction(0)) + coerce(coeff)
        return PolyMat(rows, cols, ent)

    def to_tuples(self) -> list[tuple[int, int, int, int, Scalar]]:
        out = []
        for (r, c) in sorted(self.entries):
            for (ex, et) in sorted(self.entries[(r, c)]):
                out.append((r, c, ex, et, self.entries[(r, c)][(ex, et)]))
        return out

    # -- structure ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def variables(self) -> frozenset[str]:
        used = set()
        for poly in self.entries.values():
            for ex, et in poly:
                if ex:
                    used.add(X)
                if et:
                    used.add(THETA)
        return frozenset(used)

    @property
    def degree(self) -> int:
        """Max total degree over all entries (zero matrix has degree 0)."""
        return max(
            (ex + et for poly in self.entries.values() for ex, et in poly),
            default=0,
        )

    def degree_in(self, var: str) -> int:
        idx = _var_index(var)
        return max(
            (key[idx] for poly in self.entries.values() for key in poly),
            default=0,
        )

    def is_zero(self) -> bool:
        return not self.entries

    def cell(self, r: int, c: int) -> dict[tuple[int, int], Scalar]:
        return dict(self.entries.get((r, c), {}))

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: "PolyMat") -> "PolyMat":
        if self.shape != other.shape:
            raise PolyMatError(f"add shape mismatch {self.shape} vs {other.shape}")
        ent = {rc: dict(poly) for rc, poly in self.entries.items()}
        for rc, poly in other.entries.items():
            cell = ent.setdefault(rc, {})
            for key, coeff in poly.items():
                cell[key] = cell.get(key, Fraction(0)) + coeff
        return PolyMat(self.rows, self.cols, ent)

    def __sub__(self, other: "PolyMat") -> "PolyMat":
        return self + (-other)

    def __neg__(self) -> "PolyMat":
        return self.map_coeffs(lambda c: -c)

    def __mul__(self, scalar: Scalar) -> "PolyMat":
        s = coerce(scalar)
        return self.map_coeffs(lambda c: c * s)

    __rmul__ = __mul__

    def __matmul__(self, other: "PolyMat") -> "PolyMat":
        if self.cols != other.rows:
            raise PolyMatError(
                f"matmul shape mismatch {self.shape} @ {other.shape}"
            )
        ent: dict[tuple[int, int], dict[tuple[int, int], Scalar]] = {}
        by_row: dict[int, list[tuple[int, Mapping]]] = {}
        for (k, c), poly in other.entries.items():
            by_row.setdefault(k, []).append((c, poly))
        for (r, k), pa in self.entries.items():
            for c, pb in by_row.get(k, ()):
                cell = ent.setdefault((r, c), {})
                for (e1, t1), c1 in pa.items():
                    for (e2, t2), c2 in pb.items():
                        key = (e1 + e2, t1 + t2)
                        cell[key] = cell.get(key, Fraction(0)) + c1 * c2
        return PolyMat(self.rows, other.cols, ent)

    def map_coeffs(self, fn) -> "PolyMat":
        ent = {
            rc: {key: fn(c) for key, c in poly.items()}
            for rc, poly in self.entries.items()
        }
        return PolyMat(self.rows, self.cols, ent)

    def scaled_by(self, poly: "PolyMat") -> "PolyMat":
        """Multiply every entry by a 1x1 polynomial."""
        if poly.shape != (1, 1):
            raise PolyMatError("scaled_by expects a 1x1 PolyMat")
        p = poly.entries.get((0, 0), {})
        ent: dict[tuple[int, int], dict[tuple[int, int], Scalar]] = {}
        for rc, cell in self.entries.items():
            new = {}
            for (e1, t1), c1 in cell.items():
                for (e2, t2), c2 in p.items():
                    key = (e1 + e2, t1 + t2)
                    new[key] = new.get(key, Fraction(0)) + c1 * c2
            ent[rc] = new
        return PolyMat(self.rows, self.cols, ent)

    # -- reshaping ----------------------------------------------------

    def transpose(self) -> "PolyMat":
        ent = {(c, r): dict(poly) for (r, c), poly in self.entries.items()}
        return PolyMat(self.cols, self.rows, ent)

    def swap_vars(self) -> "PolyMat":
        """Exchange x and theta in every entry."""
        ent = {
            rc: {(et, ex): c for (ex, et), c in poly.items()}
            for rc, poly in self.entries.items()
        }
        return PolyMat(self.rows, self.cols, ent)

    def transpose_swap(self) -> "PolyMat":
        return self.transpose().swap_vars()

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> "PolyMat":
        rmap = {old: new for new, old in enumerate(row_idx)}
        cmap = {old: new for new, old in enumerate(col_idx)}
        ent = {}
        for (r, c), poly in self.entries.items():
            if r in rmap and c in cmap:
                ent[(rmap[r], cmap[c])] = dict(poly)
        return PolyMat(len(row_idx), len(col_idx), ent)

    def kron_identity(self, n: int) -> "PolyMat":
        """Kronecker product self (x) I_n."""
        ent = {}
        for (r, c), poly in self.entries.items():
            for i in range(n):
                ent[(r * n + i, c * n + i)] = dict(poly)
        return PolyMat(self.rows * n, self.cols * n, ent)

    # -- calculus -----------------------------------------------------

    def diff(self, var: str) -> "PolyMat":
        idx = _var_index(var)
        ent: dict[tuple[int, int], dict[tuple[int, int], Scalar]] = {}
        for rc, poly in self.entries.items():
            cell = {}
            for key, coeff in poly.items():
                e = key[idx]
                if e == 0:
                    continue
                new = (key[0] - 1, key[1]) if idx == 0 else (key[0], key[1] - 1)
                cell[new] = cell.get(new, Fraction(0)) + coeff * e
            if cell:
                ent[rc] = cell
        return PolyMat(self.rows, self.cols, ent)

    def integrate(self, var: str, lower: Bound, upper: Bound) -> "PolyMat":
        """Definite integral in ``var``; bounds are numbers or the other variable."""
        idx = _var_index(var)
        other = THETA if var == X else X
        for bound in (lower, upper):
            if isinstance(bound, str) and bound == var:
                raise PolyMatError("integration bound references the integration variable")
            if isinstance(bound, str) and bound != other:
                raise PolyMatError(f"unknown bound {bound!r}")
        ent: dict[tuple[int, int], dict[tuple[int, int], Scalar]] = {}
        for rc, poly in self.entries.items():
            cell: dict[tuple[int, int], Scalar] = {}
            for key, coeff in poly.items():
                e = key[idx]
                oe = key[1 - idx]
                anti = coeff / Fraction(e + 1) if isinstance(coeff, Fraction) else coeff / (e + 1)
                for bound, sign in ((upper, 1), (lower, -1)):
                    term = _substitute_power(anti * sign, e + 1, oe, bound, idx)
                    if term is None:
                        continue
                    k, v = term
                    cell[k] = cell.get(k, Fraction(0)) + v
            cell = {k: v for k, v in cell.items() if not _is_zero(v)}
            if cell:
                ent[rc] = cell
        return PolyMat(self.rows, self.cols, ent)

    # -- evaluation ---------------------------------------------------

    def eval(self, point: Mapping[str, Scalar]) -> list[list[Scalar]]:
        """Exact entrywise evaluation; every used variable must be assigned."""
        missing = self.variables - set(point)
        if missing:
            raise PolyMatError(f"missing assignment for {sorted(missing)}")
        xv = coerce(point.get(X, 0))
        tv = coerce(point.get(THETA, 0))
        out: list[list[Scalar]] = [
            [Fraction(0)] * self.cols for _ in range(self.rows)
        ]
        for (r, c), poly in self.entries.items():
            acc: Scalar = Fraction(0)
            for (ex, et), coeff in poly.items():
                acc += coeff * xv**ex * tv**et
            out[r][c] = acc
        return out

    def eval_float(self, point: Mapping[str, Scalar]) -> np.ndarray:
        vals = self.eval(point)
        return np.array([[float(v) for v in row] for row in vals], dtype=float)

    # -- comparison ---------------------------------------------------

    def drop_small(self, tol: float = 1e-14) -> "PolyMat":
        """Drop float coefficients below tol; exact rationals are kept."""
        ent = {}
        for rc, poly in self.entries.items():
            cell = {
                key: c
                for key, c in poly.items()
                if isinstance(c, Fraction) or abs(c) > tol
            }
            if cell:
                ent[rc] = cell
        return PolyMat(self.rows, self.cols, ent)

    def approx_eq(self, other: "PolyMat", tol: float = 1e-12) -> bool:
        if self.shape != other.shape:
            return False
        diff = self - other
        return all(
            abs(c) <= tol for poly in diff.entries.values() for c in poly.values()
        )

    def max_abs_coeff(self) -> float:
        return max(
            (abs(float(c)) for poly in self.entries.values() for c in poly.values()),
            default=0.0,
        )

    def monomials(self) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for poly in self.entries.values():
            out.update(poly)
        return out


def _var_index(var: str) -> int:
    if var not in _VARS:
        raise PolyMatError(f"unknown variable {var!r}")
    return 0 if var == X else 1


def _substitute_power(coeff, power, other_exp, bound, idx):
    """One boundary term of an antiderivative: coeff * bound**power.

    Returns (exponent-key, value) in the remaining variables, or None if the
    value vanishes structurally.  ``idx`` is the axis that was integrated.
    """
    if isinstance(bound, str):
        # bound is the other variable: its exponent absorbs the power
        e = other_exp + power
        return (e, 0) if idx == 1 else (0, e), coeff
    bval = coerce(bound)
    if _is_zero(bval):
        return None
    key = (0, other_exp) if idx == 0 else (other_exp, 0)
    return key, coeff * bval**power


# -- block assembly ----------------------------------------------------


def hstack(mats: Sequence[PolyMat]) -> PolyMat:
    if not mats:
        raise PolyMatError("hstack of nothing")
    rows = mats[0].rows
    ent = {}
    off = 0
    for m in mats:
        if m.rows != rows:
            raise PolyMatError("hstack row mismatch")
        for (r, c), poly in m.entries.items():
            ent[(r, c + off)] = dict(poly)
        off += m.cols
    return PolyMat(rows, off, ent)


def vstack(mats: Sequence[PolyMat]) -> PolyMat:
    if not mats:
        raise PolyMatError("vstack of nothing")
    cols = mats[0].cols
    ent = {}
    off = 0
    for m in mats:
        if m.cols != cols:
            raise PolyMatError("vstack col mismatch")
        for (r, c), poly in m.entries.items():
            ent[(r + off, c)] = dict(poly)
        off += m.rows
    return PolyMat(off, cols, ent)


def x_poly(*coeffs: Scalar) -> PolyMat:
    """1x1 polynomial c0 + c1*x + c2*x^2 + ..."""
    return PolyMat.scalar({(i, 0): c for i, c in enumerate(coeffs)})


def theta_poly(*coeffs: Scalar) -> PolyMat:
    return PolyMat.scalar({(0, i): c for i, c in enumerate(coeffs)})


def convolve(a: PolyMat, b: PolyMat, lower: Bound, upper: Bound) -> PolyMat:
    """Kernel product integral  int_lower^upper A(x, s) B(s, theta) ds.

    ``a`` is read with its theta slot as the dummy variable s, ``b`` with its
    x slot as s.  Bounds may be numbers or the tokens "x"/"theta"; the result
    is a PolyMat in (x, theta).
    """
    if a.cols != b.rows:
        raise PolyMatError(f"convolve shape mismatch {a.shape} x {b.shape}")
    for bound in (lower, upper):
        if isinstance(bound, str) and bound not in _VARS:
            raise PolyMatError(f"unknown bound {bound!r}")
    ent: dict[tuple[int, int], dict[tuple[int, int], Scalar]] = {}
    by_row: dict[int, list[tuple[int, Mapping]]] = {}
    for (k, c), poly in b.entries.items():
        by_row.setdefault(k, []).append((c, poly))
    for (r, k), pa in a.entries.items():
        for c, pb in by_row.get(k, ()):
            cell = ent.setdefault((r, c), {})
            for (ax, as_), ca in pa.items():
                for (bs, bt), cb in pb.items():
                    spow = as_ + bs + 1
                    base = ca * cb
                    anti = (
                        base / Fraction(spow)
                        if isinstance(base, Fraction)
                        else base / spow
                    )
                    for bound, sign in ((upper, 1), (lower, -1)):
                        val = anti * sign
                        if isinstance(bound, str):
                            if bound == X:
                                key = (ax + spow, bt)
                            else:
                                key = (ax, bt + spow)
                        else:
                            bv = coerce(bound)
                            if _is_zero(bv):
                                continue
                            key = (ax, bt)
                            val = val * bv**spow
                        cell[key] = cell.get(key, Fraction(0)) + val
    ent = {
        rc: {k: v for k, v in cell.items() if not _is_zero(v)}
        for rc, cell in ent.items()
    }
    return PolyMat(a.rows, b.cols, {rc: cell for rc, cell in ent.items() if cell})
