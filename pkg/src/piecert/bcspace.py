"""Boundary-condition analysis for second-order problems on [a, b].

A set of k linear conditions on u in W2^{2,n} is stored as

    endpoint_mat @ [u(a); u(b); u_x(a); u_x(b)] + int_a^b weight(x) u(x) dx = 0

with ``endpoint_mat`` a constant k x 4n matrix (columns in blocks of width n
for u(a), u(b), u_x(a), u_x(b)) and ``weight`` a k x n polynomial.

Taylor expansion with integral remainder turns each condition into an
equivalent statement about the lower-endpoint data and the curvature,

    bval_mat @ [u(a); u_x(a)] = int_a^b curv_kernel(x) u_xx(x) dx,

which is the representation everything downstream consumes.  ``split``
row-reduces the stacked conditions so that the leading rows have a
full-row-rank bval_mat while the trailing rows have bval_mat == 0; the
trailing rows constrain u_xx directly and determine the defect.  When the
defect is positive, ``synth_aux_weight`` produces integral conditions that
make the augmented boundary map invertible again.

Inputs with rational data are processed exactly; float data falls back to a
relative rank tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .polymat import (
    THETA,
    X,
    Interval,
    PolyMat,
    PolyMatError,
    hstack,
    vstack,
    x_poly,
)

RANK_RTOL = 1e-9


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class BoundarySpec:
    """The full 2n boundary conditions of a second-order problem."""

    n: int
    endpoint_mat: PolyMat  # 2n x 4n, constant
    weight: PolyMat  # 2n x n, polynomial in x
    interval: Interval

    def __post_init__(self):
        if self.endpoint_mat.shape != (2 * self.n, 4 * self.n):
            raise BoundaryError(
                f"endpoint matrix must be {2*self.n}x{4*self.n}, got {self.endpoint_mat.shape}"
            )
        if self.endpoint_mat.variables:
            raise BoundaryError("endpoint matrix must be constant")
        if self.weight.shape != (2 * self.n, self.n):
            raise BoundaryError("weight must be 2n x n")
        if THETA in self.weight.variables:
            raise BoundaryError("weight must be a polynomial in x")


@dataclass(frozen=True)
class BCRep:
    """Lower-endpoint representation (bval_mat, curv_kernel) of conditions."""

    bval_mat: PolyMat  # k x 2n, constant
    curv_kernel: PolyMat  # k x n, polynomial in x

    def __post_init__(self):
        if self.bval_mat.rows != self.curv_kernel.rows:
            raise BoundaryError("bval/curv row mismatch")


@dataclass(frozen=True)
class SplitBoundary:
    """Row-reduced boundary conditions: full-rank rows then zero-rank rows."""

    n: int
    interval: Interval
    e_full: PolyMat  # (2n - defect) x 4n
    w_full: PolyMat  # (2n - defect) x n
    e_zero: PolyMat  # defect x 4n
    w_zero: PolyMat  # defect x n
    transform: PolyMat  # invertible 2n x 2n applied to the original rows
    defect: int
    bval_full: PolyMat  # bval_mat of the full-rank rows, in reduced form

    @property
    def curv_kernel_zero(self) -> PolyMat:
        """Kernel of the residual constraint on u_xx (defect x n)."""
        return build_rep(self.e_zero, self.w_zero, self.n, self.interval).curv_kernel


def build_rep(
    endpoint_mat: PolyMat, weight: PolyMat, n: int, interval: Interval
) -> BCRep:
    """Taylor-expand boundary rows into the (bval_mat, curv_kernel) form."""
    k = endpoint_mat.rows
    if endpoint_mat.cols != 4 * n or weight.shape != (k, n):
        raise BoundaryError("inconsistent boundary row dimensions")
    a, b = interval.a, interval.b
    eye = PolyMat.identity(n)
    zero = PolyMat.zeros(n, n)
    len_i = eye * interval.length
    stack = vstack([
        hstack([eye, zero]),
        hstack([eye, len_i]),
        hstack([zero, eye]),
        hstack([zero, eye]),
    ])
    taylor_row = hstack([eye, eye.scaled_by(x_poly(-a, 1))])  # [I, (x-a)I]
    g = endpoint_mat @ stack + (weight @ taylor_row).integrate(X, a, b)

    bx = x_poly(b, -1)  # (b - x)
    ecol = vstack([zero, eye.scaled_by(bx), zero, eye])
    # int_x^b (th - x) weight(th) dth, as a polynomial in x
    kern = weight.swap_vars().scaled_by(PolyMat.scalar({(0, 1): 1, (1, 0): -1}))
    tail = kern.integrate(THETA, "x", b)
    h = (endpoint_mat @ ecol) * -1 - tail
    return BCRep(g, h)


def rep_of_spec(bc: BoundarySpec) -> BCRep:
    return build_rep(bc.endpoint_mat, bc.weight, bc.n, bc.interval)


def _as_exact_matrix(p: PolyMat) -> Optional[list[list[Fraction]]]:
    """Constant PolyMat as a dense Fraction grid, or None if floats present."""
    grid = [[Fraction(0)] * p.cols for _ in range(p.rows)]
    for (r, c), poly in p.entries.items():
        coeff = poly.get((0, 0))
        if coeff is None or len(poly) > 1:
            raise BoundaryError("matrix is not constant")
        if not isinstance(coeff, Fraction):
            return None
        grid[r][c] = coeff
    return grid


def _gauss_jordan(g: PolyMat, tol_scale: float):
    """Row-reduce a constant matrix, returning (reduced, transform, rank).

    Pivots take the largest absolute value in each column, scanning columns
    left to right; exact over rationals, thresholded for float data.
    """
    rows, cols = g.shape
    exact = _as_exact_matrix(g)
    if exact is not None:
        work = [row[:] for row in exact]
        trans = [
            [Fraction(1) if i == j else Fraction(0) for j in range(rows)]
            for i in range(rows)
        ]
        is_zero = lambda v: v == 0
    else:
        work = [[float(v) for v in row] for row in g.eval({})]
        trans = np.eye(rows).tolist()
        scale = max((abs(v) for row in work for v in row), default=1.0) or 1.0
        thresh = tol_scale * scale
        is_zero = lambda v: abs(v) <= thresh

    rank = 0
    for col in range(cols):
        pivot = None
        best = None
        for r in range(rank, rows):
            v = work[r][col]
            if not is_zero(v) and (best is None or abs(v) > abs(best)):
                pivot, best = r, v
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        trans[rank], trans[pivot] = trans[pivot], trans[rank]
        pv = work[rank][col]
        work[rank] = [v / pv for v in work[rank]]
        trans[rank] = [v / pv for v in trans[rank]]
        for r in range(rows):
            if r == rank:
                continue
            f = work[r][col]
            if is_zero(f):
                continue
            work[r] = [v - f * w for v, w in zip(work[r], work[rank])]
            trans[r] = [v - f * w for v, w in zip(trans[r], trans[rank])]
        rank += 1
        if rank == rows:
            break
    return work, trans, rank


def split(bc: BoundarySpec, tol: float = RANK_RTOL) -> SplitBoundary:
    """Separate conditions into full-rank and zero-rank parts (Gauss-Jordan)."""
    n = bc.n
    rep = rep_of_spec(bc)
    reduced, trans, rank = _gauss_jordan(rep.bval_mat, tol)
    defect = 2 * n - rank
    j = PolyMat.constant(trans)
    e_all = j @ bc.endpoint_mat
    w_all = j @ bc.weight
    top = list(range(rank))
    bot = list(range(rank, 2 * n))
    bval_full = (
        PolyMat.constant([reduced[r] for r in top])
        if top
        else PolyMat.zeros(0, 2 * n)
    )
    out = SplitBoundary(
        n=n,
        interval=bc.interval,
        e_full=e_all.submatrix(top, list(range(4 * n))),
        w_full=w_all.submatrix(top, list(range(n))),
        e_zero=e_all.submatrix(bot, list(range(4 * n))),
        w_zero=w_all.submatrix(bot, list(range(n))),
        transform=j,
        defect=defect,
        bval_full=bval_full,
    )
    # the zero-rank rows must have vanishing bval part
    zrep = build_rep(out.e_zero, out.w_zero, n, bc.interval)
    if zrep.bval_mat.max_abs_coeff() > tol * max(1.0, rep.bval_mat.max_abs_coeff()):
        raise BoundaryError("row reduction failed to zero out the defect rows")
    return out


def _rref_pivot_columns(g: PolyMat, tol: float = RANK_RTOL) -> list[int]:
    reduced, _, rank = _gauss_jordan(g, tol)
    pivots = []
    rows = len(reduced)
    if rows == 0:
        return pivots
    ncols = len(reduced[0])
    exact = all(isinstance(v, Fraction) for row in reduced for v in row)
    scale = max((abs(float(v)) for row in reduced for v in row), default=1.0) or 1.0
    for r in range(rank):
        for c in range(ncols):
            v = reduced[r][c]
            nonzero = (v != 0) if exact else (abs(v) > tol * scale)
            if nonzero:
                pivots.append(c)
                break
    return pivots


def synth_aux_weight(sb: SplitBoundary) -> PolyMat:
    """Integral weights making the augmented boundary map invertible.

    Uses the affine pair f, g with moments int f = 1, int f (x-a) = 0,
    int g = 0, int g (x-a) = -1 against the pivot permutation of the
    full-rank block, so the augmented bval matrix becomes block triangular.
    """
    n, m = sb.n, sb.defect
    if m == 0:
        return PolyMat.zeros(0, n)
    g1 = build_rep(sb.e_full, sb.w_full, n, sb.interval).bval_mat
    pivots = _rref_pivot_columns(g1)
    if len(pivots) != 2 * n - m:
        raise BoundaryError("full-rank block does not have the expected rank")
    order = pivots + [c for c in range(2 * n) if c not in pivots]
    # permutation with columns of bval_full moved so pivots lead
    perm = [[Fraction(0)] * (2 * n) for _ in range(2 * n)]
    for new, old in enumerate(order):
        perm[old][new] = Fraction(1)
    p12 = [[perm[r][c] for c in range(2 * n - m, 2 * n)] for r in range(n)]
    p22 = [[perm[r][c] for c in range(2 * n - m, 2 * n)] for r in range(n, 2 * n)]

    a, b = sb.interval.a, sb.interval.b
    ln = sb.interval.length
    f = x_poly(2 * (2 * b + a) / (ln * ln), -6 / (ln * ln))
    g = x_poly(6 * (b + a) / (ln ** 3), -12 / (ln ** 3))
    p12t = PolyMat.constant(p12).transpose()
    p22t = PolyMat.constant(p22).transpose()
    return p12t.scaled_by(f) - p22t.scaled_by(g)


def augmented_bval(sb: SplitBoundary, aux_weight: PolyMat) -> PolyMat:
    """bval matrix of the full-rank rows stacked with the aux integral rows."""
    n, m = sb.n, sb.defect
    if aux_weight.shape != (m, n):
        raise BoundaryError(f"aux weight must be {m}x{n}")
    g1 = build_rep(sb.e_full, sb.w_full, n, sb.interval).bval_mat
    g3 = build_rep(
        PolyMat.zeros(m, 4 * n), aux_weight, n, sb.interval
    ).bval_mat
    return vstack([g1, g3])


def validate_aux_weight(sb: SplitBoundary, aux_weight: PolyMat, tol: float = RANK_RTOL) -> bool:
    """True iff the augmented boundary map is invertible beyond rank tolerance."""
    if aux_weight.shape != (sb.defect, sb.n):
        return False
    if sb.defect == 0:
        return True
    g = augmented_bval(sb, aux_weight)
    exact = _as_exact_matrix(g)
    if exact is not None:
        return _exact_det(exact) != 0
    arr = g.eval_float({})
    svals = np.linalg.svd(arr, compute_uv=False)
    return svals[-1] > tol * svals[0]


def _exact_det(grid: Sequence[Sequence[Fraction]]) -> Fraction:
    n = len(grid)
    work = [list(row) for row in grid]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            det = -det
        det *= work[col][col]
        inv = 1 / work[col][col]
        for r in range(col + 1, n):
            f = work[r][col] * inv
            if f:
                work[r] = [v - f * w for v, w in zip(work[r], work[col])]
    return det


def invert_exact(g: PolyMat) -> PolyMat:
    """Exact inverse of a constant square PolyMat (rational entries)."""
    grid = _as_exact_matrix(g)
    n = g.rows
    if g.rows != g.cols:
        raise BoundaryError("inverse of a non-square matrix")
    if grid is None:
        inv = np.linalg.inv(g.eval_float({}))
        return PolyMat.constant(inv.tolist())
    work = [list(row) + [Fraction(1) if i == j else Fraction(0) for j in range(n)]
            for i, row in enumerate(grid)]
    for col in range(n):
        pivot = max(
            (r for r in range(col, n) if work[r][col] != 0),
            key=lambda r: abs(work[r][col]),
            default=None,
        )
        if pivot is None:
            raise BoundaryError("singular matrix")
        work[col], work[pivot] = work[pivot], work[col]
        pv = work[col][col]
        work[col] = [v / pv for v in work[col]]
        for r in range(n):
            if r != col and work[r][col]:
                f = work[r][col]
                work[r] = [v - f * w for v, w in zip(work[r], work[col])]
    return PolyMat.constant([row[n:] for row in work])


def bc_residual(u: PolyMat, endpoint_mat: PolyMat, weight: PolyMat, interval: Interval) -> PolyMat:
    """endpoint_mat [u(a); u(b); u_x(a); u_x(b)] + int weight u, exactly."""
    n = u.rows
    a, b = interval.a, interval.b
    ux = u.diff(X)
    vals = []
    for poly, point in ((u, a), (u, b), (ux, a), (ux, b)):
        vals.append(PolyMat(n, 1, {
            (r, 0): {(0, 0): v[0]}
            for r, v in enumerate(poly.eval({"x": point}))
            if v[0] != 0
        }))
    stacked = vstack(vals)
    res = endpoint_mat @ stacked
    if not weight.is_zero() and not u.is_zero():
        res = res + (weight @ u).integrate(X, a, b)
    return res


# -- convenience constructors ---------------------------------------------


def bc_dirichlet(n: int, interval: Interval) -> BoundarySpec:
    """u(a) = u(b) = 0."""
    e = np.zeros((2 * n, 4 * n))
    e[:n, :n] = np.eye(n)
    e[n:, n : 2 * n] = np.eye(n)
    return BoundarySpec(n, PolyMat.constant(e.astype(int).tolist()),
                        PolyMat.zeros(2 * n, n), interval)


def bc_neumann(n: int, interval: Interval) -> BoundarySpec:
    """u_x(a) = u_x(b) = 0."""
    e = np.zeros((2 * n, 4 * n))
    e[:n, 2 * n : 3 * n] = np.eye(n)
    e[n:, 3 * n :] = np.eye(n)
    return BoundarySpec(n, PolyMat.constant(e.astype(int).tolist()),
                        PolyMat.zeros(2 * n, n), interval)


def bc_periodic(n: int, interval: Interval) -> BoundarySpec:
    """u(a) = u(b), u_x(a) = u_x(b)."""
    e = np.zeros((2 * n, 4 * n))
    e[:n, :n] = np.eye(n)
    e[:n, n : 2 * n] = -np.eye(n)
    e[n:, 2 * n : 3 * n] = np.eye(n)
    e[n:, 3 * n :] = -np.eye(n)
    return BoundarySpec(n, PolyMat.constant(e.astype(int).tolist()),
                        PolyMat.zeros(2 * n, n), interval)
