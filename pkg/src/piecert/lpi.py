"""Stability certificates via a linear operator inequality.

The certified condition, for a shifted pair (T, A) := shifted_pair(...),
constraint functional K, and rate alpha >= 0, is

    P  =  cone(M_P) + eps^2 I,            M_P psd blocks,  eps^2 >= 1
    A* P T + T* P A + 2 alpha T* P T + X K + K* X* + cone2(M_2) = 0,
    M_2 psd blocks,

which forces <v, [A*PT + T*PA + 2 alpha T*PT] v> <= 0 whenever K v = 0 and
hence exponential decay of the measured seminorm at rate alpha.  (The
inequality is jointly homogeneous in (P, X, slack), so pinning eps^2 at one
instead of at a small floor changes nothing but the conditioning.)

Positive operators are parameterized as weighted quadratic images.  A
stacking map Z collects [v0; pointwise monomials times v1; one-sided
integral blocks with monomial kernels], and

    cone(M_1, M_2) := Z* M_1 Z + Z* g M_2 Z,     g(x) = (x - a)(b - x),

so psd M_w give a pointwise-nonnegative integrand; the second block with
the domain weight g >= 0 is what lets the cone reproduce boundary-driven
inequalities of Wirtinger type tightly.

The operator equality is enforced by matching every polynomial coefficient
of every parameter block; each match is one linear equation in the psd
blocks, the slack polynomial coefficients, and eps^2.  Cone rows whose
diagonal squares produce monomials nothing else can touch are trimmed
before matching: such rows would have their psd diagonal pinned to zero,
destroying the interior the path-following solver needs.

Assembly cost is kept out of the bisection loop: constraint columns are
computed once per (system, trajectory, degrees) and the rate enters only
through a separately stored family of alpha-columns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .polymat import Interval, PolyMat, THETA, X, convolve, x_poly
from .piop import MixedVector, PiOperator, inner
from .convert import (
    PdeSystem,
    PieSystem,
    TrajectoryOperator,
    pde_to_pie,
    shifted_pair,
    trajectory_operator,
)
from .sdp import (
    SQRT2,
    SdpProblem,
    SdpSolution,
    solve as sdp_solve,
    svec_size,
    validate_solution,
)

EPS_BASE = 1.0
Dims = tuple[int, int]


class LpiError(ValueError):
    pass


class LpiDegreeError(LpiError):
    """The slack cone cannot reach required monomials; increase its degrees."""


def monomial_set(kind: str, deg: int) -> list[tuple[int, int]]:
    if kind == "product":
        return [(i, j) for i in range(deg + 1) for j in range(deg + 1)]
    if kind == "total":
        return [(i, j) for i in range(deg + 1) for j in range(deg + 1 - i)]
    raise LpiError(f"unknown kernel monomial family {kind!r}")


@dataclass(frozen=True)
class ConeBasis:
    """Weighted quadratic-image parameterization of positive operators."""

    space: Dims
    interval: Interval
    pointwise_deg: int
    kernel_monomials: tuple[tuple[int, int], ...]
    zop: PiOperator  # full stacking map
    weights: tuple[PolyMat, ...]  # 1x1 polynomials, nonnegative on [a, b]
    rows_per_block: tuple[tuple[int, ...], ...]

    @property
    def block_dims(self) -> list[int]:
        return [len(rows) for rows in self.rows_per_block]

    def operator_of(self, mats: Sequence[np.ndarray]) -> PiOperator:
        """The positive operator induced by numeric symmetric block matrices."""
        if len(mats) != len(self.weights):
            raise LpiError("one matrix per weight block expected")
        p, q = self.space
        total = PiOperator.zero(self.space, self.space, self.interval)
        for mat, weight, rows in zip(mats, self.weights, self.rows_per_block):
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (len(rows), len(rows)):
                raise LpiError("cone matrix dimension mismatch")
            if not rows:
                continue
            z = _subset_op(self.zop, list(rows))
            mid = PolyMat.constant(mat.tolist()).scaled_by(weight.map_coeffs(float))
            mult = PiOperator.from_blocks(
                (0, len(rows)), (0, len(rows)), self.interval, f0=mid
            )
            total = total + z.adjoint() @ mult @ z
        return total.drop_small(0.0)


def build_cone(
    deg: int,
    space: Dims,
    interval: Interval,
    kernel_kind: str = "product",
    kernel_deg: Optional[int] = None,
    pointwise_deg: Optional[int] = None,
) -> ConeBasis:
    """Stacking map with v0 row, pointwise monomials, and integral blocks."""
    if deg < 0:
        raise LpiError("cone degree must be nonnegative")
    p, q = space
    dp = pointwise_deg if pointwise_deg is not None else deg
    kd = kernel_deg if kernel_deg is not None else deg
    kmon = monomial_set(kernel_kind, kd)
    n_rows = p + q * (dp + 1) + 2 * q * len(kmon)
    fr_ent = {}
    f0_ent = {}
    f1_ent = {}
    f2_ent = {}
    row = 0
    for i in range(p):
        fr_ent[(row, i)] = {(0, 0): Fraction(1)}
        row += 1
    for k in range(dp + 1):
        for c in range(q):
            f0_ent[(row, c)] = {(k, 0): Fraction(1)}
            row += 1
    for (i, j) in kmon:
        for c in range(q):
            f1_ent[(row, c)] = {(i, j): Fraction(1)}
            row += 1
    for (i, j) in kmon:
        for c in range(q):
            f2_ent[(row, c)] = {(i, j): Fraction(1)}
            row += 1
    assert row == n_rows
    zop = PiOperator.from_blocks(
        (0, n_rows), space, interval,
        fr=PolyMat(n_rows, p, fr_ent),
        f0=PolyMat(n_rows, q, f0_ent),
        f1=PolyMat(n_rows, q, f1_ent),
        f2=PolyMat(n_rows, q, f2_ent),
    )
    a, b = interval.a, interval.b
    domain_weight = x_poly(-a, 1).scaled_by(x_poly(b, -1))  # (x - a)(b - x)
    one = PolyMat.identity(1)
    all_rows = tuple(range(n_rows))
    return ConeBasis(
        space, interval, dp, tuple(kmon), zop,
        weights=(one, domain_weight),
        rows_per_block=(all_rows, all_rows),
    )


def _with_rows(cone: ConeBasis, rows_per_block) -> ConeBasis:
    return ConeBasis(cone.space, cone.interval, cone.pointwise_deg,
                     cone.kernel_monomials, cone.zop, cone.weights,
                     tuple(tuple(r) for r in rows_per_block))


def _subset_op(z: PiOperator, keep: list[int]) -> PiOperator:
    p, q = z.dims_in
    return PiOperator.from_blocks(
        (0, len(keep)), z.dims_in, z.interval,
        fr=z.fr.submatrix(keep, list(range(p))),
        f0=z.f0.submatrix(keep, list(range(q))),
        f1=z.f1.submatrix(keep, list(range(q))),
        f2=z.f2.submatrix(keep, list(range(q))),
    )


# -- operator pairing --------------------------------------------------------


class _Bank:
    """Per-row pieces of a stacked operator, pre-transformed for pairing."""

    def __init__(self, op: PiOperator, scale: Optional[PolyMat] = None):
        self.p, self.q = op.dims_in
        self.rows = op.dims_out[1]
        self.interval = op.interval
        allc = list(range(op.fr.cols))
        allq = list(range(op.f0.cols))
        self.fr, self.f0, self.f1, self.f2 = [], [], [], []
        self.frT, self.f0T, self.f1ts, self.f2ts, self.f0s = [], [], [], [], []
        for i in range(self.rows):
            fr = op.fr.submatrix([i], allc)
            f0 = op.f0.submatrix([i], allq)
            f1 = op.f1.submatrix([i], allq)
            f2 = op.f2.submatrix([i], allq)
            if scale is not None:
                fr = fr.scaled_by(scale)
                f0 = f0.scaled_by(scale)
                f1 = f1.scaled_by(scale)
                f2 = f2.scaled_by(scale)
            self.fr.append(fr)
            self.f0.append(f0)
            self.f1.append(f1)
            self.f2.append(f2)
            self.frT.append(fr.transpose())
            self.f0T.append(f0.transpose())
            self.f0s.append(f0.swap_vars())
            self.f1ts.append(f1.transpose_swap())
            self.f2ts.append(f2.transpose_swap())


def _pair(v: _Bank, i: int, u: _Bank, j: int) -> dict[str, PolyMat]:
    """Parameters of (row_i of V)* composed with (row_j of U)."""
    a, b = v.interval.a, v.interval.b
    rr = (v.frT[i] @ u.fr[j]).integrate(X, a, b)
    ri = v.frT[i] @ u.f0[j]
    ri = ri + convolve(v.frT[i].swap_vars(), u.f1[j], THETA, b).swap_vars()
    ri = ri + convolve(v.frT[i].swap_vars(), u.f2[j], a, THETA).swap_vars()
    fr = v.f0T[i] @ u.fr[j]
    fr = fr + convolve(v.f2ts[i], u.fr[j], a, X)
    fr = fr + convolve(v.f1ts[i], u.fr[j], X, b)
    f0 = v.f0T[i] @ u.f0[j]
    f1 = v.f0T[i] @ u.f1[j] + v.f2ts[i] @ u.f0s[j]
    f1 = f1 + convolve(v.f2ts[i], u.f1[j], THETA, X)
    f1 = f1 + convolve(v.f2ts[i], u.f2[j], a, THETA)
    f1 = f1 + convolve(v.f1ts[i], u.f1[j], X, b)
    f2 = v.f0T[i] @ u.f2[j] + v.f1ts[i] @ u.f0s[j]
    f2 = f2 + convolve(v.f1ts[i], u.f2[j], X, THETA)
    f2 = f2 + convolve(v.f1ts[i], u.f1[j], THETA, b)
    f2 = f2 + convolve(v.f2ts[i], u.f2[j], a, X)
    return {"rr": rr, "ri": ri, "fr": fr, "f0": f0, "f1": f1, "f2": f2}


def _blocks_of(op: PiOperator) -> dict[str, PolyMat]:
    return {"rr": op.rr, "ri": op.ri, "fr": op.fr, "f0": op.f0,
            "f1": op.f1, "f2": op.f2}


def _adjoint_blocks(blk: dict[str, PolyMat]) -> dict[str, PolyMat]:
    return {
        "rr": blk["rr"].transpose(),
        "ri": blk["fr"].transpose(),
        "fr": blk["ri"].transpose(),
        "f0": blk["f0"].transpose(),
        "f1": blk["f2"].transpose_swap(),
        "f2": blk["f1"].transpose_swap(),
    }


def _add_blocks(x: dict[str, PolyMat], y: dict[str, PolyMat]) -> dict[str, PolyMat]:
    return {k: x[k] + y[k] for k in x}


def _symmetrize(blk: dict[str, PolyMat]) -> dict[str, PolyMat]:
    return _add_blocks(blk, _adjoint_blocks(blk))


def _accumulate(column: dict, blk: dict[str, PolyMat]):
    """Fold a self-adjoint operator into canonical coefficient rows.

    Only rr/f0 upper cells, the ri block, and the full f1 kernel are stored;
    fr and f2 are determined by self-adjointness.
    """
    for name in ("rr", "ri", "f0", "f1"):
        mat = blk[name]
        for (r, c), poly in mat.entries.items():
            if name in ("rr", "f0") and r > c:
                continue
            for key, coeff in poly.items():
                val = float(coeff)
                if val == 0.0:
                    continue
                rk = (name, r, c, key[0], key[1])
                column[rk] = column.get(rk, 0.0) + val


def _svec_order(dim: int):
    order = []
    for i in range(dim):
        order.append((i, i))
        for j in range(i + 1, dim):
            order.append((i, j))
    return order


def _float_op(op: PiOperator) -> PiOperator:
    return PiOperator(
        op.dims_out, op.dims_in, op.interval,
        *(blk.map_coeffs(float) for blk in
          (op.rr, op.ri, op.fr, op.f0, op.f1, op.f2)),
    )


def _pair_columns_storage(v_scaled: _Bank, u_scaled: _Bank, u_plain: _Bank,
                          i: int, j: int):
    """Constant and rate columns of one storage Gram entry.

    The weight polynomial of the block is folded into the scaled banks, so
    the entry's contribution is V*(g E_ij)U symmetrized (constant part) and
    U*(g E_ij)U symmetrized (coefficient of alpha).
    """
    if i == j:
        s_vu = _pair(v_scaled, i, u_plain, i)
        s_uu = _pair(u_scaled, i, u_plain, i)
    else:
        s_vu = _add_blocks(_pair(v_scaled, i, u_plain, j),
                           _pair(v_scaled, j, u_plain, i))
        s_uu = _add_blocks(_pair(u_scaled, i, u_plain, j),
                           _pair(u_scaled, j, u_plain, i))
    col_c: dict = {}
    col_r: dict = {}
    _accumulate(col_c, _symmetrize(s_vu))
    _accumulate(col_r, _symmetrize(s_uu))
    return col_c, col_r


@dataclass
class LpiAssembly:
    """Precomputed constraint columns for one (system, trajectory, degrees)."""

    pie: PieSystem
    traj: TrajectoryOperator
    t_shift: PiOperator
    a_shift: PiOperator
    cone_p: ConeBasis
    cone_s: ConeBasis
    slack_deg: int
    a_const: np.ndarray
    a_rate: np.ndarray
    b_const: np.ndarray
    b_rate: np.ndarray
    var_layout: dict
    rows: list[tuple]
    build_seconds: float

    @property
    def n_vars(self) -> int:
        return self.a_const.shape[1]

    @property
    def block_dims(self) -> list[int]:
        return self.cone_p.block_dims + self.cone_s.block_dims + [1]

    def sdp_at(self, alpha: float) -> SdpProblem:
        return SdpProblem(
            block_dims=self.block_dims,
            n_free=self.var_layout["n_slack"],
            a_mat=self.a_const + alpha * self.a_rate,
            b_vec=self.b_const + alpha * self.b_rate,
        )

    def sdp_min_residual(self, alpha: float) -> SdpProblem:
        """Minimize the l1 equality residual instead of requiring zero.

        Each row gains a split slack r = p - q with p, q >= 0 (1x1 psd
        blocks) and the objective sum(p + q).  The optimum measures how
        far the inequality is from exact representability; certificates
        are accepted when the worst row stays below. the documented
        coefficient-matching tolerance.
        """
        a = self.a_const + alpha * self.a_rate
        b = self.b_const + alpha * self.b_rate
        nrows = a.shape[0]
        base_cone = sum(svec_size(d) for d in self.block_dims)
        eye = np.eye(nrows)
        a_full = np.hstack([a[:, :base_cone], eye, -eye, a[:, base_cone:]])
        dims = self.block_dims + [1] * (2 * nrows)
        obj = np.zeros(a_full.shape[1])
        obj[base_cone : base_cone + 2 * nrows] = 1.0
        return SdpProblem(
            block_dims=dims,
            n_free=self.var_layout["n_slack"],
            a_mat=a_full,
            b_vec=b,
            objective=obj,
        )

    def split_solution(self, sol: SdpSolution):
        """(storage mats, slack mats, eps slack, X coefficients)."""
        np_blocks = len(self.cone_p.rows_per_block)
        ns_blocks = len(self.cone_s.rows_per_block)
        mats_p = sol.blocks[:np_blocks]
        mats_s = sol.blocks[np_blocks : np_blocks + ns_blocks]
        s_extra = float(sol.blocks[np_blocks + ns_blocks][0, 0])
        return mats_p, mats_s, s_extra, sol.frees

    def residual_values(self, sol: SdpSolution) -> np.ndarray:
        """Per-row equality residuals of a min-residual solution."""
        base = (len(self.cone_p.rows_per_block)
                + len(self.cone_s.rows_per_block) + 1)
        nrows = len(self.rows)
        pos = np.array([float(sol.blocks[base + i][0, 0]) for i in range(nrows)])
        neg = np.array([float(sol.blocks[base + nrows + i][0, 0])
                        for i in range(nrows)])
        return pos - neg


def assemble(
    pie: PieSystem,
    traj: TrajectoryOperator,
    deg: int = 3,
    slack_deg: Optional[int] = None,
    cone_kernel_kind: str = "product",
    s_pointwise_deg: Optional[int] = None,
    s_kernel_deg: Optional[int] = None,
    s_kernel_kind: str = "total",
    strict_degrees: bool = False,
) -> LpiAssembly:
    """Build the coefficient-matching columns once; the rate enters later."""
    t0 = time.time()
    iv = pie.maps.interval
    m, n = pie.m, pie.n
    t_shift, a_shift = shifted_pair(pie, traj)
    t_f = _float_op(t_shift)
    a_f = _float_op(a_shift)

    cone_p = build_cone(deg, (0, n), iv, kernel_kind=cone_kernel_kind)
    dp2 = s_pointwise_deg if s_pointwise_deg is not None else 2 * deg + 2
    kd2 = s_kernel_deg if s_kernel_deg is not None else deg + 2
    cone_s = build_cone(
        deg, (m, n), iv,
        kernel_kind=s_kernel_kind, kernel_deg=kd2, pointwise_deg=dp2,
    )
    sdeg = slack_deg if slack_deg is not None else 2 * deg + 2

    # slack operator columns: X K + K* X*, one per polynomial coefficient
    k_op = _float_op(pie.constraint)
    slack_cols: list[dict] = []
    for c in range(n):
        for beta in range(m):
            for kpow in range(sdeg + 1):
                x_op = PiOperator.from_blocks(
                    (0, n), (m, 0), iv,
                    fr=PolyMat(n, m, {(c, beta): {(kpow, 0): 1.0}}),
                )
                xk = x_op @ k_op
                emb = PiOperator.from_blocks(
                    (m, n), (m, n), iv,
                    fr=xk.fr, f0=xk.f0, f1=xk.f1, f2=xk.f2,
                )
                col: dict = {}
                _accumulate(col, _symmetrize(_blocks_of(emb)))
                slack_cols.append(col)
    x_support: set = set()
    for col in slack_cols:
        x_support.update(col)

    # eps^2 column: identity middle factor (eps^2 = EPS_BASE + s, s >= 0)
    g_const = _symmetrize(_blocks_of((a_f.adjoint() @ t_f).drop_small(0.0)))
    tt = (t_f.adjoint() @ t_f).drop_small(0.0)
    g_rate = _symmetrize(_blocks_of(tt))
    eps_const: dict = {}
    eps_rate: dict = {}
    _accumulate(eps_const, g_const)
    _accumulate(eps_rate, g_rate)
    eps_support = set(eps_const) | set(eps_rate)

    # banks for the storage sandwich columns, one per weight block
    zp_f = _float_op(cone_p.zop)
    u_op = zp_f @ t_f
    v_op = zp_f @ a_f
    fweights = [w.map_coeffs(float) for w in cone_p.weights]
    ub = _Bank(u_op)
    vbw = [_Bank(v_op, scale=w) for w in fweights]
    ubw = [_Bank(u_op, scale=w) for w in fweights]

    qp = cone_p.zop.dims_out[1]
    mp_cols: list[dict[tuple[int, int], tuple[dict, dict]]] = []
    for wi in range(len(cone_p.weights)):
        cols = {}
        for i in range(qp):
            for j in range(i, qp):
                cols[(i, j)] = _pair_columns_storage(vbw[wi], ubw[wi], ub, i, j)
        mp_cols.append(cols)

    # slack cone pair columns, one set per weight block
    zs_f = _float_op(cone_s.zop)
    sb = _Bank(zs_f)
    sbw = [_Bank(zs_f, scale=w.map_coeffs(float)) for w in cone_s.weights]
    qs = cone_s.zop.dims_out[1]
    ms_cols: list[dict[tuple[int, int], dict]] = []
    for wi in range(len(cone_s.weights)):
        cols = {}
        for i in range(qs):
            for j in range(i, qs):
                if i == j:
                    blk = _pair(sbw[wi], i, sb, i)
                else:
                    blk = _add_blocks(_pair(sbw[wi], i, sb, j),
                                      _pair(sbw[wi], j, sb, i))
                col: dict = {}
                _accumulate(col, _symmetrize(blk))
                # Z_i*(g E_ij + g E_ji)Z_j is self-adjoint; undo the doubling
                col = {k: v / 2.0 for k, v in col.items()}
                cols[(i, j)] = col
        ms_cols.append(cols)

    # Two trimming passes (see module docstring).
    lhs_support: set = set(x_support) | eps_support
    for cols in mp_cols:
        for col_c, col_r in cols.values():
            lhs_support.update(col_c)
            lhs_support.update(col_r)
    keep_s = [
        [r for r in range(qs) if set(ms_cols[wi][(r, r)]) <= lhs_support]
        for wi in range(len(cone_s.weights))
    ]
    reach_s: set = set()
    for wi, kept in enumerate(keep_s):
        for i in kept:
            for j in kept:
                if i <= j:
                    reach_s.update(ms_cols[wi][(i, j)])
    cancellable = reach_s | x_support
    keep_p = [
        [
            r for r in range(qp)
            if set(mp_cols[wi][(r, r)][0]) | set(mp_cols[wi][(r, r)][1])
            <= cancellable
        ]
        for wi in range(len(cone_p.weights))
    ]

    cone_p = _with_rows(cone_p, keep_p)
    cone_s = _with_rows(cone_s, keep_s)

    columns_const: list[dict] = []
    columns_rate: list[dict] = []
    layout = {"mp": 0}
    for wi, kept in enumerate(keep_p):
        for (i, j) in _svec_order(len(kept)):
            a_, b_ = kept[i], kept[j]
            key = (a_, b_) if a_ <= b_ else (b_, a_)
            col_c, col_r = mp_cols[wi][key]
            columns_const.append(col_c)
            columns_rate.append(col_r)

    layout["ms"] = len(columns_const)
    slack_reach: set = set()
    for wi, kept in enumerate(keep_s):
        for (i, j) in _svec_order(len(kept)):
            a_, b_ = kept[i], kept[j]
            key = (a_, b_) if a_ <= b_ else (b_, a_)
            col = ms_cols[wi][key]
            columns_const.append(col)
            columns_rate.append({})
            slack_reach.update(col)

    layout["eps"] = len(columns_const)
    columns_const.append(dict(eps_const))
    columns_rate.append(dict(eps_rate))

    layout["slack"] = len(columns_const)
    for col in slack_cols:
        columns_const.append(col)
        columns_rate.append({})
    layout["n_slack"] = len(slack_cols)

    rows: set = set()
    for col in columns_const:
        rows.update(col)
    for col in columns_rate:
        rows.update(col)
    row_list = sorted(rows)

    if strict_degrees:
        missing = (set().union(*(set(c) for c in columns_const[: layout["ms"]]))
                   | eps_support) - slack_reach
        if missing:
            worst = max(k[3] + k[4] for k in missing)
            raise LpiDegreeError(
                f"slack cone cannot reach {len(missing)} monomials "
                f"(max total degree {worst}); increase s_kernel_deg/s_pointwise_deg"
            )

    row_index = {rk: idx for idx, rk in enumerate(row_list)}
    nrows = len(row_list)
    ncols = len(columns_const)
    a_const = np.zeros((nrows, ncols))
    a_rate = np.zeros((nrows, ncols))
    for vidx, (c0, c1) in enumerate(zip(columns_const, columns_rate)):
        for rk, val in c0.items():
            a_const[row_index[rk], vidx] = val
        for rk, val in c1.items():
            a_rate[row_index[rk], vidx] = val
    # svec scaling: off-diagonal matrix entries enter through v/sqrt(2)
    col = 0
    for kept in keep_p + keep_s:
        for (i, j) in _svec_order(len(kept)):
            if i != j:
                a_const[:, col] /= SQRT2
                a_rate[:, col] /= SQRT2
            col += 1
    b_const = np.zeros(nrows)
    b_rate = np.zeros(nrows)
    for rk, val in eps_const.items():
        b_const[row_index[rk]] = -EPS_BASE * val
    for rk, val in eps_rate.items():
        b_rate[row_index[rk]] = -EPS_BASE * val

    return LpiAssembly(
        pie=pie, traj=traj, t_shift=t_shift, a_shift=a_shift,
        cone_p=cone_p, cone_s=cone_s, slack_deg=sdeg,
        a_const=a_const, a_rate=a_rate, b_const=b_const, b_rate=b_rate,
        var_layout=layout, rows=row_list,
        build_seconds=time.time() - t0,
    )


# -- solution handling -------------------------------------------------------


@dataclass
class Certificate:
    alpha: float
    lyapunov_mats: list[np.ndarray]
    slack_mats: list[np.ndarray]
    slack_coeffs: np.ndarray
    epsilon_sq: float
    max_residual: float  # worst coefficient of the operator equality
    quad_form_margin: float  # max <v, LHS v> over sampled constrained v
    sdp_iterations: int

    def summary(self) -> str:
        floors = [float(np.linalg.eigvalsh(mat)[0]) if mat.size else 0.0
                  for mat in self.lyapunov_mats]
        lines = [
            f"rate alpha        : {self.alpha:.6g}",
            f"epsilon^2         : {self.epsilon_sq:.6g}",
            f"storage eig floor : {min(floors):.3e}",
            f"equality residual : {self.max_residual:.3e}",
            f"sampled form max  : {self.quad_form_margin:.3e}",
        ]
        return "\n".join(lines)


@dataclass
class StabilityResult:
    status: str  # certified | infeasible | indeterminate
    alpha: float
    certificate: Optional[Certificate] = None
    message: str = ""


def lhs_operator(assembly: LpiAssembly, alpha: float,
                 mats_p: Sequence[np.ndarray], eps_sq: float) -> PiOperator:
    """A*PT + T*PA + 2 alpha T*PT via plain operator algebra (no columns)."""
    iv = assembly.pie.maps.interval
    n = assembly.pie.n
    p_op = assembly.cone_p.operator_of(mats_p) + eps_sq * PiOperator.identity(
        (0, n), iv)
    t_f = _float_op(assembly.t_shift)
    a_f = _float_op(assembly.a_shift)
    pt = p_op @ t_f
    lhs = a_f.adjoint() @ pt + (a_f.adjoint() @ pt).adjoint()
    tpt = t_f.adjoint() @ pt
    lhs = lhs + alpha * (tpt + tpt.adjoint())
    return lhs.drop_small(0.0)


def certificate_residual(assembly: LpiAssembly, alpha: float,
                         sol: SdpSolution) -> float:
    """Worst coefficient of the full operator equality, recomputed exactly."""
    iv = assembly.pie.maps.interval
    m, n = assembly.pie.m, assembly.pie.n
    mats_p, mats_s, s_extra, coeffs = assembly.split_solution(sol)
    total = lhs_operator(assembly, alpha, mats_p, EPS_BASE + s_extra)
    total = total + assembly.cone_s.operator_of(mats_s)
    k_op = _float_op(assembly.pie.constraint)
    idx = 0
    for c in range(n):
        for beta in range(m):
            for kpow in range(assembly.slack_deg + 1):
                w = coeffs[idx]
                idx += 1
                if w == 0.0:
                    continue
                x_op = PiOperator.from_blocks(
                    (0, n), (m, 0), iv,
                    fr=PolyMat(n, m, {(c, beta): {(kpow, 0): float(w)}}),
                )
                xk = x_op @ k_op
                emb = PiOperator.from_blocks(
                    (m, n), (m, n), iv,
                    fr=xk.fr, f0=xk.f0, f1=xk.f1, f2=xk.f2,
                )
                total = total + emb + emb.adjoint()
    return total.max_abs_coeff()


def sampled_form_margin(assembly: LpiAssembly, alpha: float,
                        sol: SdpSolution, n_samples: int = 50,
                        seed: int = 0) -> float:
    """Max of <v, LHS v> over random constrained v (should be <= ~0)."""
    from .sampling import random_range_member

    rng = np.random.default_rng(seed)
    mats_p, _, s_extra, _ = assembly.split_solution(sol)
    lhs = lhs_operator(assembly, alpha, mats_p, EPS_BASE + s_extra)
    iv = assembly.pie.maps.interval
    worst = -math.inf
    for _ in range(n_samples):
        v = random_range_member(assembly.pie.maps, rng, degree=5)
        vf = MixedVector(v.v0.map_coeffs(float), v.v1.map_coeffs(float))
        val = float(inner(vf, lhs.apply(vf), iv))
        scale = max(1.0, float(inner(vf, vf, iv)))
        worst = max(worst, val / scale)
    return worst


def _certificate_from(assembly: LpiAssembly, alpha: float, sol: SdpSolution,
                      validate: bool) -> Certificate:
    mats_p, mats_s, s_extra, coeffs = assembly.split_solution(sol)
    return Certificate(
        alpha=alpha,
        lyapunov_mats=list(mats_p),
        slack_mats=list(mats_s),
        slack_coeffs=coeffs,
        epsilon_sq=EPS_BASE + s_extra,
        max_residual=(certificate_residual(assembly, alpha, sol)
                      if validate else float("nan")),
        quad_form_margin=(sampled_form_margin(assembly, alpha, sol)
                          if validate else float("nan")),
        sdp_iterations=sol.iterations,
    )


def solve_at_rate(assembly: LpiAssembly, alpha: float,
                  feas_tol: float = 1e-8, max_iters: int = 150,
                  validate: bool = True) -> StabilityResult:
    """One feasibility run of the inequality at a fixed rate."""
    if alpha < 0:
        raise LpiError("rate must be nonnegative")
    prob = assembly.sdp_at(alpha)
    sol = sdp_solve(prob, feas_tol=feas_tol, max_iters=max_iters)
    if sol.status == "feasible":
        if not validate_solution(prob, sol):
            return StabilityResult("indeterminate", alpha,
                                   message="solver output failed revalidation")
        return StabilityResult(
            "certified", alpha, _certificate_from(assembly, alpha, sol, validate))
    return StabilityResult(sol.status if sol.status == "infeasible"
                           else "indeterminate", alpha, message=sol.message)


def matching_distance(assembly: LpiAssembly, alpha: float,
                      feas_tol: float = 1e-8, max_iters: int = 200) -> Optional[float]:
    """Smallest worst-row residual of the operator equality at this rate.

    Zero (to tolerance) means the inequality is exactly representable; a
    strictly positive optimum quantifies how far the certificate search is
    from feasibility at unit coercivity.  Diagnostic companion to
    ``solve_at_rate``.
    """
    prob = assembly.sdp_min_residual(alpha)
    sol = sdp_solve(prob, feas_tol=feas_tol, max_iters=max_iters)
    if sol.status != "feasible":
        return None
    return float(np.abs(assembly.residual_values(sol)).max())


def check_stability(pde: PdeSystem, traj_kind: str, alpha: float,
                    deg: int = 3, **options) -> StabilityResult:
    pie = pde_to_pie(pde)
    traj = trajectory_operator(pie, traj_kind)
    assembly = assemble(pie, traj, deg=deg, **options)
    return solve_at_rate(assembly, alpha)


def max_decay_rate(
    pde: PdeSystem,
    traj_kind: str,
    deg: int = 3,
    tol: float = 1e-3,
    alpha_hi: Optional[float] = None,
    max_bisections: int = 30,
    assembly: Optional[LpiAssembly] = None,
    **options,
) -> tuple[Optional[float], LpiAssembly]:
    """Largest certified rate by bisection; None when alpha = 0 already fails.

    The upper end of the bracket defaults to the spectral estimate plus ten
    percent margin.
    """
    if tol <= 0:
        raise LpiError("tolerance must be positive")
    if assembly is None:
        pie = pde_to_pie(pde)
        traj = trajectory_operator(pie, traj_kind)
        assembly = assemble(pie, traj, deg=deg, **options)
    if alpha_hi is None:
        alpha_hi = 1.1 * max(spectral_rate_estimate(assembly.pie, assembly.traj), tol)
    lo_result = solve_at_rate(assembly, 0.0)
    if lo_result.status != "certified":
        return None, assembly
    lo, hi = 0.0, alpha_hi
    if solve_at_rate(assembly, hi, validate=False).status == "certified":
        return hi, assembly
    for _ in range(max_bisections):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if solve_at_rate(assembly, mid, validate=False).status == "certified":
            lo = mid
        else:
            hi = mid
    return lo, assembly


def spectral_rate_estimate(pie: PieSystem, traj: TrajectoryOperator,
                           n_basis: int = 16) -> float:
    from .spectral import Basis, build_pencil, decay_rate

    basis = Basis(pie.maps.interval, n_basis, pie.n)
    pencil = build_pencil(pie, basis, traj)
    return decay_rate(pencil)


def dump_certificate(cert: Certificate) -> str:
    """Archival text form: rate, coercivity, eigenvalue floors, residuals."""
    lines = [
        f"alpha {cert.alpha!r}",
        f"epsilon_sq {cert.epsilon_sq!r}",
        f"equality_residual {cert.max_residual!r}",
        f"sampled_form_margin {cert.quad_form_margin!r}",
        f"sdp_iterations {cert.sdp_iterations}",
    ]
    for idx, mat in enumerate(cert.lyapunov_mats):
        floor = float(np.linalg.eigvalsh(mat)[0]) if mat.size else 0.0
        lines.append(f"storage_block {idx} dim {mat.shape[0]} eig_floor {floor!r}")
        for i in range(mat.shape[0]):
            for j in range(i, mat.shape[0]):
                if mat[i, j] != 0.0:
                    lines.append(f"  m {idx} {i} {j} {mat[i, j]!r}")
    lines.append(f"slack_coeffs {' '.join(repr(v) for v in cert.slack_coeffs)}")
    return "\n".join(lines) + "\n"
