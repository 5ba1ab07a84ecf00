"""A small dense semidefinite feasibility solver.

Solves   find X_1, ..., X_K psd, f free   with   A [svec(X); f] = b
(optionally minimizing a linear objective) by a primal-dual path-following
iteration on the homogeneous self-dual embedding, with Nesterov-Todd
scaling and a Mehrotra-style corrector.  Free variables are eliminated with
a pivoted QR before the cone iteration, and redundant equality rows are
dropped the same way (coefficient matching upstream generates many
dependent rows).  Inconsistent dependent rows short-circuit to an
infeasibility certificate.

Status is one of "feasible", "infeasible", "indeterminate":
  feasible      the returned point passes the independent residual and
                eigenvalue re-check in ``validate_solution``
  infeasible    a Farkas-type improving ray was found (y with b'y = 1 and
                -A'y in the dual cone within tolerance)
  indeterminate the iteration cap was reached without either certificate

Dense linear algebra throughout; intended for blocks up to a couple of
hundred rows.  Identical inputs produce identical iterates (fixed
initialization, no randomization).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

SQRT2 = np.sqrt(2.0)


class SdpError(ValueError):
    pass


def svec_size(n: int) -> int:
    return n * (n + 1) // 2


def svec(mat: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization (isometry for the Frobenius norm)."""
    n = mat.shape[0]
    out = np.empty(svec_size(n))
    idx = 0
    for i in range(n):
        out[idx] = mat[i, i]
        idx += 1
        for j in range(i + 1, n):
            out[idx] = SQRT2 * mat[i, j]
            idx += 1
    return out


def smat(vec: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    idx = 0
    for i in range(n):
        out[i, i] = vec[idx]
        idx += 1
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = vec[idx] / SQRT2
            idx += 1
    return out


def _svec_indices(n: int):
    """Row/column index arrays and scale factors for fast svec/smat."""
    ii, jj, sc = [], [], []
    for i in range(n):
        ii.append(i); jj.append(i); sc.append(1.0)
        for j in range(i + 1, n):
            ii.append(i); jj.append(j); sc.append(SQRT2)
    return np.array(ii), np.array(jj), np.array(sc)


@dataclass
class SdpProblem:
    """Equality-constrained feasibility over psd blocks plus free variables.

    Variable order in every constraint row: svec of each block in sequence,
    then the free variables.
    """

    block_dims: list[int]
    n_free: int
    a_mat: np.ndarray  # (n_constraints, n_vars)
    b_vec: np.ndarray
    objective: Optional[np.ndarray] = None  # same length as a row of a_mat

    def __post_init__(self):
        self.a_mat = np.atleast_2d(np.asarray(self.a_mat, dtype=float))
        self.b_vec = np.asarray(self.b_vec, dtype=float)
        if any(d < 1 for d in self.block_dims):
            raise SdpError("block dims must be >= 1")
        if self.a_mat.shape[1] != self.n_vars:
            raise SdpError(
                f"constraint width {self.a_mat.shape[1]} != variable count {self.n_vars}"
            )
        if self.a_mat.shape[0] != len(self.b_vec):
            raise SdpError("constraint count mismatch")

    @property
    def n_cone(self) -> int:
        return sum(svec_size(d) for d in self.block_dims)

    @property
    def n_vars(self) -> int:
        return self.n_cone + self.n_free

    def block_slices(self) -> list[slice]:
        out = []
        off = 0
        for d in self.block_dims:
            out.append(slice(off, off + svec_size(d)))
            off += svec_size(d)
        return out


@dataclass
class SdpSolution:
    status: str  # feasible | infeasible | indeterminate
    blocks: list[np.ndarray] = field(default_factory=list)
    frees: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_eq_residual: float = np.inf
    min_block_eigenvalue: float = -np.inf
    iterations: int = 0
    farkas_certificate: Optional[np.ndarray] = None  # y on the reduced rows
    farkas_quality: float = np.inf  # ||A'y + s|| with b'y = 1
    objective_value: float = 0.0
    message: str = ""


class _Cone:
    """State for the psd cone part: per-block matrices and NT scalings."""

    def __init__(self, dims):
        self.dims = dims

    def init_point(self):
        return [np.eye(d) for d in self.dims]

    @staticmethod
    def inner(xs, ss):
        return sum(np.sum(x * s) for x, s in zip(xs, ss))

    @staticmethod
    def nt_scaling(xs, ss):
        rs, rinvs, lams = [], [], []
        for x, s in zip(xs, ss):
            lx = _chol_psd(x)
            ls = _chol_psd(s)
            u, sig, vt = np.linalg.svd(ls.T @ lx)
            sig = np.maximum(sig, 1e-300)
            r = lx @ vt.T @ np.diag(sig ** -0.5)
            rinv = np.diag(sig ** -0.5) @ u.T @ ls.T
            rs.append(r)
            rinvs.append(rinv)
            lams.append(sig)
        return rs, rinvs, lams

    @staticmethod
    def max_step(lams, scaled_dirs):
        """Largest alpha with Lambda + alpha D psd, per block, min over blocks."""
        alpha = np.inf
        for lam, d in zip(lams, scaled_dirs):
            sl = np.diag(lam ** -0.5)
            m = sl @ d @ sl
            m = 0.5 * (m + m.T)
            w = np.linalg.eigvalsh(m)[0]
            if w < 0:
                alpha = min(alpha, -1.0 / w)
        return alpha


def _chol_psd(mat: np.ndarray) -> np.ndarray:
    """Cholesky with an eigenvalue-clamped fallback for marginal blocks."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(0.5 * (mat + mat.T))
        floor = max(w[-1], 1.0) * 1e-14
        w = np.maximum(w, floor)
        return np.linalg.cholesky((v * w) @ v.T)


def _eliminate_free(problem: SdpProblem):
    """Project out free columns; return (A_cone, b, recover) on the cone vars."""
    nc = problem.n_cone
    a = problem.a_mat
    b = problem.b_vec
    if problem.n_free == 0:
        return a[:, :nc].copy(), b.copy(), lambda x_cone: np.zeros(0)
    af = a[:, nc:]
    ac = a[:, :nc]
    q, r, piv = linalg.qr(af, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.array([])
    tol = (diag[0] if diag.size else 0.0) * max(af.shape) * np.finfo(float).eps
    rank = int(np.sum(diag > max(tol, 1e-13)))
    q1 = q[:, :rank]
    # rows orthogonal to the free-variable range
    proj = np.eye(a.shape[0]) - q1 @ q1.T
    a_red = proj @ ac
    b_red = proj @ b

    def recover(x_cone):
        rhs = b - ac @ x_cone
        z = q1.T @ rhs
        f = np.zeros(problem.n_free)
        if rank:
            f[piv[:rank]] = linalg.solve_triangular(r[:rank, :rank], z)
        return f

    return a_red, b_red, recover


def _reduce_rows(a: np.ndarray, b: np.ndarray, feas_tol: float):
    """Keep an independent subset of rows; detect inconsistent dependencies."""
    if a.shape[0] == 0:
        return a, b, np.array([], dtype=int), None
    q, r, piv = linalg.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > scale * 1e-12))
    keep = np.sort(piv[:rank])
    a_keep, b_keep = a[keep], b[keep]
    drop = np.setdiff1d(np.arange(a.shape[0]), keep)
    if drop.size:
        # dependent rows must carry consistent right-hand sides
        coef, *_ = np.linalg.lstsq(a_keep.T, a[drop].T, rcond=None)
        resid_a = np.abs(a[drop] - coef.T @ a_keep).max()
        resid_b = np.abs(b[drop] - coef.T @ b_keep)
        bad = np.where(resid_b > feas_tol * 10 * max(1.0, np.abs(b).max()))[0]
        if resid_a < 1e-8 and bad.size:
            # left-null combination with nonzero b: linear infeasibility
            i = drop[bad[0]]
            y = np.zeros(a.shape[0])
            y[i] = 1.0
            y[keep] -= coef[:, bad[0]]
            return a_keep, b_keep, keep, y / (b @ y)
    return a_keep, b_keep, keep, None


def solve(
    problem: SdpProblem,
    feas_tol: float = 1e-8,
    psd_tol: float = 1e-9,
    max_iters: int = 120,
    relative_accept: bool = False,
    max_ray_norm: float = np.inf,
    verbose: bool = False,
) -> SdpSolution:
    """Run the embedding iteration and classify the outcome."""
    dims = problem.block_dims
    cone = _Cone(dims)
    nu = sum(dims)
    slices_full = problem.block_slices()

    a_red, b_red, recover = _eliminate_free(problem)
    a, b, kept_rows, farkas = _reduce_rows(a_red, b_red, feas_tol)
    if farkas is not None:
        return SdpSolution(
            status="infeasible", farkas_certificate=farkas,
            farkas_quality=0.0, message="inconsistent equality rows",
        )
    row_scale = np.maximum(np.linalg.norm(a, axis=1), 1e-12)
    a = a / row_scale[:, None]
    b = b / row_scale
    m_eq = a.shape[0]

    c = np.zeros(problem.n_cone)
    if problem.objective is not None:
        c = np.asarray(problem.objective, dtype=float)[: problem.n_cone].copy()

    slices = []
    off = 0
    for d in dims:
        slices.append(slice(off, off + svec_size(d)))
        off += svec_size(d)
    idx_cache = {d: _svec_indices(d) for d in set(dims)}

    def to_blocks(vec):
        return [smat(vec[sl], d) for sl, d in zip(slices, dims)]

    def to_vec(mats):
        return np.concatenate([svec(m) for m in mats])

    xs = cone.init_point()
    ss = cone.init_point()
    y = np.zeros(m_eq)
    tau, kappa = 1.0, 1.0
    bnorm, cnorm = 1 + np.linalg.norm(b), 1 + np.linalg.norm(c)

    def classify(iters, message="iteration limit"):
        return SdpSolution(status="indeterminate", iterations=iters, message=message)

    has_objective = problem.objective is not None and np.linalg.norm(c) > 0

    def try_feasible(iters):
        x_try = to_vec(xs) / tau
        res = np.abs(a @ x_try - b).max() if m_eq else 0.0
        allowance = feas_tol * (1.0 + np.abs(x_try).max()) if relative_accept else feas_tol
        if res > allowance:
            return None
        if has_objective:
            # optimization mode: require a small duality gap as well
            pval = c @ x_try
            dval = b @ y / tau
            gap = abs(pval - dval) / (1.0 + abs(pval) + abs(dval))
            if gap > feas_tol * 100:
                return None
        blocks = [x / tau for x in xs]
        frees = recover(x_try)
        full = np.concatenate([to_vec(blocks), frees])
        max_res = (
            np.abs(problem.a_mat @ full - problem.b_vec).max()
            if problem.a_mat.shape[0]
            else 0.0
        )
        scale_all = 1.0 + (np.abs(full).max() if relative_accept else 0.0)
        mineig = min(np.linalg.eigvalsh(blk)[0] for blk in blocks)
        if max_res <= feas_tol * 10 * scale_all and mineig >= -psd_tol * scale_all:
            return SdpSolution(
                status="feasible", blocks=blocks, frees=frees,
                max_eq_residual=float(max_res),
                min_block_eigenvalue=float(mineig), iterations=iters,
                objective_value=float(c @ x_try) if has_objective else 0.0,
            )
        return None

    def try_infeasible(iters):
        # only meaningful once the embedding is actually heading to tau -> 0
        if kappa < 100.0 * tau:
            return None
        by = b @ y
        ynorm = np.linalg.norm(y)
        if by <= feas_tol * max(1.0, ynorm):
            return None
        y_c = y / by
        if np.linalg.norm(y_c) > max_ray_norm:
            return None
        s_c = to_blocks(-(a.T @ y_c))
        mineig = min(np.linalg.eigvalsh(blk)[0] for blk in s_c)
        # near-exact improving ray: -A'(y/b'y) psd up to an absolute slack,
        # which certifies that no solution of trace below ~1/slack exists
        if mineig >= -100.0 * feas_tol:
            cert = np.zeros(problem.a_mat.shape[0])
            cert[kept_rows] = y_c / row_scale
            return SdpSolution(
                status="infeasible", iterations=iters,
                farkas_certificate=cert,
                farkas_quality=float(max(0.0, -mineig)),
            )
        return None

    for it in range(1, max_iters + 1):
        sol = try_feasible(it)
        if sol:
            return sol
        sol = try_infeasible(it)
        if sol:
            return sol

        mu = (cone.inner(xs, ss) + tau * kappa) / (nu + 1)
        if mu < 1e-16:
            return classify(it, "complementarity collapsed without certificates")

        rs, rinvs, lams = cone.nt_scaling(xs, ss)
        ws = [r @ r.T for r in rs]

        def kw(vec):
            out = np.empty_like(vec)
            for sl, d, w in zip(slices, dims, ws):
                out[sl] = svec(w @ smat(vec[sl], d) @ w)
            return out

        # residuals of the embedding
        x_vec = to_vec(xs)
        s_vec = to_vec(ss)
        rp = a @ x_vec - b * tau
        rd = -(a.T @ y) - s_vec + c * tau
        rg = b @ y - c @ x_vec - kappa

        # Schur matrix
        awa = np.empty((m_eq, m_eq))
        akw = np.empty((m_eq, a.shape[1]))
        for sl, d, w in zip(slices, dims, ws):
            ii, jj, sc = idx_cache[d]
            rows = a[:, sl]
            mats = np.zeros((m_eq, d, d))
            mats[:, ii, jj] = rows / sc
            mats[:, jj, ii] = rows / sc
            scaled = np.einsum("ab,ibc,cd->iad", w, mats, w, optimize=True)
            akw[:, sl] = scaled[:, ii, jj] * sc
        awa = akw @ a.T
        diag_scale = max(np.abs(np.diag(awa)).max(), 1e-30)
        cho = None
        for reg in (1e-14, 1e-11, 1e-8, 1e-5):
            try:
                cho = linalg.cho_factor(awa + np.eye(m_eq) * (reg * diag_scale))
                break
            except linalg.LinAlgError:
                continue
        if cho is None:
            return classify(it, "Schur factorization failed")

        kwc = kw(c)
        q_vec = a @ kwc + b
        p_vec = b - a @ kwc
        gamma = c @ kwc
        u1 = linalg.cho_solve(cho, q_vec) if m_eq else q_vec

        def direction(d_mats, rhs_tk, eta):
            g = to_vec([r @ dm @ r.T for r, dm in zip(rs, d_mats)])
            r1 = -eta * rp - a @ g + eta * (a @ kw(rd))
            u2 = linalg.cho_solve(cho, r1) if m_eq else r1
            delta = -(c @ g) + eta * (c @ kw(rd)) + eta * rg
            denom = kappa + tau * (p_vec @ u1) + tau * gamma
            dtau = (rhs_tk - tau * (p_vec @ u2) - tau * delta) / denom
            dy = u2 + dtau * u1
            ds_vec = -(a.T @ dy) + c * dtau + eta * rd
            dx_vec = g - kw(ds_vec)
            dkappa = (p_vec @ dy) + dtau * gamma + delta
            return dx_vec, dy, ds_vec, dtau, dkappa

        # predictor
        d_aff = [-np.diag(lam) for lam in lams]
        dx_a, dy_a, ds_a, dtau_a, dkap_a = direction(d_aff, -tau * kappa, 1.0)

        dxs_a = to_blocks(dx_a)
        dss_a = to_blocks(ds_a)
        sc_x = [rinv @ dm @ rinv.T for rinv, dm in zip(rinvs, dxs_a)]
        sc_s = [r.T @ dm @ r for r, dm in zip(rs, dss_a)]
        alpha_a = min(
            cone.max_step(lams, sc_x),
            cone.max_step(lams, sc_s),
            (-tau / dtau_a) if dtau_a < 0 else np.inf,
            (-kappa / dkap_a) if dkap_a < 0 else np.inf,
        )
        alpha_a = min(1.0, 0.999 * alpha_a) if np.isfinite(alpha_a) else 1.0

        mu_aff = (
            cone.inner(
                [x + alpha_a * d for x, d in zip([np.diag(l) for l in lams], sc_x)],
                [s + alpha_a * d for s, d in zip([np.diag(l) for l in lams], sc_s)],
            )
            + (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a)
        ) / (nu + 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu))) ** 3

        # corrector
        d_cor = []
        for lam, dxb, dsb in zip(lams, sc_x, sc_s):
            cross = 0.5 * (dxb @ dsb + dsb @ dxb)
            target = sigma * mu * np.eye(len(lam)) - np.diag(lam**2) - cross
            denom = lam[:, None] + lam[None, :]
            d_cor.append(2.0 * target / denom)
        rhs_tk = sigma * mu - tau * kappa - dtau_a * dkap_a
        dx, dy, ds, dtau, dkap = direction(d_cor, rhs_tk, 1.0)

        dxs = to_blocks(dx)
        dss = to_blocks(ds)
        sc_x = [rinv @ dm @ rinv.T for rinv, dm in zip(rinvs, dxs)]
        sc_s = [r.T @ dm @ r for r, dm in zip(rs, dss)]
        alpha = min(
            cone.max_step(lams, sc_x),
            cone.max_step(lams, sc_s),
            (-tau / dtau) if dtau < 0 else np.inf,
            (-kappa / dkap) if dkap < 0 else np.inf,
        )
        alpha = min(1.0, 0.98 * alpha) if np.isfinite(alpha) else 1.0
        if alpha < 1e-10:
            return classify(it, "step length collapsed")

        xs = [x + alpha * d for x, d in zip(xs, dxs)]
        ss = [s + alpha * d for s, d in zip(ss, dss)]
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkap
        if verbose:
            print(
                f"  it {it:3d} mu={mu:9.2e} tau={tau:8.2e} kappa={kappa:8.2e} "
                f"pres={np.abs(a @ to_vec(xs)/tau - b).max() if m_eq else 0:8.2e}"
            )

    return classify(max_iters)


def validate_solution(problem: SdpProblem, sol: SdpSolution,
                      feas_tol: float = 1e-7, psd_tol: float = 1e-8) -> bool:
    """Independent re-check of a feasible solution (not the solver's numbers)."""
    if sol.status != "feasible":
        return False
    vec = np.concatenate([svec(blk) for blk in sol.blocks] + [sol.frees])
    if problem.a_mat.shape[0]:
        res = np.abs(problem.a_mat @ vec - problem.b_vec).max()
    else:
        res = 0.0
    mineig = min(np.linalg.eigvalsh(blk)[0] for blk in sol.blocks)
    return bool(res <= feas_tol * max(1.0, np.abs(problem.b_vec).max())
                and mineig >= -psd_tol)


def dump_problem(problem: SdpProblem) -> str:
    """Sparse text dump: one 'a row col value' record per entry."""
    lines = [
        f"blocks {' '.join(str(d) for d in problem.block_dims)}",
        f"free {problem.n_free}",
        f"constraints {problem.a_mat.shape[0]}",
    ]
    for r in range(problem.a_mat.shape[0]):
        row = problem.a_mat[r]
        nz = np.nonzero(row)[0]
        for idx in nz:
            lines.append(f"a {r} {idx} {row[idx]!r}")
        lines.append(f"b {r} {problem.b_vec[r]!r}")
    return "\n".join(lines) + "\n"


def dump_solution(sol: SdpSolution) -> str:
    """Sparse text dump of the blocks: one 'x block i j value' per entry."""
    lines = [f"status {sol.status}",
             f"max_eq_residual {sol.max_eq_residual!r}",
             f"min_block_eigenvalue {sol.min_block_eigenvalue!r}"]
    for bidx, blk in enumerate(sol.blocks):
        for i in range(blk.shape[0]):
            for j in range(i, blk.shape[1]):
                if blk[i, j] != 0.0:
                    lines.append(f"x {bidx} {i} {j} {blk[i, j]!r}")
    for idx, v in enumerate(sol.frees):
        if v != 0.0:
            lines.append(f"f {idx} {v!r}")
    return "\n".join(lines) + "\n"
