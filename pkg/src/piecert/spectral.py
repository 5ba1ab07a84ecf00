"""Independent verification path: Legendre-Galerkin discretization.

Operators are projected onto shifted Legendre polynomials on [a, b].  All
kernels are polynomial, so every Galerkin entry is an exact rational
integral (floated only at matrix assembly); for inputs of low enough degree
the discretization commutes exactly with symbolic application.

The discretized pair (Tn, An) forms a matrix pencil whose spectrum,
restricted to the nullspace of the constraint rows, estimates the decay
rates of the converted dynamics; ``decay_rate`` measures only the modes
visible through the (I - proj)-seminorm.  ``integrate_pie`` steps
Tn dv/dt = An v with the implicit trapezoid rule and reports seminorm and
norm histories, cross-checked in the tests against separation-of-variables
solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from .polymat import Interval, PolyMat, X
from .piop import MixedVector, PiOperator
from .convert import PieSystem, TrajectoryOperator


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Basis:
    """Shifted Legendre basis up to degree N for n-vector functions."""

    interval: Interval
    N: int
    n: int

    def __post_init__(self):
        if self.N < 2:
            raise SpectralError("basis needs N >= 2")

    @property
    def size(self) -> int:
        return self.n * (self.N + 1)

    def polys(self) -> list[PolyMat]:
        return _shifted_legendre(self.interval, self.N)

    def norms_sq(self) -> list[Fraction]:
        ln = self.interval.length
        return [ln / Fraction(2 * k + 1) if isinstance(ln, Fraction)
                else ln / (2 * k + 1) for k in range(self.N + 1)]

    def gram(self) -> np.ndarray:
        """Diagonal Gram matrix of the vector basis (component-major pairs)."""
        d = np.zeros(self.size)
        for k, nrm in enumerate(self.norms_sq()):
            for c in range(self.n):
                d[k * self.n + c] = float(nrm)
        return np.diag(d)

    def function(self, coeffs: Sequence[float]) -> PolyMat:
        """Assemble the n-column polynomial with the given coefficients."""
        if len(coeffs) != self.size:
            raise SpectralError("coefficient length mismatch")
        polys = self.polys()
        acc = PolyMat.zeros(self.n, 1)
        for k in range(self.N + 1):
            for c in range(self.n):
                w = coeffs[k * self.n + c]
                if w == 0:
                    continue
                cell = polys[k].entries.get((0, 0), {})
                acc = acc + PolyMat(self.n, 1, {(c, 0): dict(cell)}) * w
        return acc

    def project_poly(self, f: PolyMat) -> np.ndarray:
        """Exact Legendre coefficients of a polynomial column (truncated)."""
        if f.shape != (self.n, 1):
            raise SpectralError("projection expects an n-column polynomial")
        polys = self.polys()
        norms = self.norms_sq()
        a, b = self.interval.a, self.interval.b
        out = np.zeros(self.size)
        for k in range(self.N + 1):
            pk = polys[k]
            for c in range(self.n):
                cell = f.entries.get((c, 0))
                if not cell:
                    continue
                prod = PolyMat(1, 1, {(0, 0): dict(cell)}).scaled_by(pk)
                val = prod.integrate(X, a, b).cell(0, 0).get((0, 0), Fraction(0))
                out[k * self.n + c] = float(val / norms[k])
        return out

    def project_callable(self, f: Callable[[float], np.ndarray], order: int = 200) -> np.ndarray:
        """Quadrature projection of a smooth function onto the basis."""
        from scipy.special import roots_legendre

        nodes, weights = roots_legendre(order)
        a, b = float(self.interval.a), float(self.interval.b)
        xs = 0.5 * (b - a) * nodes + 0.5 * (b + a)
        polys = self.polys()
        norms = [float(v) for v in self.norms_sq()]
        vals = np.array([np.atleast_1d(f(x)) for x in xs])  # (order, n)
        out = np.zeros(self.size)
        for k in range(self.N + 1):
            pvals = np.array([polys[k].eval_float({"x": x})[0][0] for x in xs])
            for c in range(self.n):
                integral = 0.5 * (b - a) * np.sum(weights * pvals * vals[:, c])
                out[k * self.n + c] = integral / norms[k]
        return out


def _shifted_legendre(interval: Interval, N: int) -> list[PolyMat]:
    """Legendre polynomials mapped onto [a, b], exact coefficients."""
    a, b = interval.a, interval.b
    ln = interval.length
    two = Fraction(2) if isinstance(ln, Fraction) else 2.0
    # t = (2x - a - b) / (b - a)
    t = PolyMat.scalar({(1, 0): two / ln, (0, 0): -(a + b) / ln})
    polys = [PolyMat.scalar({(0, 0): 1}), t]
    for k in range(1, N):
        rec = polys[k].scaled_by(t) * Fraction(2 * k + 1, k + 1) - polys[k - 1] * Fraction(k, k + 1)
        polys.append(rec)
    return polys[: N + 1]


def discretize(op: PiOperator, basis: Basis) -> np.ndarray:
    """Galerkin matrix of a PI operator; exact for polynomial kernels."""
    if op.interval != basis.interval:
        raise SpectralError("operator and basis intervals differ")
    m, n = op.dims_out
    p, q = op.dims_in
    if q != 0 and q != basis.n:
        raise SpectralError("basis dimension does not match operator input")
    out_basis = Basis(basis.interval, basis.N, n) if n else None
    rows = m + (n * (basis.N + 1) if n else 0)
    cols = p + (q * (basis.N + 1) if q else 0)
    mat = np.zeros((rows, cols))
    polys = basis.polys()

    def fill_column(col: int, v: MixedVector):
        w = op.apply(v)
        if m:
            vals = w.v0.eval_float({})
            mat[:m, col] = vals[:, 0]
        if n:
            mat[m:, col] = out_basis.project_poly(w.v1)

    for j in range(p):
        v0 = PolyMat(p, 1, {(j, 0): {(0, 0): 1}})
        fill_column(j, MixedVector(v0, PolyMat.zeros(q, 1)))
    for k in range(basis.N + 1):
        cell = polys[k].entries.get((0, 0), {})
        for c in range(q):
            v1 = PolyMat(q, 1, {(c, 0): dict(cell)})
            fill_column(p + k * q + c, MixedVector(PolyMat.zeros(p, 1), v1))
    return mat


@dataclass(frozen=True)
class DiscretizedPencil:
    """Matrix pencil of the converted dynamics plus constraint rows."""

    Tn: np.ndarray
    An: np.ndarray
    Kn: np.ndarray
    Sn: Optional[np.ndarray]
    t_fun: np.ndarray  # function-part rows of the reconstruction map
    basis: Basis
    m: int


def build_pencil(pie: PieSystem, basis: Basis,
                 traj: Optional[TrajectoryOperator] = None) -> DiscretizedPencil:
    if basis.n != pie.n:
        raise SpectralError("basis dimension must match the system")
    tn = discretize(pie.lhs_op, basis)
    an = discretize(pie.rhs_op, basis)
    kn = discretize(pie.constraint, basis) if pie.m else np.zeros((0, tn.shape[1]))
    sn = discretize(traj.proj, basis) if traj is not None else None
    tfun = discretize(pie.maps.recon, basis)
    return DiscretizedPencil(Tn=tn, An=an, Kn=kn, Sn=sn, t_fun=tfun,
                             basis=basis, m=pie.m)


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray  # finite eigenvalues, sorted by real part, descending
    vectors: np.ndarray  # columns in the full (constrained) coordinates
    n_infinite: int
    projected_lhs_singular: bool


def constrained_spectrum(pencil: DiscretizedPencil, inf_tol: float = 1e10) -> SpectrumResult:
    """Generalized eigenvalues of (An, Tn) restricted to the constraint nullspace."""
    size = pencil.Tn.shape[0]
    if pencil.Kn.shape[0]:
        null = linalg.null_space(pencil.Kn)
    else:
        null = np.eye(size)
    tz = null.T @ pencil.Tn @ null
    az = null.T @ pencil.An @ null
    singular = np.linalg.matrix_rank(tz, tol=1e-10 * max(1.0, np.abs(tz).max())) < tz.shape[0]
    w, vr = linalg.eig(az, tz, right=True, homogeneous_eigvals=True)
    alpha_, beta_ = w[0], w[1]
    eigs = []
    vecs = []
    n_inf = 0
    for i in range(len(alpha_)):
        if abs(beta_[i]) < 1e-12 * max(1.0, abs(alpha_[i])) or not np.isfinite(alpha_[i] / beta_[i]) \
                or abs(alpha_[i] / beta_[i]) > inf_tol:
            n_inf += 1
            continue
        eigs.append(alpha_[i] / beta_[i])
        vecs.append(null @ vr[:, i])
    # descending real part; ties resolved toward low frequencies
    order = sorted(range(len(eigs)),
                   key=lambda i: (-round(eigs[i].real, 9), abs(eigs[i].imag), -eigs[i].imag))
    eigenvalues = np.array([eigs[i] for i in order])
    vectors = (np.array([vecs[i] for i in order]).T
               if eigs else np.zeros((size, 0), dtype=complex))
    return SpectrumResult(eigenvalues, vectors, n_inf, singular)


def decay_rate(pencil: DiscretizedPencil, vis_tol: float = 1e-8,
               spectrum: Optional[SpectrumResult] = None) -> float:
    """-max real part over modes visible through the (I - proj) seminorm."""
    spec = spectrum if spectrum is not None else constrained_spectrum(pencil)
    gram = pencil.basis.gram()
    vis_map = pencil.t_fun
    if pencil.Sn is not None:
        vis_map = (np.eye(pencil.Sn.shape[0]) - pencil.Sn) @ vis_map
    best = None
    for i, lam in enumerate(spec.eigenvalues):
        vec = spec.vectors[:, i]
        w = vis_map @ vec
        weight = np.sqrt(np.abs(np.real(np.conj(w) @ gram @ w)))
        full = np.linalg.norm(vec)
        if weight > vis_tol * max(full, 1e-300):
            best = lam.real if best is None else max(best, lam.real)
    if best is None:
        raise SpectralError("no visible modes in the constrained spectrum")
    return -best


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # one row per time
    seminorms: np.ndarray  # ||u - proj u||
    norms: np.ndarray  # ||u||

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise SpectralError("times must increase strictly")
        if np.any(self.seminorms < 0) or np.any(self.norms < 0):
            raise SpectralError("norms must be nonnegative")


def integrate_pie(pencil: DiscretizedPencil, v_init: np.ndarray, t_end: float,
                  dt: float, drift_check_every: int = 100,
                  drift_tol: float = 1e-8) -> Trajectory:
    """Implicit trapezoid stepping of Tn dv/dt = An v from a constrained state."""
    if dt <= 0:
        raise SpectralError("dt must be positive")
    v = np.asarray(v_init, dtype=float).copy()
    kn = pencil.Kn
    # Step inside the constraint nullspace: the projected initial state lives
    # there and the truncated lhs matrix is only invertible there (truncation
    # introduces a spurious null direction that violates the constraint).
    if kn.shape[0]:
        resid = kn @ v
        if np.linalg.norm(resid) > 1e-10 * max(1.0, np.linalg.norm(v)):
            raise SpectralError("initial state violates the constraint beyond 1e-10")
        null = linalg.null_space(kn)
    else:
        null = np.eye(pencil.Tn.shape[0])
    y = null.T @ v
    m1 = null.T @ (pencil.Tn - 0.5 * dt * pencil.An) @ null
    m2 = null.T @ (pencil.Tn + 0.5 * dt * pencil.An) @ null
    cond = np.linalg.cond(m1)
    if not np.isfinite(cond) or cond > 1e14:
        raise SpectralError("trapezoid matrix is singular on the constraint subspace")
    lu = linalg.lu_factor(m1)

    gram = pencil.basis.gram()
    vis = pencil.t_fun if pencil.Sn is None else (
        np.eye(pencil.Sn.shape[0]) - pencil.Sn) @ pencil.t_fun

    def measures(state):
        u = pencil.t_fun @ state
        w = vis @ state
        return (np.sqrt(max(w @ gram @ w, 0.0)), np.sqrt(max(u @ gram @ u, 0.0)))

    nsteps = int(round(t_end / dt))
    times = [0.0]
    v = null @ y
    states = [v.copy()]
    semis, fulls = [], []
    s0, f0 = measures(v)
    semis.append(s0)
    fulls.append(f0)
    for step in range(1, nsteps + 1):
        y = linalg.lu_solve(lu, m2 @ y)
        v = null @ y
        if kn.shape[0] and step % drift_check_every == 0:
            drift = np.linalg.norm(kn @ v) / max(1.0, np.linalg.norm(v))
            if drift > drift_tol:
                raise SpectralError(f"constraint drift {drift:.2e} exceeds {drift_tol:.0e}")
        times.append(step * dt)
        states.append(v.copy())
        s, f = measures(v)
        semis.append(s)
        fulls.append(f)
    return Trajectory(
        times=np.array(times), states=np.array(states),
        seminorms=np.array(semis), norms=np.array(fulls),
    )


def export_trajectory(traj: Trajectory, path: str):
    """Delimiter-separated (time, seminorm, norm) rows for external plotting."""
    with open(path, "w") as fh:
        fh.write("time\tseminorm\tnorm\n")
        for t, s, n in zip(traj.times, traj.seminorms, traj.norms):
            fh.write(f"{t:.10g}\t{s:.12g}\t{n:.12g}\n")


def fundamental_init(u0: PolyMat, pie: PieSystem, basis: Basis) -> np.ndarray:
    """Discretized fundamental state of a polynomial initial condition."""
    from .maps import to_fundamental

    v = to_fundamental(u0, pie.maps)
    out = np.zeros(pie.m + basis.size)
    if pie.m:
        out[: pie.m] = v.v0.eval_float({})[:, 0]
    out[pie.m :] = basis.project_poly(v.v1)
    return out


def fitted_rate(traj: Trajectory, t_start: float = 0.0) -> float:
    """Exponential rate of the seminorm by least squares on log values."""
    mask = (traj.times >= t_start) & (traj.seminorms > 0)
    t = traj.times[mask]
    y = np.log(traj.seminorms[mask])
    if len(t) < 2:
        raise SpectralError("not enough positive samples to fit a rate")
    slope = np.polyfit(t, y, 1)[0]
    return -slope
