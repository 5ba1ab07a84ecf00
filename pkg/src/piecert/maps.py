"""State decomposition of a second-order boundary-value problem.

Given split boundary conditions and a validated auxiliary weight, this
module constructs the operators tying the PDE state u to its fundamental
state (v0, v1) = (int aux_weight u, u_xx):

    recon       u  = null_basis v0 + (inverse kernel) v1         (the map T)
    deriv       u_x in terms of (v0, v1)
    functional  v0 = int aux_weight(x) u(x) dx
    constraint  the residual conditions on v1 that carve out the range
                of d^2/dx^2 on the PDE domain

``null_basis`` spans the nullspace of d^2/dx^2 inside the domain (degree
one in x by construction), and the inverse kernel is the Green's-function
construction: affine-in-x row against the inverted augmented boundary map,
plus the local Taylor kernel (x - theta).

to_fundamental implements the forward map u -> (v0, v1) for polynomial u;
round-trip identities (recon(to_fundamental(u)) == u exactly, and the
converse on constrained pairs) are enforced by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

from .polymat import Interval, PolyMat, THETA, X, hstack, vstack, x_poly
from .piop import MixedVector, PiOperator, PiOpError
from .bcspace import (
    BoundaryError,
    SplitBoundary,
    augmented_bval,
    build_rep,
    invert_exact,
    validate_aux_weight,
)


class MapsError(ValueError):
    pass


@dataclass(frozen=True)
class StateMaps:
    """Operators of the state decomposition for one boundary setup."""

    interval: Interval
    n: int
    defect: int
    split: SplitBoundary
    aux_weight: PolyMat  # defect x n, the F3 weights
    null_basis: PolyMat  # n x defect, affine in x
    inv_kernel: PolyMat  # n x n full-interval kernel of the inverse
    recon: PiOperator  # (0,n) x (defect,n): u from (v0, v1)
    deriv: PiOperator  # (0,n) x (defect,n): u_x from (v0, v1)
    functional: PiOperator  # (defect,0) x (0,n): u -> v0
    constraint: PiOperator  # (defect,0) x (defect,n): residual conditions on v1


def build_inverse_kernel(sb: SplitBoundary, aux_weight: PolyMat) -> tuple[PolyMat, PolyMat]:
    """Full-interval kernel and nullspace basis from the augmented boundary map."""
    n, m = sb.n, sb.defect
    iv = sb.interval
    if not validate_aux_weight(sb, aux_weight):
        raise MapsError("auxiliary weight leaves the boundary map singular")
    g_aug = augmented_bval(sb, aux_weight)
    g_inv = invert_exact(g_aug)
    e_aug = vstack([sb.e_full, PolyMat.zeros(m, 4 * n)])
    w_aug = vstack([sb.w_full, aux_weight])
    h_aug = build_rep(e_aug, w_aug, n, iv).curv_kernel  # 2n x n, in x
    affine = hstack([PolyMat.identity(n), PolyMat.identity(n).scaled_by(x_poly(-iv.a, 1))])
    kernel = affine @ g_inv @ h_aug.swap_vars()  # n x n in (x, theta)
    tail = vstack([PolyMat.zeros(2 * n - m, m), PolyMat.identity(m)])
    null_basis = affine @ g_inv @ tail  # n x m, affine in x
    return kernel, null_basis


def build_state_maps(sb: SplitBoundary, aux_weight: PolyMat) -> StateMaps:
    n, m = sb.n, sb.defect
    iv = sb.interval
    if aux_weight.shape != (m, n):
        raise MapsError(f"aux weight must be {m}x{n}")
    kernel, null_basis = build_inverse_kernel(sb, aux_weight)
    local = PolyMat.identity(n).scaled_by(PolyMat.scalar({(1, 0): 1, (0, 1): -1}))
    recon = PiOperator.from_full_kernel(
        (0, n), (m, n), iv,
        fr=null_basis, lower_kernel=local, full_kernel=kernel,
    )
    deriv = PiOperator.from_full_kernel(
        (0, n), (m, n), iv,
        fr=null_basis.diff(X),
        lower_kernel=PolyMat.identity(n),
        full_kernel=kernel.diff(X),
    )
    functional = PiOperator.functional(aux_weight, iv)
    constraint = PiOperator.from_blocks(
        (m, 0), (m, n), iv,
        rr=PolyMat.zeros(m, m),
        ri=sb.curv_kernel_zero,
    )

    maps = StateMaps(
        interval=iv, n=n, defect=m, split=sb, aux_weight=aux_weight,
        null_basis=null_basis, inv_kernel=kernel,
        recon=recon, deriv=deriv, functional=functional, constraint=constraint,
    )
    _check_construction(maps)
    return maps


def _check_construction(maps: StateMaps):
    """Construction-time identities that hold for every valid setup."""
    if not maps.null_basis.diff(X).diff(X).is_zero():
        raise MapsError("nullspace basis is not curvature-free")
    proj = maps.functional @ maps.recon
    m = maps.defect
    expected = PiOperator.from_blocks(
        (m, 0), (m, maps.n), maps.interval, rr=PolyMat.identity(m)
    )
    if not proj.drop_small().approx_eq(expected, 1e-12):
        raise MapsError("functional does not invert the nullspace embedding")


def to_fundamental(u: PolyMat, maps: StateMaps) -> MixedVector:
    """The forward map u -> (int aux_weight u, u_xx), exact for polynomial u."""
    if u.shape != (maps.n, 1):
        raise MapsError(f"state must be {maps.n}x1")
    if THETA in u.variables:
        raise MapsError("state must be a polynomial in x")
    iv = maps.interval
    if maps.defect:
        v0 = (maps.aux_weight @ u).integrate(X, iv.a, iv.b)
    else:
        v0 = PolyMat.zeros(0, 1)
    return MixedVector(v0, u.diff(X).diff(X))


def reconstruct(v: MixedVector, maps: StateMaps) -> PolyMat:
    """u = null_basis v0 + inverse-kernel applied to v1."""
    return maps.recon.apply(v).v1
