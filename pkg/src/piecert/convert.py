"""Conversion of a linear second-order PDE into its partial-integral form.

A PDE

    u_t = c0(x) u + c1(x) u_x + c2(x) u_xx,   u(t) in the boundary domain

becomes, through the state decomposition, an equation for the fundamental
state v = (v0, v1):

    lhs_op  d/dt v = rhs_op v,     constraint v = 0

where lhs_op stacks the identity on v0 over the reconstruction map, rhs_op
stacks the functional image of the flow over the flow itself, and the
constraint carves the admissible subspace out of R^m x L2^n.  The flow
operator is the multiplier composition

    flow = M_{c0} recon + M_{c1} deriv + M_{c2} fun_part.

``shifted_pair`` forms the pair ((I - proj) recon, (I - proj) flow) whose
energy decay defines stability relative to the trajectories selected by a
projection (zero projection measures plain decay; the nullspace projection
measures convergence toward the curvature-free trajectory).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .polymat import Interval, PolyMat, THETA, X
from .piop import MixedVector, PiOperator, PiOpError
from .bcspace import BoundarySpec, bc_residual, split, synth_aux_weight, validate_aux_weight
from .maps import StateMaps, build_state_maps, to_fundamental


class ConvertError(ValueError):
    pass


@dataclass(frozen=True)
class PdeSystem:
    """u_t = coeff0 u + coeff1 u_x + coeff2 u_xx on the given boundary domain."""

    interval: Interval
    n: int
    coeff0: PolyMat
    coeff1: PolyMat
    coeff2: PolyMat
    bc: BoundarySpec
    aux_weight_override: Optional[PolyMat] = None

    def __post_init__(self):
        for c in (self.coeff0, self.coeff1, self.coeff2):
            if c.shape != (self.n, self.n):
                raise ConvertError(f"coefficient must be {self.n}x{self.n}")
            if THETA in c.variables:
                raise ConvertError("coefficients are polynomials in x")
        if self.bc.n != self.n or self.bc.interval != self.interval:
            raise ConvertError("boundary spec does not match the system")


@dataclass(frozen=True)
class PieSystem:
    """The converted dynamics lhs_op dv/dt = rhs_op v on {constraint v = 0}."""

    lhs_op: PiOperator  # (m,n) x (m,n), top block the identity on v0
    rhs_op: PiOperator  # (m,n) x (m,n), top block functional(flow)
    flow: PiOperator  # (0,n) x (m,n)
    constraint: PiOperator  # (m,0) x (m,n)
    maps: StateMaps
    m: int
    n: int


@dataclass(frozen=True)
class TrajectoryOperator:
    """Projection selecting the trajectories measured by the seminorm."""

    proj: PiOperator  # (0,n) x (0,n)
    kind: str  # "zero" | "nullspace" | "custom"


def pde_to_pie(pde: PdeSystem) -> PieSystem:
    sb = split(pde.bc)
    if pde.aux_weight_override is not None:
        aux = pde.aux_weight_override
        if not validate_aux_weight(sb, aux):
            raise ConvertError("supplied auxiliary weight fails the invertibility check")
    else:
        aux = synth_aux_weight(sb)
    maps = build_state_maps(sb, aux)
    iv = pde.interval
    m, n = maps.defect, maps.n

    flow = (
        PiOperator.multiplier(pde.coeff0, iv) @ maps.recon
        + PiOperator.multiplier(pde.coeff1, iv) @ maps.deriv
        + PiOperator.multiplier(pde.coeff2, iv) @ PiOperator.fun_part((m, n), iv)
    )
    top = maps.functional @ flow  # (m,0) x (m,n)

    lhs = PiOperator.from_blocks(
        (m, n), (m, n), iv,
        rr=PolyMat.identity(m),
        fr=maps.recon.fr, f0=maps.recon.f0,
        f1=maps.recon.f1, f2=maps.recon.f2,
    )
    rhs = PiOperator.from_blocks(
        (m, n), (m, n), iv,
        rr=top.rr, ri=top.ri,
        fr=flow.fr, f0=flow.f0, f1=flow.f1, f2=flow.f2,
    )
    return PieSystem(
        lhs_op=lhs, rhs_op=rhs, flow=flow, constraint=maps.constraint,
        maps=maps, m=m, n=n,
    )


def trajectory_operator(pie: PieSystem, kind: str = "zero",
                        custom: Optional[PiOperator] = None) -> TrajectoryOperator:
    iv = pie.maps.interval
    n = pie.n
    if kind == "zero":
        return TrajectoryOperator(PiOperator.zero((0, n), (0, n), iv), "zero")
    if kind == "nullspace":
        embed = PiOperator.from_blocks(
            (0, n), (pie.m, 0), iv, fr=pie.maps.null_basis
        )
        return TrajectoryOperator(embed @ pie.maps.functional, "nullspace")
    if kind == "custom":
        if custom is None or custom.dims_out != (0, n) or custom.dims_in != (0, n):
            raise ConvertError("custom trajectory operator must act on the function space")
        return TrajectoryOperator(custom, "custom")
    raise ConvertError(f"unknown trajectory kind {kind!r}")


def shifted_pair(pie: PieSystem, traj: TrajectoryOperator) -> tuple[PiOperator, PiOperator]:
    """((I - proj) recon, (I - proj) flow): the pair whose decay is certified."""
    iv = pie.maps.interval
    eye = PiOperator.identity((0, pie.n), iv)
    shift = eye - traj.proj
    return (shift @ pie.maps.recon).drop_small(), (shift @ pie.flow).drop_small()


@dataclass(frozen=True)
class DynamicsReport:
    ok: bool
    max_residual_coeff: float
    lhs: PolyMat
    rhs: PolyMat


def residual_dynamics_check(pde: PdeSystem, pie: PieSystem, u0: PolyMat) -> DynamicsReport:
    """Check flow(v0-of-u0) == coeff0 u0 + coeff1 u0' + coeff2 u0'' symbolically.

    Raises if u0 is not in the boundary domain.
    """
    res = bc_residual(u0, pde.bc.endpoint_mat, pde.bc.weight, pde.interval)
    if not res.is_zero():
        raise ConvertError("initial state violates the boundary conditions")
    v = to_fundamental(u0, pie.maps)
    lhs = pie.flow.apply(v).v1
    rhs = (
        pde.coeff0 @ u0
        + pde.coeff1 @ u0.diff(X)
        + pde.coeff2 @ u0.diff(X).diff(X)
    )
    diff = (lhs - rhs).drop_small(0.0)
    return DynamicsReport(
        ok=diff.is_zero() or diff.max_abs_coeff() <= 1e-12,
        max_residual_coeff=diff.max_abs_coeff(),
        lhs=lhs,
        rhs=rhs,
    )


# -- canned example systems -------------------------------------------------


def reaction_diffusion(lam, interval: Optional[Interval] = None) -> PdeSystem:
    """u_t = u_xx + lam u with periodic conditions (default on [-1, 1])."""
    from .bcspace import bc_periodic
    from fractions import Fraction

    iv = interval if interval is not None else Interval(-1, 1)
    lam_mat = PolyMat.constant([[lam]])
    return PdeSystem(
        interval=iv, n=1,
        coeff0=lam_mat,
        coeff1=PolyMat.zeros(1, 1),
        coeff2=PolyMat.identity(1),
        bc=bc_periodic(1, iv),
        aux_weight_override=PolyMat.constant([[Fraction(1, 2)]]),
    )


def damped_wave(k, interval: Optional[Interval] = None) -> PdeSystem:
    """First-order form of w_tt = w_xx - 2k w_t - k^2 w, Neumann ends."""
    from .bcspace import bc_neumann

    iv = interval if interval is not None else Interval(0, 1)
    ksq = k * k
    return PdeSystem(
        interval=iv, n=2,
        coeff0=PolyMat.constant([[0, 1], [-ksq, -2 * k]]),
        coeff1=PolyMat.zeros(2, 2),
        coeff2=PolyMat.constant([[0, 0], [1, 0]]),
        bc=bc_neumann(2, iv),
    )


def dirichlet_heat(interval: Optional[Interval] = None) -> PdeSystem:
    """u_t = u_xx with zero endpoint values."""
    from .bcspace import bc_dirichlet

    iv = interval if interval is not None else Interval(0, 1)
    return PdeSystem(
        interval=iv, n=1,
        coeff0=PolyMat.zeros(1, 1),
        coeff1=PolyMat.zeros(1, 1),
        coeff2=PolyMat.identity(1),
        bc=bc_dirichlet(1, iv),
    )
