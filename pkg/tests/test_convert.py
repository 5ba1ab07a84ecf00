"""PDE-to-PIE conversion consistency."""

from fractions import Fraction

import numpy as np
import pytest

from piecert.polymat import Interval, PolyMat, X, x_poly
from piecert.piop import MixedVector, PiOperator
from piecert.bcspace import bc_periodic, split, synth_aux_weight
from piecert.convert import (
    ConvertError,
    PdeSystem,
    damped_wave,
    dirichlet_heat,
    pde_to_pie,
    reaction_diffusion,
    residual_dynamics_check,
    shifted_pair,
    trajectory_operator,
)
from piecert.maps import to_fundamental, reconstruct
from piecert.sampling import random_domain_member, random_range_member
from util import rand_polymat

IV11 = Interval(-1, 1)


class TestPdeToPie:
    def test_reaction_diffusion_top_row(self):
        lam = Fraction(3)
        pie = pde_to_pie(reaction_diffusion(lam))
        assert pie.m == 1
        # top row as an operator: v -> lam v0 + (1/2) int v1
        assert pie.rhs_op.rr == PolyMat.constant([[lam]])
        assert pie.rhs_op.ri == PolyMat.constant([[Fraction(1, 2)]])
        # lhs top block is the identity on v0
        assert pie.lhs_op.rr == PolyMat.identity(1)
        assert pie.lhs_op.ri.is_zero()

    def test_pure_heat_flow_is_extraction(self):
        pie = pde_to_pie(reaction_diffusion(0))
        ext = PiOperator.fun_part((1, 1), IV11)
        assert pie.flow.approx_eq(ext, 0)

    def test_wave_system_shapes(self):
        pie = pde_to_pie(damped_wave(2))
        assert (pie.m, pie.n) == (2, 2)
        assert pie.maps.aux_weight == PolyMat.identity(2).scaled_by(x_poly(4, -6))
        assert pie.lhs_op.rr == PolyMat.identity(2)

    def test_invalid_override_rejected(self):
        iv = IV11
        pde = PdeSystem(
            interval=iv, n=1,
            coeff0=PolyMat.zeros(1, 1), coeff1=PolyMat.zeros(1, 1),
            coeff2=PolyMat.identity(1),
            bc=bc_periodic(1, iv),
            aux_weight_override=PolyMat.scalar({(1, 0): Fraction(1, 2)}),
        )
        with pytest.raises(ConvertError):
            pde_to_pie(pde)

    def test_top_block_is_functional_of_flow(self):
        rng = np.random.default_rng(0)
        for pde in (reaction_diffusion(Fraction(3, 2)), damped_wave(1)):
            pie = pde_to_pie(pde)
            comp = pie.maps.functional @ pie.flow
            for _ in range(5):
                v = random_range_member(pie.maps, rng)
                got = pie.rhs_op.apply(v)
                assert got.v0 == comp.apply(v).v0
                assert got.v1 == pie.flow.apply(v).v1

    def test_random_systems_stack_consistently(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            coeffs = [rand_polymat(rng, 1, 1, deg=2, theta=False, density=1.0)
                      for _ in range(3)]
            pde = PdeSystem(
                interval=IV11, n=1,
                coeff0=coeffs[0], coeff1=coeffs[1], coeff2=coeffs[2],
                bc=bc_periodic(1, IV11),
                aux_weight_override=PolyMat.constant([[Fraction(1, 2)]]),
            )
            pie = pde_to_pie(pde)
            v = random_range_member(pie.maps, rng)
            full = pie.rhs_op.apply(v)
            fv = pie.flow.apply(v)
            assert full.v1 == fv.v1
            assert full.v0 == (pie.maps.functional @ pie.flow).apply(v).v0


class TestTrajectoryOperators:
    def test_zero_projection_changes_nothing(self):
        pie = pde_to_pie(reaction_diffusion(1))
        traj = trajectory_operator(pie, "zero")
        t_sh, a_sh = shifted_pair(pie, traj)
        assert t_sh.approx_eq(pie.maps.recon, 0)
        assert a_sh.approx_eq(pie.flow, 0)

    def test_nullspace_projection_kills_v0_column(self):
        pie = pde_to_pie(reaction_diffusion(1))
        traj = trajectory_operator(pie, "nullspace")
        t_sh, _ = shifted_pair(pie, traj)
        # (I - proj) recon = [0, kernel-part]: the v0 column vanishes
        assert t_sh.fr.is_zero()
        assert t_sh.f1 == pie.maps.recon.f1
        assert t_sh.f2 == pie.maps.recon.f2

    def test_identity_projection_kills_everything(self):
        pie = pde_to_pie(reaction_diffusion(1))
        eye = PiOperator.identity((0, 1), IV11)
        traj = trajectory_operator(pie, "custom", custom=eye)
        t_sh, a_sh = shifted_pair(pie, traj)
        assert t_sh.is_zero() and a_sh.is_zero()


class TestDynamicsResidual:
    def test_periodic_cubic(self):
        lam = Fraction(2)
        pde = reaction_diffusion(lam)
        pie = pde_to_pie(pde)
        u0 = PolyMat.scalar({(3, 0): Fraction(1, 6), (1, 0): Fraction(-1, 6)})
        rep = residual_dynamics_check(pde, pie, u0)
        assert rep.ok
        expected = PolyMat.scalar({(1, 0): 1}) + u0 * lam
        assert rep.lhs == expected

    def test_constant_state_pure_heat(self):
        pde = reaction_diffusion(0)
        pie = pde_to_pie(pde)
        rep = residual_dynamics_check(pde, pie, PolyMat.constant([[5]]))
        assert rep.ok and rep.lhs.is_zero()

    def test_out_of_domain_state_rejected(self):
        pde = reaction_diffusion(0)
        pie = pde_to_pie(pde)
        with pytest.raises(ConvertError):
            residual_dynamics_check(pde, pie, x_poly(0, 1))

    def test_random_members_all_families(self):
        rng = np.random.default_rng(2)
        for pde in (reaction_diffusion(Fraction(5, 2)), damped_wave(3), dirichlet_heat()):
            pie = pde_to_pie(pde)
            for _ in range(5):
                u0 = random_domain_member(pde.bc, rng)
                rep = residual_dynamics_check(pde, pie, u0)
                assert rep.ok
                assert rep.lhs == rep.rhs
