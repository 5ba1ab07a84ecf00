"""Certificate assembly and feasibility behavior of the operator inequality.

The heavy reproduction sweeps live in the acceptance module; here the cone
construction is validated by sampling, the assembled constraint columns are
cross-checked against plain operator algebra, and the documented feasible /
infeasible examples are exercised once each.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from piecert.convert import (
    pde_to_pie,
    reaction_diffusion,
    trajectory_operator,
)
from piecert.lpi import (
    EPS_BASE,
    LpiDegreeError,
    assemble,
    build_cone,
    dump_certificate,
    lhs_operator,
    matching_distance,
    max_decay_rate,
    solve_at_rate,
    spectral_rate_estimate,
    _accumulate,
    _blocks_of,
)
from piecert.piop import MixedVector, PiOperator, inner, quad_form
from piecert.polymat import Interval, PolyMat
from piecert.sdp import svec, svec_size
from piecert.sampling import rand_poly_column

PI2 = math.pi ** 2
IV = Interval(-1, 1)


@pytest.fixture(scope="module")
def rd_assembly():
    pie = pde_to_pie(reaction_diffusion(0))
    traj = trajectory_operator(pie, "nullspace")
    return assemble(pie, traj, deg=3)


class TestCone:
    def test_degree_zero_pointwise_form(self):
        cone = build_cone(0, (0, 1), IV)
        dims = cone.block_dims
        mats = [np.zeros((d, d)) for d in dims]
        mats[0][0, 0] = 1.0  # pointwise block row "1"
        op = cone.operator_of(mats)
        rng = np.random.default_rng(0)
        for _ in range(5):
            v1 = rand_poly_column(rng, 1, 4).map_coeffs(float)
            v = MixedVector(PolyMat.zeros(0, 1), v1)
            val = float(quad_form(op, v))
            direct = float(inner(v, v, IV))
            assert val == pytest.approx(direct, rel=1e-12)

    def test_zero_matrix_gives_zero_operator(self):
        cone = build_cone(1, (0, 1), IV)
        op = cone.operator_of([np.zeros((d, d)) for d in cone.block_dims])
        assert op.is_zero()

    def test_random_psd_matrices_give_nonnegative_forms(self):
        rng = np.random.default_rng(1)
        cone = build_cone(2, (0, 1), IV)
        for trial in range(5):
            mats = []
            for d in cone.block_dims:
                g = rng.normal(size=(d, d))
                mats.append(g @ g.T)
            op = cone.operator_of(mats)
            for _ in range(10):
                v1 = rand_poly_column(rng, 1, 5).map_coeffs(float)
                v = MixedVector(PolyMat.zeros(0, 1), v1)
                assert float(quad_form(op, v)) >= -1e-10

    def test_linearity_in_the_matrices(self):
        rng = np.random.default_rng(2)
        cone = build_cone(1, (0, 1), IV)
        m1 = [rng.normal(size=(d, d)) for d in cone.block_dims]
        m1 = [m + m.T for m in m1]
        m2 = [rng.normal(size=(d, d)) for d in cone.block_dims]
        m2 = [m + m.T for m in m2]
        lhs = cone.operator_of([a + 2 * b for a, b in zip(m1, m2)])
        rhs = cone.operator_of(m1) + 2.0 * cone.operator_of(m2)
        assert lhs.approx_eq(rhs, 1e-10)


class TestAssemblyColumns:
    def test_storage_columns_match_operator_algebra(self, rd_assembly):
        asm = rd_assembly
        rng = np.random.default_rng(3)
        dims = asm.cone_p.block_dims
        mats = []
        for d in dims:
            g = rng.normal(size=(d, d))
            mats.append(g @ g.T)
        alpha = 0.7
        lhs = lhs_operator(asm, alpha, mats, 0.0)
        vec = np.zeros(asm.n_vars)
        off = 0
        for d, m in zip(dims, mats):
            vec[off : off + svec_size(d)] = svec(m)
            off += svec_size(d)
        rowvals = (asm.a_const + alpha * asm.a_rate) @ vec
        ref: dict = {}
        _accumulate(ref, _blocks_of(lhs))
        err = 0.0
        for idx, rk in enumerate(asm.rows):
            err = max(err, abs(rowvals[idx] - ref.pop(rk, 0.0)))
        leftover = max((abs(v) for v in ref.values()), default=0.0)
        assert err <= 1e-10 and leftover <= 1e-12

    def test_rhs_is_unit_coercivity_image(self, rd_assembly):
        asm = rd_assembly
        alpha = 1.3
        lhs = lhs_operator(asm, alpha, [np.zeros((d, d)) for d in asm.cone_p.block_dims],
                           EPS_BASE)
        ref: dict = {}
        _accumulate(ref, _blocks_of(lhs))
        b = asm.b_const + alpha * asm.b_rate
        err = 0.0
        for idx, rk in enumerate(asm.rows):
            err = max(err, abs(-b[idx] - ref.pop(rk, 0.0)))
        assert err <= 1e-10

    def test_strict_degree_bookkeeping_raises(self):
        pie = pde_to_pie(reaction_diffusion(0))
        traj = trajectory_operator(pie, "nullspace")
        with pytest.raises(LpiDegreeError):
            assemble(pie, traj, deg=3, s_kernel_deg=1, strict_degrees=True)


class TestFeasibility:
    def test_heat_certified_at_rate_nine(self, rd_assembly):
        res = solve_at_rate(rd_assembly, 9.0, validate=True)
        assert res.status == "certified"
        cert = res.certificate
        assert cert.max_residual < 1e-7
        assert cert.quad_form_margin <= 1e-8
        assert cert.epsilon_sq >= EPS_BASE
        floors = [np.linalg.eigvalsh(m)[0] for m in cert.lyapunov_mats if m.size]
        assert min(floors) >= -1e-8

    def test_heat_infeasible_above_limit(self, rd_assembly):
        res = solve_at_rate(rd_assembly, 11.0, validate=False)
        assert res.status == "infeasible"

    def test_unstable_uniform_branch_never_certifies(self):
        # measuring plain decay (no projection) while the uniform mode grows
        pie = pde_to_pie(reaction_diffusion(1))
        traj = trajectory_operator(pie, "zero")
        asm = assemble(pie, traj, deg=2)
        for alpha in (0.0, 1.0):
            res = solve_at_rate(asm, alpha, validate=False)
            assert res.status != "certified"

    def test_identity_projection_trivially_feasible(self):
        pie = pde_to_pie(reaction_diffusion(1))
        eye = PiOperator.identity((0, 1), IV)
        traj = trajectory_operator(pie, "custom", custom=eye)
        asm = assemble(pie, traj, deg=1)
        res = solve_at_rate(asm, 5.0, validate=False)
        assert res.status == "certified"

    def test_monotonicity_of_certified_rates(self, rd_assembly):
        # three pairs alpha1 < alpha2 with alpha2 certified imply alpha1 too
        for a1, a2 in [(1.0, 5.0), (5.0, 8.0), (8.0, 9.3)]:
            hi = solve_at_rate(rd_assembly, a2, validate=False)
            lo = solve_at_rate(rd_assembly, a1, validate=False)
            assert hi.status == "certified"
            assert lo.status == "certified"

    def test_soundness_against_spectral_oracle(self, rd_assembly):
        rate = spectral_rate_estimate(rd_assembly.pie, rd_assembly.traj)
        res = solve_at_rate(rd_assembly, 0.98 * PI2, validate=False)
        assert res.status == "certified"
        assert res.alpha <= rate + 1e-3


class TestSearch:
    def test_bisection_inside_window(self):
        pde = reaction_diffusion(9)
        alpha, asm = max_decay_rate(pde, "nullspace", deg=3, tol=5e-3)
        amax = PI2 - 9
        assert 0.98 * amax <= alpha <= amax + 1e-3

    def test_uncertifiable_returns_none(self):
        pde = reaction_diffusion(1)
        alpha, _ = max_decay_rate(pde, "zero", deg=2, tol=1e-2, alpha_hi=2.0)
        assert alpha is None


class TestDiagnostics:
    def test_matching_distance_zero_when_feasible(self, rd_assembly):
        dist = matching_distance(rd_assembly, 2.0)
        assert dist is not None and dist <= 1e-7

    def test_matching_distance_positive_when_infeasible(self):
        pie = pde_to_pie(reaction_diffusion(9.88))
        traj = trajectory_operator(pie, "nullspace")
        asm = assemble(pie, traj, deg=3)
        dist = matching_distance(asm, 0.0)
        assert dist is not None and dist > 1e-5

    def test_certificate_dump(self, rd_assembly):
        res = solve_at_rate(rd_assembly, 1.0, validate=True)
        text = dump_certificate(res.certificate)
        assert "alpha 1.0" in text
        assert "epsilon_sq" in text and "equality_residual" in text
