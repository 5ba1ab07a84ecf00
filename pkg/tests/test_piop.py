"""Algebra tests for partial-integral operators.

Composition and adjoint parameters have no closed-form reference; they are
checked against nested application and exact inner products on random
polynomial data, which is the authoritative oracle for this layer.
"""

from fractions import Fraction

import numpy as np
import pytest

from piecert.polymat import Interval, PolyMat, THETA, X, hstack, x_poly
from piecert.piop import (
    MixedVector,
    PiOperator,
    PiOpError,
    dump_operator,
    inner,
    parse_operator,
)
from util import rand_mixed, rand_operator, rand_polymat

IV = Interval(-1, 1)


def mixed_eq(u: MixedVector, v: MixedVector) -> bool:
    return u.v0 == v.v0 and u.v1 == v.v1


class TestApply:
    def test_identity(self):
        rng = np.random.default_rng(0)
        op = PiOperator.identity((2, 3), IV)
        v = rand_mixed(rng, (2, 3))
        assert mixed_eq(op.apply(v), v)

    def test_zero(self):
        rng = np.random.default_rng(1)
        op = PiOperator.zero((2, 2), (1, 3), IV)
        v = rand_mixed(rng, (1, 3))
        w = op.apply(v)
        assert w.v0.is_zero() and w.v1.is_zero()

    def test_periodic_inverse_kernel(self):
        # Kernel of the second-order inverse under periodic conditions on
        # [-1, 1] with zero mean: full-interval part x(th-1)/2 - (1-th)^2/4,
        # local part (x - th).  Applied to v1 = th it must give the unique
        # zero-mean periodic solution of u'' = x, namely x^3/6 - x/6.
        half = Fraction(1, 2)
        quarter = Fraction(1, 4)
        t1k = PolyMat.scalar(
            {(1, 1): half, (1, 0): -half, (0, 0): -quarter, (0, 1): half, (0, 2): -quarter}
        )
        op = PiOperator.from_full_kernel(
            (0, 1), (0, 1), IV,
            lower_kernel=PolyMat.scalar({(1, 0): 1, (0, 1): -1}),
            full_kernel=t1k,
        )
        v = MixedVector(PolyMat.zeros(0, 1), PolyMat.scalar({(1, 0): 1}))
        w = op.apply(v)
        expected = PolyMat.scalar({(3, 0): Fraction(1, 6), (1, 0): Fraction(-1, 6)})
        assert w.v1 == expected

    def test_dims_mismatch(self):
        op = PiOperator.zero((1, 1), (1, 1), IV)
        with pytest.raises(PiOpError):
            op.apply(MixedVector(PolyMat.zeros(2, 1), PolyMat.zeros(1, 1)))


class TestLinearOps:
    def test_add_zero(self):
        rng = np.random.default_rng(2)
        a = rand_operator(rng, (2, 2), (1, 2), IV)
        z = PiOperator.zero((2, 2), (1, 2), IV)
        assert (a + z).approx_eq(a, 0)

    def test_scale_zero(self):
        rng = np.random.default_rng(3)
        a = rand_operator(rng, (2, 2), (1, 2), IV)
        assert (a * 0).is_zero()

    def test_add_distributes_over_apply(self):
        rng = np.random.default_rng(4)
        a = rand_operator(rng, (2, 2), (1, 2), IV)
        b = rand_operator(rng, (2, 2), (1, 2), IV)
        for _ in range(10):
            v = rand_mixed(rng, (1, 2))
            lhs = (a + b).apply(v)
            rhs_a, rhs_b = a.apply(v), b.apply(v)
            assert lhs.v0 == rhs_a.v0 + rhs_b.v0
            assert lhs.v1 == rhs_a.v1 + rhs_b.v1


class TestCompose:
    def test_identity_left(self):
        rng = np.random.default_rng(5)
        b = rand_operator(rng, (2, 2), (1, 3), IV)
        c = PiOperator.identity((2, 2), IV) @ b
        assert c.approx_eq(b, 0)

    def test_nested_apply_oracle(self):
        rng = np.random.default_rng(6)
        dims = [((1, 2), (2, 1)), ((0, 2), (1, 2)), ((2, 0), (0, 2)), ((2, 2), (2, 2))]
        for dims_mid, dims_in in dims:
            for trial in range(5):
                a = rand_operator(rng, (2, 2), dims_mid, IV)
                b = rand_operator(rng, dims_mid, dims_in, IV)
                c = a @ b
                v = rand_mixed(rng, dims_in)
                direct = c.apply(v)
                nested = a.apply(b.apply(v))
                assert mixed_eq(direct, nested)

    def test_associativity(self):
        rng = np.random.default_rng(7)
        a = rand_operator(rng, (1, 2), (2, 1), IV, deg=2)
        b = rand_operator(rng, (2, 1), (1, 2), IV, deg=2)
        c = rand_operator(rng, (1, 2), (2, 2), IV, deg=2)
        for _ in range(5):
            v = rand_mixed(rng, (2, 2))
            lhs = ((a @ b) @ c).apply(v)
            rhs = (a @ (b @ c)).apply(v)
            assert mixed_eq(lhs, rhs)

    def test_degree_growth_bound(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            a = rand_operator(rng, (2, 2), (2, 2), IV, deg=3)
            b = rand_operator(rng, (2, 2), (2, 2), IV, deg=3)
            assert (a @ b).max_degree() <= a.max_degree() + b.max_degree() + 1


class TestAdjoint:
    def test_identity(self):
        op = PiOperator.identity((2, 2), IV)
        assert op.adjoint().approx_eq(op, 0)

    def test_involution(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            a = rand_operator(rng, (2, 1), (1, 2), IV, deg=4)
            assert a.adjoint().adjoint().approx_eq(a, 0)

    def test_inner_product_identity(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            a = rand_operator(rng, (2, 2), (1, 2), IV)
            u = rand_mixed(rng, (1, 2))
            v = rand_mixed(rng, (2, 2))
            lhs = inner(a.apply(u), v, IV)
            rhs = inner(u, a.adjoint().apply(v), IV)
            assert lhs == rhs

    def test_reverses_composition(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            a = rand_operator(rng, (2, 2), (1, 2), IV, deg=2)
            b = rand_operator(rng, (1, 2), (2, 1), IV, deg=2)
            lhs = (a @ b).adjoint()
            rhs = b.adjoint() @ a.adjoint()
            assert lhs.approx_eq(rhs, 0)


class TestConstructors:
    def test_multiplier_and_functional(self):
        rng = np.random.default_rng(12)
        w = rand_polymat(rng, 2, 2, deg=2, theta=False)
        mult = PiOperator.multiplier(w, IV)
        v = rand_mixed(rng, (0, 2))
        assert mult.apply(v).v1 == w @ v.v1
        fun = PiOperator.functional(w, IV)
        got = fun.apply(v).v0
        assert got == (w @ v.v1).integrate(X, IV.a, IV.b)

    def test_fun_part(self):
        rng = np.random.default_rng(13)
        ext = PiOperator.fun_part((2, 3), IV)
        v = rand_mixed(rng, (2, 3))
        w = ext.apply(v)
        assert w.v0.rows == 0 and w.v1 == v.v1

    def test_full_kernel_conversion(self):
        # int_a^b K v1 must equal the two-sided split applied to the same v1
        rng = np.random.default_rng(14)
        k = rand_polymat(rng, 2, 2, deg=2, theta=True)
        op = PiOperator.from_full_kernel((0, 2), (0, 2), IV, full_kernel=k)
        v = rand_mixed(rng, (0, 2))
        direct = (k @ v.v1.swap_vars()).integrate(THETA, IV.a, IV.b)
        assert op.apply(v).v1 == direct


def test_serialization_round_trip():
    rng = np.random.default_rng(15)
    op = rand_operator(rng, (2, 1), (1, 2), IV)
    text = dump_operator(op)
    back = parse_operator(text)
    assert back.approx_eq(op, 0)
    assert back.dims_out == op.dims_out and back.dims_in == op.dims_in
