"""Partial-integral operators on R^m x L2^n[a,b] and their *-algebra.

An operator maps a mixed vector (v0, v1), v0 in R^p and v1 in L2^q, to
(w0, w1) with

    w0    = rr v0 + int_a^b ri(x) v1(x) dx
    w1(x) = fr(x) v0 + f0(x) v1(x)
            + int_a^x f1(x, th) v1(th) dth + int_x^b f2(x, th) v1(th) dth

All six parameter blocks are PolyMats.  The kernel convention here is the
two-sided split (f1 below the diagonal, f2 above); ``from_full_kernel``
converts from the (int_a^x, int_a^b) form that boundary-value constructions
produce naturally.  The split makes composition and adjoint symmetric:

    adjoint:  rr->rr^T, ri<->fr^T, f0->f0^T, f1(x,th)<->f2(th,x)^T

Composition parameters are obtained by expanding the nested application,
interchanging the order of integration, and splitting the (x, th) square
into the two triangles; they are validated against a nested-apply oracle in
the test suite rather than against any closed-form reference.

Operators are immutable and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .polymat import THETA, X, Interval, PolyMat, PolyMatError, convolve

Dims = tuple[int, int]


class PiOpError(ValueError):
    """Dimension or variable misuse in the operator algebra."""


@dataclass(frozen=True)
class MixedVector:
    """A pair (v0, v1): real part p x 1, function part q x 1 in x."""

    v0: PolyMat
    v1: PolyMat

    def __post_init__(self):
        if self.v0.cols > 1 or self.v1.cols > 1:
            raise PiOpError("mixed vector components must be columns")
        if self.v0.variables:
            raise PiOpError("real part must be constant")
        if THETA in self.v1.variables:
            raise PiOpError("function part must be a polynomial in x only")

    @property
    def dims(self) -> Dims:
        return (self.v0.rows, self.v1.rows)


@dataclass(frozen=True)
class PiOperator:
    """4-PI operator with two-sided kernel split."""

    dims_out: Dims  # (m, n)
    dims_in: Dims  # (p, q)
    interval: Interval
    rr: PolyMat  # m x p, constant
    ri: PolyMat  # m x q, in x (integrated over [a, b])
    fr: PolyMat  # n x p, in x
    f0: PolyMat  # n x q, in x (pointwise multiplier)
    f1: PolyMat  # n x q, in (x, theta), integrates over [a, x]
    f2: PolyMat  # n x q, in (x, theta), integrates over [x, b]

    def __post_init__(self):
        m, n = self.dims_out
        p, q = self.dims_in
        checks = [
            (self.rr, (m, p), frozenset()),
            (self.ri, (m, q), frozenset({X})),
            (self.fr, (n, p), frozenset({X})),
            (self.f0, (n, q), frozenset({X})),
            (self.f1, (n, q), frozenset({X, THETA})),
            (self.f2, (n, q), frozenset({X, THETA})),
        ]
        for blk, shape, allowed in checks:
            if blk.shape != shape:
                raise PiOpError(f"block shape {blk.shape} != {shape}")
            if not blk.variables <= allowed:
                raise PiOpError(f"block uses variables {set(blk.variables)} > {set(allowed)}")

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero(dims_out: Dims, dims_in: Dims, interval: Interval) -> "PiOperator":
        m, n = dims_out
        p, q = dims_in
        z = PolyMat.zeros
        return PiOperator(
            dims_out, dims_in, interval,
            z(m, p), z(m, q), z(n, p), z(n, q), z(n, q), z(n, q),
        )

    @staticmethod
    def identity(dims: Dims, interval: Interval) -> "PiOperator":
        m, n = dims
        op = PiOperator.zero(dims, dims, interval)
        return PiOperator(
            dims, dims, interval,
            PolyMat.identity(m), op.ri, op.fr, PolyMat.identity(n), op.f1, op.f2,
        )

    @staticmethod
    def from_blocks(
        dims_out: Dims,
        dims_in: Dims,
        interval: Interval,
        rr: Optional[PolyMat] = None,
        ri: Optional[PolyMat] = None,
        fr: Optional[PolyMat] = None,
        f0: Optional[PolyMat] = None,
        f1: Optional[PolyMat] = None,
        f2: Optional[PolyMat] = None,
    ) -> "PiOperator":
        base = PiOperator.zero(dims_out, dims_in, interval)
        return PiOperator(
            dims_out, dims_in, interval,
            rr if rr is not None else base.rr,
            ri if ri is not None else base.ri,
            fr if fr is not None else base.fr,
            f0 if f0 is not None else base.f0,
            f1 if f1 is not None else base.f1,
            f2 if f2 is not None else base.f2,
        )

    @staticmethod
    def from_full_kernel(
        dims_out: Dims,
        dims_in: Dims,
        interval: Interval,
        rr: Optional[PolyMat] = None,
        ri: Optional[PolyMat] = None,
        fr: Optional[PolyMat] = None,
        f0: Optional[PolyMat] = None,
        lower_kernel: Optional[PolyMat] = None,
        full_kernel: Optional[PolyMat] = None,
    ) -> "PiOperator":
        """Build from the (int_a^x K_low, int_a^b K_full) kernel convention."""
        n = dims_out[1]
        q = dims_in[1]
        low = lower_kernel if lower_kernel is not None else PolyMat.zeros(n, q)
        full = full_kernel if full_kernel is not None else PolyMat.zeros(n, q)
        return PiOperator.from_blocks(
            dims_out, dims_in, interval,
            rr=rr, ri=ri, fr=fr, f0=f0, f1=low + full, f2=full,
        )

    @staticmethod
    def multiplier(weight: PolyMat, interval: Interval) -> "PiOperator":
        """Pointwise multiplication v1 -> weight(x) v1 on L2."""
        if THETA in weight.variables:
            raise PiOpError("multiplier weight must be a function of x")
        return PiOperator.from_blocks(
            (0, weight.rows), (0, weight.cols), interval, f0=weight
        )

    @staticmethod
    def functional(weight: PolyMat, interval: Interval) -> "PiOperator":
        """Integral functional v1 -> int_a^b weight(x) v1(x) dx."""
        if THETA in weight.variables:
            raise PiOpError("functional weight must be a function of x")
        return PiOperator.from_blocks(
            (weight.rows, 0), (0, weight.cols), interval, ri=weight
        )

    @staticmethod
    def real_map(mat: PolyMat, interval: Interval) -> "PiOperator":
        """Plain matrix map on the real parts."""
        if mat.variables:
            raise PiOpError("real map must be constant")
        return PiOperator.from_blocks(
            (mat.rows, 0), (mat.cols, 0), interval, rr=mat
        )

    @staticmethod
    def fun_part(dims_in: Dims, interval: Interval) -> "PiOperator":
        """Extraction (v0, v1) -> v1."""
        q = dims_in[1]
        return PiOperator.from_blocks(
            (0, q), dims_in, interval, f0=PolyMat.identity(q)
        )

    # -- algebra ----------------------------------------------------------

    def __add__(self, other: "PiOperator") -> "PiOperator":
        self._check_same_space(other)
        return PiOperator(
            self.dims_out, self.dims_in, self.interval,
            self.rr + other.rr, self.ri + other.ri, self.fr + other.fr,
            self.f0 + other.f0, self.f1 + other.f1, self.f2 + other.f2,
        )

    def __sub__(self, other: "PiOperator") -> "PiOperator":
        return self + (other * -1)

    def __mul__(self, scalar) -> "PiOperator":
        return PiOperator(
            self.dims_out, self.dims_in, self.interval,
            self.rr * scalar, self.ri * scalar, self.fr * scalar,
            self.f0 * scalar, self.f1 * scalar, self.f2 * scalar,
        )

    __rmul__ = __mul__

    def _check_same_space(self, other: "PiOperator"):
        if self.dims_out != other.dims_out or self.dims_in != other.dims_in:
            raise PiOpError(
                f"operator space mismatch {self.dims_out}x{self.dims_in} vs "
                f"{other.dims_out}x{other.dims_in}"
            )
        if self.interval != other.interval:
            raise PiOpError("interval mismatch")

    def apply(self, v: MixedVector) -> MixedVector:
        """Symbolic application to a polynomial mixed vector; exact."""
        if v.dims != self.dims_in:
            raise PiOpError(f"apply dims {v.dims} != {self.dims_in}")
        a, b = self.interval.a, self.interval.b
        v1_th = v.v1.swap_vars()  # as a function of theta
        w0 = self.rr @ v.v0
        if not self.ri.is_zero() and not v.v1.is_zero():
            w0 = w0 + (self.ri @ v.v1).integrate(X, a, b)
        w1 = self.fr @ v.v0 + self.f0 @ v.v1
        if not v.v1.is_zero():
            if not self.f1.is_zero():
                w1 = w1 + (self.f1 @ v1_th).integrate(THETA, a, "x")
            if not self.f2.is_zero():
                w1 = w1 + (self.f2 @ v1_th).integrate(THETA, "x", b)
        return MixedVector(w0, w1)

    def compose(self, other: "PiOperator") -> "PiOperator":
        """Operator composition self after other."""
        if self.dims_in != other.dims_out:
            raise PiOpError(
                f"compose dims {self.dims_in} != {other.dims_out}"
            )
        if self.interval != other.interval:
            raise PiOpError("interval mismatch")
        a, b = self.interval.a, self.interval.b
        A, B = self, other
        AQ1s = A.ri.swap_vars()  # A.ri as a function of the dummy variable

        rr = A.rr @ B.rr
        if not A.ri.is_zero() and not B.fr.is_zero():
            rr = rr + (A.ri @ B.fr).integrate(X, a, b)

        ri = A.rr @ B.ri + A.ri @ B.f0
        ri = ri + convolve(AQ1s, B.f1, THETA, b).swap_vars()
        ri = ri + convolve(AQ1s, B.f2, a, THETA).swap_vars()

        fr = A.fr @ B.rr + A.f0 @ B.fr
        fr = fr + convolve(A.f1, B.fr, a, X)
        fr = fr + convolve(A.f2, B.fr, X, b)

        f0 = A.f0 @ B.f0

        f1 = A.fr @ B.ri.swap_vars() + A.f0 @ B.f1 + A.f1 @ B.f0.swap_vars()
        f1 = f1 + convolve(A.f1, B.f1, THETA, X)
        f1 = f1 + convolve(A.f1, B.f2, a, THETA)
        f1 = f1 + convolve(A.f2, B.f1, X, b)

        f2 = A.fr @ B.ri.swap_vars() + A.f0 @ B.f2 + A.f2 @ B.f0.swap_vars()
        f2 = f2 + convolve(A.f2, B.f2, X, THETA)
        f2 = f2 + convolve(A.f2, B.f1, THETA, b)
        f2 = f2 + convolve(A.f1, B.f2, a, X)

        return PiOperator(
            A.dims_out, B.dims_in, self.interval, rr, ri, fr, f0, f1, f2
        )

    def __matmul__(self, other: "PiOperator") -> "PiOperator":
        return self.compose(other)

    def adjoint(self) -> "PiOperator":
        """Adjoint w.r.t. <(u0,u1),(v0,v1)> = u0^T v0 + int_a^b u1^T v1."""
        return PiOperator(
            self.dims_in, self.dims_out, self.interval,
            self.rr.transpose(),
            self.fr.transpose(),
            self.ri.transpose(),
            self.f0.transpose(),
            self.f2.transpose_swap(),
            self.f1.transpose_swap(),
        )

    # -- inspection -------------------------------------------------------

    def blocks(self) -> dict[str, PolyMat]:
        return {
            "rr": self.rr, "ri": self.ri, "fr": self.fr,
            "f0": self.f0, "f1": self.f1, "f2": self.f2,
        }

    def drop_small(self, tol: float = 1e-14) -> "PiOperator":
        return PiOperator(
            self.dims_out, self.dims_in, self.interval,
            *(blk.drop_small(tol) for blk in
              (self.rr, self.ri, self.fr, self.f0, self.f1, self.f2)),
        )

    def approx_eq(self, other: "PiOperator", tol: float = 1e-12) -> bool:
        if (self.dims_out, self.dims_in) != (other.dims_out, other.dims_in):
            return False
        return all(
            a.approx_eq(b, tol)
            for a, b in zip(self.blocks().values(), other.blocks().values())
        )

    def is_zero(self) -> bool:
        return all(blk.is_zero() for blk in self.blocks().values())

    def max_degree(self) -> int:
        return max(blk.degree for blk in self.blocks().values())

    def max_abs_coeff(self) -> float:
        return max(blk.max_abs_coeff() for blk in self.blocks().values())


def inner(u: MixedVector, v: MixedVector, interval: Interval):
    """Mixed-space inner product u0^T v0 + int_a^b u1^T v1, exact."""
    if u.dims != v.dims:
        raise PiOpError("inner product dims mismatch")
    acc = (u.v0.transpose() @ v.v0) if u.v0.rows else PolyMat.zeros(1, 1)
    if acc.shape != (1, 1):
        raise PiOpError("inner product expects column vectors")
    if u.v1.rows:
        acc = acc + (u.v1.transpose() @ v.v1).integrate(X, interval.a, interval.b)
    cell = acc.entries.get((0, 0), {})
    return cell.get((0, 0), Fraction(0))


def quad_form(op: PiOperator, v: MixedVector):
    """<v, op v>, exact for polynomial v."""
    return inner(v, op.apply(v), op.interval)


# -- serialization -------------------------------------------------------


def dump_operator(op: PiOperator) -> str:
    lines = [
        f"dims_out {op.dims_out[0]} {op.dims_out[1]}",
        f"dims_in {op.dims_in[0]} {op.dims_in[1]}",
        f"interval {op.interval.a} {op.interval.b}",
    ]
    for name, blk in op.blocks().items():
        lines.append(f"block {name}")
        for r, c, ex, et, coeff in blk.to_tuples():
            lines.append(f"  ({r}, {c}, {ex}, {et}, {coeff})")
        lines.append("end")
    return "\n".join(lines) + "\n"


def parse_operator(text: str) -> PiOperator:
    dims_out = dims_in = None
    interval = None
    blocks: dict[str, list] = {}
    current: Optional[str] = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("dims_out"):
            _, m, n = line.split()
            dims_out = (int(m), int(n))
        elif line.startswith("dims_in"):
            _, p, q = line.split()
            dims_in = (int(p), int(q))
        elif line.startswith("interval"):
            _, a, b = line.split()
            interval = Interval(Fraction(a), Fraction(b))
        elif line.startswith("block"):
            current = line.split()[1]
            blocks[current] = []
        elif line == "end":
            current = None
        else:
            if current is None:
                raise PiOpError(f"unexpected line {line!r}")
            vals = line.strip("()").split(",")
            r, c, ex, et = (int(v) for v in vals[:4])
            blocks[current].append((r, c, ex, et, Fraction(vals[4].strip())))
    if dims_out is None or dims_in is None or interval is None:
        raise PiOpError("incomplete operator header")
    m, n = dims_out
    p, q = dims_in
    shapes = {
        "rr": (m, p), "ri": (m, q), "fr": (n, p),
        "f0": (n, q), "f1": (n, q), "f2": (n, q),
    }
    mats = {
        name: PolyMat.from_tuples(*shapes[name], blocks.get(name, []))
        for name in shapes
    }
    return PiOperator(dims_out, dims_in, interval, **mats)
