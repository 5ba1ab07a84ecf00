"""Line-oriented problem files for the command-line tools.

A problem file describes one PDE and the analysis options:

    # comment
    domain -1 1
    state 1
    coeff A0
      (0, 0, 0, 3)          # row, col, x-exponent, coefficient
    end
    coeff A2
      (0, 0, 0, 1)
    end
    bc E
      [ 1 -1 0 0 ]
      [ 0 0 1 -1 ]
    end
    bc F
    end
    option trajectory nullspace
    option degree 3
    option basis 16
    option aux_weight        # optional override (rows = defect)
      (0, 0, 0, 1/2)
    end

Numbers are parsed exactly when rational ("1/2", "-3"), as floats
otherwise.  Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .polymat import Interval, PolyMat
from .bcspace import BoundarySpec
from .convert import PdeSystem


class SpecFormatError(ValueError):
    """Malformed problem file; carries a line number when known."""

    def __init__(self, message, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class ProblemOptions:
    trajectory: str = "zero"
    degree: int = 3
    basis: int = 16
    aux_weight: Optional[PolyMat] = None


@dataclass
class ProblemFile:
    pde: PdeSystem
    options: ProblemOptions


def _number(token: str, line: int):
    token = token.strip().rstrip(",")
    try:
        return Fraction(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise SpecFormatError(f"not a number: {token!r}", line)


def _parse_tuples(lines, start, n_cols_hint=None):
    """Consume (row, col, exp_x, coeff) records until 'end'."""
    records = []
    i = start
    while i < len(lines):
        num, text = lines[i]
        if text == "end":
            return records, i + 1
        if not (text.startswith("(") and text.endswith(")")):
            raise SpecFormatError(f"expected tuple or 'end', got {text!r}", num)
        parts = text[1:-1].split(",")
        if len(parts) != 4:
            raise SpecFormatError("polynomial records have four fields "
                                  "(row, col, exp_x, coefficient)", num)
        r, c, e = (int(p) for p in parts[:3])
        coeff = _number(parts[3], num)
        records.append((r, c, e, 0, coeff))
        i += 1
    raise SpecFormatError("unterminated polynomial block", lines[start - 1][0])


def _parse_matrix_rows(lines, start):
    rows = []
    i = start
    while i < len(lines):
        num, text = lines[i]
        if text == "end":
            return rows, i + 1
        if not (text.startswith("[") and text.endswith("]")):
            raise SpecFormatError(f"expected bracketed row or 'end', got {text!r}", num)
        rows.append([_number(t, num) for t in text[1:-1].split()])
        i += 1
    raise SpecFormatError("unterminated matrix block", lines[start - 1][0])


def parse_problem(text: str) -> ProblemFile:
    raw = []
    for num, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            raw.append((num, body))

    domain = None
    n = None
    coeffs: dict[str, list] = {}
    e_rows = None
    f_records = None
    opts = ProblemOptions()
    aux_records = None

    i = 0
    while i < len(raw):
        num, line = raw[i]
        head = line.split()
        key = head[0]
        if key == "domain":
            if len(head) != 3:
                raise SpecFormatError("domain takes two endpoints", num)
            domain = Interval(_number(head[1], num), _number(head[2], num))
            i += 1
        elif key == "state":
            n = int(head[1])
            if n < 1:
                raise SpecFormatError("state dimension must be positive", num)
            i += 1
        elif key == "coeff":
            if len(head) != 2 or head[1] not in ("A0", "A1", "A2"):
                raise SpecFormatError("coeff section must name A0, A1 or A2", num)
            coeffs[head[1]], i = _parse_tuples(raw, i + 1)
        elif key == "bc":
            if len(head) != 2 or head[1] not in ("E", "F"):
                raise SpecFormatError("bc section must name E or F", num)
            if head[1] == "E":
                e_rows, i = _parse_matrix_rows(raw, i + 1)
            else:
                f_records, i = _parse_tuples(raw, i + 1)
        elif key == "option":
            if len(head) < 2:
                raise SpecFormatError("empty option", num)
            name = head[1]
            if name == "trajectory":
                if len(head) != 3 or head[2] not in ("zero", "nullspace"):
                    raise SpecFormatError("trajectory is 'zero' or 'nullspace'", num)
                opts.trajectory = head[2]
                i += 1
            elif name == "degree":
                opts.degree = int(head[2])
                i += 1
            elif name == "basis":
                opts.basis = int(head[2])
                i += 1
            elif name == "aux_weight":
                aux_records, i = _parse_tuples(raw, i + 1)
            else:
                raise SpecFormatError(f"unknown option {name!r}", num)
        else:
            raise SpecFormatError(f"unknown key {key!r}", num)

    if domain is None:
        raise SpecFormatError("missing 'domain'")
    if n is None:
        raise SpecFormatError("missing 'state'")
    if e_rows is None:
        raise SpecFormatError("missing 'bc E' block")

    if len(e_rows) != 2 * n or any(len(r) != 4 * n for r in e_rows):
        raise SpecFormatError(
            f"bc E must be {2*n} rows of {4*n} entries, got "
            f"{len(e_rows)}x{len(e_rows[0]) if e_rows else 0}")
    e_mat = PolyMat.constant(e_rows)
    f_mat = PolyMat.from_tuples(2 * n, n, f_records or [])
    bc = BoundarySpec(n, e_mat, f_mat, domain)

    def coeff_of(name):
        return PolyMat.from_tuples(n, n, coeffs.get(name, []))

    aux = None
    if aux_records is not None:
        from .bcspace import split as bc_split

        defect = bc_split(bc).defect
        aux = PolyMat.from_tuples(defect, n, aux_records)

    pde = PdeSystem(
        interval=domain, n=n,
        coeff0=coeff_of("A0"), coeff1=coeff_of("A1"), coeff2=coeff_of("A2"),
        bc=bc, aux_weight_override=aux,
    )
    return ProblemFile(pde=pde, options=opts)


def load_problem(path: str) -> ProblemFile:
    with open(path) as fh:
        return parse_problem(fh.read())
