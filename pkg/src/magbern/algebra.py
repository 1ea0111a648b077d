"""Exact operator algebra for magnetic covariant derivatives.

Everything here is symbolic: coefficients live in Q(i)[B], Gaussian rationals
times powers of the field strength B, and all identities are checked by exact
arithmetic.  Floating point enters only through the scalar helper
:func:`bernstein_constant`.

The two-generator algebra has [d1, d2] = i*B.  The three-generator variant
takes an exact rational field direction (r1, r2, r3) and uses
[d1, d2] = i*r3*B, [d2, d3] = i*r1*B, [d3, d1] = i*r2*B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .errors import ResourceLimitError, ValidationError

RationalLike = Union[int, Fraction]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class GaussianRational:
    """Element of Q(i) with exact rational parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(re=0, im=0) -> "GaussianRational":
        return GaussianRational(_frac(re), _frac(im))

    def __add__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __truediv__(self, other: "GaussianRational") -> "GaussianRational":
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return GaussianRational(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __bool__(self) -> bool:
        return self.re != 0 or self.im != 0

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            if self.im == 1:
                return "i"
            if self.im == -1:
                return "-i"
            return f"{self.im}*i"
        im = f"+{self.im}*i" if self.im > 0 else f"{self.im}*i"
        return f"({self.re}{im})"


GR_ZERO = GaussianRational()
GR_ONE = GaussianRational.of(1)
GR_I = GaussianRational.of(0, 1)


def _as_gr(x) -> GaussianRational:
    if isinstance(x, GaussianRational):
        return x
    if isinstance(x, (int, Fraction)):
        return GaussianRational.of(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to GaussianRational")


class BPoly:
    """Polynomial in the symbolic field strength B over GaussianRational."""

    __slots__ = ("c",)

    def __init__(self, coeffs=None):
        c = {}
        if coeffs:
            for p, v in coeffs.items():
                v = _as_gr(v)
                if v:
                    c[int(p)] = v
        self.c = c

    @staticmethod
    def const(v) -> "BPoly":
        return BPoly({0: _as_gr(v)})

    @staticmethod
    def b_power(p: int, v=1) -> "BPoly":
        return BPoly({p: _as_gr(v)})

    def __bool__(self) -> bool:
        return bool(self.c)

    def __eq__(self, other) -> bool:
        return isinstance(other, BPoly) and self.c == other.c

    def __hash__(self):
        return hash(frozenset(self.c.items()))

    def __add__(self, other: "BPoly") -> "BPoly":
        out = dict(self.c)
        for p, v in other.c.items():
            s = out.get(p, GR_ZERO) + v
            if s:
                out[p] = s
            else:
                out.pop(p, None)
        r = BPoly()
        r.c = out
        return r

    def __neg__(self) -> "BPoly":
        r = BPoly()
        r.c = {p: -v for p, v in self.c.items()}
        return r

    def __sub__(self, other: "BPoly") -> "BPoly":
        return self + (-other)

    def __mul__(self, other) -> "BPoly":
        if not isinstance(other, BPoly):
            other = BPoly.const(other)
        out = {}
        for p1, v1 in self.c.items():
            for p2, v2 in other.c.items():
                p = p1 + p2
                s = out.get(p, GR_ZERO) + v1 * v2
                if s:
                    out[p] = s
                else:
                    out.pop(p, None)
        r = BPoly()
        r.c = out
        return r

    def scale(self, v) -> "BPoly":
        v = _as_gr(v)
        r = BPoly()
        if v:
            r.c = {p: c * v for p, c in self.c.items()}
        return r

    def shift_b(self, k: int) -> "BPoly":
        """Multiply by B**k."""
        r = BPoly()
        r.c = {p + k: v for p, v in self.c.items()}
        return r

    def monomial(self) -> tuple[int, GaussianRational]:
        """The (power, coefficient) pair of a single-term polynomial."""
        if len(self.c) != 1:
            raise ValidationError(f"expected a B-monomial, got {self.to_text()}")
        return next(iter(self.c.items()))

    def eval_float(self, b: float) -> complex:
        return sum(complex(v) * b**p for p, v in self.c.items()) if self.c else 0j

    def to_text(self) -> str:
        if not self.c:
            return "0"
        parts = []
        for p in sorted(self.c, reverse=True):
            v = self.c[p]
            if p == 0:
                parts.append(str(v))
            else:
                b = "B" if p == 1 else f"B^{p}"
                if v == GR_ONE:
                    parts.append(b)
                elif v == -GR_ONE:
                    parts.append(f"-{b}")
                else:
                    parts.append(f"{v}*{b}")
        return _join_signed(parts)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"BPoly({self.to_text()})"


def _join_signed(parts: Sequence[str]) -> str:
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


BP_ZERO = BPoly()
BP_ONE = BPoly.const(1)


class WeylPoly:
    """Normal-ordered polynomial in the covariant-derivative generators.

    Terms map exponent tuples (a1, ..., ag), meaning d1^a1 ... dg^ag, to BPoly
    coefficients.  Zero coefficients are never stored, so equality of term
    maps is equality in the algebra.
    """

    __slots__ = ("algebra", "terms")

    def __init__(self, algebra: "WeylAlgebra", terms=None):
        self.algebra = algebra
        self.terms = {}
        if terms:
            for e, v in terms.items():
                if not isinstance(v, BPoly):
                    v = BPoly.const(v)
                if v:
                    self.terms[tuple(e)] = v

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, WeylPoly)
            and self.algebra.signature == other.algebra.signature
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.algebra.signature, frozenset(self.terms)))

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __add__(self, other: "WeylPoly") -> "WeylPoly":
        out = dict(self.terms)
        for e, v in other.terms.items():
            s = out.get(e, BP_ZERO) + v
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        r = WeylPoly(self.algebra)
        r.terms = out
        return r

    def __sub__(self, other: "WeylPoly") -> "WeylPoly":
        return self + other.scale(GaussianRational.of(-1))

    def scale(self, v) -> "WeylPoly":
        r = WeylPoly(self.algebra)
        if isinstance(v, BPoly):
            if v:
                r.terms = {e: c * v for e, c in self.terms.items()}
        else:
            v = _as_gr(v)
            if v:
                r.terms = {e: c.scale(v) for e, c in self.terms.items()}
        return r

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        lines = []
        for e in sorted(self.terms):
            mono = (
                "*".join(
                    f"d{k + 1}" if a == 1 else f"d{k + 1}^{a}"
                    for k, a in enumerate(e)
                    if a
                )
                or "1"
            )
            lines.append(f"{mono} : {self.terms[e].to_text()}")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"WeylPoly<{self.to_text()}>"


class WeylAlgebra:
    """Rewriting engine for the 2- or 3-generator covariant-derivative algebra.

    Monomials are kept normal-ordered (d1 before d2 before d3); rewriting uses
    the closed form  d^e * dk = d^(e+uk) - sum_{j>k} e_j [dk,dj] d^(e-uj),
    valid because all commutators are central scalars.
    """

    def __init__(self, gens: int = 2, field: Optional[Sequence] = None, max_terms: int = 10**6):
        if gens not in (2, 3):
            raise ValidationError("generator count must be 2 or 3")
        if gens == 3:
            if field is None:
                field = (0, 0, 1)
            r1, r2, r3 = (_frac(x) for x in field)
            comm = {
                (0, 1): BPoly.b_power(1, GaussianRational.of(0, r3)),
                (1, 2): BPoly.b_power(1, GaussianRational.of(0, r1)),
                (0, 2): BPoly.b_power(1, GaussianRational.of(0, -r2)),
            }
            self.field = (r1, r2, r3)
        else:
            if field is not None:
                raise ValidationError("field components only apply to 3 generators")
            comm = {(0, 1): BPoly.b_power(1, GR_I)}
            self.field = None
        self.gens = gens
        self._comm = comm
        self.max_terms = max_terms
        self.signature = (gens, self.field)

    # -- constructors ------------------------------------------------------

    def zero(self) -> WeylPoly:
        return WeylPoly(self)

    def one(self) -> WeylPoly:
        return WeylPoly(self, {(0,) * self.gens: BP_ONE})

    def gen(self, k: int) -> WeylPoly:
        e = [0] * self.gens
        e[k] = 1
        return WeylPoly(self, {tuple(e): BP_ONE})

    def h_poly(self) -> WeylPoly:
        """H = d1^2 + ... + dg^2."""
        terms = {}
        for k in range(self.gens):
            e = [0] * self.gens
            e[k] = 2
            terms[tuple(e)] = BP_ONE
        return WeylPoly(self, terms)

    # -- core rewriting ----------------------------------------------------

    def _check_size(self, terms: dict) -> None:
        if len(terms) > self.max_terms:
            raise ResourceLimitError(
                f"term map exceeds configured cap of {self.max_terms} monomials"
            )

    def rmul_gen(self, p: WeylPoly, k: int) -> WeylPoly:
        """Right-multiply by the generator dk, renormal-ordering."""
        out: dict = {}
        for e, v in p.terms.items():
            up = list(e)
            up[k] += 1
            _acc(out, tuple(up), v)
            for j in range(k + 1, self.gens):
                if e[j]:
                    down = list(e)
                    down[j] -= 1
                    _acc(out, tuple(down), -(v * self._comm[(k, j)]).scale(e[j]))
        self._check_size(out)
        r = WeylPoly(self)
        r.terms = out
        return r

    def lmul_gen(self, p: WeylPoly, k: int) -> WeylPoly:
        """Left-multiply by the generator dk, renormal-ordering."""
        out: dict = {}
        for e, v in p.terms.items():
            up = list(e)
            up[k] += 1
            _acc(out, tuple(up), v)
            for j in range(k):
                if e[j]:
                    down = list(e)
                    down[j] -= 1
                    _acc(out, tuple(down), -(v * self._comm[(j, k)]).scale(e[j]))
        self._check_size(out)
        r = WeylPoly(self)
        r.terms = out
        return r

    def mul(self, p: WeylPoly, q: WeylPoly) -> WeylPoly:
        """Product of two normal-ordered polynomials."""
        result = self.zero()
        for e, v in q.terms.items():
            part = p.scale(v)
            for k in range(self.gens):
                for _ in range(e[k]):
                    part = self.rmul_gen(part, k)
            result = result + part
        self._check_size(result.terms)
        return result

    def apply_r(self, p: WeylPoly) -> WeylPoly:
        """R(P) = sum_k dk P dk."""
        result = self.zero()
        for k in range(self.gens):
            result = result + self.lmul_gen(self.rmul_gen(p, k), k)
        return result

    def normal_order(self, word_terms: Iterable[tuple]) -> WeylPoly:
        """Normal-order a linear combination of generator words.

        `word_terms` yields (coefficient, word) pairs where a word is a tuple
        of 0-based generator indices applied left to right; e.g. (1, 0) is
        d2*d1.  Total and linear; the empty word is the identity.
        """
        result = self.zero()
        for coef, word in word_terms:
            part = self.one()
            for k in word:
                if not 0 <= k < self.gens:
                    raise ValidationError(f"generator index {k} out of range")
                part = self.rmul_gen(part, k)
            if isinstance(coef, BPoly):
                part = part.scale(coef)
            else:
                part = part.scale(_as_gr(coef))
            result = result + part
        return result


def _acc(out: dict, key: tuple, val: BPoly) -> None:
    s = out.get(key, BP_ZERO) + val
    if s:
        out[key] = s
    else:
        out.pop(key, None)


class CommPoly:
    """Univariate polynomial in t whose coefficients are exact B-polynomials."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[BPoly] = ()):
        cs = list(coeffs)
        while cs and not cs[-1]:
            cs.pop()
        self.coeffs = tuple(cs)

    @staticmethod
    def one() -> "CommPoly":
        return CommPoly([BP_ONE])

    @staticmethod
    def t() -> "CommPoly":
        return CommPoly([BP_ZERO, BP_ONE])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __eq__(self, other) -> bool:
        return isinstance(other, CommPoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other: "CommPoly") -> "CommPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        out = []
        for j in range(n):
            a = self.coeffs[j] if j < len(self.coeffs) else BP_ZERO
            b = other.coeffs[j] if j < len(other.coeffs) else BP_ZERO
            out.append(a + b)
        return CommPoly(out)

    def scale(self, v) -> "CommPoly":
        if isinstance(v, BPoly):
            return CommPoly([c * v for c in self.coeffs])
        return CommPoly([c.scale(_as_gr(v)) for c in self.coeffs])

    def shift_t(self, c: RationalLike) -> "CommPoly":
        """Substitute t -> t + c*B."""
        c = _frac(c)
        n = len(self.coeffs)
        out = [BP_ZERO] * n
        for j, a in enumerate(self.coeffs):
            if not a:
                continue
            for i in range(j + 1):
                s = a.scale(Fraction(math.comb(j, i)) * c ** (j - i)).shift_b(j - i)
                out[i] = out[i] + s
        return CommPoly(out)

    def mul_linear(self, c: RationalLike) -> "CommPoly":
        """Multiply by (t + c*B)."""
        c = _frac(c)
        out = [BP_ZERO] + list(self.coeffs)
        for j, a in enumerate(self.coeffs):
            out[j] = out[j] + a.scale(c).shift_b(1)
        return CommPoly(out)

    def eval_at_level(self, k: int) -> BPoly:
        """Exact value at t = (2k+1)*B."""
        lam = Fraction(2 * k + 1)
        acc = BP_ZERO
        for j in range(len(self.coeffs) - 1, -1, -1):
            acc = acc.scale(lam).shift_b(1) + self.coeffs[j]
        return acc

    def eval_float(self, t: float, b: float) -> complex:
        acc = 0j
        for j in range(len(self.coeffs) - 1, -1, -1):
            acc = acc * t + self.coeffs[j].eval_float(b)
        return acc

    def to_text(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for j in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[j]
            if not c:
                continue
            t = "" if j == 0 else ("t" if j == 1 else f"t^{j}")
            if j == 0:
                parts.append(c.to_text())
            elif len(c.c) == 1:
                p, v = c.monomial()
                lead = ""
                if p:
                    lead = "B" if p == 1 else f"B^{p}"
                if v == GR_ONE:
                    coef = lead
                elif v == -GR_ONE:
                    coef = f"-{lead}" if lead else "-1"
                else:
                    coef = f"{v}*{lead}" if lead else str(v)
                parts.append(f"{coef}*{t}" if coef and coef != "-" else f"{coef}{t}")
            else:
                parts.append(f"({c.to_text()})*{t}")
        return _join_signed(parts) if parts else "0"

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"CommPoly({self.to_text()})"


# -- named operations ------------------------------------------------------


def f_poly(m: int) -> CommPoly:
    """The m-th Bernstein polynomial from the half-sum recursion.

    F0 = 1 and F_{m+1}(t) = ((t-B) F_m(t-2B) + (t+B) F_m(t+2B)) / 2.
    """
    if m < 0:
        raise ValidationError("m must be non-negative")
    f = CommPoly.one()
    for _ in range(m):
        left = f.shift_t(-2).mul_linear(-1)
        right = f.shift_t(2).mul_linear(1)
        f = (left + right).scale(Fraction(1, 2))
    return f


def verify_recursion(m: int, max_terms: int = 10**6) -> bool:
    """Exact check that R^m(Id) equals F_m(d1^2 + d2^2) in the 2-gen algebra."""
    if m < 0:
        raise ValidationError("m must be non-negative")
    alg = WeylAlgebra(2, max_terms=max_terms)
    lhs = alg.one()
    for _ in range(m):
        lhs = alg.apply_r(lhs)
    h = alg.h_poly()
    fm = f_poly(m)
    rhs = alg.zero()
    for j in range(fm.degree, -1, -1):
        rhs = alg.mul(rhs, h) + alg.one().scale(fm.coeffs[j])
    return lhs == rhs


def _real_rational_monomial(p: BPoly, power: int) -> Fraction:
    pw, v = p.monomial()
    if pw != power or v.im != 0:
        raise ValidationError(f"expected a real multiple of B^{power}, got {p}")
    return v.re


def check_f_bounds(m: int, k: int) -> bool:
    """Exact two-sided product bound on F_m at the Landau level t = (2k+1)B."""
    if m < 1 or k < 0:
        raise ValidationError("need m >= 1 and k >= 0")
    val = _real_rational_monomial(f_poly(m).eval_at_level(k), m)
    prod = Fraction(1)
    for i in range(1, m + 1):
        prod *= 2 * k + 2 * i
    return prod / 2**m <= val <= prod


def bernstein_constant(m: int, E, B, variant: str = "L2"):
    """(E+Bm)^m for the L2 inequality, 2^(3m/2) (E+Bm)^(m/2) for the L1 one.

    Exact when the inputs are exact and the exponents are integral.
    """
    if m < 0:
        raise ValidationError("m must be non-negative")
    if E < 0 or B < 0:
        raise ValidationError("E and B must be non-negative")
    base = E + B * m
    if variant == "L2":
        return base**m
    if variant == "L1":
        if m % 2 == 0:
            return 2 ** (3 * m // 2) * base ** (m // 2)
        return 2.0 ** (1.5 * m) * float(base) ** (m / 2)
    raise ValidationError(f"unknown variant {variant!r}")


@dataclass
class Weyl3dReduction:
    """Outcome of the exact polynomial-in-H solve for R_(3)^2(Id)."""

    consistent: bool
    witness: Optional[tuple] = None  # (monomial, B-power) of the failing row
    solution: Optional[dict] = None  # {(h_power, b_power): GaussianRational}


def weyl3d_reduction(B1, B2, B3, power: int = 2) -> Weyl3dReduction:
    """Attempt to write R_(3)^power(Id) as a polynomial in H = d1^2+d2^2+d3^2.

    Sets up the exact linear system over Q(i) for unknown coefficients
    c_{k,j} of H^k B^j and reports consistency, a witness row on failure, or
    one solution on success.
    """
    field = tuple(_frac(x) for x in (B1, B2, B3))
    if not any(field):
        raise ValidationError("field components must not all vanish")
    alg = WeylAlgebra(3, field=field)
    target = alg.one()
    for _ in range(power):
        target = alg.apply_r(target)
    h = alg.h_poly()
    h_powers = [alg.one()]
    for _ in range(power):
        h_powers.append(alg.mul(h_powers[-1], h))
    max_b = 2 * power
    unknowns = [(k, j) for k in range(power + 1) for j in range(max_b + 1)]

    rows = set()
    for p in h_powers + [target]:
        for e, v in p.terms.items():
            for bp in v.c:
                for j in range(max_b + 1):
                    rows.add((e, bp + j))
            for bp in v.c:
                rows.add((e, bp))
    matrix = []
    labels = sorted(rows)
    for e, bp in labels:
        row = []
        for k, j in unknowns:
            coef = h_powers[k].terms.get(e, BP_ZERO).c.get(bp - j, GR_ZERO)
            row.append(coef)
        rhs = target.terms.get(e, BP_ZERO).c.get(bp, GR_ZERO)
        matrix.append((row, rhs))

    solution, witness_idx = _solve_exact(matrix, len(unknowns))
    if solution is None:
        return Weyl3dReduction(False, witness=labels[witness_idx])
    return Weyl3dReduction(
        True,
        solution={unknowns[i]: v for i, v in enumerate(solution) if v},
    )


def weyl3d_counterexample(B1, B2, B3) -> bool:
    """True iff R_(3)^2(Id) is NOT a polynomial in H for this field."""
    return not weyl3d_reduction(B1, B2, B3).consistent


def _solve_exact(matrix, n_unknowns):
    """Gaussian elimination over Q(i).

    Returns (solution, None) with free unknowns set to zero when consistent,
    else (None, index) of an original row witnessing inconsistency.
    """
    rows = [(list(r), rhs, idx) for idx, (r, rhs) in enumerate(matrix)]
    pivots = []
    col = 0
    r = 0
    while r < len(rows) and col < n_unknowns:
        piv = next((i for i in range(r, len(rows)) if rows[i][0][col]), None)
        if piv is None:
            col += 1
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        prow, prhs, pidx = rows[r]
        inv = GR_ONE / prow[col]
        prow = [c * inv for c in prow]
        prhs = prhs * inv
        rows[r] = (prow, prhs, pidx)
        for i in range(len(rows)):
            if i != r and rows[i][0][col]:
                f = rows[i][0][col]
                nrow = [a - f * b for a, b in zip(rows[i][0], prow)]
                rows[i] = (nrow, rows[i][1] - f * prhs, rows[i][2])
        pivots.append((r, col))
        r += 1
        col += 1
    for row, rhs, idx in rows:
        if rhs and not any(row):
            return None, idx
    solution = [GR_ZERO] * n_unknowns
    for r, col in pivots:
        solution[col] = rows[r][1]
    return solution, None
