"""Exact checks of the covariant-derivative algebra and Bernstein polynomials."""

import random
from fractions import Fraction

import pytest

from magbern.algebra import (
    BPoly,
    CommPoly,
    GaussianRational,
    WeylAlgebra,
    bernstein_constant,
    check_f_bounds,
    f_poly,
    verify_recursion,
    weyl3d_counterexample,
    weyl3d_reduction,
)
from magbern.errors import ResourceLimitError, ValidationError

GR = GaussianRational.of
I = GR(0, 1)


# -- independent oracle: brute-force string rewriter ------------------------


def brute_normal_order(alg, word_terms):
    """Rewrite words by eliminating the leftmost inversion, one pair at a time.

    Uses only dj*dk = dk*dj - [dk,dj] for k < j, so it shares no code with the
    closed-form block moves in WeylAlgebra.
    """
    pending = [(coef, tuple(word)) for coef, word in word_terms]
    done = {}
    while pending:
        coef, word = pending.pop()
        inv = next(
            (i for i in range(len(word) - 1) if word[i] > word[i + 1]), None
        )
        if inv is None:
            exps = [0] * alg.gens
            for k in word:
                exps[k] += 1
            key = tuple(exps)
            prev = done.get(key, BPoly())
            add = coef if isinstance(coef, BPoly) else BPoly.const(coef)
            s = prev + add
            if s:
                done[key] = s
            else:
                done.pop(key, None)
            continue
        j, k = word[inv], word[inv + 1]
        swapped = word[:inv] + (k, j) + word[inv + 2 :]
        dropped = word[:inv] + word[inv + 2 :]
        c = coef if isinstance(coef, BPoly) else BPoly.const(coef)
        pending.append((c, swapped))
        pending.append((-(c * alg._comm[(k, j)]), dropped))
    out = alg.zero()
    out.terms = done
    return out


def random_word_terms(rng, gens, n_terms=4, max_len=5):
    terms = []
    for _ in range(n_terms):
        word = tuple(rng.randrange(gens) for _ in range(rng.randrange(max_len + 1)))
        coef = GR(Fraction(rng.randint(-5, 5), rng.randint(1, 4)),
                  Fraction(rng.randint(-5, 5), rng.randint(1, 4)))
        terms.append((coef, word))
    return terms


# -- normal ordering ---------------------------------------------------------


def test_normal_order_single_generator_unchanged():
    alg = WeylAlgebra(2)
    assert alg.normal_order([(1, (0,))]) == alg.gen(0)


def test_normal_order_swaps_one_inversion():
    alg = WeylAlgebra(2)
    got = alg.normal_order([(1, (1, 0))])
    want = alg.zero()
    want.terms = {(1, 1): BPoly.const(1), (0, 0): BPoly.b_power(1, -I)}
    assert got == want


def test_normal_order_double_inversion():
    alg = WeylAlgebra(2)
    got = alg.normal_order([(1, (1, 1, 0))])
    want = alg.zero()
    want.terms = {(1, 2): BPoly.const(1), (0, 1): BPoly.b_power(1, GR(0, -2))}
    assert got == want


@pytest.mark.parametrize("gens,field", [(2, None), (3, (1, 1, 1)), (3, (0, 2, 3))])
def test_normal_order_matches_brute_force_rewriter(gens, field):
    rng = random.Random(20240 + gens)
    alg = WeylAlgebra(gens, field=field)
    for _ in range(25):
        terms = random_word_terms(rng, gens)
        assert alg.normal_order(terms) == brute_normal_order(alg, terms)


def test_normal_order_idempotent_and_linear():
    rng = random.Random(7)
    alg = WeylAlgebra(2)
    for _ in range(20):
        terms_p = random_word_terms(rng, 2)
        terms_q = random_word_terms(rng, 2)
        p = alg.normal_order(terms_p)
        q = alg.normal_order(terms_q)
        # idempotent: re-feeding the ordered monomials changes nothing
        refed = [(v, _expand(e)) for e, v in p.terms.items()]
        assert alg.normal_order(refed) == p
        a = GR(Fraction(3, 2), Fraction(-1, 3))
        b = GR(Fraction(-2, 5), 1)
        combo = [(_mul(a, c), w) for c, w in terms_p] + [
            (_mul(b, c), w) for c, w in terms_q
        ]
        assert alg.normal_order(combo) == p.scale(a) + q.scale(b)


def _expand(exps):
    word = []
    for k, a in enumerate(exps):
        word.extend([k] * a)
    return tuple(word)


def _mul(a, c):
    return a * c if isinstance(c, GaussianRational) else c.scale(a)


def test_term_cap_raises_resource_error():
    alg = WeylAlgebra(2, max_terms=3)
    p = alg.one()
    with pytest.raises(ResourceLimitError):
        for _ in range(4):
            p = alg.apply_r(p)


# -- the operator R and the recursion ---------------------------------------


def test_apply_r_on_identity_gives_h():
    alg = WeylAlgebra(2)
    assert alg.apply_r(alg.one()) == alg.h_poly()


def test_apply_r_on_h_gives_h_squared_plus_2b2():
    alg = WeylAlgebra(2)
    h = alg.h_poly()
    want = alg.mul(h, h) + alg.one().scale(BPoly.b_power(2, 2))
    assert alg.apply_r(h) == want


def test_apply_r_3d_field_aligned_reduces_to_2d():
    alg = WeylAlgebra(3, field=(0, 0, 1))
    h = alg.h_poly()
    want = alg.mul(h, h) + alg.one().scale(BPoly.b_power(2, 2))
    assert alg.apply_r(h) == want


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_verify_recursion_small(m):
    assert verify_recursion(m)


# -- F_m ---------------------------------------------------------------------


def test_f_poly_base_cases():
    assert f_poly(0) == CommPoly.one()
    assert f_poly(1) == CommPoly.t()
    f2 = f_poly(2)
    assert f2.coeffs[2] == BPoly.const(1)
    assert f2.coeffs[1] == BPoly()
    assert f2.coeffs[0] == BPoly.b_power(2, 2)


def test_f_poly_text_forms():
    assert str(f_poly(2)) == "t^2 + 2*B^2"
    assert str(f_poly(3)) == "t^3 + 10*B^2*t"


def test_f_poly_rejects_negative():
    with pytest.raises(ValidationError):
        f_poly(-1)


def test_f_values_at_levels_nonnegative():
    for m in range(1, 9):
        fm = f_poly(m)
        for k in range(9):
            val = fm.eval_at_level(k)
            p, v = val.monomial()
            assert p == m and v.im == 0 and v.re > 0


@pytest.mark.parametrize("m,k", [(2, 0), (1, 3), (10, 10)])
def test_check_f_bounds_examples(m, k):
    assert check_f_bounds(m, k)


def test_f2_at_lowest_level_value():
    p, v = f_poly(2).eval_at_level(0).monomial()
    assert (p, v.re) == (2, 3)  # F2(B) = 3 B^2, inside [2 B^2, 8 B^2]


def test_bernstein_constant_examples():
    assert bernstein_constant(0, 5, 2, "L2") == 1
    assert bernstein_constant(0, 5, 2, "L1") == 1
    assert bernstein_constant(1, 1, 1, "L2") == 2
    assert bernstein_constant(2, 1, 1, "L1") == 24
    with pytest.raises(ValidationError):
        bernstein_constant(1, -1, 1)
    with pytest.raises(ValidationError):
        bernstein_constant(1, 1, 1, "L3")


def test_l2_constant_dominates_f_values_exactly():
    # max_k F_m((2k+1)B) <= (E+mB)^m, exact rationals at B = 1
    for m in range(1, 11):
        fm = f_poly(m)
        for q in range(1, 22, 4):
            e = Fraction(q)
            best = max(
                fm.eval_at_level(k).monomial()[1].re
                for k in range((q - 1) // 2 + 1)
            )
            assert best <= bernstein_constant(m, e, Fraction(1), "L2")


# -- 3-D breakdown ------------------------------------------------------------


def test_weyl3d_field_aligned_is_polynomial():
    red = weyl3d_reduction(0, 0, 1)
    assert red.consistent
    assert red.solution == {
        (2, 0): GR(1),
        (0, 2): GR(2),
    }
    assert weyl3d_counterexample(0, 0, 1) is False


def test_weyl3d_power2_is_polynomial_for_every_field():
    # R(H) = H^2 + 2|B|^2 B^2 holds for any constant field: the cross terms
    # d_k d_j^2 d_k collapse to central scalars.  (The claimed breakdown at
    # the second power does not exist; see power-3 test below.)
    for field in [(1, 1, 1), (1, 2, 3), (0, 1, 1)]:
        red = weyl3d_reduction(*field)
        s = sum(Fraction(x) ** 2 for x in field)
        assert red.consistent
        assert red.solution == {(2, 0): GR(1), (0, 2): GR(2 * s)}
        assert weyl3d_counterexample(*field) is False


def test_weyl3d_power3_fails_for_every_field_with_witness():
    # The reduction genuinely breaks at the third power, aligned fields
    # included: R^3(Id) needs d1^2+d2^2 separately from H.
    for field in [(0, 0, 1), (1, 1, 1), (1, 2, 3)]:
        red = weyl3d_reduction(*field, power=3)
        assert not red.consistent
        mono, bpow = red.witness
        assert len(mono) == 3 and bpow >= 0


def test_weyl3d_rejects_zero_field():
    with pytest.raises(ValidationError):
        weyl3d_counterexample(0, 0, 0)


def test_weyl3d_scaled_axis_still_polynomial():
    assert weyl3d_counterexample(0, 0, Fraction(3, 7)) is False


# -- serialization ------------------------------------------------------------


def test_weyl_poly_canonical_text():
    alg = WeylAlgebra(2)
    p = alg.normal_order([(1, (1, 0))])
    assert p.to_text() == "1 : -i*B\nd1*d2 : 1"


def test_comm_poly_rational_coefficients_as_fractions():
    f = f_poly(4)
    texts = [c.to_text() for c in f.coeffs]
    assert all("/" not in t or Fraction(t.split("*")[0]) for t in texts if t != "0")
