"""Continued fractions, convergents and closest returns."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from src.cohomolib.arithmetic import (
    closest_return_check,
    convergent_matrix,
    diophantine_test,
    expand,
    fractional_multiples,
    from_partial_quotients,
    liouville_density,
    liouville_levels,
    orbit_signs,
    parse_alpha,
    require_irrational,
    squaring_quotients,
)
from src.cohomolib.errors import InvalidQuotient, PrecisionExhausted, RationalInput
from src.cohomolib.models import AlphaKind

dyadic_numerators = st.integers(min_value=1, max_value=2**64 - 1)


def _dyadic(k: int) -> mpf:
    with mp.workprec(256):
        return mpf(k) / mpf(2) ** 64


def test_golden_quotients_and_betas(golden_cf):
    assert golden_cf.a[:6] == [0, 1, 1, 1, 1, 1]
    assert [golden_cf.qn(n) for n in range(8)] == [1, 1, 2, 3, 5, 8, 13, 21]
    expected = [0.6180339887, 0.3819660113, 0.2360679775, 0.1458980338, 0.0901699437]
    for n, value in enumerate(expected):
        assert float(golden_cf.beta_n(n)) == pytest.approx(value, abs=1e-10)
    assert float(golden_cf.beta_n(-1)) == 1.0


def test_rational_input_terminates():
    cf = expand(Fraction(3, 8), depth=10)
    assert cf.kind == AlphaKind.RATIONAL
    assert cf.terminating and cf.is_rational
    assert cf.a == [0, 2, 1, 2]
    assert cf.beta_n(cf.depth) == 0
    assert Fraction(cf.pn(cf.depth), cf.qn(cf.depth)) == Fraction(3, 8)


def test_require_irrational(golden_cf):
    require_irrational(golden_cf, "test")
    with pytest.raises(RationalInput) as excinfo:
        require_irrational(expand(Fraction(3, 8), depth=10), "renormalize")
    assert "renormalize" in str(excinfo.value)
    assert excinfo.value.context["depth"] == 3


def test_pi_minus_three_quotients():
    cf = parse_alpha("pi-3", depth=6)
    assert cf.a[:5] == [0, 7, 15, 1, 292]
    assert cf.qn(1) == 7 and cf.qn(2) == 106 and cf.qn(3) == 113


def test_alpha_forms_agree():
    assert parse_alpha("(sqrt(5)-1)/2", depth=12).a == parse_alpha("golden", depth=12).a
    assert parse_alpha("1/3").alpha == Fraction(1, 3)
    assert parse_alpha("rational-quotients:0,2,1,2").alpha == Fraction(3, 8)
    assert parse_alpha("quotients:0,3,1").a == [0, 3, 1]
    assert parse_alpha("squaring:2,6").a == [0, 1, 2, 4, 16, 256, 65536]


def test_squaring_quotients():
    assert squaring_quotients(seed=3, depth=4) == [0, 1, 3, 9, 81]


def test_precision_exhausted_when_first_quotient_unresolvable():
    with pytest.raises(PrecisionExhausted):
        expand(0.3, depth=5, bits=16)


def test_float_expansion_truncates_instead_of_inventing_quotients():
    cf = expand(0.6180339887498949, depth=200)
    assert cf.truncated
    assert cf.depth < 200
    assert cf.requested_depth == 200


@pytest.mark.parametrize("quotients", [[], [-1, 2], [0, 2, 0]])
def test_invalid_quotients(quotients):
    with pytest.raises(InvalidQuotient):
        from_partial_quotients(quotients)


@settings(max_examples=50, deadline=None)
@given(dyadic_numerators)
def test_beta_bounds_and_identity(k):
    alpha = Fraction(k, 2**64)
    cf = expand(alpha, depth=15)
    for n in range(cf.depth):
        beta = cf.beta_n(n)
        if beta == 0:
            break
        p_n, q_n, q_next = cf.pn(n), cf.qn(n), cf.qn(n + 1)
        assert cf.pn(n - 1) * q_n - p_n * cf.qn(n - 1) == (-1) ** n
        assert math.gcd(p_n, q_n) == 1
        assert beta == (-1) ** n * (q_n * alpha - p_n)
        assert Fraction(1, q_next + q_n) < beta
        if cf.beta_n(n + 1) == 0:
            # alpha = p_{n+1}/q_{n+1}: the last return lands exactly
            assert beta == Fraction(1, q_next)
        else:
            assert beta < Fraction(1, q_next)
        assert q_n * cf.beta_n(n - 1) + cf.qn(n - 1) * beta == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=100), min_size=2, max_size=10))
def test_beta_bounds_strict_for_irrational_alpha(quotients):
    cf = from_partial_quotients([0] + quotients)
    with mp.workprec(cf.bits):
        for n in range(cf.depth):
            beta = mpf(cf.beta_n(n))
            q_n, q_next = cf.qn(n), cf.qn(n + 1)
            assert mpf(1) / (q_next + q_n) < beta < mpf(1) / q_next
            assert cf.pn(n - 1) * q_n - cf.pn(n) * cf.qn(n - 1) == (-1) ** n
            assert math.gcd(cf.pn(n), q_n) == 1
            signed = (-1) ** n * (q_n * mpf(cf.alpha) - cf.pn(n))
            assert abs(signed - beta) < beta * mpf(2) ** -64


@settings(max_examples=50, deadline=None)
@given(dyadic_numerators)
def test_closest_returns(k):
    cf = expand(_dyadic(k), depth=30, bits=256)
    verified = closest_return_check(cf, limit=100_000)
    assert all(cf.qn(n + 1) <= 100_000 for n in verified)


def test_closest_returns_golden(golden_cf):
    assert closest_return_check(golden_cf, limit=100_000) == list(range(1, 24))


def test_liouville_levels_of_squaring_quotients(liouville_cf):
    levels = liouville_levels(liouville_cf, tau=2.0)
    assert levels.levels == [1, 2, 3, 4, 5]
    assert 6 not in levels
    assert len(levels) == 5
    assert levels.density == pytest.approx(5 / 6)
    assert levels.density == liouville_density(levels.levels, liouville_cf.depth)


def test_liouville_density():
    assert liouville_density([1, 2, 3, 4, 5], 6) == pytest.approx(5 / 6)
    assert liouville_density([2, 2, 9], 4) == pytest.approx(1 / 4)
    assert liouville_density([], 10) == 0.0
    assert liouville_density([1], 0) == 0.0


def test_golden_has_no_liouville_levels(golden_cf):
    assert len(liouville_levels(golden_cf, tau=2.0)) == 0


def test_liouville_levels_reject_small_tau(golden_cf):
    with pytest.raises(ValueError):
        liouville_levels(golden_cf, tau=1.0)


def test_diophantine_report(golden_cf, liouville_cf):
    assert diophantine_test(golden_cf, C=0.1, tau=1.0).all_pass
    assert not diophantine_test(liouville_cf, C=1.0, tau=1.0).all_pass


@pytest.mark.parametrize("n", range(1, 16))
def test_convergent_matrix_is_unimodular(golden_cf, n):
    (a, b), (c, d) = convergent_matrix(golden_cf, n)[0]
    assert a * d - b * c in (1, -1)
    matrix, inverse = convergent_matrix(golden_cf, n)
    product = [
        [sum(matrix[i][k] * inverse[k][j] for k in range(2)) for j in range(2)] for i in range(2)
    ]
    assert product == [[1, 0], [0, 1]]


def test_orbit_signs_alternate_at_convergents(golden_cf):
    nearest, signs = orbit_signs(golden_cf, 100)
    for n in range(2, 10):
        q_n = golden_cf.qn(n)
        assert nearest[q_n - 1] == golden_cf.pn(n)
        assert signs[q_n - 1] == (1 if n % 2 == 0 else -1)


def test_fractional_multiples(golden_cf):
    values = fractional_multiples(golden_cf, [1, 2, 1_000_000])
    assert values[0] == pytest.approx(0.6180339887498949, abs=1e-15)
    assert values[1] == pytest.approx(0.2360679774997898, abs=1e-15)
    assert 0.0 <= values[2] < 1.0
