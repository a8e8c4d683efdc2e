"""Bell polynomials, Faa di Bruno and the log-derivative polynomials."""

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf
from sympy.functions.combinatorial.numbers import stirling

from src.cohomolib.calculus import (
    bell_eval,
    bell_index_set,
    dr1_from_log,
    faa_di_bruno,
    identity_jet,
    jet_compose,
    jet_exp,
    jet_inverse,
    jet_log,
    jet_product,
    jet_reciprocal,
    pr_eval,
    pr_expression,
    pr_polynomial,
)
from src.cohomolib.errors import IndexOutOfRange, LengthMismatch, NonpositiveDerivative

fractions = st.fractions(min_value=-3, max_value=3, max_denominator=16)
X = sympy.Symbol("x")


def test_index_set_matches_partitions():
    assert bell_index_set(4, 2) == ((0, 2, 0), (1, 0, 1))
    for r in range(1, 10):
        total = sum(len(bell_index_set(r, j)) for j in range(1, r + 1))
        assert total == sympy.npartitions(r)


@pytest.mark.parametrize("r", range(1, 13))
def test_bell_values_are_stirling_numbers(r):
    for j in range(1, r + 1):
        assert bell_eval(r, j, [1] * r) == stirling(r, j)


@settings(max_examples=25, deadline=None)
@given(st.lists(fractions, min_size=7, max_size=7), st.integers(min_value=1, max_value=7))
def test_bell_matches_sympy(values, r):
    symbols = sympy.symbols(f"y1:{r + 1}")
    for j in range(1, r + 1):
        reference = sympy.bell(r, j, symbols[: r - j + 1])
        exact = {s: sympy.Rational(v.numerator, v.denominator) for s, v in zip(symbols, values)}
        substituted = reference.subs(exact)
        assert Fraction(str(substituted)) == bell_eval(r, j, values)


def test_low_order_log_polynomials():
    x1, x2, x3 = sympy.symbols("X1:4")
    assert pr_polynomial(0) == {(): 1}
    assert sympy.expand(pr_expression(1) - x1) == 0
    assert sympy.expand(pr_expression(2) - (x1**2 + x2)) == 0
    assert sympy.expand(pr_expression(3) - (x1**3 + 3 * x1 * x2 + x3)) == 0


@pytest.mark.parametrize("r", range(0, 13))
def test_log_polynomial_values(r):
    # Dg = exp(x): log Dg has jet (1, 0, 0, ...)
    assert pr_eval(r, [1] + [0] * max(r - 1, 0)) == 1
    # Dg = 1/(1-x) at 0: D^k log Dg = (k-1)!, D^{r+1} g = r!
    assert pr_eval(r, [math.factorial(k - 1) for k in range(1, r + 1)]) == math.factorial(r)


@pytest.mark.parametrize("r", range(1, 6))
def test_log_polynomial_against_numeric_derivatives(r):
    with mp.workdps(40):
        x0 = mpf("0.3")

        def g(x):
            return x + mpf("0.2") * mp.sin(x)

        def log_dg(x):
            return mp.log(1 + mpf("0.2") * mp.cos(x))

        dlog = [float(mp.diff(log_dg, x0, k)) for k in range(1, r + 1)]
        expected = float(mp.diff(g, x0, r + 1))
        dg = float(mp.diff(g, x0, 1))
    assert dr1_from_log(dlog, dg) == pytest.approx(expected, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(fractions, min_size=8, max_size=8), fractions, st.integers(0, 8))
def test_log_polynomial_homogeneity(values, scale, r):
    scaled = [scale**i * v for i, v in enumerate(values, start=1)]
    assert pr_eval(r, scaled) == scale**r * pr_eval(r, values)


@pytest.mark.parametrize("r", range(1, 7))
def test_faa_di_bruno_exp_of_sin(r):
    x0 = 0.3
    dh = [float(sympy.diff(sympy.sin(X), X, k).subs(X, x0)) for k in range(1, r + 1)]
    dg = [math.exp(math.sin(x0))] * r
    expected = float(sympy.diff(sympy.exp(sympy.sin(X)), X, r).subs(X, x0))
    assert faa_di_bruno(dg, dh, r) == pytest.approx(expected, rel=1e-12)


def test_jet_compose_matches_sympy():
    order = 5
    x0 = np.array([0.3, 1.1])
    inner = np.array(
        [[float(sympy.diff(sympy.sin(X), X, k).subs(X, v)) for v in x0] for k in range(order + 1)]
    )
    outer = np.broadcast_to(np.exp(inner[0]), inner.shape).copy()
    result = jet_compose(outer, inner)
    for k in range(order + 1):
        for index, v in enumerate(x0):
            expected = float(sympy.diff(sympy.exp(sympy.sin(X)), X, k).subs(X, v))
            assert result[k, index] == pytest.approx(expected, rel=1e-12)


def test_jet_inverse_composes_to_identity():
    order = 6
    x = np.linspace(0.0, 1.0, 7)
    forward = identity_jet(x, order)
    for k in range(order + 1):
        bump = 0.1 / (2 * np.pi) * (2 * np.pi) ** k
        forward[k] = forward[k] + bump * np.sin(2 * np.pi * x + k * np.pi / 2)
    inverse = jet_inverse(forward, x)
    composed = jet_compose(inverse, forward)
    np.testing.assert_allclose(composed, identity_jet(x, order), atol=1e-9)


def test_log_exp_reciprocal_round_trips():
    x = np.linspace(0.1, 0.9, 5)
    a = identity_jet(x, 4)
    a[0] = a[0] + 1.0
    np.testing.assert_allclose(jet_exp(jet_log(a)), a, atol=1e-12)
    np.testing.assert_allclose(jet_product(a, jet_reciprocal(a))[0], np.ones_like(x))
    np.testing.assert_allclose(jet_product(a, jet_reciprocal(a))[1:], 0.0, atol=1e-12)


def test_calculus_errors():
    with pytest.raises(IndexOutOfRange):
        bell_index_set(2, 3)
    with pytest.raises(IndexOutOfRange):
        pr_polynomial(-1)
    with pytest.raises(LengthMismatch):
        faa_di_bruno([1.0], [1.0], 2)
    with pytest.raises(LengthMismatch):
        bell_eval(3, 1, [1.0])
    with pytest.raises(NonpositiveDerivative):
        dr1_from_log([1.0], -1.0)
