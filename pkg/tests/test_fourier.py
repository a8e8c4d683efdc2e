"""Cohomological equation over rigid rotations."""

from fractions import Fraction

import numpy as np
import pytest

from src.cohomolib.arithmetic import expand
from src.cohomolib.errors import DivisorUnderflow, NotLiouvilleEnough, RationalInput
from src.cohomolib.fourier import (
    divisors,
    liouville_counterexample,
    solve_rotation,
    solve_rotation_diophantine_bound,
)
from src.cohomolib.functions import TrigFunction

GRID = 4096


@pytest.fixture(scope="module")
def analytic_psi():
    rng = np.random.default_rng(3)
    modes = {k: complex(*rng.normal(size=2)) * np.exp(-k) for k in range(1, 9)}
    modes[0] = 0.7
    return TrigFunction.from_modes(modes, GRID)


def test_divisors_use_reduced_multiples(golden_cf):
    values = divisors(golden_cf, 5)
    alpha = golden_cf.float_alpha()
    expected = np.exp(2j * np.pi * alpha * np.arange(1, 6)) - 1
    np.testing.assert_allclose(values, expected, atol=1e-14)


def test_analytic_residual(golden_cf, analytic_psi):
    u, report = solve_rotation(analytic_psi, golden_cf, 256, GRID)
    assert report.residual < 1e-10
    assert report.removed_mean == pytest.approx(0.7)
    assert abs(u.mean) == 0.0
    assert not report.growth
    assert len(report.rows()) == 256


def test_solution_round_trip(golden_cf):
    alpha = golden_cf.float_alpha()
    v = TrigFunction.from_modes({1: 0.3 - 0.2j, 2: 0.1j, 5: 0.05}, GRID)
    psi = TrigFunction.from_callable(lambda x: v(x + alpha) - v(x), GRID)
    u, _ = solve_rotation(psi, golden_cf, 256, GRID)
    x = np.linspace(0.0, 1.0, 101)
    np.testing.assert_allclose(u(x), v(x) - v.mean, atol=1e-10)


def test_liouville_counterexample_has_unit_coefficients(liouville_cf):
    psi, witness = liouville_counterexample(liouville_cf, 3, tau=2.0, grid_size=GRID)
    assert witness == [3, 13, 211]
    _, report = solve_rotation(psi, liouville_cf, 256, GRID)
    for k in witness:
        assert report.u_abs[k - 1] == pytest.approx(1.0, abs=1e-14)
    assert report.psi_abs[210] < 1e-3


def test_liouville_counterexample_needs_liouville_levels(golden_cf):
    with pytest.raises(NotLiouvilleEnough):
        liouville_counterexample(golden_cf, 1, grid_size=GRID)
    psi, witness = liouville_counterexample(golden_cf, 0, grid_size=GRID)
    assert witness == [] and psi.max_mode == 0 and psi.mean == 0.0


def test_truncation_must_fit_grid(golden_cf, analytic_psi):
    with pytest.raises(ValueError):
        solve_rotation(analytic_psi, golden_cf, GRID // 2, GRID)


def test_rational_rotation_underflows(analytic_psi):
    with pytest.raises(DivisorUnderflow) as excinfo:
        solve_rotation(analytic_psi, Fraction(1, 2), 4, GRID)
    assert excinfo.value.context["mode"] == 2


def test_diophantine_bound(golden_cf, liouville_cf, analytic_psi):
    bound = solve_rotation_diophantine_bound(golden_cf, 0.1, 1.0, analytic_psi, 64, GRID)
    assert bound.condition_holds
    assert bound.worst_mode is None
    assert bound.u_sup <= bound.bound
    failing = solve_rotation_diophantine_bound(liouville_cf, 1.0, 1.0, analytic_psi, 256, GRID)
    assert not failing.condition_holds
    assert failing.worst_mode is not None


def test_counterexample_needs_irrational_alpha():
    with pytest.raises(RationalInput) as excinfo:
        liouville_counterexample(expand(Fraction(3, 8), 10), 2)
    assert excinfo.value.context["alpha"] == "3/8"
