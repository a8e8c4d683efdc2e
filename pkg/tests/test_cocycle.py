"""Birkhoff sums, Denjoy-Koksma checks and the Herman sequence."""

import math

import numpy as np
import pytest

from src.cohomolib.arithmetic import parse_alpha
from src.cohomolib.circlemap import IterateMap, make_family
from src.cohomolib.cocycle import (
    BirkhoffSumFunction,
    CoboundaryOf,
    birkhoff_function,
    birkhoff_grid,
    birkhoff_jet,
    birkhoff_record,
    birkhoff_sum,
    cr_norm,
    cr_norm_on_interval,
    denjoy_koksma_check,
    dk_sweep,
    herman_sequence,
    invariant_average,
    power_sum_diagnostic,
    theta,
    total_variation,
)
from src.cohomolib.errors import BoundViolated, BudgetExceeded, DegenerateInterval
from src.cohomolib.functions import TrigFunction, ZeroFunction, named_function
from src.cohomolib.models import NumericsConfig

GRID = 1024
X = np.linspace(0.0, 1.0, 17)


@pytest.fixture(scope="module")
def cos_phi():
    return named_function("cos", GRID)


@pytest.fixture(scope="module")
def deep_golden_cf():
    return parse_alpha("golden", depth=40)


def test_scalar_and_array_sums_agree(arnold_golden, cos_phi):
    array = birkhoff_sum(cos_phi, arnold_golden, 50, X)
    scalar = np.array([birkhoff_sum(cos_phi, arnold_golden, 50, float(x)) for x in X])
    np.testing.assert_allclose(array, scalar, atol=1e-11)
    jet = birkhoff_jet(cos_phi, arnold_golden, 50, X, 2)
    np.testing.assert_allclose(jet[0], array, atol=1e-11)
    assert birkhoff_sum(cos_phi, arnold_golden, 0, 0.3) == 0.0


def test_cocycle_identity(arnold_golden, cos_phi):
    m, n = 13, 21
    left = birkhoff_sum(cos_phi, arnold_golden, m + n, X)
    right = birkhoff_sum(cos_phi, arnold_golden, m, X) + birkhoff_sum(
        cos_phi, arnold_golden, n, IterateMap(arnold_golden, m)(X)
    )
    np.testing.assert_allclose(left, right, atol=1e-11)


def test_negative_sums(arnold_golden, cos_phi):
    back = IterateMap(arnold_golden, -8)(X)
    np.testing.assert_allclose(
        birkhoff_sum(cos_phi, arnold_golden, -8, X),
        -birkhoff_sum(cos_phi, arnold_golden, 8, back),
        atol=1e-11,
    )
    np.testing.assert_allclose(
        birkhoff_jet(cos_phi, arnold_golden, -8, X, 1)[0],
        birkhoff_sum(cos_phi, arnold_golden, -8, X),
        atol=1e-11,
    )


def test_coboundary_sums_telescope(arnold_golden):
    u = named_function("sin", GRID)
    phi = CoboundaryOf(u, arnold_golden)
    expected = u(IterateMap(arnold_golden, 34)(X)) - u(X)
    np.testing.assert_allclose(birkhoff_sum(phi, arnold_golden, 34, X), expected, atol=1e-12)
    np.testing.assert_allclose(birkhoff_function(phi, arnold_golden, 34)(X), expected, atol=1e-12)


def test_lazy_sums_distribute(arnold_golden, cos_phi):
    constant = TrigFunction.constant(0.5, GRID)
    assert birkhoff_function(constant, arnold_golden, 6)(X) == pytest.approx(3.0)
    assert isinstance(birkhoff_function(ZeroFunction(), arnold_golden, 6), ZeroFunction)
    assert isinstance(birkhoff_function(cos_phi, arnold_golden, 6), BirkhoffSumFunction)
    combination = birkhoff_function(2 * cos_phi + constant, arnold_golden, 6)
    expected = 2 * birkhoff_sum(cos_phi, arnold_golden, 6, X) + 3.0
    np.testing.assert_allclose(combination(X), expected, atol=1e-12)


def test_birkhoff_jet_matches_finite_differences(arnold_golden, cos_phi):
    h = 1e-6
    jet = birkhoff_jet(cos_phi, arnold_golden, 21, X, 1)
    forward = birkhoff_sum(cos_phi, arnold_golden, 21, X + h)
    backward = birkhoff_sum(cos_phi, arnold_golden, 21, X - h)
    central = (forward - backward) / (2 * h)
    np.testing.assert_allclose(jet[1], central, rtol=1e-6, atol=1e-6)


def test_norms(cos_phi):
    assert total_variation(cos_phi, GRID) == pytest.approx(4.0, rel=1e-9)
    assert cr_norm(cos_phi, 2, GRID) == pytest.approx((2 * math.pi) ** 2, rel=1e-9)
    assert cr_norm_on_interval(cos_phi, (0.5, 0.0), 0) == pytest.approx(1.0)
    with pytest.raises(DegenerateInterval):
        cr_norm_on_interval(cos_phi, (0.2, 0.2), 1)


def test_invariant_average_of_rotation(rotation_golden, golden_cf, cos_phi, numerics):
    mu, error = invariant_average(cos_phi, rotation_golden, golden_cf, 20, config=numerics)
    assert abs(mu) <= error
    assert error == pytest.approx(4.0 / golden_cf.qn(20), rel=1e-9)
    small = NumericsConfig(budget_qn=100)
    with pytest.raises(BudgetExceeded):
        invariant_average(cos_phi, rotation_golden, golden_cf, 20, config=small)


def test_birkhoff_record(rotation_golden, golden_cf, cos_phi):
    record = birkhoff_record(cos_phi, rotation_golden, golden_cf, 6, 0.0, GRID)
    assert record.k == 13
    assert abs(record.mean_estimate) < 1e-12
    alpha = golden_cf.float_alpha()
    expected = abs(math.sin(math.pi * 13 * alpha) / math.sin(math.pi * alpha))
    assert record.sup_deviation == pytest.approx(expected, rel=1e-5)
    higher = birkhoff_grid(cos_phi, rotation_golden, 13, GRID).coefficients[2:]
    assert np.abs(higher).max() < 1e-12


def test_denjoy_koksma_rotation(rotation_golden, golden_cf, cos_phi):
    reports = dk_sweep(cos_phi, rotation_golden, golden_cf, max_qn=6765)
    assert [r.n for r in reports] == list(range(1, 20))
    for report in reports:
        assert report.passed
        assert report.sup_dev <= report.var_bound + report.slack
        assert report.slack < 0.01 * report.var_bound


@pytest.mark.parametrize("eps", [0.25, 0.5, 0.9])
def test_denjoy_koksma_arnold(numerics, golden_cf, deep_golden_cf, cos_phi, eps):
    # the mean comes from q_29 = 832040, deep enough for slack below Var/100 at q_n <= 6765
    f = make_family("arnold", {"eps": eps, "rho": golden_cf}, numerics)
    reports = dk_sweep(cos_phi, f, deep_golden_cf, max_qn=6765)
    assert reports
    for report in reports:
        assert report.passed, report
        assert report.slack < 0.01 * report.var_bound


def test_denjoy_koksma_threads_give_same_reports(rotation_golden, golden_cf, cos_phi):
    serial = dk_sweep(cos_phi, rotation_golden, golden_cf, max_qn=1000)
    threads = NumericsConfig(grid_size=GRID, threads=4)
    threaded = dk_sweep(cos_phi, rotation_golden, golden_cf, max_qn=1000, config=threads)
    assert [r.model_dump() for r in serial] == [r.model_dump() for r in threaded]


def test_denjoy_koksma_violation_is_reported(rotation_golden, golden_cf, cos_phi):
    with pytest.raises(BoundViolated) as excinfo:
        denjoy_koksma_check(cos_phi, rotation_golden, golden_cf, 6, mu=(5.0, 0.0))
    assert excinfo.value.context["report"]["passed"] is False


def test_corollary_decay_for_rotation(rotation_golden, golden_cf, cos_phi):
    reports = [r for r in dk_sweep(cos_phi, rotation_golden, golden_cf, max_qn=6765) if r.n >= 2]
    assert reports[-1].sup_dev < 0.1 * reports[0].sup_dev


def test_herman_sequence_decreases(arnold_golden, golden_cf):
    values = herman_sequence(arnold_golden, golden_cf, 20)
    assert len(values) == 21
    tail = values[3:]
    assert all(b < a for a, b in zip(tail, tail[1:]))
    assert values[-1] < 0.01


def test_herman_sequence_of_rotation_vanishes(rotation_golden, golden_cf):
    assert max(herman_sequence(rotation_golden, golden_cf, 10)) < 1e-14


def test_theta(golden_cf):
    ratio = 1.0 / (1.0 - golden_cf.float_alpha())
    assert theta(golden_cf, 5, 3) == pytest.approx(sum(ratio**i for i in range(4)), rel=1e-12)
    with pytest.raises(ValueError):
        theta(golden_cf, 0, 3)


def test_power_sum_diagnostic(arnold_golden, golden_cf, cos_phi):
    result = power_sum_diagnostic(arnold_golden, golden_cf, 5, 2, cos_phi)
    assert 0 < result["power_ratio"] < 100
    assert 0 < result["c1_ratio"] < 100
