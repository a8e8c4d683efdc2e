"""Coboundary construction, certificates and conjugacies."""

from fractions import Fraction

import numpy as np
import pytest

from src.cohomolib.arithmetic import expand
from src.cohomolib.circlemap import make_family, renorm_geometry
from src.cohomolib.cocycle import CoboundaryOf
from src.cohomolib.coboundary import (
    LevelFrame,
    SmoothStep,
    approximate_by_coboundary,
    build_u,
    build_xi,
    conjugacy_from_log_coboundary,
    conjugated_rotation,
    log_coboundary_from_conjugacy,
    recentered,
    select_levels,
    verify_coboundary_certificate,
)
from src.cohomolib.errors import (
    CertificateFailed,
    NoQualifyingLevel,
    RationalInput,
    ResidualTooLarge,
)
from src.cohomolib.functions import LinearCombination, TrigFunction, named_function
from src.cohomolib.models import LevelPolicy, NumericsConfig

GRID = 1024


@pytest.fixture(scope="module")
def cos_phi():
    return named_function("cos", GRID)


@pytest.fixture(scope="module")
def rotation_report(rotation_golden, golden_cf, cos_phi):
    return approximate_by_coboundary(
        rotation_golden, cos_phi, golden_cf, 1e3, 11, LevelPolicy.EXPLICIT, [3, 4, 5, 6]
    )


def test_smooth_step_shape():
    zeta = SmoothStep()
    x = np.linspace(-0.5, 1.5, 401)
    values = zeta(x)
    assert values[x <= 0].max() == 0.0
    assert values[x >= 1].min() == 1.0
    assert np.all(np.diff(values) >= 0)
    np.testing.assert_allclose(zeta(1.0 - x), 1.0 - values, atol=1e-15)
    assert zeta(np.array([0.5]))[0] == pytest.approx(0.5)
    assert zeta.clamp_error_log10 < -400


def test_smooth_step_jet():
    zeta = SmoothStep()
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    central = (zeta(x + h) - zeta(x - h)) / (2 * h)
    np.testing.assert_allclose(zeta.jet(x, 2)[1], central, rtol=1e-6, atol=1e-8)
    assert not np.any(zeta.jet(np.array([0.0005, 0.9995]), 3)[1:])


def test_level_frame_of_rotation(rotation_golden, golden_cf):
    frame = LevelFrame(renorm_geometry(rotation_golden, golden_cf, 4))
    beta = [float(golden_cf.beta_n(n)) for n in range(6)]
    assert frame.x_star == 0.0
    assert frame.sigma == -1.0
    assert frame.M == pytest.approx(beta[3], abs=1e-12)
    assert frame.m_cur == pytest.approx(beta[4], abs=1e-12)
    assert frame.t2 == pytest.approx(2 * beta[3], abs=1e-12)
    assert frame.ell_t == pytest.approx(beta[5], abs=1e-12)
    np.testing.assert_allclose(frame.t(frame.point(np.array([-0.05, 0.0, 0.2]))), [-0.05, 0.0, 0.2])


def test_construction_needs_level_three(rotation_golden, golden_cf, cos_phi):
    geometry = renorm_geometry(rotation_golden, golden_cf, 2)
    with pytest.raises(ValueError):
        build_u(rotation_golden, cos_phi, golden_cf, geometry)


def test_rotation_pipeline_levels(rotation_report, golden_cf):
    assert [record.n for record in rotation_report.levels] == [3, 4, 5, 6]
    for record in rotation_report.levels:
        assert record.error is None
        assert record.j_vanishing < 1e-7
        assert record.leakage < 1e-10
        assert record.pairing < 1e-7
        assert record.periodicity < 1e-7
        assert record.certificate.passed, record.certificate
        assert record.certificate.a_z_sets == [[0, golden_cf.qn(record.n - 1)]]


def test_rotation_pipeline_report(rotation_report, rotation_golden, golden_cf):
    assert rotation_report.achieved
    assert rotation_report.level == 3
    assert rotation_report.k == 1
    assert rotation_report.removed_mean == 0.0
    assert rotation_report.residuals["line_residual"] <= 1e-7
    dumped = rotation_report.model_dump()
    assert "xi" not in dumped and "phitilde" not in dumped
    certificate = verify_coboundary_certificate(
        rotation_golden,
        rotation_report.phitilde,
        golden_cf,
        rotation_report.level,
        rotation_report.x_star,
        rotation_report.u,
        rotation_report.xi,
    )
    assert certificate.passed


def test_coboundary_of_arnold_map(arnold_golden, golden_cf):
    phi = CoboundaryOf(named_function("sin", GRID), arnold_golden)
    report = approximate_by_coboundary(
        arnold_golden, phi, golden_cf, 10.0, 11, LevelPolicy.EXPLICIT, [3, 4]
    )
    assert abs(report.removed_mean) < 1e-4
    for record in report.levels:
        assert record.error is None
        assert record.certificate.passed, record.certificate


def test_liouville_levels_shrink_the_correction(arnold_liouville, liouville_cf):
    phi = named_function("cos", GRID)
    report = approximate_by_coboundary(
        arnold_liouville, phi, liouville_cf, 1e-12, 11, LevelPolicy.EXPLICIT, [3, 4]
    )
    norms = [record.xi_ck for record in report.levels]
    assert len(norms) == 2
    assert norms[1] < norms[0]
    assert all(record.certificate.passed for record in report.levels)
    assert not report.achieved
    assert report.level == 4


def test_liouville_policy_without_levels(rotation_golden, golden_cf, cos_phi):
    with pytest.raises(NoQualifyingLevel):
        approximate_by_coboundary(rotation_golden, cos_phi, golden_cf, 1e-3, 11)


def test_rational_alpha_rejected(rotation_golden, cos_phi):
    with pytest.raises(RationalInput):
        approximate_by_coboundary(
            rotation_golden, cos_phi, expand(Fraction(5, 8), 10), 1.0, 11,
            LevelPolicy.EXPLICIT, [3],
        )


def test_failed_levels_are_skipped(arnold_golden, liouville_cf, cos_phi):
    with pytest.raises(NoQualifyingLevel) as excinfo:
        approximate_by_coboundary(
            arnold_golden, cos_phi, liouville_cf, 1.0, 11, LevelPolicy.EXPLICIT, [3]
        )
    assert excinfo.value.context["levels"] == [3]


def test_regularity_must_be_at_least_five(rotation_golden, golden_cf, cos_phi):
    with pytest.raises(ValueError):
        approximate_by_coboundary(rotation_golden, cos_phi, golden_cf, 1.0, 4)


def test_select_levels(golden_cf, numerics):
    assert select_levels(golden_cf, 11, LevelPolicy.SWEEP, None, numerics) == list(range(3, 25))
    assert select_levels(golden_cf, 11, LevelPolicy.EXPLICIT, [2, 4, 3, 99], numerics) == [3, 4]
    assert select_levels(golden_cf, 11, LevelPolicy.LIOUVILLE, None, numerics) == []
    with pytest.raises(ValueError):
        select_levels(golden_cf, 11, LevelPolicy.EXPLICIT, [], numerics)


def test_certificate_rejects_widened_support(rotation_golden, golden_cf, cos_phi):
    geometry = renorm_geometry(rotation_golden, golden_cf, 4)
    u = build_u(rotation_golden, cos_phi, golden_cf, geometry)
    phibar = LinearCombination([(1.0, cos_phi), (-1.0, CoboundaryOf(u, rotation_golden))])
    pad = 0.5 * LevelFrame(geometry).m_cur
    xi = build_xi(rotation_golden, phibar, golden_cf, geometry, support_pad=pad)
    phitilde = cos_phi - xi
    with pytest.raises(CertificateFailed) as excinfo:
        verify_coboundary_certificate(rotation_golden, phitilde, golden_cf, 4, 0.0, u, xi)
    assert excinfo.value.context["clause"] == "a"
    report = verify_coboundary_certificate(
        rotation_golden, phitilde, golden_cf, 4, 0.0, u, xi, raise_on_failure=False
    )
    assert not report.passed and not report.orbit_avoidance


def test_recentered(cos_phi):
    shifted = recentered(cos_phi, 0.25)
    assert isinstance(shifted, TrigFunction)
    assert shifted.mean == pytest.approx(-0.25)
    assert recentered(cos_phi, 0.0) is cos_phi
    lazy = recentered(cos_phi + cos_phi, 0.5)
    assert lazy(np.array([0.0]))[0] == pytest.approx(1.5)


@pytest.fixture(scope="module")
def smooth_conjugacy(golden_cf):
    config = NumericsConfig(grid_size=GRID)
    g = make_family("arnold", {"a": 0.0, "eps": 0.3}, config)
    f = conjugated_rotation(g, golden_cf.float_alpha())
    return g, f


def test_conjugacy_round_trip(smooth_conjugacy, golden_cf):
    g, f = smooth_conjugacy
    u = log_coboundary_from_conjugacy(f, g)
    result = conjugacy_from_log_coboundary(f, u)
    assert result.defect < 1e-8
    assert result.rho == pytest.approx(golden_cf.float_alpha(), abs=1e-8)
    assert result.normalization == pytest.approx(1.0, abs=1e-8)
    x = np.linspace(0.0, 1.0, 33)
    offset = result.h(x) - g.inverse(x)
    assert np.ptp(offset) < 1e-8
    assert "h" not in result.model_dump()


def test_conjugacy_needs_a_log_coboundary(smooth_conjugacy):
    _, f = smooth_conjugacy
    with pytest.raises(ResidualTooLarge):
        conjugacy_from_log_coboundary(f, named_function("cos", GRID))
