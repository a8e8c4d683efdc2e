"""
Approximation of cocycles by coboundaries through renormalization.

At a level n the construction runs in two steps:

1. build_u: a transfer function u supported near x_star such that
   phibar = phi + u - u o F has phibar_{n-1} = 0 on J_{n-1}(x_star).
2. build_xi: a correction xi supported on I_{n-1}(x_star) and
   I_{n-1}(f_{n-1} x_star) with xi + xi o f_{n-1} = phibar_n on I_{n-1}(x_star).

phitilde = phi - xi is then a coboundary: the renormalized action of
phibar - xi has flat generators. approximate_by_coboundary picks the level and
assembles the report; the conjugacy helpers turn a log-derivative coboundary
into a linearizing conjugacy and back.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .action import conjugate, flatness_test, renormalize, solve_line_cohomology
from .arithmetic import ContinuedFraction, liouville_levels, require_irrational
from .calculus import (
    identity_jet,
    jet_affine,
    jet_compose,
    jet_exp,
    jet_inverse,
    jet_product,
    jet_reciprocal,
)
from .circlemap import CircleLift, LineMap, RenormGeometry, renorm_geometry
from .cocycle import (
    CoboundaryOf,
    birkhoff_function,
    cr_norm,
    cr_norm_on_interval,
    mean_estimate,
    theta,
)
from .errors import (
    CertificateFailed,
    CohomologyError,
    DegenerateInterval,
    NoQualifyingLevel,
    PeriodicityViolated,
    ResidualTooLarge,
)
from .functions import LinearCombination, PeriodicFunction, TrigFunction, ZeroFunction
from .models import (
    CertificateReport,
    ConjugacyResult,
    ConstructionReport,
    FamilyKind,
    LevelPolicy,
    LevelRecord,
    NumericsConfig,
)

logger = logging.getLogger(__name__)


class SmoothStep:
    """
    zeta(x) = s(x) / (s(x) + s(1 - x)) with s(t) = exp(-1/t) for t > 0.

    zeta is 0 for x <= 0, 1 for x >= 1 and flat to all orders at both ends.
    Within `clamp` of either end the value is frozen at 0 or 1; the error this
    introduces is below exp(-1/clamp), recorded as clamp_error_log10.
    """

    def __init__(self, clamp: float = 1e-3):
        self.clamp = clamp
        self.clamp_error_log10 = -1.0 / (clamp * math.log(10.0))

    def __call__(self, x: Any) -> np.ndarray:
        return self.jet(x, 0)[0]

    def jet(self, x: Any, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros((order + 1, flat.size))
        out[0, flat >= 1.0 - self.clamp] = 1.0
        inside = (flat > self.clamp) & (flat < 1.0 - self.clamp)
        if np.any(inside):
            t = flat[inside]
            left = self._decay_jet(t, order)
            right = jet_affine(self._decay_jet(1.0 - t, order), -1.0)
            out[:, inside] = jet_product(left, jet_reciprocal(left + right))
        return out.reshape((order + 1,) + x.shape)

    @staticmethod
    def _decay_jet(t: np.ndarray, order: int) -> np.ndarray:
        return jet_exp(-jet_reciprocal(identity_jet(t, order)))


class LevelFrame:
    """
    Oriented coordinate around x_star at level n.

    t(y) = sigma (y - x_star) reduced to [-m_n, 1 - m_n), with sigma the side on
    which f_{n-1} moves x_star. In t: f_n x_star = -m_n, x_star = 0,
    f_{n-1} x_star = M, f_{n-1}^2 x_star = t2 and f_n f_{n-1} x_star = ell.
    The free arc (t2, 1 - m_n) holds the cut-off of u, of width 2 * delta.
    """

    def __init__(self, geometry: RenormGeometry):
        x_star = geometry.x_star
        point = np.array([x_star])
        f_prev, f_cur = geometry.f_prev, geometry.f_cur
        image_prev = float(f_prev(point)[0])
        self.x_star = x_star
        self.level = geometry.level
        self.sigma = 1.0 if image_prev > x_star else -1.0
        self.M = abs(image_prev - x_star)
        self.m_cur = abs(float(f_cur(point)[0]) - x_star)
        ell = float(f_cur(np.array([image_prev]))[0]) - x_star
        self.ell = ell
        self.ell_t = self.sigma * ell
        self.t2 = self.sigma * (float(f_prev(np.array([image_prev]))[0]) - x_star)
        self.delta = 0.5 * (1.0 - self.m_cur - self.t2)
        if abs(ell) < 1e-12 or not 0.0 < self.ell_t < self.M:
            raise DegenerateInterval(
                f"f_n(f_(n-1)(x_star)) - x_star = {ell:.3e} is degenerate at level {self.level}",
                ell=ell,
            )
        if not self.M < self.t2 < 1.0 - self.m_cur:
            raise DegenerateInterval(
                f"I_(n-1)(f_(n-1)(x_star)) overlaps I_n(x_star) at level {self.level}", t2=self.t2
            )

    def t(self, y: np.ndarray) -> np.ndarray:
        return np.mod(self.sigma * (np.asarray(y) - self.x_star) + self.m_cur, 1.0) - self.m_cur

    def point(self, t: np.ndarray) -> np.ndarray:
        return self.x_star + self.sigma * np.asarray(t)

    def interval(self, t_lo: float, t_hi: float) -> Tuple[float, float]:
        a, b = float(self.point(t_lo)), float(self.point(t_hi))
        return (min(a, b), max(a, b))

    def samples(self, t_lo: float, t_hi: float, count: int, open_: bool = False) -> np.ndarray:
        t = np.linspace(t_lo, t_hi, count + 2 if open_ else count)
        return self.point(t[1:-1] if open_ else t)


def _inverse_jet(f: LineMap, y: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """(f^-1(y), jet of f^-1 at y)"""
    w = f.inverse(y)
    return w, jet_inverse(f.jet(w, order), w)


def _scaled(jet: np.ndarray, value: np.ndarray, scale: float) -> np.ndarray:
    """Jet of s = value with derivatives of `jet` multiplied by scale"""
    out = jet * scale
    out[0] = value
    return out


class UFunction(PeriodicFunction):
    """Transfer function u of the first construction step"""

    def __init__(
        self, frame: LevelFrame, phi_prev: PeriodicFunction, f_prev: LineMap, zeta: SmoothStep
    ):
        super().__init__(phi_prev.declared_order)
        self.frame = frame
        self.phi_prev = phi_prev
        self.f_prev = f_prev
        self.zeta = zeta
        self.j_vanishing = 0.0

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros((order + 1, flat.size))
        fr = self.frame
        t = fr.t(flat)
        first = (t > 0.0) & (t <= fr.M)
        second = (t > fr.M) & (t < fr.t2 + fr.delta)
        if np.any(first):
            y = flat[first]
            ramp = jet_affine(self.zeta.jet(t[first] / fr.ell_t, order), 1.0 / fr.ell)
            w, back = _inverse_jet(self.f_prev, y, order)
            values = jet_compose(self.phi_prev.jet(w, order), back)
            out[:, first] = jet_product(ramp, values)
        if np.any(second):
            y = flat[second]
            w, back = _inverse_jet(self.f_prev, y, order)
            s = fr.t(w) / fr.ell_t
            ramp = jet_compose(self.zeta.jet(s, order), _scaled(back, s, fr.sigma / fr.ell_t))
            v, back2 = _inverse_jet(self.f_prev, w, order)
            earlier = jet_compose(self.phi_prev.jet(v, order), jet_compose(back2, back))
            current = jet_compose(self.phi_prev.jet(w, order), back)
            core = jet_product(ramp, earlier) + current
            ramp_down = self.zeta.jet((t[second] - fr.t2) / fr.delta, order)
            cut = -jet_affine(ramp_down, fr.sigma / fr.delta)
            cut[0] += 1.0
            out[:, second] = jet_product(core, cut)
        return out.reshape((order + 1,) + x.shape)

    def sample_points(self, grid_size: int) -> np.ndarray:
        fr = self.frame
        dense = fr.samples(0.0, fr.t2 + fr.delta, 4 * 257)
        return np.concatenate([np.arange(grid_size) / grid_size, np.mod(dense, 1.0)])


class XiFunction(PeriodicFunction):
    """
    Correction xi of the second construction step.

    pad > 0 widens the first support arc backwards past x_star (a corrupted
    construction used to exercise the certificate).
    """

    def __init__(
        self,
        frame: LevelFrame,
        phibar_n: PeriodicFunction,
        f_prev: LineMap,
        zeta: SmoothStep,
        pad: float = 0.0,
    ):
        super().__init__(phibar_n.declared_order)
        self.frame = frame
        self.phibar_n = phibar_n
        self.f_prev = f_prev
        self.zeta = zeta
        self.pad = pad
        self.support_t = (-pad, frame.t2)
        self.pairing = 0.0
        self.leakage = 0.0
        self.periodicity = 0.0

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros((order + 1, flat.size))
        fr = self.frame
        span = fr.M + self.pad
        t = fr.t(flat)
        first = (t > -self.pad) & (t <= fr.M)
        second = (t > fr.M) & (t < fr.t2)
        if np.any(first):
            y = flat[first]
            ramp = jet_affine(self.zeta.jet((t[first] + self.pad) / span, order), fr.sigma / span)
            out[:, first] = jet_product(ramp, self.phibar_n.jet(y, order))
        if np.any(second):
            y = flat[second]
            w, back = _inverse_jet(self.f_prev, y, order)
            s = (fr.t(w) + self.pad) / span
            ramp = -jet_compose(self.zeta.jet(s, order), _scaled(back, s, fr.sigma / span))
            ramp[0] += 1.0
            values = jet_compose(self.phibar_n.jet(w, order), back)
            out[:, second] = jet_product(ramp, values)
        return out.reshape((order + 1,) + x.shape)

    def in_support(self, y: np.ndarray, tol: float = 0.0) -> np.ndarray:
        t = self.frame.t(y)
        lo, hi = self.support_t
        return (t > lo + tol) & (t < hi - tol)

    def support_margin(self, y: np.ndarray) -> np.ndarray:
        """Distance of t(y) outside the open support arc; negative inside"""
        t = self.frame.t(y)
        lo, hi = self.support_t
        return np.maximum(lo - t, t - hi)

    def sample_points(self, grid_size: int) -> np.ndarray:
        fr = self.frame
        dense = fr.samples(-self.pad, fr.t2, 4 * 257)
        return np.concatenate([np.arange(grid_size) / grid_size, np.mod(dense, 1.0)])


def _check_level_index(n: int) -> None:
    if n < 3:
        raise ValueError(f"the construction needs n >= 3, got {n}")


def build_u(
    f: CircleLift,
    phi: PeriodicFunction,
    cf: ContinuedFraction,
    geometry: RenormGeometry,
    config: Optional[NumericsConfig] = None,
    zeta: Optional[SmoothStep] = None,
) -> UFunction:
    """
    u = zeta((y - x_star)/ell) phi_{n-1}(f_{n-1}^-1 y) on I_{n-1}(x_star), 0 on
    I_n(x_star), continued through I_{n-1}(f_{n-1} x_star) by
    u(f_{n-1} y) = u(y) + phi_{n-1}(y) and cut off in the free arc.

    Afterwards phibar_{n-1} = phi_{n-1} + u - u o f_{n-1} vanishes on
    J_{n-1}(x_star); the measured sup is stored as u.j_vanishing.
    """
    config = config or f.config
    n = geometry.level
    _check_level_index(n)
    frame = LevelFrame(geometry)
    phi_prev = birkhoff_function(phi, f, cf.qn(n - 1))
    u = UFunction(frame, phi_prev, geometry.f_prev, zeta or SmoothStep())
    y = frame.samples(-frame.m_cur, frame.M, config.interval_samples)
    vanishing = phi_prev(y) + u(y) - u(geometry.f_prev(y))
    u.j_vanishing = float(np.max(np.abs(vanishing)))
    if u.j_vanishing > config.vanish_tol:
        logger.warning(f"Level {n}: phibar_(n-1) on J is {u.j_vanishing:.3e}, above tolerance")
    logger.debug(f"Level {n}: u built, J-vanishing {u.j_vanishing:.3e}")
    return u


def build_xi(
    f: CircleLift,
    phibar: PeriodicFunction,
    cf: ContinuedFraction,
    geometry: RenormGeometry,
    config: Optional[NumericsConfig] = None,
    zeta: Optional[SmoothStep] = None,
    support_pad: float = 0.0,
) -> XiFunction:
    """
    xi = zeta(t/M) phibar_n on I_{n-1}(x_star) and
    (1 - zeta(t(w)/M)) phibar_n(w), w = f_{n-1}^-1 y, on I_{n-1}(f_{n-1} x_star).

    Gluing at f_{n-1}(x_star) needs phibar_n = phibar_n o f_{n-1} on
    I_{n-1}(x_star); that identity is checked first.
    """
    config = config or f.config
    n = geometry.level
    _check_level_index(n)
    frame = LevelFrame(geometry)
    phibar_n = birkhoff_function(phibar, f, cf.qn(n))
    xi = XiFunction(frame, phibar_n, geometry.f_prev, zeta or SmoothStep(), support_pad)

    y = frame.samples(0.0, frame.M, config.interval_samples)
    image = geometry.f_prev(y)
    values = phibar_n(y)
    xi.periodicity = float(np.max(np.abs(values - phibar_n(image))))
    if xi.periodicity > config.pairing_tol:
        logger.error(
            f"Level {n}: phibar_n is not f_(n-1)-invariant on I_(n-1): {xi.periodicity:.3e}"
        )
        raise PeriodicityViolated(
            f"phibar_n(y) - phibar_n(f_(n-1) y) = {xi.periodicity:.3e} on I_(n-1)(x_star)",
            level=n,
            periodicity=xi.periodicity,
        )
    xi.pairing = float(np.max(np.abs(xi(y) + xi(image) - values)))
    outside = np.concatenate(
        [
            frame.samples(-frame.m_cur, -support_pad, config.interval_samples),
            frame.samples(frame.t2, 1.0 - frame.m_cur, config.interval_samples, open_=True),
        ]
    )
    outside = outside[~xi.in_support(outside)]
    xi.leakage = float(np.max(np.abs(xi(outside)), initial=0.0))
    logger.debug(f"Level {n}: xi built, pairing {xi.pairing:.3e}, leakage {xi.leakage:.3e}")
    return xi


def recentered(phi: PeriodicFunction, mu: float) -> PeriodicFunction:
    """phi - mu"""
    if mu == 0.0:
        return phi
    if isinstance(phi, TrigFunction):
        coefficients = phi.coefficients.copy()
        coefficients[0] -= mu
        return TrigFunction(coefficients, phi.declared_order)
    return LinearCombination([(1.0, phi), (-mu, TrigFunction.constant(1.0, 8))])


def verify_coboundary_certificate(
    f: CircleLift,
    phitilde: PeriodicFunction,
    cf: ContinuedFraction,
    n: int,
    x_star: float,
    u: Optional[PeriodicFunction] = None,
    xi: Optional[XiFunction] = None,
    config: Optional[NumericsConfig] = None,
    raise_on_failure: bool = True,
    samples: int = 33,
) -> CertificateReport:
    """
    Certificate that phitilde is a coboundary at level n:

    (a) orbits of I_n(x_star) under F^i, i < q_{n-1}, avoid the support of xi;
    (b) Gamma_n(phitilde) conjugated by (id, -u) is flat at x_star;
    (c) for z inside I_{n-1}(x_star), the times i < q_n with F^i z in the
        support of xi are exactly {0, q_{n-1}}.

    The line solver residual for the first flat generator is reported as well.
    """
    config = config or f.config
    tol = config.overlap_tol
    q_prev, q_cur = cf.qn(n - 1), cf.qn(n)

    avoidance, margin = True, math.inf
    a_z_sets: List[List[int]] = []
    a_z_ok = True
    if xi is not None:
        frame = xi.frame
        points = frame.samples(-frame.m_cur, 0.0, samples, open_=True)
        for _ in range(q_prev):
            margin = min(margin, float(np.min(xi.support_margin(points))))
            points = f(points)
        avoidance = margin >= -tol

        points = frame.samples(0.0, frame.M, samples, open_=True)
        hits: List[List[int]] = [[] for _ in range(len(points))]
        for i in range(q_cur):
            inside = xi.in_support(points, tol)
            for j in np.flatnonzero(inside):
                hits[j].append(i)
            points = f(points)
        a_z_sets = [list(h) for h in sorted({tuple(h) for h in hits})]
        a_z_ok = a_z_sets == [[0, q_prev]]

    action = renormalize(f, phitilde, cf, n, config)
    if u is not None and not isinstance(u, ZeroFunction):
        action = conjugate(action, None, -u)
    flatness = flatness_test(action, x_star, config.flatness_tol, config.interval_samples)
    transfer = solve_line_cohomology(
        action.g10.base, action.g10.fiber, x_star, config.line_domains
    )
    line_residual = transfer.residual(config.interval_samples)

    report = CertificateReport(
        level=n,
        orbit_avoidance=avoidance,
        worst_avoidance_margin=margin if math.isfinite(margin) else 0.0,
        flatness=flatness,
        a_z_sets=a_z_sets,
        a_z_ok=a_z_ok,
        line_residual=line_residual,
        passed=avoidance and flatness.passed and a_z_ok and line_residual <= config.flatness_tol,
    )
    if not report.passed:
        clause = next(
            name
            for name, ok in (
                ("a", avoidance),
                ("b", flatness.passed),
                ("c", a_z_ok),
                ("line", line_residual <= config.flatness_tol),
            )
            if not ok
        )
        logger.error(f"Certificate at level {n} fails clause {clause}")
        if raise_on_failure:
            raise CertificateFailed(
                f"coboundary certificate fails clause ({clause}) at level {n}",
                clause=clause,
                report=report.model_dump(),
            )
    return report


class _LevelResult:
    def __init__(self, record: LevelRecord, u: UFunction, phibar: PeriodicFunction, xi: XiFunction):
        self.record = record
        self.u = u
        self.phibar = phibar
        self.xi = xi


def _safe_ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 0.0


def construct_level(
    f: CircleLift,
    phi: PeriodicFunction,
    cf: ContinuedFraction,
    n: int,
    r: int,
    config: NumericsConfig,
    certify: bool = True,
) -> _LevelResult:
    """Both construction steps at level n with their norms and residuals"""
    k = max((r - 5) // 6, 0)
    geometry = renorm_geometry(f, cf, n, config)
    u = build_u(f, phi, cf, geometry, config)
    phibar = LinearCombination([(1.0, phi), (-1.0, CoboundaryOf(u, f))])
    xi = build_xi(f, phibar, cf, geometry, config)
    frame = xi.frame

    xi_ck = cr_norm(xi, k, config.grid_size)
    j_interval = frame.interval(-frame.m_cur, frame.M)
    i_interval = frame.interval(0.0, frame.M)
    u_ck = cr_norm_on_interval(u, j_interval, k, config.interval_samples)
    phibar_n_on_i = cr_norm_on_interval(xi.phibar_n, i_interval, k, config.interval_samples)
    theta_k = theta(cf, n, k)

    star = np.array([geometry.x_star])
    back2 = geometry.f_prev.inverse(geometry.f_prev.inverse(star))[0]
    far = float(frame.point(frame.M))
    k_interval = (min(back2, far), max(back2, far))
    phi_prev_on_k = cr_norm_on_interval(u.phi_prev, k_interval, k, config.interval_samples)
    phi_cr = cr_norm(phi, r, config.grid_size)
    phibar_i = xi.phibar_n(frame.samples(0.0, frame.M, config.interval_samples))

    record = LevelRecord(
        n=n,
        q_n=cf.qn(n),
        x_star=geometry.x_star,
        M_prev=frame.M,
        xi_ck=xi_ck,
        u_ck_on_J=u_ck,
        phibar_n_on_I=phibar_n_on_i,
        theta=theta_k,
        j_vanishing=u.j_vanishing,
        leakage=xi.leakage,
        pairing=xi.pairing,
        periodicity=xi.periodicity,
        u_estimate_ratio=_safe_ratio(u_ck, phi_prev_on_k * theta_k / frame.M**k),
        xi_estimate_ratio=_safe_ratio(xi_ck, phibar_n_on_i / frame.M**k),
        final_estimate_ratio=_safe_ratio(xi_ck, phi_cr * frame.M ** (1.0 / 3.0)),
        min_phibar_n=float(np.min(np.abs(phibar_i))),
    )
    if certify:
        record.certificate = verify_coboundary_certificate(
            f, phi - xi, cf, n, geometry.x_star, u, xi, config, raise_on_failure=False
        )
    logger.info(f"Level {n}: ||xi||_C^{k} = {xi_ck:.6e}, M_(n-1) = {frame.M:.6e}")
    return _LevelResult(record, u, phibar, xi)


def select_levels(
    cf: ContinuedFraction,
    r: int,
    policy: LevelPolicy,
    levels: Optional[Sequence[int]],
    config: NumericsConfig,
) -> List[int]:
    """Levels visited by the pipeline, increasing"""
    if policy == LevelPolicy.EXPLICIT:
        if not levels:
            raise ValueError("the explicit policy needs a level list")
        chosen = sorted(set(levels))
    elif policy == LevelPolicy.SWEEP:
        chosen = list(range(config.n_min, cf.depth + 1))
    else:
        chosen = liouville_levels(cf, r / 2).levels
    within = [
        n for n in chosen if config.n_min <= n <= cf.depth and cf.qn(n) <= config.budget_qn
    ]
    if policy == LevelPolicy.EXPLICIT and len(within) < len(chosen):
        logger.warning(f"Dropped levels outside n_min/budget: {sorted(set(chosen) - set(within))}")
    return within


def approximate_by_coboundary(
    f: CircleLift,
    phi: PeriodicFunction,
    cf: ContinuedFraction,
    epsilon: float,
    r: int,
    policy: LevelPolicy = LevelPolicy.LIOUVILLE,
    levels: Optional[Sequence[int]] = None,
    config: Optional[NumericsConfig] = None,
) -> ConstructionReport:
    """
    Find phitilde = phi - xi, a coboundary with ||xi||_{C^k} <= epsilon,
    k = floor((r - 5) / 6).

    The mean of phi is removed first (Denjoy-Koksma estimate, recorded).
    The liouville policy stops at the first level of L(alpha, r/2) reaching
    epsilon and raises NoQualifyingLevel when none does; explicit and sweep
    visit every listed level and report whether epsilon was reached. A level
    whose construction fails is recorded with its error and skipped.
    """
    config = config or f.config
    if r < 5:
        raise ValueError(f"r must be >= 5, got {r}")
    require_irrational(cf, "approximate_by_coboundary")
    k = (r - 5) // 6
    mu, mu_error = mean_estimate(phi, f, cf, config)
    centered = recentered(phi, mu)
    visit = select_levels(cf, r, policy, levels, config)
    logger.info(f"Coboundary pipeline: policy={policy.value}, levels={visit}, mean={mu:.6e}")

    records: List[LevelRecord] = []
    results: Dict[int, _LevelResult] = {}
    chosen: Optional[int] = None
    for n in visit:
        try:
            result = construct_level(f, centered, cf, n, r, config)
        except CohomologyError as e:
            logger.error(f"Level {n} failed: {e}")
            records.append(
                LevelRecord(
                    n=n, q_n=cf.qn(n), x_star=0.0, M_prev=0.0, xi_ck=math.inf, u_ck_on_J=0.0,
                    phibar_n_on_I=0.0, theta=0.0, j_vanishing=0.0, leakage=0.0, pairing=0.0,
                    periodicity=0.0, u_estimate_ratio=0.0, xi_estimate_ratio=0.0,
                    final_estimate_ratio=0.0, min_phibar_n=0.0, error=f"{type(e).__name__}: {e}",
                )
            )
            continue
        records.append(result.record)
        results[n] = result
        if chosen is None and result.record.xi_ck <= epsilon:
            chosen = n
            if policy == LevelPolicy.LIOUVILLE:
                break

    achieved = chosen is not None
    if not results:
        raise NoQualifyingLevel(
            f"no level could be constructed among {visit}", levels=visit
        )
    if chosen is None:
        chosen = min(results, key=lambda n: results[n].record.xi_ck)
    best = results[chosen]
    record = best.record
    report = ConstructionReport(
        level=chosen,
        x_star=record.x_star,
        M_prev=record.M_prev,
        r=r,
        k=k,
        epsilon=epsilon,
        policy=policy,
        removed_mean=mu,
        mean_error=mu_error,
        achieved=achieved,
        norms={
            "xi_ck": record.xi_ck,
            "u_ck_on_J": record.u_ck_on_J,
            "phibar_n_on_I": record.phibar_n_on_I,
            "theta": record.theta,
        },
        residuals={
            "j_vanishing": record.j_vanishing,
            "leakage": record.leakage,
            "pairing": record.pairing,
            "periodicity": record.periodicity,
        },
        levels=records,
        certificate=record.certificate,
        u=best.u,
        phibar=best.phibar,
        xi=best.xi,
        phitilde=centered - best.xi,
    )
    if record.certificate is not None:
        report.residuals.update(
            {
                "flatness_10": record.certificate.flatness.sup_10,
                "flatness_01": record.certificate.flatness.sup_01,
                "line_residual": record.certificate.line_residual,
            }
        )
    if not achieved and policy == LevelPolicy.LIOUVILLE:
        logger.error(f"No level reached epsilon={epsilon}; best ||xi|| = {record.xi_ck:.3e}")
        raise NoQualifyingLevel(
            f"no level in {visit} reached epsilon={epsilon}",
            best=record.xi_ck,
            report=report,
        )
    return report


# Conjugacies ---------------------------------------------------------------------


def conjugated_rotation(
    g: CircleLift, alpha: float, config: Optional[NumericsConfig] = None
) -> CircleLift:
    """f = g o R_alpha o g^-1 as a spectral lift"""
    config = config or g.config
    grid = np.arange(g.grid_size) / g.grid_size
    displacement = g(g.inverse(grid) + alpha) - grid
    return CircleLift(
        TrigFunction.from_samples(displacement),
        kind=FamilyKind.CUSTOM_SPECTRAL,
        params={"rho": alpha},
        config=config,
    )


def log_coboundary_from_conjugacy(f: LineMap, g: CircleLift) -> TrigFunction:
    """
    u = log Dg o g^-1, which solves u o f - u = log Df when f = g R g^-1.
    """
    grid = np.arange(g.grid_size) / g.grid_size
    preimage = g.inverse(grid)
    u = TrigFunction.from_samples(np.log(g.jet(preimage, 1)[1]))
    if isinstance(f, CircleLift):
        residual = float(np.max(np.abs(u(f(grid)) - u(grid) - np.log(f.jet(grid, 1)[1]))))
        logger.info(f"log Dg o g^-1 solves the log-derivative equation to {residual:.3e}")
    return u


def conjugacy_from_log_coboundary(
    f: CircleLift, u: PeriodicFunction, tol: float = 1e-6
) -> ConjugacyResult:
    """
    h' = exp(-u) / C with C = integral of exp(-u), h(x) = integral_0^x h'.

    Requires u o f - u = log Df up to tol; then h o f - h is the constant rho.
    """
    n = f.grid_size
    grid = np.arange(n) / n
    log_df = np.log(f.jet(grid, 1)[1])
    residual = float(np.max(np.abs(u(f(grid)) - u(grid) - log_df)))
    if residual > tol:
        logger.error(f"Log-derivative residual {residual:.3e} above {tol:.1e}")
        raise ResidualTooLarge(f"u o f - u - log Df = {residual:.3e}", residual=residual)
    density = np.exp(-u(grid))
    normalization = float(np.mean(density))
    spectrum = np.fft.rfft(density / normalization - 1.0) / n
    spectrum[-1] = 0.0
    modes = np.arange(len(spectrum))
    primitive = np.zeros_like(spectrum)
    primitive[1:] = spectrum[1:] / (2j * np.pi * modes[1:])
    displacement = TrigFunction(primitive)
    primitive[0] = -displacement(np.array([0.0]))[0]
    h = CircleLift(TrigFunction(primitive), kind=FamilyKind.CUSTOM_SPECTRAL, config=f.config)
    shift = h(f(grid)) - h(grid)
    rho = float(np.mean(shift))
    defect = float(np.max(np.abs(shift - rho)))
    logger.info(f"Conjugacy built: rho={rho:.15g}, defect {defect:.3e}")
    return ConjugacyResult(
        h=h, rho=rho, defect=defect, residual=residual, normalization=normalization
    )
