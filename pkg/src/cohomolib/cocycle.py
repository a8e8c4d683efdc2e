"""
Real cocycles over circle diffeomorphisms.

Birkhoff sums (pointwise, on grids and as lazy functions), C^r norms, total
variation, the invariant-average estimator, Denjoy-Koksma checks, Herman's
log-derivative sequence and the Theta quantity of the coboundary estimates.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from mpmath import mp, mpf
from scipy.integrate import trapezoid

from .arithmetic import ContinuedFraction
from .calculus import identity_jet, jet_compose
from .circlemap import CircleLift, InverseMap, IterateMap, LineMap, iterate_orbit, renorm_geometry
from .errors import BoundViolated, BudgetExceeded, DegenerateBetas, DegenerateInterval
from .functions import (
    LinearCombination,
    PeriodicFunction,
    TrigFunction,
    ZeroFunction,
)
from .models import BirkhoffRecord, DenjoyKoksmaReport, FamilyKind, NumericsConfig

logger = logging.getLogger(__name__)

__all__ = [
    "PeriodicFunction",
    "TrigFunction",
    "ComposedFunction",
    "BirkhoffSumFunction",
    "CoboundaryOf",
    "birkhoff_function",
    "birkhoff_sum",
    "birkhoff_grid",
    "birkhoff_jet",
    "birkhoff_record",
    "total_variation",
    "cr_norm",
    "cr_norm_on_interval",
    "invariant_average",
    "denjoy_koksma_check",
    "dk_sweep",
    "herman_sequence",
    "theta",
    "power_sum_diagnostic",
]


class ComposedFunction(PeriodicFunction):
    """phi o g for a lift g commuting with integer translations"""

    def __init__(self, phi: PeriodicFunction, g: LineMap):
        super().__init__(phi.declared_order)
        self.phi = phi
        self.g = g

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        inner = self.g.jet(np.asarray(x, dtype=float), order)
        return jet_compose(self.phi.jet(inner[0], order), inner)

    def sample_points(self, grid_size: int) -> np.ndarray:
        return np.arange(grid_size) / grid_size


class BirkhoffSumFunction(PeriodicFunction):
    """x -> S^k phi(x) over f, evaluated along orbits"""

    def __init__(self, phi: PeriodicFunction, f: LineMap, k: int):
        super().__init__(phi.declared_order)
        self.phi = phi
        self.f = f
        self.k = int(k)

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        return birkhoff_jet(self.phi, self.f, self.k, x, order)

    def sample_points(self, grid_size: int) -> np.ndarray:
        return self.phi.sample_points(grid_size)


class CoboundaryOf(PeriodicFunction):
    """u o f - u; its Birkhoff sums telescope"""

    def __init__(self, u: PeriodicFunction, f: LineMap):
        super().__init__(u.declared_order)
        self.u = u
        self.f = f

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ComposedFunction(self.u, self.f).jet(x, order) - self.u.jet(x, order)

    def sample_points(self, grid_size: int) -> np.ndarray:
        return self.u.sample_points(grid_size)


def birkhoff_function(phi: PeriodicFunction, f: LineMap, k: int) -> PeriodicFunction:
    """
    S^k phi as a lazy function.

    Sums distribute over linear combinations and telescope on coboundaries of f.
    """
    if k == 0 or isinstance(phi, ZeroFunction):
        return ZeroFunction(phi.declared_order)
    if isinstance(phi, LinearCombination):
        return LinearCombination([(w, birkhoff_function(g, f, k)) for w, g in phi.terms])
    if isinstance(phi, CoboundaryOf) and phi.f is f:
        return ComposedFunction(phi.u, IterateMap(f, k)) - phi.u
    if isinstance(phi, TrigFunction) and not len(phi._modes):
        return TrigFunction.constant(k * phi.mean, phi.grid_size)
    return BirkhoffSumFunction(phi, f, k)


def _orbit(f: LineMap, x: float, k: int) -> np.ndarray:
    """f^0(x)..f^{k-1}(x) for a scalar start"""
    if isinstance(f, CircleLift):
        points = np.empty(k, dtype=float)
        value = float(x)
        for i in range(k):
            points[i] = value
            value = f.eval_scalar(value)
        return points
    return iterate_orbit(f, np.array(x, dtype=float), max(k - 1, 0))[:k]


def birkhoff_sum(phi: PeriodicFunction, f: LineMap, k: int, x: Any) -> Any:
    """
    S^k phi(x) = sum_{i<k} phi(f^i x); for k < 0, -sum_{i=1}^{|k|} phi(f^{-i} x).

    Scalar x uses one orbit and one vectorized evaluation; arrays go along orbits
    step by step.
    """
    if k == 0:
        return 0.0 if np.ndim(x) == 0 else np.zeros(np.shape(x))
    if isinstance(phi, CoboundaryOf) and phi.f is f:
        x = np.asarray(x, dtype=float)
        value = phi.u(IterateMap(f, k)(x)) - phi.u(x)
        return float(value) if value.ndim == 0 else value
    if np.ndim(x) == 0 and k > 0:
        return float(np.sum(phi(_orbit(f, float(x), k))))
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    point = x
    if k > 0:
        for _ in range(k):
            total += phi(point)
            point = f(point)
        return total
    for _ in range(-k):
        point = f.inverse(point)
        total -= phi(point)
    return total


def birkhoff_grid(phi: PeriodicFunction, f: LineMap, k: int, grid_size: int) -> TrigFunction:
    """S^k phi sampled on the uniform grid, as a TrigFunction"""
    grid = np.arange(grid_size) / grid_size
    return TrigFunction.from_samples(birkhoff_sum(phi, f, k, grid), phi.declared_order)


def _grid_snapshots(
    phi: PeriodicFunction, f: LineMap, grid: np.ndarray, ks: Sequence[int]
) -> Dict[int, np.ndarray]:
    """S^k phi on the grid for every k in ks from a single orbit pass"""
    wanted = set(int(k) for k in ks)
    top = max(wanted, default=0)
    total = np.zeros(grid.shape)
    point = grid.copy()
    snapshots: Dict[int, np.ndarray] = {0: total.copy()} if 0 in wanted else {}
    for i in range(1, top + 1):
        total += phi(point)
        point = f(point)
        if i in wanted:
            snapshots[i] = total.copy()
    return snapshots


def birkhoff_jet(phi: PeriodicFunction, f: LineMap, k: int, x: Any, order: int) -> np.ndarray:
    """Jet of S^k phi at x: phi's jets chain-ruled along the orbit"""
    x = np.asarray(x, dtype=float)
    total = np.zeros((order + 1,) + x.shape)
    orbit_jet = identity_jet(x, order)
    backward = InverseMap(f)
    for _ in range(abs(k)):
        if k > 0:
            total += jet_compose(phi.jet(orbit_jet[0], order), orbit_jet)
            orbit_jet = jet_compose(f.jet(orbit_jet[0], order), orbit_jet)
        else:
            orbit_jet = jet_compose(backward.jet(orbit_jet[0], order), orbit_jet)
            total -= jet_compose(phi.jet(orbit_jet[0], order), orbit_jet)
    return total


def birkhoff_record(
    phi: PeriodicFunction, f: LineMap, cf: ContinuedFraction, n: int, mu: float, grid_size: int
) -> BirkhoffRecord:
    """phi_n = S^{q_n} phi on the grid with its deviation from q_n * mu"""
    k = cf.qn(n)
    values = birkhoff_grid(phi, f, k, grid_size)
    samples = values.samples(grid_size)
    return BirkhoffRecord(
        n=n,
        k=k,
        values=values,
        mean_estimate=float(np.mean(samples)) / k,
        sup_deviation=float(np.max(np.abs(samples - k * mu))),
    )


def total_variation(phi: PeriodicFunction, grid_size: int = 4096) -> float:
    """
    Var(phi) = integral of |D phi| by trapezoidal quadrature on the closed grid.

    Merely continuous inputs fall back to the grid total variation, which is a
    lower bound.
    """
    if phi.declared_order >= 1:
        points = phi.sample_points(grid_size)
        n = max(len(points), grid_size)
        closed = np.linspace(0.0, 1.0, n + 1)
        return float(trapezoid(np.abs(phi.derivative(closed, 1)), closed))
    samples = phi.samples(grid_size)
    logger.warning("Var of a C^0 cocycle taken from grid differences; this is a lower bound")
    return float(np.sum(np.abs(np.diff(np.append(samples, samples[0])))))


def cr_norm(phi: PeriodicFunction, r: int, grid_size: int = 4096) -> float:
    """max over sample points and 0 <= j <= r of |D^j phi|"""
    phi.check_order(r)
    jets = phi.jet(phi.sample_points(grid_size), r)
    return float(np.max(np.abs(jets), initial=0.0))


def cr_norm_on_interval(
    phi: Any, interval: Tuple[float, float], r: int, samples: int = 257
) -> float:
    """
    C^r norm of the restriction to the interval (endpoints in either order).

    phi may be a PeriodicFunction or a LineMap.
    """
    a, b = float(min(interval)), float(max(interval))
    if not b > a:
        raise DegenerateInterval(f"interval [{a}, {b}] is degenerate")
    if isinstance(phi, PeriodicFunction):
        phi.check_order(r)
    points = np.linspace(a, b, samples)
    return float(np.max(np.abs(phi.jet(points, r))))


def lebesgue_mean(phi: PeriodicFunction, grid_size: int = 4096) -> float:
    if isinstance(phi, TrigFunction):
        return phi.mean
    return float(np.mean(phi.samples(grid_size)))


def invariant_average(
    phi: PeriodicFunction,
    f: LineMap,
    cf: ContinuedFraction,
    N: int,
    x0: float = 0.0,
    config: Optional[NumericsConfig] = None,
) -> Tuple[float, float]:
    """
    mu(phi) ~ S^{q_N} phi(x0) / q_N with the Denjoy-Koksma error bar Var(phi)/q_N.
    """
    config = config or NumericsConfig()
    q = cf.qn(N)
    if q > config.budget_qn:
        raise BudgetExceeded(f"q_{N} = {q} exceeds budget {config.budget_qn}", q_n=q)
    if isinstance(phi, ZeroFunction):
        return 0.0, 0.0
    if isinstance(phi, TrigFunction) and not len(phi._modes):
        return phi.mean, 0.0
    mu = birkhoff_sum(phi, f, q, x0) / q
    error = total_variation(phi, config.grid_size) / q
    logger.info(f"Invariant average from q_{N}={q}: {mu:.15g} +/- {error:.3e}")
    return float(mu), float(error)


def deepest_level(cf: ContinuedFraction, budget: float) -> int:
    levels = [n for n in range(cf.depth + 1) if cf.qn(n) <= budget]
    return levels[-1]


def mean_estimate(
    phi: PeriodicFunction,
    f: LineMap,
    cf: ContinuedFraction,
    config: NumericsConfig,
    level: Optional[int] = None,
) -> Tuple[float, float]:
    """mu(phi) with its error; exact for rigid rotations (mu is Lebesgue)"""
    if isinstance(f, CircleLift) and f.kind == FamilyKind.ROTATION:
        error = phi.spectral_tail() if isinstance(phi, TrigFunction) else 0.0
        return lebesgue_mean(phi, config.grid_size), error
    N = level if level is not None else deepest_level(cf, config.budget_qn)
    return invariant_average(phi, f, cf, N, config=config)


def _interpolation_error(f: LineMap, phi: PeriodicFunction) -> float:
    error = 0.0
    if isinstance(f, CircleLift):
        error += f.displacement.spectral_tail()
    if isinstance(phi, TrigFunction):
        error += phi.spectral_tail()
    return error


def denjoy_koksma_check(
    phi: PeriodicFunction,
    f: CircleLift,
    cf: ContinuedFraction,
    n: int,
    mu: Optional[Tuple[float, float]] = None,
    values: Optional[np.ndarray] = None,
    config: Optional[NumericsConfig] = None,
    interval_points: int = 9,
) -> DenjoyKoksmaReport:
    """
    sup_x |S^{q_n} phi - q_n mu| <= Var(phi) + slack, and the interval form
    |S^k phi(y) - S^k phi(z)| <= Var(phi) for y, z in I_n(0), k <= q_{n+1}.

    slack = q_n * (interpolation error + mu error), reported separately.
    """
    config = config or f.config
    q = cf.qn(n)
    if q > config.budget_qn:
        raise BudgetExceeded(f"q_{n} = {q} exceeds budget {config.budget_qn}", q_n=q)
    mu_value, mu_error = mu if mu is not None else mean_estimate(phi, f, cf, config)
    grid = np.arange(config.grid_size) / config.grid_size
    if values is None:
        values = _grid_snapshots(phi, f, grid, [q])[q]
    sup_dev = float(np.max(np.abs(values - q * mu_value)))
    variation = total_variation(phi, config.grid_size)
    slack = q * (_interpolation_error(f, phi) + mu_error)

    interval_dev = 0.0
    if n + 1 <= cf.depth:
        horizon = int(min(cf.qn(n + 1), config.budget_qn))
        end = float(IterateMap(f, q, -cf.pn(n))(np.array([0.0]))[0])
        points = np.linspace(min(0.0, end), max(0.0, end), interval_points)
        sums = np.zeros_like(points)
        for _ in range(horizon):
            sums += phi(points)
            points = f(points)
            interval_dev = max(interval_dev, float(sums.max() - sums.min()))

    passed = sup_dev <= variation + slack and interval_dev <= variation + slack
    report = DenjoyKoksmaReport(
        n=n,
        q_n=q,
        sup_dev=sup_dev,
        var_bound=variation,
        slack=slack,
        mu=mu_value,
        mu_error=mu_error,
        interval_dev=interval_dev,
        passed=passed,
    )
    if not passed:
        logger.error(f"Denjoy-Koksma bound broken at level {n}: {sup_dev:.6e} > {variation:.6e}")
        raise BoundViolated(
            f"level {n}: deviation {sup_dev:.6e} exceeds Var {variation:.6e} + slack {slack:.3e}",
            report=report.model_dump(),
        )
    return report


def dk_sweep(
    phi: PeriodicFunction,
    f: CircleLift,
    cf: ContinuedFraction,
    max_qn: float = 1e5,
    levels: Optional[Sequence[int]] = None,
    mean_level: Optional[int] = None,
    config: Optional[NumericsConfig] = None,
) -> List[DenjoyKoksmaReport]:
    """
    Denjoy-Koksma checks at every level with q_n <= max_qn.

    The mean is estimated once, at the deepest level within budget, and all
    Birkhoff sums come from one orbit pass over the grid. A level that breaks
    the bound is recorded as failed and the sweep continues. Levels are checked
    on up to config.threads workers.
    """
    config = config or f.config
    if levels is None:
        levels = [n for n in range(1, cf.depth + 1) if cf.qn(n) <= max_qn]
    mu = mean_estimate(phi, f, cf, config, mean_level)
    grid = np.arange(config.grid_size) / config.grid_size
    snapshots = _grid_snapshots(phi, f, grid, [cf.qn(n) for n in levels])

    def check(n: int) -> DenjoyKoksmaReport:
        try:
            return denjoy_koksma_check(phi, f, cf, n, mu, snapshots[cf.qn(n)], config)
        except BoundViolated as e:
            return DenjoyKoksmaReport(**e.context["report"])

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        reports = list(pool.map(check, levels))
    logger.info(f"Denjoy-Koksma sweep over {len(reports)} levels, mu={mu[0]:.15g}")
    return reports


def herman_sequence(
    f: CircleLift, cf: ContinuedFraction, n_max: int, config: Optional[NumericsConfig] = None
) -> List[float]:
    """
    sup |log Df^{q_n}| for n = 0..n_max.

    log Df^{q_n} is the Birkhoff sum of log Df, accumulated over one orbit pass
    of the grid.
    """
    config = config or f.config
    q_top = cf.qn(n_max)
    if q_top > config.budget_qn:
        raise BudgetExceeded(f"q_{n_max} = {q_top} exceeds budget {config.budget_qn}", q_n=q_top)
    grid = np.arange(f.grid_size) / f.grid_size
    targets = {cf.qn(n) for n in range(n_max + 1)}
    result = [0.0] * (n_max + 1)
    log_sum = np.zeros(grid.shape)
    point = grid
    for i in range(1, q_top + 1):
        jet = f.jet(point, 1)
        log_sum += np.log(jet[1])
        point = jet[0]
        if i in targets:
            value = float(np.max(np.abs(log_sum)))
            for n in range(n_max + 1):
                if cf.qn(n) == i:
                    result[n] = value
    logger.info(f"Herman sequence to n={n_max}: last value {result[-1]:.3e}")
    return result


def theta(cf: ContinuedFraction, n: int, r: int) -> float:
    """sum_{i=0}^{r} (beta_{n-1} / (beta_{n-1} - beta_n))^i"""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    with mp.workprec(max(cf.bits, 64)):
        previous, current = mpf(cf.beta_n(n - 1)), mpf(cf.beta_n(n))
        if not previous > current:
            raise DegenerateBetas(
                f"beta_{n - 1} = {float(previous)} is not above beta_{n} = {float(current)}"
            )
        ratio = previous / (previous - current)
        return float(mp.fsum(ratio**i for i in range(r + 1)))


def power_sum_diagnostic(
    f: CircleLift,
    cf: ContinuedFraction,
    n: int,
    ell: int,
    phi: Optional[PeriodicFunction] = None,
    config: Optional[NumericsConfig] = None,
) -> Dict[str, float]:
    """
    Empirical ratios for the derivative sums of the regularity estimates:
    sum_{i<q_n} (Df^i(x_star))^ell against M_{n-1}^{ell-1} / m_{n-1}(x_star)^ell,
    and max_{k<=q_{n+1}} |D S^k phi| against ||D phi|| / M_n.
    """
    config = config or f.config
    geometry = renorm_geometry(f, cf, n, config)
    x = np.array([geometry.x_star])
    total, slope, point = 0.0, 1.0, x
    for _ in range(cf.qn(n)):
        total += slope**ell
        jet = f.jet(point, 1)
        slope *= float(jet[1][0])
        point = jet[0]
    m_prev = abs(float(geometry.f_prev(x)[0]) - geometry.x_star)
    bound = geometry.M_prev ** (ell - 1) / m_prev**ell
    result = {"power_sum": float(total), "power_bound": bound, "power_ratio": float(total) / bound}
    if phi is not None and n + 1 <= cf.depth:
        horizon = int(min(cf.qn(n + 1), config.budget_qn))
        grid = np.arange(config.grid_size) / config.grid_size
        jet_sum = np.zeros(grid.shape)
        orbit_jet = identity_jet(grid, 1)
        worst = 0.0
        for _ in range(horizon):
            jet_sum += phi.jet(orbit_jet[0], 1)[1] * orbit_jet[1]
            orbit_jet = jet_compose(f.jet(orbit_jet[0], 1), orbit_jet)
            worst = max(worst, float(np.max(np.abs(jet_sum))))
        estimate = cr_norm(phi, 1, config.grid_size) / geometry.M_cur
        result.update({"c1_birkhoff": worst, "c1_bound": estimate, "c1_ratio": worst / estimate})
    return result
