"""
Lifts of orientation-preserving circle diffeomorphisms.

Maps of the line share the LineMap interface (evaluation, jets, inverse).
CircleLift is the spectral lift f = id + displacement; IterateMap gives
f_n = f^{q_n} - p_n without resampling; Composite and InverseMap close the
set under the operations the fibered actions need.
"""

import cmath
import logging
import math
import re
from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize_scalar

from .arithmetic import ContinuedFraction, coerce_alpha, expand, from_partial_quotients, orbit_signs
from .calculus import (
    dr1_from_log,
    identity_jet,
    jet_compose,
    jet_inverse,
    jet_log,
)
from .errors import (
    BudgetExceeded,
    DerivativeUnavailable,
    MaxIterExceeded,
    NewtonDivergence,
    NotADiffeomorphism,
    PartitionViolation,
    PeriodicOrbitDetected,
    RationalRotation,
    RotationMismatch,
    TargetInPlateau,
)
from .functions import SMOOTH_ORDER, TrigFunction
from .models import DistortionReport, FamilyKind, NumericsConfig, PartitionReport, RotationEstimate

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps


def _as_array(x: Any) -> np.ndarray:
    return np.asarray(x, dtype=float)


def safeguarded_newton(
    evaluate: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    y: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    guess: np.ndarray,
    tol: float = 1e-13,
    max_steps: int = 100,
) -> np.ndarray:
    """
    Solve F(x) = y for increasing F inside the brackets [lo, hi].

    Newton steps that leave the bracket are replaced by bisection.
    """
    y = _as_array(y)
    lo = np.broadcast_to(_as_array(lo), y.shape).copy()
    hi = np.broadcast_to(_as_array(hi), y.shape).copy()
    x = np.clip(np.broadcast_to(_as_array(guess), y.shape).copy(), lo, hi)
    scale = np.maximum(1.0, np.abs(y))
    residual = np.full(y.shape, np.inf)
    for _ in range(max_steps):
        value, slope = evaluate(x)
        residual = value - y
        done = np.abs(residual) <= tol * scale
        if np.all(done):
            return x
        lo = np.where(residual < 0, x, lo)
        hi = np.where(residual > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - residual / slope
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        new = np.where(done, x, new)
        if np.all(np.abs(new - x) <= 4 * EPS * np.maximum(1.0, np.abs(x))):
            x = new
            break
        x = new
    value, _ = evaluate(x)
    worst = float(np.max(np.abs(value - y), initial=0.0))
    if worst > 1e-9 * float(np.max(scale, initial=1.0)):
        raise NewtonDivergence(f"inverse evaluation failed, residual {worst:.3e}", residual=worst)
    return x


class LineMap(ABC):
    """Orientation-preserving homeomorphism of the real line"""

    @abstractmethod
    def __call__(self, x: Any) -> np.ndarray:
        pass

    @abstractmethod
    def jet(self, x: Any, order: int) -> np.ndarray:
        """Array (order + 1, *x.shape): value and derivatives at x"""
        pass

    def value_and_slope(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        jet = self.jet(x, 1)
        return jet[0], jet[1]

    def inverse(self, y: Any) -> np.ndarray:
        """Generic inverse by bracket expansion and safeguarded Newton"""
        y = _as_array(y)
        guess = y - (self(y) - y)
        width = np.full(y.shape, 1e-6)
        lo, hi = guess - width, guess + width
        for _ in range(80):
            below = self(lo) > y
            above = self(hi) < y
            if not (np.any(below) or np.any(above)):
                break
            width = width * 2.0
            lo = np.where(below, lo - width, lo)
            hi = np.where(above, hi + width, hi)
        return safeguarded_newton(self.value_and_slope, y, lo, hi, guess)

    def power(self, k: int) -> "LineMap":
        if k == 0:
            return Translation(0.0)
        if k == 1:
            return self
        return IterateMap(self, k)

    def translation_defect(self, points: np.ndarray) -> float:
        """sup |m(x+1) - m(x) - 1| over points"""
        points = _as_array(points)
        return float(np.max(np.abs(self(points + 1.0) - self(points) - 1.0), initial=0.0))


class Translation(LineMap):
    def __init__(self, shift: float):
        self.shift = float(shift)

    def __call__(self, x: Any) -> np.ndarray:
        return _as_array(x) + self.shift

    def jet(self, x: Any, order: int) -> np.ndarray:
        jet = identity_jet(_as_array(x), order)
        jet[0] += self.shift
        return jet

    def inverse(self, y: Any) -> np.ndarray:
        return _as_array(y) - self.shift

    def power(self, k: int) -> "LineMap":
        return Translation(k * self.shift)


class CircleLift(LineMap):
    """
    Lift f = id + displacement of a circle diffeomorphism.

    The displacement is a TrigFunction on a grid of size N; derivatives are
    spectral. Construction rejects maps with min Df <= diffeo_tol on the grid.
    """

    def __init__(
        self,
        displacement: TrigFunction,
        order: int = SMOOTH_ORDER,
        kind: FamilyKind = FamilyKind.CUSTOM_SPECTRAL,
        params: Optional[Dict[str, Any]] = None,
        config: Optional[NumericsConfig] = None,
        validate: bool = True,
    ):
        self.config = config or NumericsConfig()
        self.displacement = displacement
        self.order = order
        self.kind = kind
        self.params = dict(params or {})
        self.grid_size = displacement.grid_size
        if self.grid_size > self.config.max_grid:
            raise BudgetExceeded(f"grid {self.grid_size} above cap {self.config.max_grid}")
        self._modes = [int(k) for k in displacement._modes]
        self._weights = [complex(c) for c in displacement._active]
        self._bound = 2.0 * float(np.abs(displacement._active).sum())
        if validate:
            grid = np.arange(self.grid_size) / self.grid_size
            min_df = float(np.min(1.0 + displacement.derivative(grid, 1)))
            if min_df <= self.config.diffeo_tol:
                raise NotADiffeomorphism(
                    f"min Df = {min_df:.3e} on the grid is not positive", min_df=min_df
                )

    def __call__(self, x: Any) -> np.ndarray:
        x = _as_array(x)
        return x + self.displacement(x)

    def eval_scalar(self, x: float) -> float:
        """Fast path for long scalar orbits"""
        total = self.displacement.mean
        for k, c in zip(self._modes, self._weights):
            total += 2.0 * (c * cmath.exp(2j * math.pi * k * x)).real
        return x + total

    def jet(self, x: Any, order: int) -> np.ndarray:
        x = _as_array(x)
        jet = self.displacement.jet(x, order)
        jet[0] += x
        if order >= 1:
            jet[1] += 1.0
        return jet

    def derivative(self, x: Any, s: int) -> np.ndarray:
        if s > self.order:
            raise DerivativeUnavailable(f"D^{s} of a C^{self.order} lift")
        return self.jet(x, s)[s]

    def log_derivative_jet(self, x: Any, order: int) -> np.ndarray:
        """Jet of log Df at x up to the given order"""
        return jet_log(self.jet(x, order + 1)[1:])

    def inverse(self, y: Any) -> np.ndarray:
        y = _as_array(y)
        mean = self.displacement.mean
        margin = self._bound + 1e-12
        return safeguarded_newton(
            self.value_and_slope,
            y,
            y - mean - margin,
            y - mean + margin,
            y - self.displacement(y),
            tol=self.config.newton_tol,
        )

    def with_translation(self, a: float) -> "CircleLift":
        """Same shape with the constant mode replaced by a"""
        coefficients = self.displacement.coefficients.copy()
        coefficients[0] = a
        params = dict(self.params, a=a)
        return CircleLift(
            TrigFunction(coefficients, self.displacement.declared_order),
            self.order,
            self.kind,
            params,
            self.config,
        )


class IterateMap(LineMap):
    """x -> base^k(x) + shift, k of either sign, evaluated step by step"""

    def __init__(self, base: LineMap, k: int, shift: float = 0.0):
        self.base = base
        self.k = int(k)
        self.shift = float(shift)

    def __call__(self, x: Any) -> np.ndarray:
        x = _as_array(x)
        if self.k >= 0:
            for _ in range(self.k):
                x = self.base(x)
        else:
            for _ in range(-self.k):
                x = self.base.inverse(x)
        return x + self.shift

    def jet(self, x: Any, order: int) -> np.ndarray:
        x = _as_array(x)
        total = identity_jet(x, order)
        point = x
        for _ in range(abs(self.k)):
            if self.k > 0:
                step = self.base.jet(point, order)
                point = step[0]
            else:
                previous = self.base.inverse(point)
                step = jet_inverse(self.base.jet(previous, order), previous)
                point = previous
            total = jet_compose(step, total)
        total[0] = point + self.shift
        return total

    def inverse(self, y: Any) -> np.ndarray:
        y = _as_array(y)
        if abs(self.k) <= 1:
            return IterateMap(self.base, -self.k)(y - self.shift)
        return super().inverse(y)

    def power(self, k: int) -> "LineMap":
        if self.shift == 0.0 or float(self.shift).is_integer():
            return IterateMap(self.base, self.k * k, self.shift * k)
        return IterateMap(self, k)


class Composite(LineMap):
    """g_1 o g_2 o ... o g_m (the last factor is applied first)"""

    def __init__(self, factors: Sequence[LineMap]):
        self.factors = list(factors)

    def __call__(self, x: Any) -> np.ndarray:
        x = _as_array(x)
        for factor in reversed(self.factors):
            x = factor(x)
        return x

    def jet(self, x: Any, order: int) -> np.ndarray:
        x = _as_array(x)
        total = identity_jet(x, order)
        for factor in reversed(self.factors):
            total = jet_compose(factor.jet(total[0], order), total)
        return total

    def inverse(self, y: Any) -> np.ndarray:
        y = _as_array(y)
        for factor in self.factors:
            y = factor.inverse(y)
        return y


class InverseMap(LineMap):
    def __init__(self, forward: LineMap):
        self.forward = forward

    def __call__(self, x: Any) -> np.ndarray:
        return self.forward.inverse(x)

    def jet(self, x: Any, order: int) -> np.ndarray:
        preimage = self.forward.inverse(x)
        return jet_inverse(self.forward.jet(preimage, order), preimage)

    def inverse(self, y: Any) -> np.ndarray:
        return self.forward(y)


def renormalized_map(f: LineMap, cf: ContinuedFraction, n: int) -> IterateMap:
    """f_n = f^{q_n} - p_n"""
    return IterateMap(f, cf.qn(n), -cf.pn(n))


# Families ---------------------------------------------------------------------


def parse_map_spec(text: str) -> Tuple[FamilyKind, Dict[str, str]]:
    """'arnold:eps=0.5,rho=golden' -> (ARNOLD, {'eps': '0.5', 'rho': 'golden'})"""
    kind_text, _, rest = text.partition(":")
    kind = FamilyKind(kind_text.strip())
    params = {
        key: value.strip()
        for key, value in re.findall(r"(\w+)=(.+?)(?=,\w+=|$)", rest.strip())
    }
    return kind, params


def make_family(
    kind: Union[FamilyKind, str],
    params: Dict[str, Any],
    config: Optional[NumericsConfig] = None,
) -> CircleLift:
    """
    Build a test map.

    rotation: x + a.  arnold: x + a + (eps/2pi) sin(2pi x).
    custom-spectral: x + displacement (a TrigFunction or a function spec).
    A 'rho' entry (number, spec string or ContinuedFraction) tunes a.
    """
    config = config or NumericsConfig()
    kind = FamilyKind(kind)
    n = config.grid_size
    params = dict(params)
    if kind == FamilyKind.ROTATION:
        a = params.get("a")
        if a is None:
            a = _target_alpha(params["rho"], config).float_alpha()
        displacement = TrigFunction.constant(float(a), n)
        return CircleLift(displacement, kind=kind, params={"a": float(a)}, config=config)

    if kind == FamilyKind.ARNOLD:
        eps = float(params.get("eps", 0.0))
        if "a" not in params and "rho" in params:
            return tune_to_rotation(kind, {"eps": eps}, params["rho"], config=config)
        a = float(params.get("a", 0.0))
        displacement = TrigFunction.from_modes({0: a, 1: -0.5j * eps / (2 * math.pi)}, n)
        return CircleLift(displacement, kind=kind, params={"a": a, "eps": eps}, config=config)

    displacement = params.get("displacement")
    if displacement is None:
        raise ValueError("custom-spectral maps need a 'displacement'")
    if not isinstance(displacement, TrigFunction):
        displacement = TrigFunction.from_callable(displacement, n)
    return CircleLift(displacement, kind=kind, params={}, config=config)


def _target_alpha(target: Any, config: NumericsConfig) -> ContinuedFraction:
    return coerce_alpha(target, depth=40, bits=config.bits)


def tune_to_rotation(
    kind: Union[FamilyKind, str],
    params: Dict[str, Any],
    target_alpha: Any,
    tol: Optional[float] = None,
    config: Optional[NumericsConfig] = None,
    measure: bool = False,
) -> CircleLift:
    """
    Choose the translation a so that rho(f_a) matches the target.

    Candidate values of a are run together; each candidate's orbit of 0 is
    compared with the rotation order of the target, sign(f^k(0) - p_k) against
    sign(k alpha - p_k). The first disagreement says on which side rho lies.
    Candidates that agree up to max_iter cannot be separated at that orbit
    length and the midpoint of that band is returned.
    """
    config = config or NumericsConfig()
    kind = FamilyKind(kind)
    cf = _target_alpha(target_alpha, config)
    alpha = cf.float_alpha()
    eps = float(params.get("eps", 0.0))
    if kind == FamilyKind.ROTATION or eps == 0.0:
        lift = make_family(FamilyKind.ARNOLD if eps else kind, {"a": alpha, "eps": eps}, config)
        lift.params["rho"] = alpha
        return lift
    if cf.is_rational:
        raise TargetInPlateau(
            f"target {cf.alpha} is rational; eps={eps} locks it on a plateau of positive width",
            target=str(cf.alpha),
        )

    base = make_family(kind, {"a": 0.0, "eps": eps}, config)
    shape = base.displacement
    count = config.max_iter
    nearest, signs = orbit_signs(cf, count)
    candidates = config.tune_candidates
    spread = abs(eps) / (2 * math.pi) + 1e-9
    lo, hi = alpha - spread, alpha + spread
    band = (lo, hi)
    for round_index in range(64):
        values = np.linspace(lo, hi, candidates)
        verdict = _orbit_order_verdicts(shape, values, nearest, signs)
        smaller = np.flatnonzero(verdict < 0)
        larger = np.flatnonzero(verdict > 0)
        new_lo = values[smaller[-1]] if len(smaller) else lo
        new_hi = values[larger[0]] if len(larger) else hi
        undecided = values[verdict == 0]
        if len(undecided):
            band = (float(undecided[0]), float(undecided[-1]))
        logger.debug(
            f"tune round {round_index}: bracket [{new_lo!r}, {new_hi!r}], "
            f"{len(undecided)} undecided"
        )
        stalled = len(undecided) == candidates - len(smaller) - len(larger) and len(undecided) > 1
        converged = (new_hi - new_lo) <= 4 * EPS * max(1.0, abs(alpha))
        if converged or (stalled and new_lo == lo and new_hi == hi):
            break
        if len(undecided) == candidates:
            break
        lo, hi = new_lo, new_hi
    a = 0.5 * (band[0] + band[1]) if band != (alpha - spread, alpha + spread) else 0.5 * (lo + hi)
    lift = base.with_translation(a)
    lift.params.update({"eps": eps, "rho": alpha, "band": band[1] - band[0]})
    logger.info(f"Tuned {kind.value} eps={eps} to rho={alpha!r}: a={a!r}")
    if measure:
        estimate = rotation_number(lift, tol or config.rotation_tol, config.max_iter)
        lift.params["rho_measured"] = estimate.alpha
    return lift


def _orbit_order_verdicts(
    shape: TrigFunction, a_values: np.ndarray, nearest: np.ndarray, signs: np.ndarray
) -> np.ndarray:
    """-1: rho below target, +1: above, 0: undecided up to len(signs)"""
    x = np.zeros_like(a_values)
    verdict = np.zeros(len(a_values), dtype=int)
    open_ = np.ones(len(a_values), dtype=bool)
    modes = shape._modes
    weights = shape._active
    for k in range(len(signs)):
        x = x + a_values + 2.0 * (np.exp(2j * np.pi * np.outer(x, modes)) @ weights).real
        diff = x - nearest[k]
        orbit_sign = np.sign(diff)
        mismatch = open_ & (orbit_sign != signs[k]) & (orbit_sign != 0)
        if np.any(mismatch):
            verdict[mismatch] = orbit_sign[mismatch].astype(int)
            open_ &= ~mismatch
            if not np.any(open_):
                break
    return verdict


def iterate_orbit(f: LineMap, x0: Any, k: int) -> np.ndarray:
    """(x0, f(x0), ..., f^k(x0)); shape (k + 1, *x0.shape)"""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    x = _as_array(x0)
    orbit = np.empty((k + 1,) + x.shape, dtype=float)
    orbit[0] = x
    for i in range(1, k + 1):
        x = f(x)
        orbit[i] = x
    return orbit


def rotation_number(
    f: CircleLift,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    strict: bool = False,
    bits: int = 256,
) -> RotationEstimate:
    """
    Closest-return estimate of rho(f) from the orbit of 0, with the continued
    fraction of the quotients the records pin down in `cf`.

    A record is kept whenever |f^q(0) - round(f^q(0))| improves; a record with
    the same displacement sign as the previous one replaces it. Iteration stops
    once |d_q|/q < tol, which bounds |alpha - p/q|.
    """
    x = 0.0
    history = np.empty(max_iter + 1, dtype=float)
    history[0] = 0.0
    records: List[Tuple[int, int]] = []
    displacements: List[float] = []
    best = math.inf
    converged = False
    q = 0
    for q in range(1, max_iter + 1):
        x = f.eval_scalar(x)
        history[q] = x
        p = math.floor(x + 0.5)
        d = x - p
        if abs(d) < best:
            best = abs(d)
            if abs(d) <= 1e-14 * max(1.0, abs(x)):
                raise PeriodicOrbitDetected(
                    f"f^{q}(0) - {p} = {d:.3e}: rational rotation number {p}/{q}", q=q, p=p
                )
            if displacements and math.copysign(1.0, d) == math.copysign(1.0, displacements[-1]):
                records[-1] = (q, p)
                displacements[-1] = d
            else:
                records.append((q, p))
                displacements.append(d)
            if best / q < tol:
                converged = True
                break
    q_last, p_last = records[-1]
    if not converged:
        drift = abs(history[q] - history[q - q_last] - p_last) if q > q_last else math.inf
        if drift <= 1e-11:
            raise PeriodicOrbitDetected(
                f"orbit of 0 settles on a period-{q_last} orbit", q=q_last, p=p_last
            )
        logger.warning(f"rotation_number did not reach tol={tol} within {max_iter} iterates")
        if strict:
            raise MaxIterExceeded(
                f"no convergence within {max_iter} iterates", best=p_last / q_last
            )
    estimate = RotationEstimate(
        alpha=p_last / q_last, records=records, beta_estimate=best, converged=converged
    )
    estimate.cf = rotation_cf(estimate, bits)
    return estimate


def rotation_cf(estimate: RotationEstimate, bits: int = 256) -> ContinuedFraction:
    """Continued fraction sharing the certain quotients of the estimate"""
    q_last, p_last = estimate.records[-1]
    quotients = expand(Fraction(p_last, q_last), 200).a
    return from_partial_quotients(quotients[:-1] or quotients, bits=bits)


# Renormalization geometry -------------------------------------------------------


class RenormGeometry(BaseModel):
    """f_{n-1}, f_n and their displacement profiles at level n"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    level: int
    sign: int
    f_prev: Any
    f_cur: Any
    m_prev: Any
    m_cur: Any
    M_prev: float
    M_cur: float
    x_star: float
    x_star_ratio: float
    grid: Any = Field(default=None, exclude=True)
    f_prev_grid: Any = Field(default=None, exclude=True)
    f_cur_grid: Any = Field(default=None, exclude=True)
    resample_error: Optional[float] = None

    def interval(self, x: float, which: str = "cur") -> Tuple[float, float]:
        """I_n(x) for which='cur', I_{n-1}(x) for which='prev', as (x, endpoint)"""
        target = self.f_cur if which == "cur" else self.f_prev
        return float(x), float(target(np.array([x]))[0])

    def summary(self) -> Dict[str, Any]:
        return {
            "level": self.level,
            "sign": self.sign,
            "M_prev": self.M_prev,
            "M_cur": self.M_cur,
            "x_star": self.x_star,
            "x_star_ratio": self.x_star_ratio,
            "resample_error": self.resample_error,
        }


def _check_level(f: LineMap, cf: ContinuedFraction, n: int, config: NumericsConfig) -> None:
    if cf.is_rational:
        raise RationalRotation(f"rotation number {cf.alpha} is rational")
    if n < 1 or n > cf.depth:
        raise ValueError(f"level {n} outside 1..{cf.depth}")
    if cf.qn(n) > config.budget_qn:
        raise BudgetExceeded(
            f"q_{n} = {cf.qn(n)} exceeds budget {config.budget_qn}", q_n=cf.qn(n)
        )


def renorm_geometry(
    f: CircleLift,
    cf: ContinuedFraction,
    n: int,
    config: Optional[NumericsConfig] = None,
) -> RenormGeometry:
    """Sample f_{n-1}, f_n on the grid and locate x_star maximizing m_{n-1}"""
    config = config or f.config
    _check_level(f, cf, n, config)
    q_prev, q_cur = cf.qn(n - 1), cf.qn(n)
    grid_size = f.grid_size
    grid = np.arange(grid_size) / grid_size
    x = grid.copy()
    saved = grid.copy() if q_prev == 0 else None
    for i in range(1, q_cur + 1):
        x = f(x)
        if i == q_prev:
            saved = x.copy()
    assert saved is not None
    prev_vals = saved - cf.pn(n - 1)
    cur_vals = x - cf.pn(n)
    sign = -1 if n % 2 else 1
    for level, values, s in ((n - 1, prev_vals, -sign), (n, cur_vals, sign)):
        if np.any(s * (values - grid) <= 0):
            raise RotationMismatch(
                f"(-1)^{level}(f_{level}(x) - x) is not positive on the grid; "
                f"the map's rotation number does not share the quotients up to level {level + 1}",
                level=level,
            )
    m_prev_vals = np.abs(prev_vals - grid)
    m_cur_vals = np.abs(cur_vals - grid)
    f_prev = renormalized_map(f, cf, n - 1)
    f_cur = renormalized_map(f, cf, n)

    M_grid = float(m_prev_vals.max())
    j = int(np.argmax(m_prev_vals))
    x_star = 0.0
    M_prev = M_grid
    if M_grid - float(m_prev_vals.min()) > 1e-13 * M_grid:
        exact_m = lambda t: -abs(float(f_prev(np.array([t]))[0]) - t)  # noqa: E731
        bracket = (grid[j] - 1.0 / grid_size, grid[j], grid[j] + 1.0 / grid_size)
        try:
            result = minimize_scalar(exact_m, bracket=bracket, method="golden", tol=1e-10)
            candidate = float(result.x)
            if -result.fun >= M_grid and bracket[0] <= candidate <= bracket[2]:
                x_star, M_prev = candidate % 1.0, float(-result.fun)
            else:
                x_star = float(grid[j])
        except ValueError as e:
            logger.warning(f"golden-section refinement failed ({e}); using grid maximizer")
            x_star = float(grid[j])
    ratio = abs(float(f_prev(np.array([x_star]))[0]) - x_star) / M_grid

    resample_error = None
    if config.resample:
        profile = TrigFunction.from_samples(cur_vals - grid)
        mids = grid + 0.5 / grid_size
        resample_error = float(np.max(np.abs(profile(mids) + mids - f_cur(mids))))
        logger.info(
            f"Resampled f_{n} on {grid_size} points, interpolation error {resample_error:.3e}"
        )

    logger.info(f"Level {n}: q_n={q_cur}, M_prev={M_prev:.6e}, x_star={x_star:.12f}")
    return RenormGeometry(
        level=n,
        sign=sign,
        f_prev=f_prev,
        f_cur=f_cur,
        m_prev=TrigFunction.from_samples(m_prev_vals),
        m_cur=TrigFunction.from_samples(m_cur_vals),
        M_prev=M_prev,
        M_cur=float(m_cur_vals.max()),
        x_star=x_star,
        x_star_ratio=ratio,
        grid=grid,
        f_prev_grid=prev_vals,
        f_cur_grid=cur_vals,
        resample_error=resample_error,
    )


def _arcs(starts: np.ndarray, ends: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.minimum(starts, ends)
    length = np.abs(ends - starts)
    return np.mod(lo, 1.0), length


def check_partition(
    f: CircleLift,
    cf: ContinuedFraction,
    n: int,
    x: float = 0.0,
    config: Optional[NumericsConfig] = None,
) -> PartitionReport:
    """
    Disjointness of I_n(F^j x), j < q_{n+1}, on the circle, plus the
    decompositions of J_n(x) and K_n(x).
    """
    config = config or f.config
    _check_level(f, cf, n, config)
    q_next = cf.qn(n + 1) if n + 1 <= cf.depth else None
    if q_next is None or q_next > 100_000:
        raise BudgetExceeded(f"q_{n + 1} unavailable or above 1e5", level=n)
    f_n = renormalized_map(f, cf, n)
    points = iterate_orbit(f, np.array([x]), q_next - 1)[:, 0]
    lo, length = _arcs(points, f_n(points))
    order = np.argsort(lo, kind="stable")
    lo, length = lo[order], length[order]
    gaps = np.append(lo[1:], lo[0] + 1.0) - (lo + length)
    worst = float(max(0.0, -float(gaps.min())))

    f_next = renormalized_map(f, cf, n + 1)
    point = np.array([x])
    image_n, image_next = f_n(point), f_next(point)
    j_defect = float(
        abs(abs(image_n - image_next) - (abs(image_n - point) + abs(image_next - point)))[0]
    )
    back1 = f_n.inverse(point)
    back2 = f_n.inverse(back1)
    pieces = abs(back1 - back2) + abs(point - back1) + abs(image_n - point)
    k_defect = float(abs(abs(image_n - back2) - pieces)[0])

    report = PartitionReport(
        level=n,
        intervals=q_next,
        worst_overlap=worst,
        disjoint=worst <= config.overlap_tol,
        j_decomposition_defect=j_defect,
        k_decomposition_defect=k_defect,
    )
    if not report.disjoint or max(j_defect, k_defect) > config.overlap_tol:
        logger.error(f"Partition check failed at level {n}: overlap {worst:.3e}")
        raise PartitionViolation(
            f"dynamical partition at level {n} overlaps by {worst:.3e}",
            worst_overlap=worst,
            j_defect=j_defect,
            k_defect=k_defect,
        )
    return report


class IterateJet(BaseModel):
    """Derivatives D^1..D^{s+1} f^k and D^0..D^s log Df^k at a batch of points"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    k: int
    s: int
    derivatives: Any
    log_derivatives: Any


def iterate_derivatives(f: CircleLift, k: int, s: int, x: Any) -> IterateJet:
    """
    Derivatives of f^k at x.

    log Df^k and its derivatives are Birkhoff sums of log Df chain-ruled along
    the orbit; D^{j+1} f^k = P_j(D^1 log Df^k, ..., D^j log Df^k) * Df^k.
    """
    if s >= f.order:
        raise DerivativeUnavailable(f"s={s} needs a lift of order > {s}, have C^{f.order}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = _as_array(x)
    orbit_jet = identity_jet(x, s)
    log_sum = np.zeros((s + 1,) + x.shape)
    point = x
    for _ in range(k):
        f_jet = f.jet(point, s + 1)
        log_sum += jet_compose(jet_log(f_jet[1:]), orbit_jet)
        orbit_jet = jet_compose(f_jet[: s + 1], orbit_jet)
        point = f_jet[0]
    df_k = np.exp(log_sum[0])
    derivatives = np.empty((s + 1,) + x.shape)
    derivatives[0] = df_k
    for j in range(1, s + 1):
        derivatives[j] = dr1_from_log([log_sum[i] for i in range(1, j + 1)], df_k)
    return IterateJet(k=k, s=s, derivatives=derivatives, log_derivatives=log_sum)


def distortion_report(
    f: CircleLift, cf: ContinuedFraction, n: int, config: Optional[NumericsConfig] = None
) -> DistortionReport:
    """
    Bounded-distortion quantities at level n: sup |log Df_n| against Var(log Df),
    the ratio m_n(x_star)/m_n(y) over K_{n-1}(x_star) against exp(3V), and
    m_n(x_star)/m_{n-1}(x_star) next to alpha_n.
    """
    config = config or f.config
    geometry = renorm_geometry(f, cf, n, config)
    grid = geometry.grid
    log_df = f.log_derivative_jet(grid, 1)
    variation = float(np.mean(np.abs(log_df[1])))
    log_dfn = iterate_derivatives(f, cf.qn(n), 0, grid).log_derivatives[0]

    x_star = np.array([geometry.x_star])
    f_prev = geometry.f_prev
    left = f_prev.inverse(f_prev.inverse(x_star))[0]
    right = f_prev(x_star)[0]
    ys = np.linspace(min(left, right), max(left, right), 129)
    m_star = abs(float(geometry.f_cur(x_star)[0]) - geometry.x_star)
    m_ys = np.abs(geometry.f_cur(ys) - ys)
    ratios = m_star / m_ys
    m_prev_star = abs(float(f_prev(x_star)[0]) - geometry.x_star)
    return DistortionReport(
        level=n,
        var_log_df=variation,
        log_dfn_sup=float(np.max(np.abs(log_dfn))),
        ratio_min=float(ratios.min()),
        ratio_max=float(ratios.max()),
        ratio_bound=math.exp(3 * variation),
        m_ratio=m_star / m_prev_star,
        alpha_n=float(cf.alpha_n(n)),
    )
