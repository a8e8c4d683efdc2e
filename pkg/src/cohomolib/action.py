"""
Fibered Z^2-actions on the plane.

A FiberedPair (g, xi) acts by (x, y) -> (g(x), y + xi(x)); a FiberedAction is a
commuting pair of generators. Conjugation by pairs and change of basis by
unimodular matrices act on them; a circle map with a cocycle induces one.
"""

import itertools
import logging
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .arithmetic import ContinuedFraction, convergent_matrix, require_irrational
from .circlemap import (
    Composite,
    InverseMap,
    IterateMap,
    LineMap,
    Translation,
    renormalized_map,
)
from .cocycle import ComposedFunction, birkhoff_function
from .errors import BudgetExceeded, FixedPointInWindow, NonPeriodicConjugator, NotUnimodular
from .functions import LinearCombination, PeriodicFunction, ZeroFunction
from .models import CoboundaryWitness, FixedPointScan, NumericsConfig

logger = logging.getLogger(__name__)

Matrix = Tuple[Tuple[int, int], Tuple[int, int]]

MAX_WORD = 10_000


def _compose_maps(g: LineMap, h: LineMap) -> LineMap:
    """g o h, folding translations into iterates"""
    if isinstance(g, Translation) and g.shift == 0.0:
        return h
    if isinstance(h, Translation) and h.shift == 0.0:
        return g
    if isinstance(g, Translation) and isinstance(h, Translation):
        return Translation(g.shift + h.shift)
    if isinstance(g, Translation) and isinstance(h, IterateMap):
        return IterateMap(h.base, h.k, h.shift + g.shift)
    return Composite([g, h])


def _plus(a: PeriodicFunction, b: PeriodicFunction) -> PeriodicFunction:
    if isinstance(a, ZeroFunction):
        return b
    if isinstance(b, ZeroFunction):
        return a
    return a + b


def _pull(xi: PeriodicFunction, h: LineMap) -> PeriodicFunction:
    if isinstance(xi, ZeroFunction):
        return xi
    if isinstance(h, Translation) and float(h.shift).is_integer():
        return xi
    return ComposedFunction(xi, h)


class FiberedPair(BaseModel):
    """(x, y) -> (base(x), y + fiber(x))"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    base: Any
    fiber: Any

    def apply(self, x: Any, y: Any) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return self.base(x), np.asarray(y, dtype=float) + self.fiber(x)

    def compose(self, other: "FiberedPair") -> "FiberedPair":
        """self o other: (g, xi) o (h, eta) = (g o h, eta + xi o h)"""
        return FiberedPair(
            base=_compose_maps(self.base, other.base),
            fiber=_plus(other.fiber, _pull(self.fiber, other.base)),
        )

    def inverse(self) -> "FiberedPair":
        if isinstance(self.base, Translation):
            backward: LineMap = self.base.power(-1)
        else:
            backward = InverseMap(self.base)
        fiber = self.fiber if isinstance(self.fiber, ZeroFunction) else -_pull(self.fiber, backward)
        return FiberedPair(base=backward, fiber=fiber)

    def power(self, k: int) -> "FiberedPair":
        if k == 0:
            return identity_pair()
        if isinstance(self.base, (Translation, IterateMap)):
            base: LineMap = self.base.power(k)
        else:
            base = IterateMap(self.base, k)
        return FiberedPair(base=base, fiber=birkhoff_function(self.fiber, self.base, k))


def identity_pair() -> FiberedPair:
    return FiberedPair(base=Translation(0.0), fiber=ZeroFunction())


class FiberedAction(BaseModel):
    """Z^2-action given by the images of (1, 0) and (0, 1)"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    g10: FiberedPair
    g01: FiberedPair
    matrix: Optional[Matrix] = None

    def act(self, m: int, n: int) -> FiberedPair:
        return act(self, m, n)


def induced_action(f: LineMap, phi: PeriodicFunction) -> FiberedAction:
    """Gamma(f, phi): (1, 0) -> (x - 1, 0), (0, 1) -> (f, phi)"""
    return FiberedAction(
        g10=FiberedPair(base=Translation(-1.0), fiber=ZeroFunction(phi.declared_order)),
        g01=FiberedPair(base=f, fiber=phi),
    )


def act(Phi: FiberedAction, m: int, n: int) -> FiberedPair:
    """Phi(m, n) = g10^m o g01^n"""
    if abs(m) + abs(n) > MAX_WORD:
        raise BudgetExceeded(f"word ({m}, {n}) exceeds evaluation budget {MAX_WORD}")
    return Phi.g10.power(m).compose(Phi.g01.power(n))


def conjugate(
    Phi: FiberedAction,
    g: Optional[LineMap],
    xi: Optional[PeriodicFunction],
    points: Optional[np.ndarray] = None,
) -> FiberedAction:
    """
    T_{(g, xi)}: each generator (f, psi) becomes
    (g f g^-1, (psi + xi o f - xi) o g^-1).
    """
    g = g or Translation(0.0)
    xi = xi or ZeroFunction()
    sample = points if points is not None else np.linspace(0.0, 1.0, 65)
    if g.translation_defect(sample) > 1e-9:
        raise NonPeriodicConjugator("conjugator does not commute with integer translations")
    backward = InverseMap(g) if not isinstance(g, Translation) else g.power(-1)

    def transform(pair: FiberedPair) -> FiberedPair:
        if isinstance(g, Translation) and g.shift == 0.0:
            base = pair.base
        else:
            base = Composite([g, pair.base, backward])
        fiber = pair.fiber
        if not isinstance(xi, ZeroFunction):
            fiber = LinearCombination([(1.0, fiber), (1.0, _pull(xi, pair.base)), (-1.0, xi)])
        return FiberedPair(base=base, fiber=_pull(fiber, backward))

    return FiberedAction(g10=transform(Phi.g10), g01=transform(Phi.g01), matrix=Phi.matrix)


def conjugate_by_pair(Phi: FiberedAction, w: FiberedPair) -> FiberedAction:
    """w Phi w^-1, i.e. T_{(g, xi)} for w = (g, xi)"""
    return FiberedAction(
        g10=w.compose(Phi.g10).compose(w.inverse()),
        g01=w.compose(Phi.g01).compose(w.inverse()),
        matrix=Phi.matrix,
    )


def _integer_inverse(A: Matrix) -> Matrix:
    (a, b), (c, d) = A
    det = a * d - b * c
    if det not in (1, -1):
        raise NotUnimodular(f"det {det} is not +-1", det=det)
    return ((d * det, -b * det), (-c * det, a * det))


def rebase(Phi: FiberedAction, A: Matrix) -> FiberedAction:
    """U_A: generators become Phi(A^-1 e_1) and Phi(A^-1 e_2)"""
    inverse = _integer_inverse(A)
    (a, b), (c, d) = inverse
    return FiberedAction(g10=act(Phi, a, c), g01=act(Phi, b, d), matrix=A)


def renormalize(
    f: LineMap,
    phi: PeriodicFunction,
    cf: ContinuedFraction,
    n: int,
    config: Optional[NumericsConfig] = None,
) -> FiberedAction:
    """
    Gamma_n(phi) = U_{A_n} Gamma(f, phi), built directly with generators
    (f_{n-1}, phi_{n-1}) and (f_n, phi_n).
    """
    config = config or NumericsConfig()
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    require_irrational(cf, "renormalize")
    if cf.qn(n) > config.budget_qn:
        raise BudgetExceeded(f"q_{n} = {cf.qn(n)} exceeds budget {config.budget_qn}", q_n=cf.qn(n))
    matrix, _ = convergent_matrix(cf, n)
    return FiberedAction(
        g10=FiberedPair(
            base=renormalized_map(f, cf, n - 1), fiber=birkhoff_function(phi, f, cf.qn(n - 1))
        ),
        g01=FiberedPair(base=renormalized_map(f, cf, n), fiber=birkhoff_function(phi, f, cf.qn(n))),
        matrix=matrix,
    )


def pair_distance(a: FiberedPair, b: FiberedPair, points: np.ndarray) -> float:
    """sup over points of the base and fiber differences"""
    return float(
        max(
            np.max(np.abs(a.base(points) - b.base(points))),
            np.max(np.abs(a.fiber(points) - b.fiber(points))),
        )
    )


def commutator_defect(Phi: FiberedAction, points: Optional[np.ndarray] = None) -> float:
    """|g10 g01 - g01 g10| on base and fiber"""
    points = points if points is not None else np.linspace(0.0, 1.0, 257)
    return pair_distance(Phi.g10.compose(Phi.g01), Phi.g01.compose(Phi.g10), points)


def fixed_point_scan(
    Phi: FiberedAction, check_range: int = 3, points: Optional[np.ndarray] = None
) -> FixedPointScan:
    """min |f^{m,n}(x) - x| over the grid for (m, n) != 0 with |m|, |n| <= check_range"""
    points = points if points is not None else np.arange(512) / 512
    worst, worst_pair = np.inf, (0, 0)
    for m, n in itertools.product(range(-check_range, check_range + 1), repeat=2):
        if (m, n) == (0, 0):
            continue
        base = act(Phi, m, n).base
        gap = float(np.min(np.abs(base(points) - points)))
        if gap < worst:
            worst, worst_pair = gap, (m, n)
    return FixedPointScan(
        check_range=check_range,
        min_gap=worst,
        worst_pair=worst_pair,
        fixed_point_free=worst > 1e-12,
    )


def flatness_test(
    Phi: FiberedAction,
    x_star: float,
    tol: float = 1e-7,
    samples: int = 257,
    check_range: int = 1,
) -> CoboundaryWitness:
    """
    sup |psi^{1,0}| on [x_star, f^{0,1}(x_star)] and sup |psi^{0,1}| on
    [x_star, f^{1,0}(x_star)]; both within tol witness a coboundary.

    The witness only counts for actions whose base maps f^{m,n} are fixed-point
    free. That is scanned for |m|, |n| <= check_range first and a failed scan
    fails the test.
    """
    scan = fixed_point_scan(Phi, check_range, np.arange(128) / 128)
    start = np.array([x_star])
    end01 = float(Phi.g01.base(start)[0])
    end10 = float(Phi.g10.base(start)[0])
    points_a = np.linspace(min(x_star, end01), max(x_star, end01), samples)
    points_b = np.linspace(min(x_star, end10), max(x_star, end10), samples)
    sup_10 = float(np.max(np.abs(Phi.g10.fiber(points_a))))
    sup_01 = float(np.max(np.abs(Phi.g01.fiber(points_b))))
    if not scan.fixed_point_free:
        logger.warning(
            f"f^{scan.worst_pair} has a fixed point (gap {scan.min_gap:.3e}); "
            "not a flatness witness"
        )
    passed = scan.fixed_point_free and sup_10 <= tol and sup_01 <= tol
    if not passed:
        logger.info(f"Flatness fails at x_star={x_star}: {sup_10:.3e}, {sup_01:.3e}")
    return CoboundaryWitness(
        passed=passed,
        sup_10=sup_10,
        sup_01=sup_01,
        tol=tol,
        fixed_point_free=scan.fixed_point_free,
    )


class LineTransfer:
    """
    Solution of u o f - u = phi on a window of fundamental domains of a
    fixed-point-free f.

    On D = [x0, f(x0)) u is blend(s) * phi(f^-1 x) with s the position in D,
    blend 0 on the first third and 1 on the last; elsewhere it is transported
    by the equation.
    """

    def __init__(
        self,
        f: LineMap,
        phi: Callable[[np.ndarray], np.ndarray],
        x0: float,
        domains: int,
        blend: Callable[[np.ndarray], np.ndarray],
    ):
        self.f = f
        self.phi = phi
        self.x0 = float(x0)
        self.domains = domains
        self.blend = blend
        self.width = float(f(np.array([x0]))[0]) - self.x0
        if abs(self.width) < 1e-14:
            raise FixedPointInWindow(f"f(x0) = x0 at x0 = {x0}", x0=x0)
        self.window = self._window()

    def _window(self) -> Tuple[float, float]:
        lo = IterateMap(self.f, -self.domains)(np.array([self.x0]))[0]
        hi = IterateMap(self.f, self.domains)(np.array([self.x0]))[0]
        return float(min(lo, hi)), float(max(lo, hi))

    def _position(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x0) / self.width

    def _on_domain(self, x: np.ndarray) -> np.ndarray:
        s = self._position(x)
        return self.blend(3.0 * s - 1.0) * self.phi(self.f.inverse(x))

    def __call__(self, x: Any) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x.copy()
        acc = np.zeros(x.shape)
        for _ in range(self.domains + 1):
            above = self._position(y) >= 1.0
            if not np.any(above):
                break
            back = self.f.inverse(y[above])
            acc[above] += self.phi(back)
            y[above] = back
        for _ in range(self.domains + 1):
            below = self._position(y) < 0.0
            if not np.any(below):
                break
            acc[below] -= self.phi(y[below])
            y[below] = self.f(y[below])
        s = self._position(y)
        if np.any((s < 0.0) | (s >= 1.0)):
            raise ValueError(f"points outside the window {self.window}")
        return self._on_domain(y) + acc

    def residual(self, samples: int = 513) -> float:
        """sup |u(f x) - u(x) - phi(x)| over the window minus its last domain"""
        lo, hi = self.window
        last = float(IterateMap(self.f, self.domains - 1)(np.array([self.x0]))[0])
        first = float(IterateMap(self.f, -self.domains)(np.array([self.x0]))[0])
        a, b = (first, last) if self.width > 0 else (last, first)
        x = np.linspace(min(a, b), max(a, b), samples)
        return float(np.max(np.abs(self(self.f(x)) - self(x) - self.phi(x))))


def solve_line_cohomology(
    f: LineMap,
    phi: Callable[[np.ndarray], np.ndarray],
    x0: float,
    domains: int = 2,
    blend: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> LineTransfer:
    """Transfer function for phi over f on the window [f^-K(x0), f^K(x0)]"""
    if blend is None:
        from .coboundary import SmoothStep

        blend = SmoothStep()
    transfer = LineTransfer(f, phi, x0, domains, blend)
    logger.debug(f"Line transfer on {transfer.window}, residual {transfer.residual():.3e}")
    return transfer
