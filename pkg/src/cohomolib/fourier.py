"""
Cohomological equation over a rigid rotation, u(x + alpha) - u(x) = psi(x).

Solved mode by mode, u_k = psi_k / (e^{2 pi i k alpha} - 1), with k*alpha
reduced mod 1 in extended precision before rounding. Also builds the
finite-depth Liouville counterexample whose formal solution has u_k = 1 on
a sparse set of modes.
"""

import logging
from typing import Any, List, Optional, Tuple

import numpy as np

from .arithmetic import (
    ContinuedFraction,
    coerce_alpha,
    fractional_multiples,
    liouville_levels,
    require_irrational,
)
from .errors import DivisorUnderflow, NotLiouvilleEnough
from .functions import PeriodicFunction, TrigFunction
from .models import SmallDivisorReport, SolutionBound

logger = logging.getLogger(__name__)

UNDERFLOW = 1e-300
GROWTH_FACTOR = 1e6


def _as_trig(psi: PeriodicFunction, grid_size: int) -> TrigFunction:
    return psi if isinstance(psi, TrigFunction) else psi.to_trig(grid_size)


def divisors(cf: ContinuedFraction, K: int) -> np.ndarray:
    """e^{2 pi i k alpha} - 1 for k = 1..K"""
    theta = fractional_multiples(cf, range(1, K + 1))
    return np.exp(2j * np.pi * theta) - 1.0


def solve_rotation(
    psi: PeriodicFunction, alpha: Any, K: int, grid_size: int = 4096
) -> Tuple[TrigFunction, SmallDivisorReport]:
    """
    Solve u o R_alpha - u = psi - mean(psi) on the modes 0 < |k| <= K.

    Args:
        psi: Right-hand side; resampled onto grid_size points if not spectral
        alpha: ContinuedFraction, alpha spec string or number
        K: Highest retained mode, K < N/2

    Returns:
        (u, report) with u normalized to zero mean
    """
    cf = coerce_alpha(alpha)
    spectral = _as_trig(psi, grid_size)
    n = spectral.grid_size
    if not 0 <= K < n // 2:
        raise ValueError(f"K={K} outside 0..{n // 2 - 1} for a grid of {n}")

    psi_hat = spectral.coefficients[1 : K + 1].copy()
    removed = spectral.mean
    divisor = divisors(cf, K) if K else np.zeros(0, dtype=complex)
    divisor_abs = np.abs(divisor)
    if K and np.any(divisor_abs < UNDERFLOW):
        k = int(np.argmin(divisor_abs)) + 1
        logger.error(f"Divisor underflow at mode {k}")
        raise DivisorUnderflow(f"|e^(2 pi i k alpha) - 1| < {UNDERFLOW} at k={k}", mode=k)

    u_hat = psi_hat / divisor if K else psi_hat
    coefficients = np.zeros_like(spectral.coefficients)
    coefficients[1 : K + 1] = u_hat
    u = TrigFunction(coefficients, spectral.declared_order)

    grid = np.arange(n) / n
    target = spectral(grid) - removed
    residual = float(np.max(np.abs(u(grid + cf.float_alpha()) - u(grid) - target), initial=0.0))
    psi_max = float(np.max(np.abs(psi_hat), initial=0.0))
    u_max = float(np.max(np.abs(u_hat), initial=0.0))
    growth = u_max > GROWTH_FACTOR * psi_max if psi_max else False
    if growth:
        logger.warning(
            f"Small-divisor growth: max|u_k| = {u_max:.3e} vs max|psi_k| = {psi_max:.3e}"
        )

    report = SmallDivisorReport(
        modes=list(range(1, K + 1)),
        psi_abs=np.abs(psi_hat).tolist(),
        divisor_abs=divisor_abs.tolist(),
        u_abs=np.abs(u_hat).tolist(),
        truncation=K,
        removed_mean=removed,
        residual=residual,
        growth=growth,
    )
    logger.info(f"Rotation solve with K={K}: residual {residual:.3e}")
    return u, report


def solve_rotation_diophantine_bound(
    cf: ContinuedFraction,
    C: float,
    tau: float,
    psi: PeriodicFunction,
    K: int,
    grid_size: int = 4096,
) -> SolutionBound:
    """
    sup|u| <= sum_k 2 |psi_k| / (4 C k^-tau) when ||k alpha|| >= C k^-tau on the
    retained modes, next to the sup of the actual solution.
    """
    spectral = _as_trig(psi, grid_size)
    u, _ = solve_rotation(spectral, cf, K, grid_size)
    k = np.arange(1, K + 1)
    theta = fractional_multiples(cf, range(1, K + 1))
    distance = np.minimum(theta, 1.0 - theta)
    required = C * k.astype(float) ** (-tau)
    failing = np.flatnonzero(distance < required)
    psi_abs = np.abs(spectral.coefficients[1 : K + 1])
    bound = float(np.sum(2.0 * psi_abs / (4.0 * required)))
    return SolutionBound(
        C=C,
        tau=tau,
        modes=K,
        bound=bound,
        u_sup=float(np.max(np.abs(u.samples()))),
        condition_holds=len(failing) == 0,
        worst_mode=int(k[failing[0]]) if len(failing) else None,
    )


def liouville_counterexample(
    cf: ContinuedFraction, J: int, tau: float = 2.0, grid_size: int = 4096
) -> Tuple[TrigFunction, List[int]]:
    """
    psi = sum_{j<=J} (e^{2 pi i n_j alpha} - 1) e^{2 pi i n_j x} + c.c.

    The modes n_j are the q_m with m in L(alpha, tau), the J with the smallest
    beta_m, listed in increasing order. Each formal solution coefficient at n_j
    is exactly 1.
    """
    if J < 0:
        raise ValueError(f"J must be >= 0, got {J}")
    if J == 0:
        return TrigFunction.constant(0.0, grid_size), []
    require_irrational(cf, "liouville_counterexample")
    levels = liouville_levels(cf, tau).levels
    usable = [m for m in levels if cf.qn(m) < grid_size // 2]
    if len(usable) < J:
        raise NotLiouvilleEnough(
            f"{len(usable)} qualifying modes at depth {cf.depth}, need {J}",
            levels=levels,
        )
    strongest = sorted(usable, key=lambda m: float(cf.beta_n(m)))[:J]
    witness = sorted(cf.qn(m) for m in strongest)
    coefficients = np.zeros(grid_size // 2 + 1, dtype=complex)
    coefficients[witness] = divisors(cf, witness[-1])[np.array(witness) - 1]
    logger.info(f"Liouville counterexample on modes {witness}")
    return TrigFunction(coefficients), witness
