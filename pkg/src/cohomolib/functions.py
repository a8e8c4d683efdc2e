"""
Periodic real functions on the circle.

PeriodicFunction is the common interface: pointwise jets, grid samples and the
points on which sup norms are taken. TrigFunction is the spectral
representation used for maps and cocycles; LinearCombination keeps sums lazy.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import OrderUnavailable

logger = logging.getLogger(__name__)

SMOOTH_ORDER = 64
CHUNK = 4096


class PeriodicFunction(ABC):
    """Base class for 1-periodic real functions"""

    def __init__(self, declared_order: int = SMOOTH_ORDER):
        self.declared_order = declared_order

    @abstractmethod
    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        """Array (order + 1, *x.shape) of derivatives 0..order at x"""
        pass

    @abstractmethod
    def sample_points(self, grid_size: int) -> np.ndarray:
        """Points where sup norms of this function are taken"""
        pass

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.jet(np.asarray(x, dtype=float), 0)[0]

    def derivative(self, x: np.ndarray, s: int) -> np.ndarray:
        self.check_order(s)
        return self.jet(np.asarray(x, dtype=float), s)[s]

    def check_order(self, r: int) -> None:
        if r > self.declared_order:
            raise OrderUnavailable(
                f"order {r} requested from a C^{self.declared_order} function",
                requested=r,
                declared=self.declared_order,
            )

    def samples(self, grid_size: int) -> np.ndarray:
        return self(np.arange(grid_size) / grid_size)

    def to_trig(self, grid_size: int) -> "TrigFunction":
        """Resample onto a uniform grid"""
        return TrigFunction.from_samples(self.samples(grid_size), self.declared_order)

    def __add__(self, other: "PeriodicFunction") -> "PeriodicFunction":
        return LinearCombination([(1.0, self), (1.0, other)])

    def __sub__(self, other: "PeriodicFunction") -> "PeriodicFunction":
        return LinearCombination([(1.0, self), (-1.0, other)])

    def __neg__(self) -> "PeriodicFunction":
        return LinearCombination([(-1.0, self)])

    def __mul__(self, scalar: float) -> "PeriodicFunction":
        return LinearCombination([(float(scalar), self)])

    __rmul__ = __mul__


class TrigFunction(PeriodicFunction):
    """
    Real trigonometric polynomial sum_k c_k e^{2 pi i k x}, stored by the
    coefficients c_0..c_{N/2} (c_{-k} = conj c_k, Nyquist mode discarded).
    """

    def __init__(
        self,
        coefficients: np.ndarray,
        declared_order: int = SMOOTH_ORDER,
        drop_below: float = 0.0,
    ):
        super().__init__(declared_order)
        coefficients = np.asarray(coefficients, dtype=complex).copy()
        coefficients[0] = coefficients[0].real
        self.coefficients = coefficients
        self.grid_size = 2 * (len(coefficients) - 1)
        magnitude = np.abs(coefficients[1:])
        scale = max(float(np.max(magnitude, initial=0.0)), abs(coefficients[0].real), 1e-300)
        active = np.flatnonzero(magnitude > drop_below * scale) + 1
        self._modes = active.astype(float)
        self._active = coefficients[active]

    @classmethod
    def from_samples(
        cls, values: np.ndarray, declared_order: int = SMOOTH_ORDER, drop_below: float = 1e-17
    ) -> "TrigFunction":
        values = np.asarray(values, dtype=float)
        n = len(values)
        coefficients = np.fft.rfft(values) / n
        coefficients[-1] = 0.0
        return cls(coefficients, declared_order, drop_below)

    @classmethod
    def from_modes(
        cls, modes: Dict[int, complex], grid_size: int, declared_order: int = SMOOTH_ORDER
    ) -> "TrigFunction":
        """Build from c_k for k >= 0; k must be below grid_size/2"""
        coefficients = np.zeros(grid_size // 2 + 1, dtype=complex)
        for k, value in modes.items():
            if not 0 <= k < grid_size // 2:
                raise ValueError(f"mode {k} outside grid of size {grid_size}")
            coefficients[k] = value
        return cls(coefficients, declared_order)

    @classmethod
    def from_callable(
        cls, fn: Callable[[np.ndarray], np.ndarray], grid_size: int, **kwargs: float
    ) -> "TrigFunction":
        samples = fn(np.arange(grid_size) / grid_size)
        return cls.from_samples(samples, **kwargs)  # type: ignore[arg-type]

    @classmethod
    def constant(cls, value: float, grid_size: int) -> "TrigFunction":
        return cls.from_modes({0: value}, grid_size)

    @property
    def mean(self) -> float:
        return float(self.coefficients[0].real)

    @property
    def max_mode(self) -> int:
        return int(self._modes.max()) if len(self._modes) else 0

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros((order + 1, flat.size), dtype=float)
        out[0] = self.coefficients[0].real
        if len(self._modes):
            frequencies = 2j * np.pi * self._modes
            weights = [self._active * frequencies**j for j in range(order + 1)]
            for start in range(0, flat.size, CHUNK):
                block = flat[start : start + CHUNK]
                phases = np.exp(np.outer(block, frequencies))
                for j in range(order + 1):
                    out[j, start : start + CHUNK] += 2.0 * (phases @ weights[j]).real
        return out.reshape((order + 1,) + x.shape)

    def sample_points(self, grid_size: int) -> np.ndarray:
        n = max(grid_size, self.grid_size, 8 * self.max_mode)
        return np.arange(n) / n

    def samples(self, grid_size: Optional[int] = None) -> np.ndarray:
        n = grid_size or self.grid_size
        if n == self.grid_size:
            return np.fft.irfft(self.coefficients * n, n=n)
        return super().samples(n)

    def derivative_function(self, s: int = 1) -> "TrigFunction":
        k = np.arange(len(self.coefficients))
        return TrigFunction(self.coefficients * (2j * np.pi * k) ** s, self.declared_order - s)

    def spectral_tail(self, fraction: float = 0.25) -> float:
        """Sum of |c_k| over the top part of the spectrum; an interpolation error proxy"""
        cutoff = int(len(self.coefficients) * (1 - fraction))
        return float(2.0 * np.abs(self.coefficients[cutoff:]).sum())

    def resampled(self, grid_size: int) -> "TrigFunction":
        """Same polynomial on a different grid (truncating or zero padding)"""
        coefficients = np.zeros(grid_size // 2 + 1, dtype=complex)
        keep = min(len(coefficients), len(self.coefficients)) - 1
        coefficients[:keep] = self.coefficients[:keep]
        return TrigFunction(coefficients, self.declared_order)


class LinearCombination(PeriodicFunction):
    """Lazy finite linear combination of periodic functions"""

    def __init__(self, terms: Sequence[Tuple[float, PeriodicFunction]]):
        flattened: List[Tuple[float, PeriodicFunction]] = []
        for weight, function in terms:
            if isinstance(function, LinearCombination):
                flattened.extend((weight * w, f) for w, f in function.terms)
            else:
                flattened.append((weight, function))
        super().__init__(min((f.declared_order for _, f in flattened), default=SMOOTH_ORDER))
        self.terms = flattened

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros((order + 1,) + x.shape, dtype=float)
        for weight, function in self.terms:
            if weight:
                total += weight * function.jet(x, order)
        return total

    def sample_points(self, grid_size: int) -> np.ndarray:
        points = [f.sample_points(grid_size) for _, f in self.terms]
        return np.unique(np.mod(np.concatenate(points), 1.0)) if points else np.zeros(1)


class ZeroFunction(PeriodicFunction):
    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.zeros((order + 1,) + x.shape, dtype=float)

    def sample_points(self, grid_size: int) -> np.ndarray:
        return np.arange(grid_size) / grid_size


def named_function(name: str, grid_size: int) -> TrigFunction:
    """
    Named cocycles: cos, sin, cosK / sinK (mode K), sawtooth (smoothed), const:c,
    modes:k=a+bj;...
    """
    name = name.strip()
    if name.startswith("const:"):
        return TrigFunction.constant(float(name.split(":", 1)[1]), grid_size)
    if name.startswith("modes:"):
        modes: Dict[int, complex] = {}
        for item in name.split(":", 1)[1].split(";"):
            if item.strip():
                k, value = item.split("=")
                modes[int(k)] = complex(value.replace(" ", ""))
        return TrigFunction.from_modes(modes, grid_size)
    if name == "sawtooth":
        # sum_k (-1)^(k+1) sin(2 pi k x)/(pi k), damped by a Gaussian window
        modes = {
            k: (-1) ** (k + 1) / (np.pi * k) * np.exp(-((k / 8.0) ** 2)) / 2j
            for k in range(1, 33)
        }
        return TrigFunction.from_modes(modes, grid_size)
    for prefix, factory in (("cos", lambda k: {k: 0.5}), ("sin", lambda k: {k: -0.5j})):
        if name.startswith(prefix):
            suffix = name[len(prefix) :]
            k = int(suffix) if suffix else 1
            return TrigFunction.from_modes(factory(k), grid_size)
    raise ValueError(f"Unknown function spec: {name}")
