"""
Higher-derivative calculus: partial Bell polynomials, Faa di Bruno, the
log-derivative polynomials P_r and a small jet algebra built on them.

A jet is an array of shape (order + 1, ...) holding (g, Dg, ..., D^order g)
at a batch of points.
"""

import logging
import math
from functools import lru_cache
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import sympy

from .errors import IndexOutOfRange, LengthMismatch, NonpositiveDerivative

logger = logging.getLogger(__name__)

Monomial = Tuple[int, ...]

EXACT_COEFFICIENT_ORDER = 12


@lru_cache(maxsize=None)
def bell_index_set(r: int, j: int) -> Tuple[Tuple[int, ...], ...]:
    """
    Omega_{r,j}: tuples (c_1..c_{r-j+1}) with sum i*c_i = r and sum c_i = j.
    """
    if not 1 <= j <= r:
        raise IndexOutOfRange(f"need 1 <= j <= r, got r={r}, j={j}", r=r, j=j)
    width = r - j + 1
    members: List[Tuple[int, ...]] = []

    def fill(index: int, remaining_weight: int, remaining_count: int, prefix: List[int]) -> None:
        if index > width:
            if remaining_weight == 0 and remaining_count == 0:
                members.append(tuple(prefix))
            return
        for c in range(min(remaining_count, remaining_weight // index) + 1):
            prefix.append(c)
            fill(index + 1, remaining_weight - index * c, remaining_count - c, prefix)
            prefix.pop()

    fill(1, r, j, [])
    return tuple(members)


@lru_cache(maxsize=None)
def bell_coefficients(r: int, j: int) -> Tuple[Tuple[Tuple[int, ...], int], ...]:
    """Members of Omega_{r,j} paired with r!/(prod c_i! (i!)^c_i)"""
    if r > EXACT_COEFFICIENT_ORDER:
        logger.debug(f"Bell coefficients for r={r} exceed 64-bit range, using big integers")
    result = []
    for member in bell_index_set(r, j):
        denominator = 1
        for i, c in enumerate(member, start=1):
            denominator *= math.factorial(c) * math.factorial(i) ** c
        result.append((member, math.factorial(r) // denominator))
    return tuple(result)


def bell_eval(r: int, j: int, x: Sequence[Any]) -> Any:
    """
    Partial Bell polynomial B_{r,j}(x_1, ..., x_{r-j+1}).

    Entries of x may be floats, Fractions or numpy arrays.
    """
    terms = bell_coefficients(r, j)
    width = r - j + 1
    if len(x) < width:
        raise LengthMismatch(f"B_{{{r},{j}}} needs {width} arguments, got {len(x)}")
    total: Any = 0
    for member, coefficient in terms:
        term: Any = coefficient
        for i, c in enumerate(member):
            if c:
                term = term * x[i] ** c
        total = total + term
    return total


def bell_table(x: Sequence[Any], order: int) -> List[List[Any]]:
    """
    All B_{m,k}(x) for 0 <= k <= m <= order via
    B_{m,k} = sum_i C(m-1, i-1) x_i B_{m-i,k-1}.
    """
    zero = x[0] * 0 if len(x) else 0
    table: List[List[Any]] = [[zero + 1]]
    for m in range(1, order + 1):
        row: List[Any] = [zero]
        for k in range(1, m + 1):
            acc = zero
            for i in range(1, m - k + 2):
                acc = acc + math.comb(m - 1, i - 1) * x[i - 1] * table[m - i][k - 1]
            row.append(acc)
        table.append(row)
    return table


def faa_di_bruno(dg: Sequence[Any], dh: Sequence[Any], r: int) -> Any:
    """
    D^r(g o h)(x) from dg = (D^1 g .. D^r g at h(x)) and dh = (D^1 h .. D^r h at x).
    """
    if r < 1:
        raise IndexOutOfRange(f"r must be >= 1, got {r}")
    if len(dg) < r or len(dh) < r:
        raise LengthMismatch(f"need {r} derivatives of g and h, got {len(dg)} and {len(dh)}")
    table = bell_table(list(dh[:r]), r)
    total: Any = 0
    for j in range(1, r + 1):
        total = total + dg[j - 1] * table[r][j]
    return total


@lru_cache(maxsize=None)
def pr_polynomial(r: int) -> Dict[Monomial, int]:
    """
    Sparse term map of P_r on X_1..X_r.

    P_0 = 1, P_{r+1} = X_1 P_r + sum_i X_{i+1} dP_r/dX_i.
    """
    if r < 0:
        raise IndexOutOfRange(f"r must be >= 0, got {r}")
    if r == 0:
        return {(): 1}
    previous = pr_polynomial(r - 1)
    terms: Dict[Monomial, int] = {}
    for exponents, coefficient in previous.items():
        padded = list(exponents) + [0]
        lifted = padded.copy()
        lifted[0] += 1
        key = tuple(lifted)
        terms[key] = terms.get(key, 0) + coefficient
        for i in range(len(exponents)):
            if padded[i] == 0:
                continue
            shifted = padded.copy()
            shifted[i] -= 1
            shifted[i + 1] += 1
            key = tuple(shifted)
            terms[key] = terms.get(key, 0) + coefficient * padded[i]
    return {key: value for key, value in terms.items() if value}


def pr_expression(r: int) -> sympy.Expr:
    """P_r as a sympy expression in X1..Xr"""
    symbols = sympy.symbols(f"X1:{r + 1}") if r else ()
    expression = sympy.Integer(0)
    for exponents, coefficient in pr_polynomial(r).items():
        term = sympy.Integer(coefficient)
        for symbol, power in zip(symbols, exponents):
            term *= symbol**power
        expression += term
    return sympy.expand(expression)


def pr_eval(r: int, x: Sequence[Any]) -> Any:
    """Evaluate P_r at (x_1..x_r); exact on Fractions"""
    if len(x) < r:
        raise LengthMismatch(f"P_{r} needs {r} arguments, got {len(x)}")
    total: Any = 0
    for exponents, coefficient in pr_polynomial(r).items():
        term: Any = coefficient
        for value, power in zip(x, exponents):
            if power:
                term = term * value**power
        total = total + term
    return total


def dr1_from_log(dlog: Sequence[Any], Dg: Any) -> Any:
    """D^{r+1} g = P_r(D^1 log Dg, ..., D^r log Dg) * Dg with r = len(dlog)"""
    if np.any(np.asarray(Dg) <= 0):
        raise NonpositiveDerivative("Dg must be positive (orientation preserving)")
    return pr_eval(len(dlog), dlog) * Dg


# Jet algebra -----------------------------------------------------------------


def jet_compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """
    Jet of g o h from the jet of g taken at h(x) and the jet of h at x.
    """
    order = outer.shape[0] - 1
    result = np.empty(np.broadcast_shapes(outer.shape, inner.shape), dtype=float)
    result[0] = outer[0]
    if order == 0:
        return result
    table = bell_table([inner[i] for i in range(1, order + 1)], order)
    for m in range(1, order + 1):
        acc = 0.0
        for j in range(1, m + 1):
            acc = acc + outer[j] * table[m][j]
        result[m] = acc
    return result


def jet_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Leibniz rule"""
    order = a.shape[0] - 1
    result = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=float)
    for m in range(order + 1):
        for i in range(m + 1):
            result[m] = result[m] + math.comb(m, i) * a[i] * b[m - i]
    return result


def jet_inverse(forward: np.ndarray, preimage: Any) -> np.ndarray:
    """
    Jet of f^{-1} at y = f(x) from the jet of f at x; preimage is x.
    """
    order = forward.shape[0] - 1
    result = np.zeros_like(forward, dtype=float)
    result[0] = preimage
    if order == 0:
        return result
    result[1] = 1.0 / forward[1]
    for m in range(2, order + 1):
        table = bell_table([result[i] for i in range(1, m + 1)], m)
        acc = 0.0
        for j in range(2, m + 1):
            acc = acc + forward[j] * table[m][j]
        result[m] = -acc / forward[1]
    return result


def jet_affine(outer: np.ndarray, slope: Any) -> np.ndarray:
    """Jet of x -> g(c + slope*x) given the jet of g at c + slope*x"""
    powers = np.asarray(slope, dtype=float) ** np.arange(outer.shape[0]).reshape(
        (-1,) + (1,) * (outer.ndim - 1)
    )
    return outer * powers


def jet_log(a: np.ndarray) -> np.ndarray:
    """Jet of log(a) for a > 0"""
    order = a.shape[0] - 1
    outer = np.empty_like(a, dtype=float)
    outer[0] = np.log(a[0])
    for j in range(1, order + 1):
        outer[j] = (-1) ** (j - 1) * math.factorial(j - 1) / a[0] ** j
    return jet_compose(outer, a)


def jet_exp(a: np.ndarray) -> np.ndarray:
    """Jet of exp(a)"""
    value = np.exp(a[0])
    outer = np.broadcast_to(value, a.shape).astype(float)
    return jet_compose(outer, a)


def jet_reciprocal(a: np.ndarray) -> np.ndarray:
    """Jet of 1/a for a != 0"""
    order = a.shape[0] - 1
    outer = np.empty_like(a, dtype=float)
    for j in range(order + 1):
        outer[j] = (-1) ** j * math.factorial(j) / a[0] ** (j + 1)
    return jet_compose(outer, a)


def identity_jet(x: np.ndarray, order: int) -> np.ndarray:
    """Jet of the identity map at x"""
    x = np.asarray(x, dtype=float)
    jet = np.zeros((order + 1,) + x.shape, dtype=float)
    jet[0] = x
    if order >= 1:
        jet[1] = 1.0
    return jet


def constant_jet(value: Any, shape: Tuple[int, ...], order: int) -> np.ndarray:
    jet = np.zeros((order + 1,) + shape, dtype=float)
    jet[0] = value
    return jet
