"""
Continued-fraction machinery for rotation numbers.

Three numeric regimes: exact rationals (Fraction), values built from prescribed
partial quotients, and mpmath reals at a stated bit precision.
"""

import logging
import math
from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from mpmath import mp, mpf
from pydantic import BaseModel, ConfigDict, Field

from .errors import InvalidQuotient, PrecisionExhausted, RationalInput
from .models import AlphaKind, DiophantineLevel, DiophantineReport, LiouvilleLevels

logger = logging.getLogger(__name__)

Real = Union[Fraction, Any]  # Fraction or mpmath.mpf

MIN_LEDGER_BITS = 16
SCALE_BITS = 128

NAMED_CONSTANTS = {
    "golden": "(sqrt(5)-1)/2",
    "silver": "sqrt(2)-1",
    "pi-3": "pi-3",
    "e-2": "E-2",
}


class ContinuedFraction(BaseModel):
    """
    Continued fraction of one rotation number.

    p, q are stored from index -2 and beta from index -1; use the accessors
    instead of indexing the lists directly.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    alpha: Any
    kind: AlphaKind
    bits: int
    depth: int
    requested_depth: int
    a: List[int] = Field(default_factory=list)
    p: List[int] = Field(default_factory=list)
    q: List[int] = Field(default_factory=list)
    alpha_seq: List[Any] = Field(default_factory=list)
    beta: List[Any] = Field(default_factory=list)
    terminating: bool = False
    truncated: bool = False

    def pn(self, n: int) -> int:
        return self.p[n + 2]

    def qn(self, n: int) -> int:
        return self.q[n + 2]

    def beta_n(self, n: int) -> Real:
        return self.beta[n + 1]

    def alpha_n(self, n: int) -> Real:
        return self.alpha_seq[n]

    @property
    def is_rational(self) -> bool:
        return self.kind == AlphaKind.RATIONAL or self.terminating

    def float_alpha(self) -> float:
        return float(self.alpha)

    def exact(self) -> bool:
        """True when alpha and betas are exact rationals"""
        return isinstance(self.alpha, Fraction)

    def summary(self) -> dict:
        """JSON-friendly view of the expansion"""
        return {
            "alpha": _to_text(self.alpha),
            "kind": self.kind.value,
            "bits": self.bits,
            "depth": self.depth,
            "terminating": self.terminating,
            "truncated": self.truncated,
            "a": list(self.a),
            "p": [self.pn(n) for n in range(self.depth + 1)],
            "q": [self.qn(n) for n in range(self.depth + 1)],
            "beta": [_to_text(self.beta_n(n)) for n in range(self.depth + 1)],
        }


def _to_text(value: Real) -> str:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return mp.nstr(value, 17)


def _convergents(a: Sequence[int]) -> Tuple[List[int], List[int]]:
    p = [0, 1]
    q = [1, 0]
    for a_n in a:
        p.append(a_n * p[-1] + p[-2])
        q.append(a_n * q[-1] + q[-2])
    return p, q


def _assemble(
    alpha: Real,
    kind: AlphaKind,
    bits: int,
    a: List[int],
    alpha_seq: List[Real],
    requested_depth: int,
    terminating: bool = False,
    truncated: bool = False,
) -> "ContinuedFraction":
    p, q = _convergents(a)
    beta: List[Real] = [Fraction(1) if isinstance(alpha, Fraction) else mpf(1)]
    with mp.workprec(max(bits, 53)):
        for alpha_n in alpha_seq:
            beta.append(beta[-1] * alpha_n)
    return ContinuedFraction(
        alpha=alpha,
        kind=kind,
        bits=bits,
        depth=len(a) - 1,
        requested_depth=requested_depth,
        a=a,
        p=p,
        q=q,
        alpha_seq=alpha_seq,
        beta=beta,
        terminating=terminating,
        truncated=truncated,
    )


def _expand_rational(alpha: Fraction, depth: int) -> ContinuedFraction:
    a0 = math.floor(alpha)
    x = alpha - a0
    a = [a0]
    alpha_seq: List[Real] = [x]
    terminating = x == 0
    while len(a) <= depth and not terminating:
        inverse = 1 / x
        a_n = math.floor(inverse)
        x = inverse - a_n
        a.append(a_n)
        alpha_seq.append(x)
        terminating = x == 0
    if terminating:
        logger.info(f"Rational input {alpha} terminates at level {len(a) - 1}")
    return _assemble(alpha, AlphaKind.RATIONAL, 0, a, alpha_seq, depth, terminating=terminating)


def _expand_real(alpha: Any, depth: int, bits: int) -> ContinuedFraction:
    with mp.workprec(bits):
        x = mpf(alpha)
        a0 = int(mp.floor(x))
        x = x - a0
        a = [a0]
        alpha_seq: List[Real] = [x]
        ledger = float(bits)
        truncated = False
        terminating = x == 0
        while len(a) <= depth and not terminating:
            inverse = 1 / x
            a_n = int(mp.floor(inverse))
            cost = 2.0 * math.log2(a_n + 1) + 2.0
            if ledger - cost < MIN_LEDGER_BITS:
                truncated = True
                break
            ledger -= cost
            x = inverse - a_n
            a.append(a_n)
            alpha_seq.append(x)
            terminating = x == 0
    if truncated:
        if len(a) == 1 and depth >= 1:
            raise PrecisionExhausted(
                f"{bits} bits cannot resolve even the first partial quotient",
                bits=bits,
                depth=depth,
            )
        logger.warning(
            f"Precision ledger exhausted: expansion truncated at level {len(a) - 1} "
            f"(requested {depth}, {bits} bits)"
        )
    return _assemble(
        alpha,
        AlphaKind.REAL,
        bits,
        a,
        alpha_seq,
        depth,
        terminating=terminating,
        truncated=truncated,
    )


def expand(alpha: Any, depth: int, bits: Optional[int] = None) -> ContinuedFraction:
    """
    Expand alpha into its continued fraction up to the given depth.

    Args:
        alpha: Fraction/int (exact), float (53-bit real) or mpmath value
        depth: Maximum level N
        bits: Working precision for real input (default 256, floats use 53)

    Returns:
        ContinuedFraction, flagged terminating for rationals and truncated when the
        precision ledger runs out
    """
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    if isinstance(alpha, (Fraction, int)):
        return _expand_rational(Fraction(alpha), depth)
    if isinstance(alpha, float):
        bits = 53 if bits is None else bits
    bits = bits or 256
    with mp.workprec(bits):
        value = mpf(alpha)
    return _expand_real(value, depth, bits)


def from_partial_quotients(
    a: Sequence[int], tail: str = "golden", bits: int = 256
) -> ContinuedFraction:
    """
    Build the continued fraction with prescribed quotients a_0..a_N.

    With tail="golden" the value is [a_0; a_1, ..., a_N, 1, 1, ...], so every
    level up to N carries exact quotients and positive beta. With tail="none"
    the value is the rational [a_0; ..., a_N].
    """
    a = [int(x) for x in a]
    if not a:
        raise InvalidQuotient("empty quotient sequence")
    if a[0] < 0:
        raise InvalidQuotient(f"a_0 must be >= 0, got {a[0]}", index=0)
    for index, a_n in enumerate(a[1:], start=1):
        if a_n < 1:
            raise InvalidQuotient(f"a_{index} = {a_n} < 1", index=index)

    depth = len(a) - 1
    if tail == "none":
        alpha_seq: List[Real] = [Fraction(0)]
        for a_next in reversed(a[1:]):
            alpha_seq.insert(0, 1 / (a_next + alpha_seq[0]))
        value = a[0] + alpha_seq[0]
        return _assemble(value, AlphaKind.RATIONAL, 0, a, alpha_seq, depth, terminating=True)
    if tail != "golden":
        raise ValueError(f"Unknown tail: {tail}")

    with mp.workprec(bits):
        seq: List[Real] = [(mp.sqrt(5) - 1) / 2]
        for a_next in reversed(a[1:]):
            seq.insert(0, 1 / (a_next + seq[0]))
        value = a[0] + seq[0]
    return _assemble(value, AlphaKind.QUOTIENTS, bits, a, seq, depth)


def squaring_quotients(seed: int = 2, depth: int = 6, lead: Sequence[int] = (0, 1)) -> List[int]:
    """Quotients lead + (seed, seed^2, seed^4, ...) with a_{n+1} = a_n^2"""
    a = list(lead)
    current = seed
    while len(a) <= depth:
        a.append(current)
        current = current * current
    return a[: depth + 1]


def parse_alpha(text: str, depth: int = 20, bits: int = 256) -> ContinuedFraction:
    """
    Parse a rotation number spec.

    Accepted forms: golden, silver, pi-3, e-2, "p/q", "quotients:0,1,2,..." and any
    sympy expression such as "(sqrt(5)-1)/2".
    """
    text = text.strip()
    if text.startswith("quotients:"):
        quotients = [int(x) for x in text.split(":", 1)[1].split(",") if x.strip()]
        return from_partial_quotients(quotients, bits=bits)
    if text.startswith("rational-quotients:"):
        quotients = [int(x) for x in text.split(":", 1)[1].split(",") if x.strip()]
        return from_partial_quotients(quotients, tail="none")
    if text.startswith("squaring:"):
        seed, count = (int(x) for x in text.split(":", 1)[1].split(","))
        return from_partial_quotients(squaring_quotients(seed, count), bits=bits)

    expression = sympy.sympify(NAMED_CONSTANTS.get(text, text))
    if expression.is_Rational:
        return expand(Fraction(int(expression.p), int(expression.q)), depth)
    digits = int(bits * math.log10(2)) + 10
    with mp.workprec(bits):
        value = mpf(str(sympy.N(expression, digits)))
    return expand(value, depth, bits)


def liouville_levels(cf: ContinuedFraction, tau: float) -> LiouvilleLevels:
    """
    Levels m in [1, depth] with beta_m < beta_{m-1}^tau.

    Inexact betas must clear the threshold by more than working precision, so
    boundary cases are excluded rather than decided by rounding.
    """
    if tau <= 1:
        raise ValueError(f"tau must be > 1, got {tau}")
    levels: List[int] = []
    integral_tau = float(tau).is_integer()
    with mp.workprec(max(cf.bits, 64)):
        margin = mpf(2) ** (-(max(cf.bits, 64) - 32))
        for m in range(1, cf.depth + 1):
            current, previous = cf.beta_n(m), cf.beta_n(m - 1)
            if current == 0:
                continue
            if isinstance(current, Fraction) and integral_tau:
                if current < previous ** int(tau):
                    levels.append(m)
                continue
            threshold = mp.power(mpf(previous), tau)
            if mpf(current) < threshold * (1 - margin):
                levels.append(m)
    density = liouville_density(levels, cf.depth)
    return LiouvilleLevels(tau=tau, depth=cf.depth, levels=levels, density=density)


def liouville_density(levels: Sequence[int], depth: int) -> float:
    """Share of the levels 1..depth that are Liouville levels; 0 for an empty expansion"""
    if depth <= 0:
        return 0.0
    counted = {m for m in levels if 1 <= m <= depth}
    return len(counted) / depth


def diophantine_test(cf: ContinuedFraction, C: float, tau: float) -> DiophantineReport:
    """Per-level test of beta_{n+1} > C * beta_n^(1+tau)"""
    if C <= 0 or tau <= 0:
        raise ValueError(f"C and tau must be positive, got C={C}, tau={tau}")
    report = DiophantineReport(C=C, tau=tau)
    with mp.workprec(max(cf.bits, 64)):
        for n in range(cf.depth):
            beta_n, beta_next = mpf(cf.beta_n(n)), mpf(cf.beta_n(n + 1))
            passed = bool(beta_next > C * mp.power(beta_n, 1 + tau))
            report.levels.append(
                DiophantineLevel(
                    n=n, beta_n=float(beta_n), beta_next=float(beta_next), passed=passed
                )
            )
    report.all_pass = all(level.passed for level in report.levels)
    return report


def convergent_matrix(
    cf: ContinuedFraction, n: int
) -> Tuple[Tuple[Tuple[int, int], Tuple[int, int]], Tuple[Tuple[int, int], Tuple[int, int]]]:
    """The matrix A_n = (-1)^n [[q_n, -p_n], [-q_{n-1}, p_{n-1}]] and its inverse"""
    sign = -1 if n % 2 else 1
    p_n, q_n, p_prev, q_prev = cf.pn(n), cf.qn(n), cf.pn(n - 1), cf.qn(n - 1)
    matrix = ((sign * q_n, -sign * p_n), (-sign * q_prev, sign * p_prev))
    inverse = ((p_prev, p_n), (q_prev, q_n))
    return matrix, inverse


def scaled_alpha(cf: ContinuedFraction, scale_bits: int = SCALE_BITS) -> int:
    """floor(alpha * 2^scale_bits) as an exact integer"""
    if isinstance(cf.alpha, Fraction):
        return math.floor(cf.alpha * (1 << scale_bits))
    with mp.workprec(max(cf.bits, scale_bits + 64)):
        return int(mp.floor(mpf(cf.alpha) * mpf(2) ** scale_bits))


def fractional_multiples(cf: ContinuedFraction, ks: Sequence[int]) -> np.ndarray:
    """k*alpha mod 1 reduced in extended precision, then rounded to double"""
    scale = 1 << SCALE_BITS
    alpha_scaled = scaled_alpha(cf)
    return np.array([((k * alpha_scaled) % scale) / scale for k in ks], dtype=float)


def orbit_signs(cf: ContinuedFraction, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    For k = 1..count: p_k = round(k*alpha) and sign(k*alpha - p_k), exactly.
    """
    scale = 1 << SCALE_BITS
    half = scale >> 1
    alpha_scaled = scaled_alpha(cf)
    nearest = np.empty(count, dtype=np.int64)
    signs = np.empty(count, dtype=np.int8)
    value = 0
    for index in range(count):
        value += alpha_scaled
        p_k = (value + half) >> SCALE_BITS
        diff = value - p_k * scale
        nearest[index] = p_k
        signs[index] = (diff > 0) - (diff < 0)
    return nearest, signs


def require_irrational(cf: ContinuedFraction, operation: str) -> None:
    """Raise RationalInput when cf is an exact rational or a terminated expansion"""
    if cf.is_rational:
        raise RationalInput(
            f"{operation} needs an irrational alpha, got {_to_text(cf.alpha)}",
            alpha=_to_text(cf.alpha),
            depth=cf.depth,
        )


def closest_return_check(cf: ContinuedFraction, limit: int = 100_000) -> List[int]:
    """
    Brute-force closest-return verification.

    For each level n >= 1 with q_{n+1} <= limit, the first q > q_n with
    ||q alpha|| < ||q_n alpha|| must be q_{n+1}. Returns the verified levels and
    raises AssertionError on a mismatch.
    """
    top = [n for n in range(1, cf.depth) if cf.qn(n + 1) <= limit]
    if not top:
        return []
    count = cf.qn(top[-1] + 1)
    scale = 1 << SCALE_BITS
    alpha_scaled = scaled_alpha(cf)
    distances = [0] * (count + 1)
    value = 0
    for q in range(1, count + 1):
        value += alpha_scaled
        residue = value % scale
        distances[q] = min(residue, scale - residue)
    for n in top:
        q_n, q_next = cf.qn(n), cf.qn(n + 1)
        record = distances[q_n]
        first = next((q for q in range(q_n + 1, count + 1) if distances[q] < record), None)
        if first != q_next:
            raise AssertionError(f"closest return after q_{n}={q_n} is {first}, expected {q_next}")
    return top


def coerce_alpha(value: Any, depth: int = 40, bits: int = 256) -> ContinuedFraction:
    """Accept a ContinuedFraction, an alpha spec string, a Fraction or a number"""
    if isinstance(value, ContinuedFraction):
        return value
    if isinstance(value, str):
        return parse_alpha(value, depth=depth, bits=bits)
    if isinstance(value, (Fraction, int)):
        return expand(Fraction(value), depth)
    return expand(value, depth, bits=bits)
