"""q-numbers, Gaussian binomials and the q-deformed binomial field state."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# raw pmf sums further than this from 1 trigger renormalization of the state
NORMALIZATION_TOL = 1e-10
NEGATIVE_PMF_TOL = -1e-14


class Convention(enum.Enum):
    STANDARD = "standard"
    PAPER_LITERAL = "paper-literal"


@dataclass(frozen=True)
class DeformationSpec:
    """Deformation parameter ``q`` and the q-number convention.

    ``STANDARD`` uses [n] = (1 - q^n)/(1 - q). ``PAPER_LITERAL`` uses
    [n] = (1 - q^-n)/(1 - q), which is negative for n > 0 and q < 1; it is
    kept for comparison and is rejected wherever a square root of a q-number
    is needed.
    """

    q: float
    convention: Convention = Convention.STANDARD

    def __post_init__(self):
        if not (0.0 < self.q <= 1.0) or math.isnan(self.q):
            raise ValueError(f"q must satisfy 0 < q <= 1, got {self.q!r}")
        if not isinstance(self.convention, Convention):
            object.__setattr__(self, "convention", Convention(self.convention))


def q_number(n: int, d: DeformationSpec) -> float:
    if n <= 0:
        return 0.0
    if d.q == 1.0:
        return float(n) if d.convention is Convention.STANDARD else -float(n)
    # log1p/expm1 keep full precision for q a hair below 1
    log_q = math.log1p(d.q - 1.0)
    if d.convention is Convention.STANDARD:
        return math.expm1(n * log_q) / math.expm1(log_q)
    return math.expm1(-n * log_q) / math.expm1(log_q)


def q_numbers(n, d: DeformationSpec) -> np.ndarray:
    """Vectorized :func:`q_number` (same guard rule for n <= 0)."""
    n = np.asarray(n)
    return np.array([q_number(int(k), d) for k in n.ravel()]).reshape(n.shape)


def q_factorial(n: int, d: DeformationSpec) -> float:
    if n < 0:
        raise ValueError(f"q_factorial needs n >= 0, got {n}")
    out = 1.0
    for k in range(1, n + 1):
        out *= q_number(k, d)
    return out


def q_binomial_coeff(M: int, n: int, d: DeformationSpec) -> float:
    """Gaussian binomial coefficient [M choose n]_q.

    Evaluated as the cancelled ratio prod_k [M-k+1]/[k] over the shorter
    side, so it is exactly symmetric under n -> M - n and never forms the
    large factorials.
    """
    if not 0 <= n <= M:
        raise ValueError(f"need 0 <= n <= M, got n={n}, M={M}")
    k_max = min(n, M - n)
    out = 1.0
    for k in range(1, k_max + 1):
        out *= q_number(M - k_max + k, d) / q_number(k, d)
    return out


def q_one_minus_pow(tau: float, m: int, d: DeformationSpec) -> float:
    """(1 - tau)_q^m as the finite product prod_{k<m} (1 - q^k tau)."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    out = 1.0
    for k in range(m):
        out *= 1.0 - d.q**k * tau
    return out


@dataclass(frozen=True)
class FieldSpec:
    M: int
    tau: float
    deformation: DeformationSpec

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 0:
            raise ValueError(f"M must be a non-negative integer, got {self.M!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in the open interval (0, 1), got {self.tau!r}")

    @property
    def q(self) -> float:
        return self.deformation.q

    @property
    def dim(self) -> int:
        """Dimension of the truncated field space, photons 0..M+1."""
        return self.M + 2

    @cached_property
    def pmf(self) -> np.ndarray:
        return np.array([binomial_pmf(n, self) for n in range(self.M + 1)])

    @property
    def pmf_sum_deviation(self) -> float:
        """Raw sum of the distribution minus one, before renormalization."""
        return float(math.fsum(self.pmf) - 1.0)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return binomial_state(self)


def binomial_pmf(n: int, f: FieldSpec) -> float:
    if not 0 <= n <= f.M:
        raise ValueError(f"need 0 <= n <= M={f.M}, got {n}")
    d = f.deformation
    return q_binomial_coeff(f.M, n, d) * f.tau**n * q_one_minus_pow(f.tau, f.M - n, d)


def binomial_state(f: FieldSpec) -> np.ndarray:
    """Non-negative, unit-norm amplitudes beta_n for n = 0..M."""
    b = f.pmf
    if np.any(b < NEGATIVE_PMF_TOL):
        bad = int(np.argmin(b))
        raise ValueError(
            f"negative binomial weight b({bad}) = {b[bad]:.3e} for q={f.q}, "
            f"convention={f.deformation.convention.value}"
        )
    b = np.clip(b, 0.0, None)
    beta = np.sqrt(b)
    total = math.fsum(b)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        beta = beta / math.sqrt(total)
    return beta
