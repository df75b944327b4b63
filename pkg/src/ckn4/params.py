"""Validated problem parameters and closed-form constants.

The weighted inequality lives in dimension N >= 3 with weight exponent
alpha in (4-N, 2).  Everything else is algebra on top of that pair:

    p* = 2(N-alpha)/(N-4+alpha)      critical exponent
    q  = 2/(2-alpha)                 radial substitution exponent, r = s^q
    M  = 2(N-alpha)/(2-alpha)        effective dimension after substitution

Gamma functions are evaluated through ``scipy.special.gammaln`` so the
constants stay finite for the large effective dimensions that occur when
alpha is close to 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .errors import (
    AlphaOutOfRange,
    DimensionTooSmall,
    MOutOfRange,
    NegativeMode,
    NotEvenCase,
)

__all__ = [
    "Params",
    "EvenAlphaInfo",
    "validate_params",
    "sobolev_constant_C",
    "sobolev_constant_C_forms",
    "fourth_order_sobolev_constant",
    "best_constant_radial",
    "best_constant_radial_report",
    "normalization_constant",
    "even_alpha_info",
    "mode_lambda",
    "spherical_multiplicity",
    "sphere_area",
]

_EVEN_TOL = 1e-12
_K_GUARD = 20
_N_GUARD = 64


@dataclass(frozen=True)
class Params:
    """Validated (N, alpha) pair with derived exponents."""

    N: int
    alpha: float
    pstar: float
    q: float
    M: float
    # exact rational alpha when the caller supplied one (CLI decimal strings);
    # used for exact even-integer detection, not for arithmetic
    alpha_exact: Fraction | None = None

    @property
    def gamma_exp(self) -> float:
        """Power 2 - alpha appearing in every profile."""
        return 2.0 - self.alpha

    @property
    def decay_exp(self) -> float:
        """Power N - 4 + alpha governing extremal decay."""
        return self.N - 4.0 + self.alpha


@dataclass(frozen=True)
class EvenAlphaInfo:
    """Kernel bookkeeping at alpha = -2(k-1)."""

    is_even_case: bool
    k: int | None
    multiplicity: int | None
    kernel_dim: int


def _coerce_alpha(alpha) -> tuple[float, Fraction | None]:
    if isinstance(alpha, Fraction):
        return float(alpha), alpha
    if isinstance(alpha, Decimal):
        return float(alpha), Fraction(alpha)
    if isinstance(alpha, str):
        return float(alpha), Fraction(Decimal(alpha))
    if isinstance(alpha, (int, np.integer)):
        return float(alpha), Fraction(int(alpha))
    return float(alpha), None


def validate_params(N, alpha) -> Params:
    """Validate (N, alpha) and populate the derived exponents.

    Raises DimensionTooSmall for N < 3 and AlphaOutOfRange outside the
    open interval (4-N, 2).
    """
    if not isinstance(N, (int, np.integer)):
        if float(N) != int(N):
            raise DimensionTooSmall(f"N must be an integer, got {N!r}")
        N = int(N)
    N = int(N)
    if N < 3:
        raise DimensionTooSmall(f"need N >= 3, got N={N}")
    a, a_exact = _coerce_alpha(alpha)
    if not np.isfinite(a) or a <= 4 - N or a >= 2:
        raise AlphaOutOfRange(f"need {4 - N} < alpha < 2, got alpha={a}")
    pstar = 2.0 * (N - a) / (N - 4.0 + a)
    q = 2.0 / (2.0 - a)
    M = 2.0 * (N - a) / (2.0 - a)
    return Params(N=N, alpha=a, pstar=pstar, q=q, M=M, alpha_exact=a_exact)


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return float(np.exp(math.log(2.0) + 0.5 * N * math.log(math.pi) - gammaln(0.5 * N)))


def sobolev_constant_C_forms(M: float) -> tuple[float, float]:
    """Both printed forms of the sharp one-dimensional constant C(M).

    They are algebraically identical; returning both supports the
    consistency check.
    """
    if M <= 4:
        raise MOutOfRange(f"need M > 4, got M={M}")
    poly = (M - 4.0) * (M - 2.0) * M * (M + 2.0)
    main = float(poly * np.exp((4.0 / M) * (2.0 * gammaln(0.5 * M) - math.log(2.0) - gammaln(M))))
    # pi^2 * poly * (Gamma(M/2)/Gamma(M))^{4/M} * (2 pi^{M/2}/Gamma(M/2))^{-4/M}
    log_alt = (
        2.0 * math.log(math.pi)
        + math.log(poly)
        + (4.0 / M) * (gammaln(0.5 * M) - gammaln(M))
        - (4.0 / M) * (math.log(2.0) + 0.5 * M * math.log(math.pi) - gammaln(0.5 * M))
    )
    return main, float(np.exp(log_alt))


def sobolev_constant_C(M: float, check: bool = False) -> float:
    """Sharp constant C(M) = (M-4)(M-2)M(M+2) [Gamma(M/2)^2 / (2 Gamma(M))]^{4/M}.

    With ``check=True`` the second closed form is evaluated as well and the
    two are required to agree to 1e-12 relative.
    """
    main, alt = sobolev_constant_C_forms(M)
    if check and abs(main - alt) > 1e-12 * abs(main):
        raise AssertionError(f"C(M) closed forms disagree at M={M}: {main} vs {alt}")
    return main


def fourth_order_sobolev_constant(M: float) -> float:
    """Sharp constant of the unweighted fourth-order Sobolev inequality in R^M."""
    if M <= 4:
        raise MOutOfRange(f"need M > 4, got M={M}")
    poly = (M - 4.0) * (M - 2.0) * M * (M + 2.0)
    return float(math.pi ** 2 * poly * np.exp((4.0 / M) * (gammaln(0.5 * M) - gammaln(M))))


def best_constant_radial(p: Params) -> float:
    """Sharp radial constant S^rad(N, alpha).

    Evaluated as q^{-3-(M-4)/M} * omega_{N-1}^{1-2/p*} * C(M), the form the
    substitution argument produces.  ``best_constant_radial_report`` also
    evaluates a circulating near-miss variant whose prefactor exponent has
    denominator N-4 instead of N-alpha; that variant is reported for
    comparison, never used.
    """
    pref = p.q ** (-(3.0 + (p.M - 4.0) / p.M))
    return pref * sphere_area(p.N) ** (1.0 - 2.0 / p.pstar) * sobolev_constant_C(p.M)


def best_constant_radial_report(p: Params) -> dict:
    """Best constant plus the erratum variant with the (N-4) denominator.

    The two agree only where the prefactor is 1 (alpha = 0).  The variant is
    reported, never used; it is undefined at N = 4.
    """
    value = best_constant_radial(p)
    if p.N == 4:
        printed = None
        deviation = None
    else:
        pref = ((2.0 - p.alpha) / 2.0) ** ((4.0 * p.N - 4.0 - 2.0 * p.alpha) / (p.N - 4.0))
        printed = pref * sphere_area(p.N) ** ((4.0 - 2.0 * p.alpha) / (p.N - p.alpha)) * sobolev_constant_C(p.M)
        deviation = abs(printed - value) / value
    return {
        "value": value,
        "erratum_variant_value": printed,
        "erratum_rel_deviation": deviation,
    }


def normalization_constant(p: Params) -> float:
    """Amplitude making the extremal profile an exact solution of the equation."""
    K = (p.N - 4.0 + p.alpha) * (p.N - 2.0) * (p.N - p.alpha) * (p.N + 2.0 - 2.0 * p.alpha)
    return K ** ((p.N - 4.0 + p.alpha) / (8.0 - 4.0 * p.alpha))


def spherical_multiplicity(k: int, N: int) -> int:
    """Dimension of the degree-k spherical-harmonic eigenspace on S^{N-1}."""
    if k < 0:
        raise NegativeMode(f"need k >= 0, got {k}")
    if k > _K_GUARD or N > _N_GUARD:
        raise ValueError(f"factorial guard exceeded (k<={_K_GUARD}, N<={_N_GUARD})")
    if k == 0:
        return 1
    return (N + 2 * k - 2) * math.factorial(N + k - 3) // (math.factorial(N - 2) * math.factorial(k))


def mode_lambda(k: int, N: int) -> tuple[float, int]:
    """Eigenvalue k(N-2+k) of -Delta on S^{N-1} and its multiplicity."""
    if N < 3:
        raise DimensionTooSmall(f"need N >= 3, got N={N}")
    if k < 0:
        raise NegativeMode(f"need k >= 0, got {k}")
    return float(k * (N - 2 + k)), spherical_multiplicity(k, N)


def even_alpha_info(p: Params, tol: float = _EVEN_TOL) -> EvenAlphaInfo:
    """Detect alpha = -2(k-1) and report the kernel dimension.

    When the Params carry an exact rational alpha the detection is exact;
    otherwise it uses an absolute tolerance (default 1e-12).
    """
    k = None
    if p.alpha_exact is not None:
        a = p.alpha_exact
        if a.denominator == 1 and a <= 0 and (-a.numerator) % 2 == 0:
            # alpha = -2(k-1)  <=>  k = 1 - alpha/2
            k = 1 + (-int(a)) // 2
    else:
        nearest = round(p.alpha)
        if abs(p.alpha - nearest) <= tol and nearest <= 0 and nearest % 2 == 0:
            k = 1 + (-nearest) // 2
    if k is None or k < 1:
        return EvenAlphaInfo(is_even_case=False, k=None, multiplicity=None, kernel_dim=1)
    mult = spherical_multiplicity(k, p.N)
    return EvenAlphaInfo(is_even_case=True, k=k, multiplicity=mult, kernel_dim=1 + mult)


def require_even_case(p: Params, k: int) -> EvenAlphaInfo:
    """Assert alpha = -2(k-1) for the requested k, else NotEvenCase."""
    info = even_alpha_info(p)
    if not info.is_even_case or info.k != k:
        raise NotEvenCase(f"alpha={p.alpha} is not -2(k-1) for k={k}")
    return info
