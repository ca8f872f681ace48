"""Exponent-scaled special functions used by the scattering matrices.

Conventions
-----------
* ``i_l(x) = sqrt(pi / 2x) I_{l+1/2}(x)``, so ``i_0(x) = sinh(x) / x``.
* ``k_l(x) = sqrt(pi / 2x) K_{l+1/2}(x)``, so ``k_0(x) = (pi/2) e^{-x} / x``.
  With this choice ``j_l(ix) = i^l i_l(x)`` and
  ``h_l^{(1)}(ix) = -(2/pi) i^{-l} k_l(x)``, and the Wronskian reads
  ``i_l k_{l+1} + i_{l+1} k_l = (pi/2) / x^2``.
* ``Y_l^m`` is orthonormal with the Condon-Shortley phase.

The array routines return natural logarithms of magnitudes because the
modified functions overflow or underflow long before the products that
enter the scattering matrix do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "ScaledValue",
    "log_mod_sph_bessel_i",
    "log_mod_sph_bessel_k",
    "log_riccati_i_deriv",
    "log_riccati_k_deriv",
    "mod_sph_bessel_i",
    "mod_sph_bessel_k",
    "sph_bessel_j",
    "sph_bessel_y",
    "sph_hankel1",
    "sph_bessel_j_array",
    "sph_bessel_y_array",
    "sph_hankel1_array",
    "log_sph_bessel_j_array",
    "log_sph_hankel1_array",
    "riccati_deriv_j_array",
    "riccati_deriv_h1_array",
    "wigner3j",
    "sph_harm",
    "sph_harm_array",
]

L_SUPPORTED = 400
_SMALL_X = 1e-300


@dataclass(frozen=True)
class ScaledValue:
    """A real number stored as ``mantissa * exp(exponent)``.

    After :meth:`normalized` the exponent is an integer and the mantissa is
    either 0 or has magnitude in ``[e^{-1/2}, e^{1/2}]`` (inside
    ``[1/e, e]``), which makes the representation canonical.
    """

    mantissa: float
    exponent: float = 0.0

    @classmethod
    def from_log(cls, logabs: float, sign: float = 1.0) -> "ScaledValue":
        if sign == 0 or logabs == -math.inf:
            return cls(0.0, 0.0)
        return cls(math.copysign(1.0, sign), float(logabs)).normalized()

    def normalized(self) -> "ScaledValue":
        m, e = self.mantissa, self.exponent
        if m == 0.0:
            return ScaledValue(0.0, 0.0)
        if not math.isfinite(m) or not math.isfinite(e):
            raise ValueError("non-finite ScaledValue")
        # split off the integer part first so large exponents keep precision
        whole = math.floor(e)
        frac = e - whole
        shift = round(math.log(abs(m)) + frac)
        return ScaledValue(m * math.exp(frac - shift), float(whole + shift))

    @property
    def log_abs(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.exponent

    @property
    def sign(self) -> float:
        return float(np.sign(self.mantissa))

    @property
    def value(self) -> float:
        """Unscaled value; may overflow to inf or underflow to 0."""
        if self.mantissa == 0.0:
            return 0.0
        try:
            return self.mantissa * math.exp(self.exponent)
        except OverflowError:
            return math.copysign(math.inf, self.mantissa)

    def __mul__(self, other: "ScaledValue") -> "ScaledValue":
        return ScaledValue(
            self.mantissa * other.mantissa, self.exponent + other.exponent
        ).normalized()

    def __truediv__(self, other: "ScaledValue") -> "ScaledValue":
        if other.mantissa == 0.0:
            raise ZeroDivisionError("division by a zero ScaledValue")
        return ScaledValue(
            self.mantissa / other.mantissa, self.exponent - other.exponent
        ).normalized()

    def __float__(self) -> float:
        return self.value


def _check_positive(x: float, name: str = "x") -> float:
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise ValueError(f"{name} must be positive and finite, got {x!r}")
    return x


# --------------------------------------------------------------------------
# modified spherical Bessel functions (positive real argument)
# --------------------------------------------------------------------------


def _i_ratios(lmax: int, x: float) -> np.ndarray:
    """Ratios ``r_l = i_l(x) / i_{l-1}(x)`` for ``l = 1 .. lmax + 1``.

    Backward continued fraction (Miller): ``r_l = 1 / ((2l+1)/x + r_{l+1})``.
    Index ``l`` of the returned array holds ``r_l``; entry 0 is unused.
    """
    top = lmax + 1
    start = top + 40 + int(4.0 * math.sqrt(top + x)) + int(x)
    r = 0.0
    out = np.empty(top + 1)
    for l in range(start, 0, -1):
        r = 1.0 / ((2 * l + 1) / x + r)
        if l <= top:
            out[l] = r
    out[0] = np.nan
    return out


def log_mod_sph_bessel_i(lmax: int, x: float) -> np.ndarray:
    """``log i_l(x)`` for ``l = 0 .. lmax`` (all values are positive)."""
    x = _check_positive(x)
    r = _i_ratios(lmax, x)
    out = np.empty(lmax + 1)
    # log(sinh(x)/x) without overflow
    out[0] = x + math.log(-math.expm1(-2.0 * x) / (2.0 * x))
    for l in range(1, lmax + 1):
        out[l] = out[l - 1] + math.log(r[l])
    return out


def log_riccati_i_deriv(lmax: int, x: float) -> np.ndarray:
    """``log (x i_l(x))'`` for ``l = 0 .. lmax``.

    Uses ``(x i_l)' = i_l (l + 1 + x r_{l+1})`` which is free of cancellation.
    """
    x = _check_positive(x)
    r = _i_ratios(lmax, x)
    logi = log_mod_sph_bessel_i(lmax, x)
    ls = np.arange(lmax + 1)
    return logi + np.log(ls + 1.0 + x * r[1 : lmax + 2])


def _k_ratios(lmax: int, x: float) -> np.ndarray:
    """``rho_l = k_{l+1}(x) / k_l(x)`` for ``l = 0 .. lmax`` (upward, stable)."""
    out = np.empty(lmax + 1)
    rho = 1.0 + 1.0 / x
    out[0] = rho
    for l in range(1, lmax + 1):
        rho = 1.0 / rho + (2 * l + 1) / x
        out[l] = rho
    return out


def log_mod_sph_bessel_k(lmax: int, x: float) -> np.ndarray:
    """``log k_l(x)`` for ``l = 0 .. lmax`` with ``k_0 = (pi/2) e^{-x}/x``."""
    x = _check_positive(x)
    if x < _SMALL_X:
        raise ValueError(f"k_l diverges at x -> 0; x={x!r} is below 1e-300")
    out = np.empty(lmax + 1)
    out[0] = math.log(math.pi / 2.0) - x - math.log(x)
    if lmax > 0:
        out[1:] = out[0] + np.cumsum(np.log(_k_ratios(lmax - 1, x)))
    return out


def log_riccati_k_deriv(lmax: int, x: float) -> np.ndarray:
    """``log |(x k_l(x))'|``; the derivative itself is always negative.

    ``(x k_l)' = -(l k_l + x k_{l-1})`` with ``k_{-1} = k_0``.
    """
    logk = log_mod_sph_bessel_k(lmax, x)
    out = np.empty(lmax + 1)
    out[0] = math.log(math.pi / 2.0) - x
    if lmax > 0:
        rho = _k_ratios(lmax - 1, x)  # k_l / k_{l-1} for l = 1..lmax
        ls = np.arange(1, lmax + 1)
        out[1:] = logk[1:] + np.log(ls + x / rho)
    return out


def mod_sph_bessel_i(l: int, x: float) -> ScaledValue:
    """Modified spherical Bessel function of the first kind, ``i_l(x)``."""
    l = int(l)
    if l < 0:
        raise ValueError("l must be non-negative")
    x = float(x)
    if x == 0.0:
        return ScaledValue(1.0 if l == 0 else 0.0, 0.0)
    _check_positive(x)
    return ScaledValue.from_log(log_mod_sph_bessel_i(l, x)[l])


def mod_sph_bessel_k(l: int, x: float) -> ScaledValue:
    """Modified spherical Bessel function of the second kind, ``k_l(x)``.

    Normalised so that ``k_0(x) = (pi/2) exp(-x) / x``.
    """
    l = int(l)
    if l < 0:
        raise ValueError("l must be non-negative")
    return ScaledValue.from_log(log_mod_sph_bessel_k(l, x)[l])


# --------------------------------------------------------------------------
# ordinary spherical Bessel / Hankel functions (positive real argument)
# --------------------------------------------------------------------------


def sph_bessel_j_array(lmax: int, x: float) -> np.ndarray:
    """``j_l(x)`` for ``l = 0 .. lmax`` by Miller's downward recurrence."""
    x = _check_positive(x)
    top = max(lmax, 1)
    start = top + 30 + int(x) + int(6.0 * math.sqrt(top + x + 1.0))
    out = np.zeros(top + 1)
    jp1, j = 0.0, 1e-300
    for l in range(start, 0, -1):
        jp1, j = j, (2 * l + 1) / x * j - jp1
        if abs(j) > 1e250:
            # rescale on the fly to stay representable
            jp1 *= 1e-250
            j *= 1e-250
            out *= 1e-250
        if l - 1 <= top:
            out[l - 1] = j
    j0 = math.sin(x) / x
    j1 = math.sin(x) / (x * x) - math.cos(x) / x
    # normalise on whichever seed is further from a zero
    if abs(j0) >= abs(j1):
        out *= j0 / out[0]
    else:
        out *= j1 / out[1]
    return out[: lmax + 1]


def sph_bessel_y_array(lmax: int, x: float) -> np.ndarray:
    """``y_l(x)`` for ``l = 0 .. lmax`` by upward recurrence (stable for y)."""
    x = _check_positive(x)
    out = np.empty(lmax + 1)
    out[0] = -math.cos(x) / x
    if lmax >= 1:
        out[1] = -math.cos(x) / (x * x) - math.sin(x) / x
    for l in range(1, lmax):
        out[l + 1] = (2 * l + 1) / x * out[l] - out[l - 1]
    return out


def sph_hankel1_array(lmax: int, x: float) -> np.ndarray:
    return sph_bessel_j_array(lmax, x) + 1j * sph_bessel_y_array(lmax, x)


def riccati_deriv_j_array(lmax: int, x: float) -> np.ndarray:
    """``(x j_l(x))' = x j_{l-1}(x) - l j_l(x)`` with ``(x j_0)' = cos x``."""
    j = sph_bessel_j_array(lmax, x)
    out = np.empty(lmax + 1)
    out[0] = math.cos(x)
    ls = np.arange(1, lmax + 1)
    out[1:] = x * j[:-1] - ls * j[1:]
    return out


def riccati_deriv_h1_array(lmax: int, x: float) -> np.ndarray:
    """``(x h_l(x))'`` with ``(x h_0)' = e^{ix}``."""
    h = sph_hankel1_array(lmax, x)
    out = np.empty(lmax + 1, dtype=complex)
    out[0] = complex(math.cos(x), math.sin(x))
    ls = np.arange(1, lmax + 1)
    out[1:] = x * h[:-1] - ls * h[1:]
    return out


def log_sph_bessel_j_array(lmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """``(log|j_l(x)|, sign j_l(x))`` for ``l = 0 .. lmax``.

    Same Miller pass as :func:`sph_bessel_j_array` but the rescalings are
    tracked per entry, so nothing underflows for ``l >> x``.
    """
    x = _check_positive(x)
    top = max(lmax, 1)
    start = top + 30 + int(x) + int(6.0 * math.sqrt(top + x + 1.0))
    raw = np.zeros(top + 1)
    count = np.zeros(top + 1)
    jp1, j = 0.0, 1e-300
    c = 0
    for l in range(start, 0, -1):
        jp1, j = j, (2 * l + 1) / x * j - jp1
        if abs(j) > 1e250:
            jp1 *= 1e-250
            j *= 1e-250
            c += 1
        if l - 1 <= top:
            raw[l - 1] = j
            count[l - 1] = c
    j0 = math.sin(x) / x
    j1 = math.sin(x) / (x * x) - math.cos(x) / x
    ref, val = (0, j0) if abs(j0) >= abs(j1) else (1, j1)
    with np.errstate(divide="ignore"):
        logabs = (
            np.log(np.abs(raw))
            + math.log(abs(val / raw[ref]))
            + (count - count[ref]) * 250.0 * math.log(10.0)
        )
    sign = np.sign(raw) * math.copysign(1.0, val / raw[ref])
    return logabs[: lmax + 1], sign[: lmax + 1]


def log_sph_hankel1_array(lmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """``(log|h_l(x)|, h_l(x) / |h_l(x)|)`` for ``l = 0 .. lmax``.

    Upward recurrence (stable for the dominant ``y_l``) with running rescaling.
    """
    x = _check_positive(x)
    logabs = np.empty(lmax + 1)
    phase = np.empty(lmax + 1, dtype=complex)
    e = complex(math.cos(x), math.sin(x))
    hm1 = -1j * e / x
    h = -e * (x + 1j) / (x * x)
    shift = 0.0
    for l, v in ((0, hm1), (1, h)):
        if l <= lmax:
            logabs[l] = math.log(abs(v))
            phase[l] = v / abs(v)
    for l in range(1, lmax):
        hm1, h = h, (2 * l + 1) / x * h - hm1
        mag = abs(h)
        if mag > 1e200:
            hm1 /= mag
            h /= mag
            shift += math.log(mag)
            mag = 1.0
        logabs[l + 1] = math.log(mag) + shift
        phase[l + 1] = h / mag
    return logabs, phase


def sph_bessel_j(l: int, x: float) -> float:
    return float(sph_bessel_j_array(int(l), x)[int(l)])


def sph_bessel_y(l: int, x: float) -> float:
    return float(sph_bessel_y_array(int(l), x)[int(l)])


def sph_hankel1(l: int, x: float) -> complex:
    """Spherical Hankel function of the first kind, ``j_l + i y_l``."""
    return complex(sph_hankel1_array(int(l), x)[int(l)])


# --------------------------------------------------------------------------
# Wigner 3j symbols
# --------------------------------------------------------------------------

_FACT = [1]


def _fact(n: int) -> int:
    while len(_FACT) <= n:
        _FACT.append(_FACT[-1] * len(_FACT))
    return _FACT[n]


@lru_cache(maxsize=None)
def _w3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    if m1 + m2 + m3 != 0:
        return 0.0
    if j3 > j1 + j2 or j3 < abs(j1 - j2):
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return 0.0
    if m1 == 0 and m2 == 0 and (j1 + j2 + j3) % 2:
        return 0.0
    tmin = max(0, j2 - j3 - m1, j1 - j3 + m2)
    tmax = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    if tmin > tmax:
        return 0.0
    # Racah sum, exact in rationals
    s = Fraction(0)
    for t in range(tmin, tmax + 1):
        den = (
            _fact(t)
            * _fact(j3 - j2 + t + m1)
            * _fact(j3 - j1 + t - m2)
            * _fact(j1 + j2 - j3 - t)
            * _fact(j1 - t - m1)
            * _fact(j2 - t + m2)
        )
        s += Fraction(-1 if t % 2 else 1, den)
    if s == 0:
        return 0.0
    num = (
        _fact(j1 + j2 - j3)
        * _fact(j1 - j2 + j3)
        * _fact(-j1 + j2 + j3)
        * _fact(j1 + m1)
        * _fact(j1 - m1)
        * _fact(j2 + m2)
        * _fact(j2 - m2)
        * _fact(j3 + m3)
        * _fact(j3 - m3)
    )
    square = Fraction(num, _fact(j1 + j2 + j3 + 1)) * s * s
    sign = -1.0 if (j1 - j2 - m3) % 2 else 1.0
    if s < 0:
        sign = -sign
    return sign * math.sqrt(float(square))


def wigner3j(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    """Wigner 3j symbol for integer arguments, exact up to the final rounding.

    Returns 0 whenever a selection rule (triangle, ``m1+m2+m3 = 0``, parity of
    the all-zero-m symbol) is violated.
    """
    args = tuple(int(v) for v in (l1, l2, l3, m1, m2, m3))
    if min(args[:3]) < 0:
        raise ValueError("angular momenta must be non-negative")
    for l, m in zip(args[:3], args[3:]):
        if abs(m) > l:
            raise ValueError(f"|m|={abs(m)} exceeds l={l}")
    return _w3j(*args)


# --------------------------------------------------------------------------
# spherical harmonics
# --------------------------------------------------------------------------


def _legendre_table(lmax: int, theta: float) -> np.ndarray:
    """Normalised ``Ybar_l^m(theta) = Y_l^m(theta, 0)`` for ``0 <= m <= l``."""
    ct, st = math.cos(theta), math.sin(theta)
    P = np.zeros((lmax + 1, lmax + 1))
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, lmax + 1):
        P[m, m] = -math.sqrt((2 * m + 1) / (2.0 * m)) * st * P[m - 1, m - 1]
    for m in range(0, lmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * ct * P[m, m]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (ct * P[l - 1, m] - b * P[l - 2, m])
    return P


def legendre_column(lmax: int, m: int, x: np.ndarray) -> np.ndarray:
    """``Ybar_l^m(arccos x)`` for ``l = m .. lmax`` (rows) at points ``x``."""
    x = np.asarray(x, dtype=float)
    st = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((lmax - m + 1, x.size))
    p = np.full(x.size, 1.0 / math.sqrt(4.0 * math.pi))
    for k in range(1, m + 1):
        p = -math.sqrt((2 * k + 1) / (2.0 * k)) * st * p
    out[0] = p
    if lmax > m:
        out[1] = math.sqrt(2 * m + 3) * x * p
    for i, l in enumerate(range(m + 2, lmax + 1), start=2):
        a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        out[i] = a * (x * out[i - 1] - b * out[i - 2])
    return out


def sph_harm_array(lmax: int, theta: float, phi: float) -> np.ndarray:
    """Table ``Y[l, lmax + m] = Y_l^m(theta, phi)``; zero where ``|m| > l``."""
    Y = np.zeros((lmax + 1, 2 * lmax + 1), dtype=complex)
    ls = np.arange(lmax + 1)
    if theta == 0.0 or theta == math.pi:
        # poles: only m = 0 survives
        parity = (-1.0) ** ls if theta == math.pi else np.ones(lmax + 1)
        Y[:, lmax] = parity * np.sqrt((2 * ls + 1) / (4.0 * math.pi))
        return Y
    P = _legendre_table(lmax, theta)
    for m in range(0, lmax + 1):
        ph = complex(math.cos(m * phi), math.sin(m * phi))
        Y[m:, lmax + m] = P[m:, m] * ph
        if m:
            Y[m:, lmax - m] = (-1) ** m * P[m:, m] * ph.conjugate()
    return Y


def sph_harm(l: int, m: int, theta: float, phi: float) -> complex:
    """Orthonormal spherical harmonic ``Y_l^m(theta, phi)``."""
    l, m = int(l), int(m)
    if abs(m) > l:
        raise ValueError(f"|m|={abs(m)} exceeds l={l}")
    return complex(sph_harm_array(l, float(theta), float(phi))[l, l + m])
