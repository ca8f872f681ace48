"""Closed-form and asymptotic reference values.

Scalar energies are in units of ``hbar c / U``; the fermionic formulas are
in units of ``hbar^2 / (m U^2)`` (the ``k_F^2 / 2m`` dispersion factor is
included with ``hbar = m = 1``).
"""

from __future__ import annotations

import enum
import math
from fractions import Fraction

from .specfun import sph_bessel_j

__all__ = [
    "SeriesFamily",
    "asymptotic_series",
    "swave_sphere_plate_asymptote",
    "pwave_asymptote",
    "pfa_leading",
    "semiclassical_sphere_plate",
    "swave_integrated_dos",
    "semiclassical_integrated_dos",
    "fermionic_two_sphere",
    "fermionic_sphere_plate",
    "em_casimir_polder_l_gt_0",
    "NEUMANN_L0_CONSTANT",
]

# -E * 4 pi R of the l = 0 Neumann sphere-plate channel for R / a -> inf
NEUMANN_L0_CONSTANT = 0.46066


def _F(*pairs) -> tuple[Fraction, ...]:
    return tuple(Fraction(n, d) for n, d in pairs)


class SeriesFamily(enum.Enum):
    """Large-``R`` expansions of the scalar sphere-plate energy in ``a/R``.

    ``value`` holds ``(prefactor numerator, power of a, power of R,
    coefficients)``: the energy is ``-num a^pa / (16 pi R^pR) * sum c_n (a/R)^n``.
    """

    D_ALL_L = (
        2, 1, 2,
        _F((1, 1), (5, 8), (421, 144), (535, 1152), (3083041, 518400),
           (-2741117, 1382400), (557222415727, 36578304000)),
    )
    D_L_GT_0 = (
        5, 3, 4,
        _F((1, 1), (0, 1), (56, 25), (-597, 640), (10453, 1750),
           (-16557, 1600), (394844679647, 9144576000)),
    )
    N_L_GT_0 = (
        10, 3, 4,
        _F((1, 1), (0, 1), (63, 100), (597, 320), (-4159, 14000),
           (-271437, 25600), (148355331834, 2286144000)),
    )

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        return self.value[3]

    @classmethod
    def coerce(cls, name) -> "SeriesFamily":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_").replace(">", "_GT_")
        key = key.replace("__", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(
                f"unknown series family {name!r}; use one of "
                + ", ".join(m.name for m in cls)
            ) from None


def asymptotic_series(family, a: float, R: float, order: int = 6) -> float:
    """Truncated series through ``(a/R)^order`` times its prefactor.

    ``R`` is the center-to-plate distance.
    """
    fam = SeriesFamily.coerce(family)
    if not (0 < a < R):
        raise ValueError(f"need 0 < a < R, got a={a!r}, R={R!r}")
    if not 0 <= order <= 6:
        raise ValueError("order must be in 0..6")
    num, pa, pR, coeffs = fam.value
    x = a / R
    s = 0.0
    for c in reversed(coeffs[: order + 1]):  # Horner
        s = s * x + float(c)
    return -num * a**pa / (16.0 * math.pi * R**pR) * s


def pfa_leading(a: float, L: float) -> float:
    """Leading proximity-force term ``-pi^3 a / (1440 L^2)``."""
    return -(math.pi**3) * a / (1440.0 * L * L)


def swave_sphere_plate_asymptote(a: float, L: float) -> float:
    """Large-``L`` s-wave Dirichlet sphere-plate energy."""
    if not L > 0:
        raise ValueError("L must be positive")
    return pfa_leading(a, L) * (90.0 / math.pi**4) * 2.0 / ((1.0 + a / L) * (1.0 + a / (2.0 * L)))


def pwave_asymptote(a: float, L: float) -> float:
    """Large-``L`` p-wave term ``-(5 pi^3 a^3 / 1440 L^4)(90 / pi^4)``."""
    if not L > 0:
        raise ValueError("L must be positive")
    return -5.0 * math.pi**3 * a**3 / (1440.0 * L**4) * (90.0 / math.pi**4)


def semiclassical_sphere_plate(a: float, L: float) -> float:
    """Two-bounce semiclassical sphere-plate energy with its first correction.

    Identical for Dirichlet and Neumann conditions. Intended for ``L << a``.
    """
    if not (a > 0 and L > 0):
        raise ValueError("a and L must be positive")
    lead = -(1.0 / (16.0 * math.pi)) * a / (L * L) * (math.pi**4 / 90.0)
    return lead * (1.0 - (5.0 / math.pi**2 - 1.0 / 3.0) * L / a)


def swave_integrated_dos(k: float, a: float, r: float) -> float:
    """Small-scatterer integrated density of states ``(a^2/pi r^2) sin(2(r-a)k)``."""
    return a * a / (math.pi * r * r) * math.sin(2.0 * (r - a) * k)


def semiclassical_integrated_dos(k: float, a: float, r: float) -> float:
    """Two-bounce orbit contribution ``a^2/(4 pi r (r-2a)) sin(2(r-2a)k)``."""
    if not r > 2 * a:
        raise ValueError("spheres overlap: need r > 2a")
    return a * a / (4.0 * math.pi * r * (r - 2.0 * a)) * math.sin(2.0 * (r - 2.0 * a) * k)


def fermionic_two_sphere(a: float, r: float, k_F: float, mass: float = 1.0) -> float:
    """Semiclassical fermionic energy of two spheres, valid for ``k_F a > 1``."""
    if not r > 2 * a:
        raise ValueError("spheres overlap: need r > 2a")
    L = r - 2.0 * a
    return -(k_F * k_F / (2.0 * mass)) * a * a / (2.0 * math.pi * r * L) * sph_bessel_j(1, 2.0 * L * k_F)


def fermionic_sphere_plate(a: float, r: float, k_F: float, mass: float = 1.0) -> float:
    """Semiclassical fermionic sphere-plate energy; ``r - a`` is the gap."""
    if not r > a:
        raise ValueError("need r > a")
    return -(k_F * k_F / (2.0 * mass)) * a / (2.0 * math.pi * (r - a)) * sph_bessel_j(1, 2.0 * (r - a) * k_F)


def em_casimir_polder_l_gt_0(a: float, R: float) -> float:
    """Leading electromagnetic sphere-plate energy ``-9 a^3 / (16 pi R^4)``."""
    return -(3.0 + 6.0) * a**3 / (16.0 * math.pi * R**4)
