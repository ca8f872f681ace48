"""Casimir energies from ln det M on the imaginary axis, and the fermionic
energy from the phase of det M on the real axis.

Scalar energies are in units of ``hbar c / U`` with ``U`` the length unit of
the inputs. The fermionic energy is in units of ``hbar^2 / (m U^2)``.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from . import spectral
from .geometry import Geometry, SpherePlate, validate
from .spectral import (
    Assembler,
    NoConvergence,
    choose_l_max,
    converged_log_det,
    halfdomain_assembler,
    two_sphere_assembler,
)

__all__ = [
    "EnergyEstimate",
    "QuadratureSpec",
    "casimir_energy",
    "sphere_plate_energy",
    "sphere_plate_energy_l_cut",
    "neumann_l0_energy",
    "cylinder_energy_per_length",
    "fermionic_energy_exact",
    "fermionic_energy_curve",
    "integrand",
    "MIN_GAP_RATIO",
]

# below this gap/radius ratio the required l_max grows past the cap
MIN_GAP_RATIO = 0.1


@dataclass(frozen=True)
class EnergyEstimate:
    """Energy value with its error budget.

    Attributes
    ----------
    value : float
        Energy (``hbar c / U`` for scalar fields, ``hbar^2/(m U^2)`` for the
        fermionic path).
    quad_error : float
        Absolute quadrature error estimate, including the analytic tail.
    trunc_error : float
        Absolute estimate of the angular-truncation error.
    k_max_used, l_max_used, node_count
        Integration cutoff, largest truncation used, and number of
        integrand evaluations.
    negative_det_nodes : int
        Nodes where ``det M`` was negative; ``ln|det M|`` is integrated.
    tail_warning : bool
        The tail bound exceeded ``rel_tol * |value|``.
    """

    value: float
    quad_error: float = 0.0
    trunc_error: float = 0.0
    k_max_used: float = 0.0
    l_max_used: int = 0
    node_count: int = 0
    negative_det_nodes: int = 0
    tail_warning: bool = False

    def __float__(self) -> float:
        return float(self.value)

    @property
    def error(self) -> float:
        return self.quad_error + self.trunc_error


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule on ``(0, k_max]``.

    Panels shrink geometrically by ``ratio`` toward ``k = 0``; the innermost
    panel ends at ``0`` (open rule, ``k = 0`` is never evaluated). ``k_max``
    defaults to ``10 / L``.
    """

    k_max: float | None = None
    panels: int = 8
    nodes: int = 16
    ratio: float = 2.0
    rel_tol: float = 1e-6
    breakpoints: tuple[float, ...] = ()
    tail: bool = True

    def __post_init__(self):
        if self.k_max is not None and not self.k_max > 0:
            raise ValueError("k_max must be positive")
        if self.panels < 1 or self.nodes < 2:
            raise ValueError("need at least one panel and two nodes")
        if not self.ratio > 1:
            raise ValueError("panel ratio must exceed 1")
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))

    def edges(self, k_max: float) -> np.ndarray:
        e = [0.0] + [k_max / self.ratio**i for i in range(self.panels - 1, -1, -1)]
        extra = [b for b in self.breakpoints if 0 < b < k_max]
        return np.unique(np.array(e + extra))

    def points(self, k_max: float) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and weights on ``(0, k_max]``."""
        return _nodes(self.edges(k_max), self.nodes)


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _nodes(edges: np.ndarray, n: int):
    x, w = _gauss(n)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return (half * x + lo + half).ravel(), (half * w).ravel()


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KREIN_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    nt = _threads()
    if nt == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(nt) as pool:
        return list(pool.map(fn, items))  # map keeps input order


@dataclass
class _NodeResult:
    value: float
    delta: float = 0.0
    l_max: int = 0
    negative: bool = False


def _integrate(
    f: Callable[[float], _NodeResult],
    edges: np.ndarray,
    nodes: int,
    weight: Callable[[np.ndarray], np.ndarray] | None = None,
):
    """Gauss-Legendre with ``nodes`` and ``nodes // 2`` points per panel.

    Returns ``(Q, |Q - Q_half|, truncation, results_fine)``.
    """
    kf, wf = _nodes(edges, nodes)
    kc, wc = _nodes(edges, max(nodes // 2, 1))
    rf = _map(f, kf)
    rc = _map(f, kc)
    vf = np.array([r.value for r in rf])
    vc = np.array([r.value for r in rc])
    if weight is not None:
        vf = vf * weight(kf)
        vc = vc * weight(kc)
        tf = np.array([r.delta for r in rf]) * np.abs(weight(kf))
    else:
        tf = np.array([r.delta for r in rf])
    q = float(np.dot(wf, vf))
    qc = float(np.dot(wc, vc))
    return q, abs(q - qc), float(np.dot(wf, tf)), kf, rf + rc


def _wick_integral(
    f: Callable[[float], _NodeResult],
    gap: float,
    quad: QuadratureSpec,
    weight=None,
    prefactor: float = 1.0 / (2.0 * math.pi),
) -> EnergyEstimate:
    k_max = quad.k_max if quad.k_max is not None else 10.0 / gap
    edges = quad.edges(k_max)
    q, qerr, terr, kf, results = _integrate(f, edges, quad.nodes, weight)
    value = prefactor * q
    qerr *= prefactor
    terr *= prefactor
    tail_warn = False
    if quad.tail:
        # continue the last node's value with the e^{-2 k L} envelope
        k_last = kf[-1]
        f_last = results[len(kf) - 1].value
        decay = 2.0 * gap
        if weight is None:
            tail = f_last * math.exp(-decay * (k_max - k_last)) / decay
        else:
            # weight k4: int_{k_max}^inf k e^{-2kL} dk
            tail = f_last * math.exp(-decay * (k_max - k_last)) * (k_max / decay + 1.0 / decay**2)
        tail *= prefactor
        value += tail
        qerr += abs(tail)
        tail_warn = bool(abs(tail) > quad.rel_tol * abs(value))
    return EnergyEstimate(
        value=float(value),
        quad_error=float(qerr),
        trunc_error=float(terr),
        k_max_used=float(k_max),
        l_max_used=max((r.l_max for r in results), default=0),
        node_count=len(results),
        negative_det_nodes=sum(r.negative for r in results[: len(kf)]),
        tail_warning=tail_warn,
    )


def _log_det_node(
    assembler: Assembler,
    a_max: float,
    gap: float,
    safety: int,
    rtol: float,
    atol: float,
    l_max_init: int | None = None,
):
    def f(k: float) -> _NodeResult:
        l0 = choose_l_max(a_max, gap, k, safety) if l_max_init is None else int(l_max_init)
        res = converged_log_det(assembler, k, l0, rtol, atol)
        return _NodeResult(res.value, res.delta, res.l_max, res.phase.real < 0)

    return f


def _check_gap(gap: float, a_max: float):
    if gap < MIN_GAP_RATIO * a_max:
        raise NoConvergence(
            spectral.L_MAX_CAP,
            math.inf,
            reason=(
                f"surface gap {gap!r} is below {MIN_GAP_RATIO} x radius {a_max!r}; "
                "the required angular truncation is out of practical range"
            ),
        )


def _assembler_for(geometry: Geometry) -> Assembler:
    if geometry.n == 2:
        s1, s2 = geometry.spheres
        return two_sphere_assembler(
            s1.radius, float(geometry.distances[0, 1]), s1.bc, s2.radius, s2.bc
        )
    return spectral.general_assembler(geometry)


def casimir_energy(
    geometry,
    quad: QuadratureSpec | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-13,
    safety: int = 2,
    l_max_init: int | None = None,
) -> EnergyEstimate:
    """Scalar Casimir energy ``(1/2 pi) int_0^inf ln det M(i k4) dk4``.

    Two spheres are reduced to fixed-``m`` blocks; more spheres use the
    full matrix.

    Parameters
    ----------
    geometry : Geometry or iterable of SphereSpec
    quad : QuadratureSpec, optional
        ``k_max`` defaults to ``10 / L`` with ``L`` the smallest gap.
    rtol, atol : float
        Truncation tolerance on ``ln det`` per node.
    safety, l_max_init : int
        Starting truncation is ``choose_l_max(a, L, k4, safety)`` at each
        node unless ``l_max_init`` fixes it.

    Raises
    ------
    NoConvergence
        The angular truncation did not converge below the cap, or the
        smallest gap is below ``0.1`` times the largest radius.
    """
    geometry = validate(geometry)
    quad = quad or QuadratureSpec()
    if geometry.n == 1:
        return EnergyEstimate(0.0)
    gap = geometry.min_gap()
    a_max = float(geometry.radii.max())
    _check_gap(gap, a_max)
    f = _log_det_node(_assembler_for(geometry), a_max, gap, safety, rtol, atol, l_max_init)
    return _wick_integral(f, gap, quad)


def sphere_plate_energy(
    a: float,
    L: float,
    plate_bc="D",
    sphere_bc=None,
    quad: QuadratureSpec | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-13,
    drop_l0: bool = False,
    safety: int = 2,
    l_max_init: int | None = None,
) -> EnergyEstimate:
    """Sphere of radius ``a`` at gap ``L`` from an infinite plate.

    The plate is replaced by the mirror image of the sphere at center
    distance ``r = 2 (L + a)``; a Dirichlet plate keeps the antisymmetric
    sector ``prod_m det(I - A_m)``, a Neumann plate the symmetric one.
    """
    sp = SpherePlate(float(a), float(L), sphere_bc if sphere_bc is not None else plate_bc, plate_bc)
    if sp.experimental:
        warnings.warn(
            "sphere and plate with different boundary conditions: the mirror "
            "construction is an extrapolation here",
            stacklevel=2,
        )
    quad = quad or QuadratureSpec()
    _check_gap(sp.L, sp.a)
    asm = halfdomain_assembler(sp.a, sp.r, sp.plate_bc, sp.sphere_bc, drop_l0=drop_l0)
    # the mirrored pair has gap 2L; the plate problem decays as e^{-2 k L}
    f = _log_det_node(asm, sp.a, sp.L, safety, rtol, atol, l_max_init)
    return _wick_integral(f, sp.L, quad)


def sphere_plate_energy_l_cut(a: float, L: float, drop_l0: bool = True, **kwargs) -> EnergyEstimate:
    """:func:`sphere_plate_energy` with the ``l = 0`` channel removed."""
    return sphere_plate_energy(a, L, drop_l0=drop_l0, **kwargs)


def _graded(lo: float, hi: float, levels: int, ratio: float, toward: str) -> list[float]:
    """Panel edges between ``lo`` and ``hi`` shrinking toward one or both ends."""
    width = hi - lo
    if toward == "lo":
        return [lo] + [lo + width / ratio**i for i in range(levels, -1, -1)]
    if toward == "hi":
        return [hi - width / ratio**i for i in range(0, levels + 1)] + [hi]
    mid = 0.5 * (lo + hi)
    return _graded(lo, mid, levels, ratio, "lo")[:-1] + _graded(mid, hi, levels, ratio, "hi")


def neumann_l0_energy(a: float, R_over_a: float, levels: int = 30, nodes: int = 16) -> float:
    """Energy of the ``l = m = 0`` channel of a Neumann sphere near a Neumann plate.

    ``R`` is the center-to-plate distance. The channel determinant changes
    sign at one ``k4``; both that root and ``k4 -> 0`` are logarithmic
    singularities of ``ln|det|`` and get geometrically graded panels.
    """
    a = float(a)
    R = float(R_over_a) * a
    if not (a > 0 and R > a):
        raise ValueError("need a > 0 and R / a > 1")
    asm = halfdomain_assembler(a, 2.0 * R, "N", "N", m_values=[0])

    def det(k):
        return float(asm(k, 0)[0][1][0, 0])

    # det < 0 near 0 and -> 1 at large k; bracket the sign change
    lo, hi = 1e-8 / R, 0.5 / R
    while det(hi) < 0:
        hi *= 2.0
    root = brentq(det, lo, hi, xtol=1e-15 / R, rtol=4 * np.finfo(float).eps)
    k_max = 40.0 / (2.0 * (R - a))
    edges = np.unique(
        _graded(0.0, root, levels, 2.0, "both") + _graded(root, k_max, levels, 2.0, "lo")
    )
    k, w = _nodes(edges, nodes)
    vals = np.array([math.log(abs(det(x))) for x in k])
    return float(np.dot(w, vals)) / (2.0 * math.pi)


def cylinder_energy_per_length(
    logdet_fn: Callable[[float], float],
    quad: QuadratureSpec | None = None,
    L: float = 1.0,
) -> EnergyEstimate:
    """``(1/4 pi) int_0^inf k4 ln det M(i k4) dk4`` for a 2D system.

    ``logdet_fn`` supplies ``ln det M(i k4)``; ``L`` sets the default
    cutoff ``10 / L`` and the tail decay ``e^{-2 k4 L}``.
    """
    quad = quad or QuadratureSpec()

    def f(k):
        return _NodeResult(float(logdet_fn(float(k))))

    return _wick_integral(f, L, quad, weight=lambda k: k, prefactor=1.0 / (4.0 * math.pi))


def integrand(geometry_or_plate, k4_values: Sequence[float], rtol: float = 1e-8, atol: float = 1e-13):
    """``ln|det M(i k4)|`` with the truncation used, for inspection.

    Accepts a :class:`Geometry` or a :class:`SpherePlate`.
    Returns a list of :class:`~krein.spectral.LogDetResult`.
    """
    if isinstance(geometry_or_plate, SpherePlate):
        sp = geometry_or_plate
        asm = halfdomain_assembler(sp.a, sp.r, sp.plate_bc, sp.sphere_bc)
        a_max, gap = sp.a, sp.L
    else:
        g = validate(geometry_or_plate)
        if g.n == 1:
            return [spectral.LogDetResult(0.0, 1.0, 0) for _ in k4_values]
        asm = _assembler_for(g)
        a_max, gap = float(g.radii.max()), g.min_gap()
    return [
        converged_log_det(asm, float(k), choose_l_max(a_max, gap, float(k)), rtol, atol)
        for k in k4_values
    ]


# --------------------------------------------------------------------------
# fermionic energy
# --------------------------------------------------------------------------


def _fermionic_setup(geometry: Geometry, k_F: float, step: float | None, l_max: int | None):
    if geometry.n < 2:
        return None, None, None
    if geometry.n == 2:
        s1, s2 = geometry.spheres
        asm = two_sphere_assembler(
            s1.radius, float(geometry.distances[0, 1]), s1.bc, s2.radius, s2.bc, real_axis=True
        )
    else:
        asm = spectral.general_assembler(geometry, real_axis=True)
    a_max = float(geometry.radii.max())
    if l_max is None:
        l_max = choose_l_max(a_max, geometry.min_gap(), k_F, safety=6)
    if step is None:
        # resolve oscillations with period pi / (longest center distance)
        step = min(0.005, 0.05 / float(geometry.distances.max())) / max(1.0, a_max)
    n = max(int(math.ceil(k_F / step)), 2)
    grid = np.linspace(k_F / n, k_F, n)
    grid = np.concatenate([[min(1e-3, 0.1 * grid[0])], grid])
    return asm, grid, l_max


def fermionic_energy_curve(
    geometry, k_F_values: Sequence[float], step: float | None = None, l_max: int | None = None
) -> np.ndarray:
    """Fermionic energies for several Fermi momenta from a single phase trace."""
    geometry = validate(geometry)
    kf = np.asarray(k_F_values, dtype=float)
    if np.any(kf <= 0):
        raise ValueError("Fermi momenta must be positive")
    asm, grid, l_max = _fermionic_setup(geometry, float(kf.max()), step, l_max)
    if asm is None:
        return np.zeros_like(kf)
    tr = spectral.phase_trace(asm, grid, l_max)
    k = np.concatenate([[0.0], tr.grid])
    nc = np.concatenate([[0.0], tr.n_c])
    e = -cumulative_trapezoid(nc * k, k, initial=0.0)
    return np.interp(kf, k, e)


def fermionic_energy_exact(
    geometry, k_F: float, step: float | None = None, l_max: int | None = None
) -> EnergyEstimate:
    """Fermionic Casimir energy ``-int_0^{k_F} N_C(k) k dk``.

    ``N_C = -(1/pi) Im ln det M(k)`` is traced continuously along the real
    axis. The result is in units of ``hbar^2 / (m U^2)``: multiply by
    ``hbar^2/m`` of the fermion for a physical energy. (With
    ``k_F^2/2m`` factored out this is the form ``-(k_F^2/2m) ...`` of the
    semiclassical approximation.)
    """
    geometry = validate(geometry)
    if not k_F > 0:
        raise ValueError("k_F must be positive")
    asm, grid, l_max = _fermionic_setup(geometry, float(k_F), step, l_max)
    if asm is None:
        return EnergyEstimate(0.0, k_max_used=float(k_F))
    tr = spectral.phase_trace(asm, grid, l_max)
    k = np.concatenate([[0.0], tr.grid])
    g = np.concatenate([[0.0], tr.n_c]) * k
    value = -float(np.trapezoid(g, k))
    # Richardson-style estimate from the every-other-point rule
    coarse = -float(np.trapezoid(g[::2], k[::2])) if len(k) > 4 else value
    quad_error = abs(value - coarse) / 3.0
    # truncation: sensitivity of N_C at the Fermi edge to l_max + 4
    hi = spectral._sum_blocks(asm(float(k_F), l_max + 4))
    lo = spectral._sum_blocks(asm(float(k_F), l_max))
    dphase = abs(math.remainder(np.angle(hi.phase) - np.angle(lo.phase), 2 * math.pi))
    trunc_error = dphase / math.pi * k_F * k_F
    return EnergyEstimate(
        value=value,
        quad_error=quad_error,
        trunc_error=float(trunc_error),
        k_max_used=float(k_F),
        l_max_used=int(l_max),
        node_count=len(tr.grid) + 2,
    )
