"""Truncated blocks of the inverse multi-scattering matrix ``M``.

For spheres ``j != j'``::

    M^{jj'}_{lm,l'm'} = i^{2m+l'-l} sqrt(4pi (2l+1)(2l'+1)) (a_j/a_j')^2
                        * j_l(k a_j) / h_{l'}(k a_j')
                        * sum_{l''} sqrt(2l''+1) i^{l''} (l'' l' l; 0 0 0)
                          (l'' l' l; m-m', m', -m) h_{l''}(k r) Y_{l''}^{m-m'}(r_hat)

and ``M^{jj}_{lm,l'm'} = delta``. All sphere frames are aligned with the
global frame, so the frame-rotation matrix is the identity. Neumann spheres
replace ``j_l(ka)`` by ``d/da (a j_l(ka))`` (row sphere) and ``h_{l'}(ka')``
by ``d/da' (a' h_{l'}(ka'))`` (column sphere).

The translation sum uses ``Y`` with the Condon-Shortley phase as written;
compared with the textbook addition theorem this is the mirror image
``phi -> -phi`` of the configuration, which leaves every determinant unchanged.

On the imaginary axis ``k = i k4`` the continuation phases collapse to
``(-1)^{m+l'}`` (times -1 for a Neumann column sphere)::

    A = (-1)^{m+l'} s_{j'} (a_j/a_j')^2 sum_{l''} G * Y
        * exp(log n_j(l) - log d_{j'}(l') + log k_{l''}(k4 r))

with ``n = i_l`` or ``(x i_l)'`` and ``d = k_l`` or ``|(x k_l)'|``. The
exponent of each term is ``-k4 (r - a_j - a_j')`` plus bounded power-law
pieces, hence non-positive up to those factors by the non-overlap condition,
so every term is formed unscaled without overflow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from . import specfun
from .geometry import BC, Geometry, validate

__all__ = [
    "ChannelIndex",
    "MBlock",
    "channels",
    "assemble_general_real_k",
    "assemble_general_imag_k",
    "assemble_two_sphere_mblock",
    "assemble_two_sphere_mblock_real_k",
    "two_sphere_full_mblock",
    "mirror_block",
    "halfdomain_matrices",
]


class ChannelIndex(NamedTuple):
    j: int
    l: int
    m: int

    def label(self) -> str:
        return f"j{self.j}_l{self.l}_m{self.m}"


def channels(n: int, l_max: int) -> list[ChannelIndex]:
    """Flattened channel order: lexicographic in ``(j, l, m)``."""
    return [
        ChannelIndex(j, l, m)
        for j in range(n)
        for l in range(l_max + 1)
        for m in range(-l, l + 1)
    ]


@dataclass(frozen=True)
class MBlock:
    """A dense block of ``M`` (or of its coupling part ``A``).

    ``k`` is the complex wavenumber: real for the real axis, ``1j * k4`` on
    the imaginary axis.
    """

    entries: np.ndarray
    k: complex
    l_max: int
    m: int | None = None
    channels: tuple = ()

    @property
    def on_imag_axis(self) -> bool:
        return self.k.real == 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def to_csv(self, fh) -> None:
        """Row-major dump; complex entries are written as ``re+imj``."""
        labels = (
            [c.label() for c in self.channels]
            if self.channels
            else [f"c{i}" for i in range(self.entries.shape[1])]
        )
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row"] + labels)
        for lab, row in zip(labels, self.entries):
            w.writerow([lab] + [repr(complex(v)) if np.iscomplexobj(row) else repr(float(v)) for v in row])


# --------------------------------------------------------------------------
# angular coefficient tables (k independent, cached)
# --------------------------------------------------------------------------


# Coupling tables are Gaunt integrals of three normalised Legendre functions,
# evaluated with Gauss-Legendre rules that are exact for the polynomial
# integrand (degree <= 4 l_max needs 2 l_max + 1 nodes).


def _gaunt_nodes(l_max: int):
    return np.polynomial.legendre.leggauss(2 * l_max + 1)


def _parity_mask(rows, cols, l_max: int) -> np.ndarray:
    l = np.asarray(rows)[:, None, None]
    lp = np.asarray(cols)[None, :, None]
    lpp = np.arange(2 * l_max + 1)[None, None, :]
    return ((l + lp + lpp) % 2 == 0) & (lpp >= abs(l - lp)) & (lpp <= l + lp)


@lru_cache(maxsize=8)
def _general_coeffs(l_max: int):
    """``G[row, col, l'']`` for rows ``(l, m)``, cols ``(l', m')``.

    ``G = sqrt(4pi(2l+1)(2l'+1)) sqrt(2l''+1) (l'' l' l;000)(l'' l' l;m-m',m',-m)``.
    """
    x, w = _gaunt_nodes(l_max)
    L2 = 2 * l_max
    cols = {m: specfun.legendre_column(L2, abs(m), x) for m in range(-L2, L2 + 1)}
    for m in range(-L2, 0):
        cols[m] = cols[m] * (-1.0) ** m

    ch = [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]
    N = len(ch)
    G = np.zeros((N, N, L2 + 1))
    idx = {}
    for r, (l, m) in enumerate(ch):
        idx.setdefault(m, []).append(r)
    for m, rows in idx.items():
        for mp, cs in idx.items():
            mu = m - mp
            Yl = cols[m][: l_max - abs(m) + 1] * w  # rows l = |m|..l_max
            Ylp = cols[mp][: l_max - abs(mp) + 1]
            Ypp = cols[mu]  # l'' = |mu|..2 l_max
            T = np.einsum("ax,bx,cx->abc", Yl, Ylp, Ypp, optimize=True)
            G[np.ix_(rows, cs, range(abs(mu), L2 + 1))] = (8.0 * math.pi**2 * (-1.0) ** m) * T
    ls = np.array([l for l, _ in ch])
    ms = np.array([m for _, m in ch])
    G *= _parity_mask(ls, ls, l_max)
    mu = ms[:, None] - ms[None, :]
    G.setflags(write=False)
    return G, mu, ls, ms


@lru_cache(maxsize=256)
def _mblock_table(m: int, cap: int) -> np.ndarray:
    x, w = _gaunt_nodes(cap)
    Y = specfun.legendre_column(cap, m, x)
    Y0 = specfun.legendre_column(2 * cap, 0, x)
    lpp = np.arange(2 * cap + 1)
    G = np.einsum("ax,bx,cx->abc", Y * w, Y, Y0, optimize=True)
    G *= (-1.0) ** m * 2.0 * math.pi * np.sqrt(4.0 * math.pi * (2 * lpp + 1))
    ls = np.arange(m, cap + 1)
    G *= _parity_mask(ls, ls, cap)
    G.setflags(write=False)
    return G


def _mblock_coeffs(m: int, l_max: int) -> np.ndarray:
    """Axial version of :func:`_general_coeffs` with ``Y_{l''}^0(+z)`` folded in.

    ``G[l, l', l''] = sqrt((2l+1)(2l'+1)) (2l''+1) (l'' l' l;000)(l'' l' l;0,m,-m)``
    for ``l, l' = |m| .. l_max``. Tables are built for ``l_max`` rounded up
    to a multiple of 8 and sliced; the rounding depends on ``l_max`` alone,
    so results never depend on which tables happen to be cached.
    """
    m = abs(m)
    cap = max(8, -(-l_max // 8) * 8)
    n = l_max - m + 1
    return _mblock_table(m, cap)[:n, :n, : 2 * l_max + 1]


def _kahan_last(T: np.ndarray) -> np.ndarray:
    """Compensated sum over the last axis, in ascending index order."""
    s = np.zeros(T.shape[:-1], dtype=T.dtype)
    c = np.zeros_like(s)
    for i in range(T.shape[-1]):
        y = T[..., i] - c
        t = s + y
        c = (t - s) - y
        s = t
    return s


# --------------------------------------------------------------------------
# radial factors
# --------------------------------------------------------------------------


class _Radial(NamedTuple):
    """Log-magnitudes and unit phases of the Bessel factors of one sphere."""

    log_num: np.ndarray
    ph_num: np.ndarray
    log_den: np.ndarray
    ph_den: np.ndarray


def _imag_radial(a: float, bc: BC, k4: float, l_max: int) -> _Radial:
    x = k4 * a
    ones = np.ones(l_max + 1)
    if bc == BC.DIRICHLET:
        return _Radial(
            specfun.log_mod_sph_bessel_i(l_max, x), ones,
            specfun.log_mod_sph_bessel_k(l_max, x), ones,
        )
    # (x k_l)' < 0: the sign is carried on the denominator phase
    return _Radial(
        specfun.log_riccati_i_deriv(l_max, x), ones,
        specfun.log_riccati_k_deriv(l_max, x), -ones,
    )


def _riccati_log(logabs, phase, x, first) -> tuple[np.ndarray, np.ndarray]:
    """``(x f_l)' = x f_{l-1} - l f_l`` in log form, factoring out the larger."""
    n = len(logabs)
    out_log = np.empty(n - 1)
    out_ph = np.empty(n - 1, dtype=complex)
    out_log[0] = math.log(abs(first))
    out_ph[0] = first / abs(first)
    for l in range(1, n - 1):
        if logabs[l] >= logabs[l - 1]:
            base = l
            t = x * np.exp(logabs[l - 1] - logabs[l]) * phase[l - 1] / phase[l] - l
        else:
            base = l - 1
            t = x - l * np.exp(logabs[l] - logabs[l - 1]) * phase[l] / phase[l - 1]
        out_log[l] = logabs[base] + math.log(abs(t))
        out_ph[l] = phase[base] * t / abs(t)
    return out_log, out_ph


def _real_radial(a: float, bc: BC, k: float, l_max: int) -> _Radial:
    x = k * a
    lj, sj = specfun.log_sph_bessel_j_array(l_max + 1, x)
    lh, ph = specfun.log_sph_hankel1_array(l_max + 1, x)
    sj = sj.astype(complex)
    if bc == BC.DIRICHLET:
        return _Radial(lj[:-1], sj[:-1], lh[:-1], ph[:-1])
    ln, pn = _riccati_log(lj, sj, x, math.cos(x))
    ld, pd = _riccati_log(lh, ph, x, complex(math.cos(x), math.sin(x)))
    return _Radial(ln, pn, ld, pd)


def _exp_terms(log_num, log_den, log_prop):
    """``exp(log_num[l] - log_den[l'] + log_prop[l''])`` as an (n, n, L) array."""
    with np.errstate(invalid="ignore", over="ignore"):
        E = log_num[:, None, None] - log_den[None, :, None] + log_prop[None, None, :]
        # only terms with a vanishing 3j weight can get this large; keeping
        # them finite makes 0 * E = 0
        E = np.where(np.isnan(E), -np.inf, np.minimum(E, 700.0))
        return np.exp(E)


_I_POW = np.array([1, 1j, -1, -1j])


# --------------------------------------------------------------------------
# general n-sphere assembly
# --------------------------------------------------------------------------


def _pair_coupling(
    G, mu, ls, ms, l_max, rad_j, rad_jp, log_prop, ph_prop, Ytab, const, imag_axis
):
    """Coupling block ``A^{jj'}`` in the general channel layout."""
    Lp = 2 * l_max + 1
    # exp of log num[l] - log den[l'] + log prop[l''] indexed by channels
    E = _exp_terms(rad_j.log_num[ls], rad_jp.log_den[ls], log_prop[:Lp])
    Y = Ytab[:Lp][:, 2 * l_max + mu]  # (L'', N, N)
    T = G * E * np.moveaxis(Y, 0, -1)
    if imag_axis:
        sign = (-1.0) ** (ms[:, None] + ls[None, :]) * rad_jp.ph_den[ls][None, :].real
        if np.all(Y.imag == 0.0):
            T = T.real
        return const * sign * _kahan_last(T)
    T = T * (ph_prop[:Lp] * _I_POW[np.arange(Lp) % 4])[None, None, :]
    phase = (
        _I_POW[(2 * ms[:, None] + ls[None, :] - ls[:, None]) % 4]
        * rad_j.ph_num[ls][:, None]
        / rad_jp.ph_den[ls][None, :]
    )
    return const * phase * _kahan_last(T)


def _assemble_general(geometry: Geometry, k: complex, l_max: int, radius_factor: bool) -> MBlock:
    geometry = geometry if isinstance(geometry, Geometry) else validate(geometry)
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    imag_axis = k.real == 0.0
    kk = k.imag if imag_axis else k.real
    if not kk > 0.0:
        raise ValueError(f"wavenumber must be positive, got {k!r}")
    n = geometry.n
    G, mu, ls, ms = _general_coeffs(l_max)
    N = G.shape[0]
    rad = [
        (_imag_radial if imag_axis else _real_radial)(s.radius, s.bc, kk, l_max)
        for s in geometry.spheres
    ]
    blocks = [[None] * n for _ in range(n)]
    for j in range(n):
        for jp in range(n):
            if j == jp:
                blocks[j][jp] = np.eye(N)
                continue
            r = float(geometry.distances[j, jp])
            theta, phi = geometry.direction_angles(j, jp)
            Ytab = specfun.sph_harm_array(2 * l_max, theta, phi)
            if imag_axis:
                log_prop = specfun.log_mod_sph_bessel_k(2 * l_max, kk * r)
                ph_prop = None
            else:
                log_prop, ph_prop = specfun.log_sph_hankel1_array(2 * l_max, kk * r)
            aj, ajp = geometry.spheres[j].radius, geometry.spheres[jp].radius
            const = (aj / ajp) ** 2 if radius_factor else 1.0
            blocks[j][jp] = _pair_coupling(
                G, mu, ls, ms, l_max, rad[j], rad[jp], log_prop, ph_prop, Ytab, const, imag_axis
            )
    full = np.block(blocks)
    full.setflags(write=False)
    return MBlock(full, complex(k), l_max, None, tuple(channels(n, l_max)))


def assemble_general_imag_k(geometry, k4: float, l_max: int, radius_factor: bool = True) -> MBlock:
    """Full ``M(i k4)`` for any sphere configuration.

    Real dtype whenever all pair directions have azimuth 0 or pi (or lie on
    the z axis); otherwise the entries carry ``exp(i (m-m') phi)`` factors and
    the matrix is complex with a real determinant.
    """
    return _assemble_general(geometry, complex(0.0, float(k4)), int(l_max), radius_factor)


def assemble_general_real_k(geometry, k: float, l_max: int, radius_factor: bool = True) -> MBlock:
    """Full complex ``M(k)`` for real ``k > 0``."""
    return _assemble_general(geometry, complex(float(k), 0.0), int(l_max), radius_factor)


# --------------------------------------------------------------------------
# two spheres on a common axis: fixed-m blocks
# --------------------------------------------------------------------------


def _two_sphere_block(k, a, r, m, l_max, bc, direction, a2, bc2):
    m = int(m)
    if abs(m) > l_max:
        raise ValueError(f"|m|={abs(m)} exceeds l_max={l_max}")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 (toward +z) or -1")
    a2 = a if a2 is None else a2
    bc, bc2 = BC.coerce(bc), BC.coerce(bc if bc2 is None else bc2)
    if not r > a + a2:
        raise ValueError(f"spheres overlap: r={r!r} <= {a + a2!r}")
    imag_axis = k.real == 0.0
    kk = k.imag if imag_axis else k.real
    if not kk > 0.0:
        raise ValueError(f"wavenumber must be positive, got {k!r}")
    G = _mblock_coeffs(m, l_max)
    Lp = 2 * l_max + 1
    ls = np.arange(abs(m), l_max + 1)
    lpp = np.arange(Lp)
    radial = _imag_radial if imag_axis else _real_radial
    rad_row = radial(a, bc, kk, l_max)
    rad_col = radial(a2, bc2, kk, l_max)
    if imag_axis:
        log_prop = specfun.log_mod_sph_bessel_k(2 * l_max, kk * r)
    else:
        log_prop, ph_prop = specfun.log_sph_hankel1_array(2 * l_max, kk * r)
    E = _exp_terms(rad_row.log_num[ls], rad_col.log_den[ls], log_prop)
    T = G * E
    if direction == -1:
        T = T * ((-1.0) ** lpp)[None, None, :]
    const = (a / a2) ** 2
    if imag_axis:
        sign = (-1.0) ** (m + ls)[None, :] * rad_col.ph_den[ls][None, :]
        A = const * sign * _kahan_last(T)
    else:
        T = T * (ph_prop * _I_POW[lpp % 4])[None, None, :]
        phase = (
            _I_POW[(2 * m + ls[None, :] - ls[:, None]) % 4]
            * rad_row.ph_num[ls][:, None]
            / rad_col.ph_den[ls][None, :]
        )
        A = const * phase * _kahan_last(T)
    A.setflags(write=False)
    return MBlock(A, complex(k), l_max, m, tuple(ChannelIndex(0, int(l), m) for l in ls))


def assemble_two_sphere_mblock(
    a: float,
    r: float,
    k4: float,
    m: int,
    l_max: int,
    bc="D",
    direction: int = 1,
    a2: float | None = None,
    bc2=None,
) -> MBlock:
    """Coupling block ``A^{(m)}`` of two spheres on the z axis at ``k = i k4``.

    ``direction=+1`` gives ``A^{12}`` (row sphere at the origin, column sphere
    at ``+r z``); ``direction=-1`` gives ``A^{21}``. Rows and columns run over
    ``l = |m| .. l_max``. At the poles only ``m'' = m`` survives, which
    collapses the ``m''`` sum.
    """
    return _two_sphere_block(complex(0.0, float(k4)), a, r, m, l_max, bc, direction, a2, bc2)


def assemble_two_sphere_mblock_real_k(
    a, r, k, m, l_max, bc="D", direction=1, a2=None, bc2=None
) -> MBlock:
    """Complex counterpart of :func:`assemble_two_sphere_mblock` at real ``k``."""
    return _two_sphere_block(complex(float(k), 0.0), a, r, m, l_max, bc, direction, a2, bc2)


def two_sphere_full_mblock(a, r, k, m, l_max, bc="D", a2=None, bc2=None) -> np.ndarray:
    """``[[I, A^{12}], [A^{21}, I]]`` for one ``m`` (``k`` complex)."""
    make = _two_sphere_block
    k = complex(k)
    A12 = make(k, a, r, m, l_max, bc, 1, a2, bc2).entries
    a2_ = a if a2 is None else a2
    bc2_ = bc if bc2 is None else bc2
    A21 = make(k, a2_, r, m, l_max, bc2_, -1, a, bc).entries
    n = A12.shape[0]
    return np.block([[np.eye(n), A12], [A21, np.eye(n)]])


def mirror_block(A12: MBlock) -> np.ndarray:
    """``A12 S`` with ``S = diag((-1)^{l'+m})``: the block acting inside one half-domain.

    The mirror plane between two identical spheres maps ``Y_l^m`` of one
    sphere to ``(-1)^{l+m} Y_l^m`` of the other.
    """
    m = A12.m
    ls = np.array([c.l for c in A12.channels])
    return A12.entries * ((-1.0) ** (ls + m))[None, :]


def halfdomain_matrices(a, r, k4, m, l_max, bc="D") -> tuple[np.ndarray, np.ndarray]:
    """``(M_N, M_D) = (I + A, I - A)`` for two identical spheres.

    ``M_N`` belongs to fields even under the mirror plane (Neumann plane),
    ``M_D`` to odd ones (Dirichlet plane); ``det M_N det M_D`` is the full
    fixed-``m`` determinant.
    """
    A = mirror_block(assemble_two_sphere_mblock(a, r, k4, m, l_max, bc))
    eye = np.eye(A.shape[0])
    return eye + A, eye - A
