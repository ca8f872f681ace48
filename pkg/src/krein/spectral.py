"""Log-determinants, truncation control and phase tracking along real k."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor

from . import mmatrix
from .geometry import BC, Geometry, validate

__all__ = [
    "LogDetResult",
    "PhaseTrace",
    "NoConvergence",
    "SingularMatrix",
    "RefinementBudgetExceeded",
    "log_det",
    "choose_l_max",
    "converged_log_det",
    "phase_trace",
    "general_assembler",
    "two_sphere_assembler",
    "halfdomain_assembler",
    "L_MAX_CAP",
]

L_MAX_CAP = 220

# an assembler maps (k, l_max) to a list of (multiplicity, square matrix)
Assembler = Callable[[float, int], Sequence[tuple[int, np.ndarray]]]


class NoConvergence(RuntimeError):
    def __init__(
        self, l_max_cap: int, last_delta: float, k: float | None = None, reason: str | None = None
    ):
        self.l_max_cap, self.last_delta, self.k = l_max_cap, last_delta, k
        where = f" at k={k!r}" if k is not None else ""
        msg = f"ln det not converged in l_max up to {l_max_cap}{where}; last change {last_delta!r}"
        super().__init__(f"{reason} ({msg})" if reason else msg)


class SingularMatrix(ArithmeticError):
    pass


class RefinementBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class LogDetResult:
    """``value = ln|det|``; ``phase`` is ``det/|det|`` (``+-1`` for real input).

    ``delta`` is the last truncation change seen by :func:`converged_log_det`
    (0 for a single evaluation).
    """

    value: float
    phase: complex = 1.0
    l_max: int | None = None
    condition_estimate: float = 1.0
    delta: float = 0.0

    @property
    def sign(self) -> float:
        return float(np.sign(self.phase.real)) if self.phase.imag == 0 else math.nan

    @property
    def log(self) -> complex:
        """Principal complex logarithm of the determinant."""
        return complex(self.value, cmath.phase(self.phase))


def log_det(matrix) -> LogDetResult:
    """``ln det`` of a square matrix via LU with partial pivoting.

    The magnitude is summed as ``sum ln|U_ii|``; the phase (or sign) is
    accumulated separately, including the permutation parity.
    """
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"log_det needs a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        return LogDetResult(0.0)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    is_complex = np.iscomplexobj(A)
    A = A.astype(complex if is_complex else float)
    anorm = np.abs(A).sum(axis=0).max()
    with warnings.catch_warnings():
        # exact singularity is reported below as SingularMatrix
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    d = np.diag(lu)
    if np.any(d == 0):
        raise SingularMatrix("matrix is exactly singular")
    value = float(np.sum(np.log(np.abs(d))))
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    if is_complex:
        u = d / np.abs(d)
        phase = complex(np.prod(u)) * (-1) ** swaps
        phase /= abs(phase)
    else:
        phase = float((-1) ** (swaps + int(np.count_nonzero(d < 0))))
    gecon = lapack.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    cond = 1.0 / rcond if rcond > 0 else math.inf
    return LogDetResult(value, phase, None, float(cond))


def choose_l_max(a: float, L: float, k_max: float | None = None, safety: int = 2) -> int:
    """Angular truncation ``max(3, ceil(e/2 k_max a) + safety)``.

    ``k_max`` defaults to ``10 / L`` with ``L`` the surface-to-surface gap.
    """
    if not (a > 0 and L > 0):
        raise ValueError("a and L must be positive")
    if k_max is None:
        k_max = 10.0 / L
    return max(3, math.ceil(0.5 * math.e * k_max * a) + int(safety))


def _sum_blocks(blocks: Iterable[tuple[int, np.ndarray]]) -> LogDetResult:
    value, phase, cond = 0.0, 1.0 + 0j, 1.0
    for mult, mat in blocks:
        res = log_det(mat)
        value += mult * res.value
        phase *= complex(res.phase) ** mult
        cond = max(cond, res.condition_estimate)
    if phase.imag == 0.0:
        phase = float(phase.real)
    return LogDetResult(value, phase, None, cond)


def converged_log_det(
    assembler: Assembler,
    k4: float,
    l_max_init: int,
    rtol: float = 1e-8,
    atol: float = 0.0,
    l_max_cap: int = L_MAX_CAP,
) -> LogDetResult:
    """``ln|det M|`` converged in the angular truncation.

    Evaluates at ``l_max_init`` and ``l_max_init + 4``; while the change
    exceeds ``rtol |value| + atol`` the increment doubles (4, 8, 16, ...).
    The value at the largest truncation is returned.
    """
    if not rtol > 0:
        raise ValueError("rtol must be positive")
    l_max = min(int(l_max_init), l_max_cap)
    prev = _sum_blocks(assembler(k4, l_max))
    step = 4
    delta = math.inf
    while l_max < l_max_cap:
        nxt_l = min(l_max + step, l_max_cap)
        cur = _sum_blocks(assembler(k4, nxt_l))
        delta = abs(cur.value - prev.value)
        l_max, prev = nxt_l, cur
        if delta <= rtol * abs(cur.value) + atol:
            return LogDetResult(cur.value, cur.phase, l_max, cur.condition_estimate, delta)
        step *= 2
    raise NoConvergence(l_max_cap, delta, k4)


# --------------------------------------------------------------------------
# assemblers
# --------------------------------------------------------------------------


def general_assembler(geometry: Geometry, real_axis: bool = False) -> Assembler:
    geometry = validate(geometry)
    make = mmatrix.assemble_general_real_k if real_axis else mmatrix.assemble_general_imag_k

    def assemble(k, l_max):
        return [(1, make(geometry, k, l_max).entries)]

    return assemble


def two_sphere_assembler(
    a: float, r: float, bc="D", a2: float | None = None, bc2=None, real_axis: bool = False
) -> Assembler:
    """Fixed-``m`` blocks of two spheres; ``m`` and ``-m`` blocks are equal."""

    def assemble(k, l_max):
        kc = complex(k, 0.0) if real_axis else complex(0.0, k)
        out = []
        for m in range(0, l_max + 1):
            M = mmatrix.two_sphere_full_mblock(a, r, kc, m, l_max, bc, a2, bc2)
            out.append((1 if m == 0 else 2, M))
        return out

    return assemble


def halfdomain_assembler(
    a: float,
    r: float,
    sector="D",
    bc="D",
    drop_l0: bool = False,
    m_values: Sequence[int] | None = None,
    real_axis: bool = False,
) -> Assembler:
    """Blocks ``I - A`` (Dirichlet plane) or ``I + A`` (Neumann plane).

    ``drop_l0`` removes the ``l = 0`` channel, which only the ``m = 0``
    block contains.
    """
    sign = -1.0 if BC.coerce(sector) == BC.DIRICHLET else 1.0

    def assemble(k, l_max):
        out = []
        ms = range(0, l_max + 1) if m_values is None else [m for m in m_values if m <= l_max]
        for m in ms:
            if real_axis:
                blk = mmatrix.assemble_two_sphere_mblock_real_k(a, r, k, m, l_max, bc)
            else:
                blk = mmatrix.assemble_two_sphere_mblock(a, r, k, m, l_max, bc)
            A = mmatrix.mirror_block(blk)
            M = np.eye(A.shape[0]) + sign * A
            if drop_l0 and m == 0:
                M = M[1:, 1:]
            out.append((1 if m == 0 else 2, M))
        return out

    return assemble


# --------------------------------------------------------------------------
# phase tracking on the real axis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseTrace:
    """Continuous ``Im ln det M(k)`` on an ascending grid.

    ``n_c`` is the geometry-dependent integrated density of states
    ``-phase / pi``.
    """

    grid: np.ndarray
    phase: np.ndarray
    log_abs: np.ndarray
    refinements: int = 0
    max_step: float = 0.0

    @property
    def n_c(self) -> np.ndarray:
        return -self.phase / math.pi


def _wrap(d: float) -> float:
    return (d + math.pi) % (2.0 * math.pi) - math.pi


def phase_trace(
    assembler: Assembler,
    k_grid,
    l_max: int,
    max_step: float = math.pi / 2,
    max_points: int = 20000,
) -> PhaseTrace:
    """Unwrap ``Im ln det M`` by tracking adjacent samples.

    Intervals whose phase step reaches ``max_step`` are bisected until every
    step is smaller. The phase at the first grid point is its principal
    value, i.e. the grid is assumed to start close enough to ``k = 0`` that
    the phase has not left ``(-pi, pi)``.
    """
    grid = np.asarray(k_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("k_grid must be an ascending grid of positive values with >= 2 points")

    def sample(k):
        res = _sum_blocks(assembler(k, l_max))
        return res.value, cmath.phase(res.phase)

    ks = list(grid)
    vals = [sample(k) for k in ks]
    refinements = 0
    while True:
        steps = [_wrap(vals[i + 1][1] - vals[i][1]) for i in range(len(ks) - 1)]
        bad = [i for i, s in enumerate(steps) if abs(s) >= max_step]
        if not bad:
            break
        if len(ks) + len(bad) > max_points:
            raise RefinementBudgetExceeded(
                f"phase trace needs more than {max_points} points"
            )
        for i in reversed(bad):
            kmid = 0.5 * (ks[i] + ks[i + 1])
            ks.insert(i + 1, kmid)
            vals.insert(i + 1, sample(kmid))
        refinements += len(bad)
    phase = np.empty(len(ks))
    phase[0] = vals[0][1]
    phase[1:] = phase[0] + np.cumsum(steps)
    return PhaseTrace(
        np.array(ks),
        phase,
        np.array([v[0] for v in vals]),
        refinements,
        float(max(abs(s) for s in steps)),
    )
