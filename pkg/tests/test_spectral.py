import math

import numpy as np
import pytest

from krein.reference import semiclassical_integrated_dos, swave_integrated_dos
from krein.spectral import (
    NoConvergence,
    RefinementBudgetExceeded,
    SingularMatrix,
    choose_l_max,
    converged_log_det,
    general_assembler,
    halfdomain_assembler,
    log_det,
    phase_trace,
    two_sphere_assembler,
)
from krein.geometry import SphereSpec, validate

from _oracles import cofactor_det, exact_det


# ---------------------------------------------------------------- log_det


def test_log_det_examples():
    assert log_det(np.eye(5)).value == 0.0
    r = log_det(np.diag([2.0, 3.0]))
    assert r.value == pytest.approx(math.log(6.0), rel=1e-15)
    assert r.sign == 1.0


def test_log_det_sign_and_permutation():
    r = log_det(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert r.value == 0.0 and r.sign == -1.0
    r = log_det(np.diag([-2.0, 3.0, 1.0]))
    assert r.sign == -1.0


def test_log_det_cofactor_oracle():
    rng = np.random.default_rng(20240)
    A = rng.uniform(-1, 1, size=(6, 6))
    want = float(exact_det(A))
    r = log_det(A)
    assert r.sign * math.exp(r.value) == pytest.approx(want, rel=1e-12)


def test_log_det_complex():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    r = log_det(A)
    want = complex(cofactor_det(A.tolist()))
    assert np.exp(r.log) == pytest.approx(want, rel=1e-12)


def test_log_det_errors():
    with pytest.raises(SingularMatrix):
        log_det(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        log_det(np.ones((2, 3)))
    with pytest.raises(ValueError):
        log_det(np.array([[np.nan]]))


def test_condition_estimate():
    assert log_det(np.eye(3)).condition_estimate == pytest.approx(1.0)
    assert log_det(np.diag([1.0, 1e-9])).condition_estimate == pytest.approx(1e9, rel=1e-6)


# ---------------------------------------------------------------- truncation


def test_choose_l_max_examples():
    assert choose_l_max(1.0, 1.0) == 16
    assert choose_l_max(0.1, 1.0) == 4
    assert choose_l_max(1e-6, 1.0) == 3
    with pytest.raises(ValueError):
        choose_l_max(0.0, 1.0)


def test_converged_trivially_when_decoupled():
    asm = two_sphere_assembler(1.0, 1e5)
    r = converged_log_det(asm, 1.0, 3)
    assert abs(r.value) <= 1e-15
    assert r.l_max == 7


def test_converged_self_consistency():
    asm = halfdomain_assembler(1.0, 4.0)
    r = converged_log_det(asm, 1.0, choose_l_max(1.0, 1.0, 1.0), rtol=1e-8)
    assert r.value < 0
    again = sum(mult * log_det(M).value for mult, M in asm(1.0, 2 * r.l_max))
    assert again == pytest.approx(r.value, rel=1e-8)


def test_converged_is_deterministic():
    asm = halfdomain_assembler(1.0, 3.0)
    a = converged_log_det(asm, 0.7, 6)
    b = converged_log_det(asm, 0.7, 6)
    assert a == b


def test_small_gap_gives_no_convergence():
    asm = halfdomain_assembler(1.0, 2.1)  # L = 0.05 a
    with pytest.raises(NoConvergence) as exc:
        converged_log_det(asm, 0.05, 4, l_max_cap=24)
    assert exc.value.l_max_cap == 24


@pytest.mark.parametrize("r", [3.0, 4.0, 8.0])
def test_dirichlet_log_det_non_positive(r):
    full = two_sphere_assembler(1.0, r)
    half = halfdomain_assembler(1.0, r)
    for k4 in [0.05, 0.3, 1.0, 3.0]:
        assert converged_log_det(full, k4, 8, atol=1e-12).value <= 0
        assert converged_log_det(half, k4, 8, atol=1e-12).value <= 0


def test_log_det_decays_with_envelope():
    # |ln det| <= C exp(-2 k4 L) and decreases monotonically
    a, r = 1.0, 4.0
    L = r - 2 * a
    asm = two_sphere_assembler(a, r)
    ks = np.linspace(0.5, 8.0, 16)
    vals = np.array([abs(converged_log_det(asm, k, 10, atol=1e-300).value) for k in ks])
    assert np.all(np.diff(vals) < 0)
    ratio = vals * np.exp(2 * ks * L)
    assert ratio.max() <= 1.01 * ratio[0]


# ---------------------------------------------------------------- phase trace


def test_single_sphere_phase_is_zero():
    g = validate([SphereSpec(1.0, (0, 0, 0))])
    t = phase_trace(general_assembler(g, real_axis=True), np.linspace(0.1, 4, 20), 4)
    assert np.all(t.phase == 0.0)


def test_phase_oscillation_period():
    asm = two_sphere_assembler(1.0, 4.0, "D", real_axis=True)
    t = phase_trace(asm, np.linspace(0.01, 5.0, 500), 12)
    k = np.linspace(1.0, 5.0, 2001)
    n = np.interp(k, t.grid, t.n_c)
    n = n - np.polyval(np.polyfit(k, n, 2), k)
    periods = np.linspace(1.2, 2.0, 161)
    power = [abs(np.dot(n, np.exp(2j * math.pi * k / P))) for P in periods]
    assert periods[int(np.argmax(power))] == pytest.approx(math.pi / 2, rel=0.05)
    sc = [semiclassical_integrated_dos(x, 1.0, 4.0) for x in k]
    assert np.corrcoef(n, sc)[0, 1] > 0.9


def _swave_mismatch(a, r):
    t = phase_trace(two_sphere_assembler(a, r, real_axis=True), np.linspace(0.005, 2.0, 400), 3)
    sw = np.array([swave_integrated_dos(k, a, r) for k in t.grid])
    return np.max(np.abs(t.n_c - sw)) / (a * a / (math.pi * r * r))


def test_small_k_matches_swave():
    # relative mismatch is small and shrinks with the sphere size
    big, small = _swave_mismatch(0.05, 2.0), _swave_mismatch(0.02, 2.0)
    assert big < 0.03
    assert small < 0.5 * big


def test_refinement_is_stable():
    asm = two_sphere_assembler(1.0, 3.0, "D", real_axis=True)
    coarse = phase_trace(asm, np.linspace(0.01, 4.0, 60), 10)
    fine_grid = np.sort(np.concatenate([coarse.grid, 0.5 * (coarse.grid[1:] + coarse.grid[:-1])]))
    fine = phase_trace(asm, fine_grid, 10)
    assert np.max(np.abs(np.interp(coarse.grid, fine.grid, fine.n_c) - coarse.n_c)) < 1e-6


def test_refinement_inserts_points_and_respects_budget():
    asm = two_sphere_assembler(1.0, 3.0, "D", real_axis=True)
    t = phase_trace(asm, np.linspace(0.01, 6.0, 25), 10, max_step=0.05)
    assert t.refinements > 0 and t.max_step < 0.05
    ref = phase_trace(asm, np.linspace(0.01, 6.0, 400), 10)
    assert t.phase[-1] == pytest.approx(ref.phase[-1], abs=1e-12)
    with pytest.raises(RefinementBudgetExceeded):
        phase_trace(asm, np.linspace(0.01, 6.0, 25), 10, max_step=1e-3, max_points=50)


def test_phase_trace_rejects_bad_grid():
    asm = two_sphere_assembler(1.0, 3.0, real_axis=True)
    with pytest.raises(ValueError):
        phase_trace(asm, [1.0, 0.5], 3)
    with pytest.raises(ValueError):
        phase_trace(asm, [0.0, 0.5], 3)
