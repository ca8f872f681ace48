import math
from fractions import Fraction

import pytest
from scipy.optimize import brentq
from scipy.special import spherical_jn

from krein import reference as ref
from krein.reference import SeriesFamily, asymptotic_series


def test_series_coefficients_are_exact():
    assert SeriesFamily.D_ALL_L.coefficients[6] == Fraction(557222415727, 36578304000)
    assert SeriesFamily.D_L_GT_0.coefficients[2] == Fraction(56, 25)
    assert SeriesFamily.N_L_GT_0.coefficients[5] == Fraction(-271437, 25600)
    for fam in SeriesFamily:
        assert len(fam.coefficients) == 7
        for c in fam.coefficients:
            assert Fraction(str(c)) == c


def test_series_family_names():
    assert SeriesFamily.coerce("D_all_l") is SeriesFamily.D_ALL_L
    assert SeriesFamily.coerce("D_l>0") is SeriesFamily.D_L_GT_0
    assert SeriesFamily.coerce("n_l_gt_0") is SeriesFamily.N_L_GT_0
    with pytest.raises(ValueError):
        SeriesFamily.coerce("X")


def test_series_at_a1_R5():
    x = Fraction(1, 5)
    s = sum(c * x**n for n, c in enumerate(SeriesFamily.D_ALL_L.coefficients))
    want = -float(s) / (200 * math.pi)
    assert asymptotic_series("D_all_l", 1.0, 5.0) == pytest.approx(want, rel=1e-15)


def test_series_leading_terms():
    a, R = 1e-4, 1.0
    assert asymptotic_series(SeriesFamily.D_ALL_L, a, R) == pytest.approx(-a / (8 * math.pi * R**2), rel=1e-3)
    assert asymptotic_series(SeriesFamily.D_ALL_L, a, R, order=0) == -a / (8 * math.pi * R**2)
    ratio = asymptotic_series("N_l>0", a, R, 0) / asymptotic_series("D_l>0", a, R, 0)
    assert ratio == pytest.approx(2.0, rel=1e-15)


def test_series_domain():
    with pytest.raises(ValueError):
        asymptotic_series("D_all_l", 2.0, 2.0)
    with pytest.raises(ValueError):
        asymptotic_series("D_all_l", 1.0, 2.0, order=7)


def test_swave_asymptote():
    pfa = -math.pi**3 / 1440
    assert ref.swave_sphere_plate_asymptote(1.0, 1.0) == pytest.approx(pfa * 90 / math.pi**4 * 2 / 3, rel=1e-15)
    big = ref.swave_sphere_plate_asymptote(1.0, 1e8) / ref.pfa_leading(1.0, 1e8)
    assert big == pytest.approx(180 / math.pi**4, rel=1e-7)
    assert ref.swave_sphere_plate_asymptote(1e-9, 1.0) / ref.pfa_leading(1e-9, 1.0) == pytest.approx(
        180 / math.pi**4, rel=1e-8
    )
    # ratio to PFA approaches its limit monotonically
    rs = [ref.swave_sphere_plate_asymptote(1.0, L) / ref.pfa_leading(1.0, L) for L in (1, 2, 4, 8, 16)]
    assert all(a < b for a, b in zip(rs, rs[1:]))


def test_pwave_asymptote():
    a, L = 1.0, 10.0
    ratio = ref.pwave_asymptote(a, L) / ref.swave_sphere_plate_asymptote(a, L)
    assert ratio == pytest.approx(5 * a**2 * (1 + a / L) * (1 + a / (2 * L)) / (2 * L**2), rel=1e-14)
    assert ref.pwave_asymptote(2.0, 3.0) / ref.pwave_asymptote(1.0, 3.0) == pytest.approx(8.0)
    assert ref.pwave_asymptote(1.0, 6.0) / ref.pwave_asymptote(1.0, 3.0) == pytest.approx(1 / 16)


def test_pfa():
    assert ref.pfa_leading(1.0, 1.0) == pytest.approx(-0.021532, rel=1e-4)
    assert ref.pfa_leading(3.0, 1.0) == 3 * ref.pfa_leading(1.0, 1.0)


def test_semiclassical_sphere_plate():
    L = 1e-6
    lead = -(1 / (16 * math.pi)) * (1 / L**2) * math.pi**4 / 90
    assert lead == pytest.approx(ref.pfa_leading(1.0, L), rel=1e-14)
    assert ref.semiclassical_sphere_plate(1.0, L) == pytest.approx(lead, rel=1e-5)
    assert -(5 / math.pi**2 - 1 / 3) == pytest.approx(-0.17327, abs=1e-5)
    c = ref.semiclassical_sphere_plate(1.0, 0.1) / ref.pfa_leading(1.0, 0.1)
    assert c == pytest.approx(1 - 0.1 * (5 / math.pi**2 - 1 / 3), rel=1e-14)


def test_integrated_dos():
    assert ref.swave_integrated_dos(0.0, 1.0, 4.0) == 0.0
    assert ref.semiclassical_integrated_dos(0.0, 1.0, 4.0) == 0.0
    assert abs(ref.semiclassical_integrated_dos(math.pi / 4, 1.0, 4.0)) < 1e-17
    # amplitude ratio tends to 4 for r >> a
    a, r = 1.0, 1e6
    amp_s = a * a / (math.pi * r * r)
    amp_sc = a * a / (4 * math.pi * r * (r - 2 * a))
    assert amp_s / amp_sc == pytest.approx(4.0, rel=1e-5)
    with pytest.raises(ValueError):
        ref.semiclassical_integrated_dos(1.0, 1.0, 2.0)


def test_fermionic_closed_forms():
    a, r = 1.0, 4.0
    z = brentq(lambda x: spherical_jn(1, x), 4.0, 5.0)
    assert z == pytest.approx(4.4934, abs=1e-4)
    kz = z / (2 * (r - 2 * a))
    assert abs(ref.fermionic_two_sphere(a, r, kz)) < 1e-15
    s1 = ref.fermionic_two_sphere(a, r, kz - 0.2)
    s2 = ref.fermionic_two_sphere(a, r, kz + 0.2)
    assert s1 * s2 < 0
    # large-argument scaling a^2 / L^3 (at fixed phase of the cosine)
    kf = 5.0
    e1 = ref.fermionic_two_sphere(1.0, 2.0 + math.pi / kf * 20, kf)
    e2 = ref.fermionic_two_sphere(1.0, 2.0 + math.pi / kf * 40, kf)
    L1, L2 = math.pi / kf * 20, math.pi / kf * 40
    assert e1 / e2 == pytest.approx((L2 / L1) ** 3 * (2 + L2) / (2 + L1) * L1 / L2, rel=0.01)
    assert ref.fermionic_sphere_plate(1.0, 3.0, 2.0) == pytest.approx(
        -2.0 * 1 / (4 * math.pi) * spherical_jn(1, 8.0), rel=1e-13
    )
    with pytest.raises(ValueError):
        ref.fermionic_two_sphere(1.0, 2.0, 1.0)


def test_em_value():
    assert ref.em_casimir_polder_l_gt_0(1.0, 1.0) == pytest.approx(-9 / (16 * math.pi))
    total = asymptotic_series("D_l>0", 1e-3, 1.0, 0) + asymptotic_series("N_l>0", 1e-3, 1.0, 0)
    assert total / ref.em_casimir_polder_l_gt_0(1e-3, 1.0) == pytest.approx(5 / 3, rel=1e-14)
    assert ref.em_casimir_polder_l_gt_0(2.0, 3.0) / ref.em_casimir_polder_l_gt_0(1.0, 3.0) == pytest.approx(8.0)
