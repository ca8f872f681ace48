import math

import numpy as np
import pytest

from krein import mmatrix
from krein.geometry import SphereSpec, two_spheres, validate
from krein.mmatrix import (
    assemble_general_imag_k,
    assemble_general_real_k,
    assemble_two_sphere_mblock,
    channels,
    halfdomain_matrices,
    two_sphere_full_mblock,
)
from krein.specfun import wigner3j

from _oracles import complex_matrix, mp_matrix, w3j


def geom(spheres):
    return validate([SphereSpec(a, c, bc) for a, c, bc in spheres])


def test_single_sphere_is_identity():
    g = geom([(1.3, (1, 2, 3), "N")])
    for l_max in (0, 3):
        np.testing.assert_array_equal(assemble_general_imag_k(g, 0.7, l_max).entries, np.eye((l_max + 1) ** 2))
        np.testing.assert_array_equal(assemble_general_real_k(g, 0.7, l_max).entries, np.eye((l_max + 1) ** 2))


def test_channel_order():
    ch = channels(2, 1)
    assert len(ch) == 8
    assert ch[0] == (0, 0, 0) and ch[1] == (0, 1, -1) and ch[4] == (1, 0, 0)
    assert ch[3].label() == "j0_l1_m1"


def _coupling_norm(r, k):
    M = assemble_general_real_k(two_spheres(1.0, r), k, 3).entries
    n = M.shape[0] // 2
    return np.linalg.norm(M[:n, n:])


def test_far_spheres_decouple():
    # real-axis coupling falls off like 1/(k r)
    assert _coupling_norm(1e6, 1e4) < 1e-8
    assert _coupling_norm(2e6, 1.0) / _coupling_norm(1e6, 1.0) == pytest.approx(0.5, rel=1e-3)
    assert np.abs(assemble_two_sphere_mblock(1.0, 1e6, 1.0, 0, 3).entries).max() == 0.0


def test_real_axis_against_extended_precision():
    # off-axis pair so the azimuth phases are exercised
    spheres = [(1.0, (0.0, 0.0, 0.0), "D"), (1.0, (1.2, -1.5, 2.2), "D")]
    d = math.dist(spheres[0][1], spheres[1][1])
    spheres[1] = (1.0, tuple(3.0 * c / d for c in spheres[1][1]), "D")
    want = mp_matrix(spheres, 1.0, 2)
    got = assemble_general_real_k(geom(spheres), 1.0, 2).entries
    assert got.shape == (18, 18)
    assert np.abs(got - want).max() <= 1e-12 * np.abs(want).max()


def test_real_axis_neumann_unequal_against_extended_precision():
    spheres = [(1.0, (0.0, 0.0, 0.0), "N"), (0.6, (0.0, 2.0, 1.5), "D")]
    want = mp_matrix(spheres, 0.8, 2)
    got = assemble_general_real_k(geom(spheres), 0.8, 2).entries
    assert np.abs(got - want).max() <= 1e-12 * np.abs(want).max()


def test_imag_axis_far_entry_is_representable():
    # a=1, r=4, k4=10: net scale e^{-20}
    A = assemble_general_imag_k(two_spheres(1.0, 4.0), 10.0, 0).entries
    assert A[0, 1] == pytest.approx(2.5764420227377544658e-11, rel=1e-13)


@pytest.mark.parametrize("k4", [0.05, 1.7, 6.0])
def test_imag_axis_against_complex_path(k4):
    spheres = [(1.0, (0, 0, 0), "D"), (0.7, (2.0, 1.0, -1.5), "N"), (0.5, (-1.0, 2.5, 1.0), "D")]
    got = assemble_general_imag_k(geom(spheres), k4, 3).entries
    want = complex_matrix(spheres, 1j * k4, 3)
    assert np.abs(got - want).max() <= 1e-12 * np.linalg.norm(want, 2)
    d = np.linalg.det(want)
    assert abs(d.imag) <= 1e-10 * abs(d)


def test_collinear_imag_axis_is_real():
    M = assemble_general_imag_k(two_spheres(1.0, 3.0, "N"), 0.4, 4).entries
    assert not np.iscomplexobj(M) or np.abs(M.imag).max() == 0.0


@pytest.mark.parametrize("m", [1, 2, 4])
@pytest.mark.parametrize("bc", ["D", "N"])
def test_m_and_minus_m_blocks_agree(m, bc):
    p = assemble_two_sphere_mblock(1.0, 3.0, 0.8, m, 6, bc).entries
    q = assemble_two_sphere_mblock(1.0, 3.0, 0.8, -m, 6, bc).entries
    np.testing.assert_allclose(p, q, rtol=1e-13, atol=1e-15)


def test_m_blocks_embed_into_full_matrix():
    a, a2, r, k4, l_max = 1.0, 0.6, 2.5, 0.9, 5
    g = two_spheres(a, r, "D", a2=a2, bc2="N")
    M = np.real_if_close(assemble_general_imag_k(g, k4, l_max).entries)
    ch = channels(2, l_max)
    for m in range(-l_max, l_max + 1):
        rows = [i for i, c in enumerate(ch) if c.j == 0 and c.m == m]
        cols = [i for i, c in enumerate(ch) if c.j == 1 and c.m == m]
        A12 = assemble_two_sphere_mblock(a, r, k4, m, l_max, "D", 1, a2, "N").entries
        A21 = assemble_two_sphere_mblock(a2, r, k4, m, l_max, "N", -1, a, "D").entries
        np.testing.assert_allclose(M[np.ix_(rows, cols)], A12, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(M[np.ix_(cols, rows)], A21, rtol=1e-12, atol=1e-14)
        full = two_sphere_full_mblock(a, 2.5, 1j * k4, m, l_max, "D", a2, "N")
        np.testing.assert_allclose(full, M[np.ix_(rows + cols, rows + cols)], rtol=1e-12, atol=1e-14)


def test_m_block_rejects_large_m():
    with pytest.raises(ValueError):
        assemble_two_sphere_mblock(1.0, 3.0, 1.0, 4, 3)


@pytest.mark.parametrize("m", [0, 1, 3])
def test_halfdomain_identity(m):
    MN, MD = halfdomain_matrices(1.0, 2.6, 0.3, m, 8)
    A = MN - np.eye(MN.shape[0])
    lhs = np.linalg.det(MN) * np.linalg.det(MD)
    assert lhs == pytest.approx(np.linalg.det(np.eye(A.shape[0]) - A @ A), rel=1e-12)
    full = two_sphere_full_mblock(1.0, 2.6, 0.3j, m, 8)
    assert np.linalg.det(full) == pytest.approx(lhs, rel=1e-11)


def test_halfdomain_far_apart_is_identity():
    MN, MD = halfdomain_matrices(1.0, 1e5, 1.0, 0, 4)
    np.testing.assert_array_equal(MN, np.eye(5))
    np.testing.assert_array_equal(MD, np.eye(5))


def test_halfdomain_frozen_block():
    # a=1, r=4, k4=0.5, m=0: built here from the A12 block and the mirror sign
    A = assemble_two_sphere_mblock(1.0, 4.0, 0.5, 0, 4).entries
    MN, MD = halfdomain_matrices(1.0, 4.0, 0.5, 0, 4)
    S = np.diag((-1.0) ** np.arange(5))
    np.testing.assert_array_equal(MD, np.eye(5) - A @ S)
    np.testing.assert_array_equal(MN, np.eye(5) + A @ S)


def test_rigid_motion_leaves_det_unchanged():
    g = geom([(1.0, (0, 0, 0), "D"), (0.8, (2.5, 0.5, 0.3), "N"), (0.6, (0.2, 2.4, -1.0), "D")])
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    h = g.transformed(Q, (3.0, -2.0, 7.0))
    d1 = np.linalg.slogdet(assemble_general_imag_k(g, 0.6, 6).entries)
    d2 = np.linalg.slogdet(assemble_general_imag_k(h, 0.6, 6).entries)
    assert d2[1] == pytest.approx(d1[1], rel=1e-10, abs=1e-13)


def test_radius_factor_cancels_in_det():
    g = geom([(1.0, (0, 0, 0), "D"), (0.4, (1.0, 1.2, 0.9), "D")])
    with_f = assemble_general_imag_k(g, 0.5, 5, radius_factor=True).entries
    without = assemble_general_imag_k(g, 0.5, 5, radius_factor=False).entries
    assert not np.allclose(with_f, without)
    assert np.linalg.slogdet(with_f)[1] == pytest.approx(np.linalg.slogdet(without)[1], rel=1e-12)


@pytest.mark.parametrize("l_max", [2, 5])
def test_general_table_matches_exact_3j(l_max):
    G, _, ls, ms = mmatrix._general_coeffs(l_max)
    for r, (l, m) in enumerate(zip(ls, ms)):
        for c, (lp, mp_) in enumerate(zip(ls, ms)):
            for lpp in range(2 * l_max + 1):
                want = 0.0
                if abs(m - mp_) <= lpp:
                    want = (
                        math.sqrt(4 * math.pi * (2 * l + 1) * (2 * lp + 1) * (2 * lpp + 1))
                        * w3j(lpp, lp, l, 0, 0, 0)
                        * w3j(lpp, lp, l, m - mp_, mp_, -m)
                    )
                assert G[r, c, lpp] == pytest.approx(want, rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("l_max,m", [(4, 0), (6, 2), (9, 9)])
def test_axial_table_matches_exact_3j(l_max, m):
    T = mmatrix._mblock_coeffs(m, l_max)
    ls = range(m, l_max + 1)
    for i, l in enumerate(ls):
        for c, lp in enumerate(ls):
            for lpp in range(2 * l_max + 1):
                want = (
                    math.sqrt((2 * l + 1) * (2 * lp + 1))
                    * (2 * lpp + 1)
                    * w3j(lpp, lp, l, 0, 0, 0)
                    * w3j(lpp, lp, l, 0, m, -m)
                )
                assert T[i, c, lpp] == pytest.approx(want, rel=1e-12, abs=1e-13)


def test_axial_table_cache_slices_consistently():
    small = np.array(mmatrix._mblock_coeffs(1, 3))
    mmatrix._mblock_coeffs(1, 20)
    np.testing.assert_allclose(mmatrix._mblock_coeffs(1, 3), small, atol=1e-14)


def test_extended_lpp_sum_adds_nothing():
    # triangle rule: 3j symbols beyond l + l' vanish, so 20 extra terms are zero
    for l, lp in [(0, 0), (2, 3), (5, 5)]:
        extra = [wigner3j(lpp, lp, l, 0, 0, 0) for lpp in range(l + lp + 1, l + lp + 21)]
        assert all(v == 0.0 for v in extra)
