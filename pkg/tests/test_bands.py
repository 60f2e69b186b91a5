import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floquet_lab import presets
from floquet_lab.bands import (
    band_minimum,
    band_taylor,
    brillouin_grid,
    compute_bands,
    duality_check,
    real_fermi_points,
    spectrum,
)
from floquet_lab.errors import MultiplicityAboveOne
from floquet_lab.operator_model import general

TWO_PI = 2 * np.pi


def test_free_bands_1d():
    op = presets.get("laplacian1d")
    bs = compute_bands(op, 65, 3)
    k = bs.k_grid[:, 0]
    ref = np.sort(np.stack([(k + TWO_PI * m) ** 2 for m in (0, -1, 1)], axis=1), axis=1)
    np.testing.assert_allclose(bs.sorted_bands().real, ref, atol=1e-9)
    assert np.abs(bs.bands.imag).max() <= 1e-8


def test_constant_shift_moves_bands():
    op = presets.get("laplacian1d")
    a = compute_bands(op, 17, 3).sorted_bands()
    b = compute_bands(op.shifted(5.0), 17, 3).sorted_bands()
    np.testing.assert_allclose(b, a + 5.0, atol=1e-9)


def test_branches_continuous():
    op = presets.get("mathieu")
    bs = compute_bands(op, 129, 3, mf=16)
    dk = bs.k_grid[1, 0] - bs.k_grid[0, 0]
    jumps = np.abs(np.diff(bs.bands, axis=0)).max()
    assert jumps <= 4 * TWO_PI * 2 * dk  # slope of a band is bounded by about 2 |k + 2 pi m|


def test_mathieu_values(oracle):
    op = presets.get("mathieu")
    ev0 = spectrum(op, [0.0])
    evpi = spectrum(op, [np.pi])
    assert ev0[0].real == pytest.approx(oracle["mathieu_lambda1_0"], abs=1e-10)
    assert ev0[1].real == pytest.approx(oracle["mathieu_lambda2_0"], abs=1e-9)
    assert evpi[0].real == pytest.approx(oracle["mathieu_lambda1_pi"], abs=1e-9)
    assert evpi[1].real == pytest.approx(oracle["mathieu_lambda2_pi"], abs=1e-9)


def test_mathieu_minimum(oracle):
    info = band_minimum(presets.get("mathieu"))
    assert abs(info["k_min"]) <= 1e-4
    assert info["value"] == pytest.approx(oracle["mathieu_lambda1_0"], abs=1e-9)
    assert info["second_derivative"] == pytest.approx(oracle["mathieu_curvature_0"], rel=1e-4)
    assert info["gap"] > 0
    assert len(info["grid_minima"]) == 1


def test_duality():
    drift = general(None, [2.0, 0.0], 0.0, n=2, resolution=4)
    assert duality_check(drift, [[1.0, 0.0]])["max_distance"] <= 1e-8
    assert duality_check(presets.get("mathieu"), [[np.pi]])["max_distance"] <= 1e-8
    lap = presets.get("laplacian2d")
    assert duality_check(lap, [[0.3, -1.2], [1 + 0.5j, 0.2]])["max_distance"] <= 1e-10


def test_fermi_points_examples(oracle):
    lap = real_fermi_points(presets.get("laplacian2d"), 0.0)
    assert len(lap) == 1 and lap.multiplicities == [1]
    np.testing.assert_allclose(lap.points[0], [0, 0], atol=1e-6)

    minus_one = real_fermi_points(general(None, None, -1.0, n=1, resolution=4), 0.0)
    assert sorted(p[0] for p in minus_one.points) == pytest.approx([-1, 1], abs=1e-7)
    assert minus_one.multiplicities == [1, 1]

    drift = real_fermi_points(presets.get("drift1d"), 0.0)
    assert len(drift) == 1 and abs(drift.points[0][0]) <= 1e-7

    mat = real_fermi_points(presets.get("mathieu"), 0.0)
    assert sorted(abs(p[0]) for p in mat.points) == pytest.approx(
        [oracle["mathieu_fermi_point"]] * 2, abs=1e-7)


def test_fermi_curve_is_infinite():
    op = presets.get("laplacian2d").shifted(-1.0)
    assert real_fermi_points(op, 0.0).infinite


@given(st.floats(-3, 3))
def test_fermi_shift_covariance(c0):
    op = presets.get("drift1d")
    a = real_fermi_points(op, 0.0)
    b = real_fermi_points(op.shifted(c0), c0)
    assert len(a) == len(b)
    np.testing.assert_allclose(np.sort(np.ravel(a.points)), np.sort(np.ravel(b.points)),
                               atol=1e-7)


@given(st.floats(-np.pi, np.pi), st.sampled_from([-2, -1, 1, 2]))
def test_reciprocal_periodicity(k, shift):
    op = presets.get("mathieu")
    a = spectrum(op, [k])[:6]
    b = spectrum(op, [k + shift * TWO_PI])[:6]
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_reciprocal_periodicity_2d():
    op = presets.get("checker2d")
    for axis in (0, 1):
        kv = np.array([0.3, -0.4])
        kw = kv.copy()
        kw[axis] -= TWO_PI
        np.testing.assert_allclose(spectrum(op, kv, mf=12)[:4], spectrum(op, kw, mf=12)[:4],
                                   atol=1e-8)


def test_taylor_examples():
    lap = band_taylor(presets.get("laplacian2d"), [0.0, 0.0])
    assert lap.l0 == 2
    assert lap.leading.allclose(
        lap.leading.__class__.parse("xi1^2 + xi2^2", 2), tol=1e-6)

    drift = band_taylor(presets.get("drift1d"), [0.0])
    assert drift.l0 == 1
    assert drift.terms[1].coefficient((1,)) == pytest.approx(2j, abs=1e-6)
    assert drift.terms[2].coefficient((2,)) == pytest.approx(1.0, abs=1e-5)


def test_mathieu_taylor(oracle):
    t = band_taylor(presets.get("mathieu"), [0.0], target=oracle["mathieu_lambda1_0"])
    assert t.l0 == 2
    assert t.leading.coefficient((2,)).real == pytest.approx(oracle["mathieu_curvature_0"] / 2,
                                                           rel=1e-4)


@pytest.mark.parametrize("name,k0", [("mathieu", [0.0]), ("drift1d", [0.0]),
                                     ("checker2d", [0.0, 0.0])])
def test_taylor_consistency(name, k0):
    op = presets.get(name)
    t = band_taylor(op, k0)
    rng = np.random.default_rng(4)
    for _ in range(3):
        d = rng.normal(size=op.n)
        d *= 1e-2 / np.linalg.norm(d)
        exact = min(spectrum(op, np.asarray(k0) + d), key=lambda v: abs(v - t.value))
        assert abs(t(d) - exact) <= 10 * 1e-2 ** (t.max_order + 1) * max(1, abs(t.value)) + 1e-9


def test_taylor_requires_simple_branch():
    with pytest.raises(MultiplicityAboveOne):
        band_taylor(presets.get("laplacian1d"), [np.pi], target=np.pi**2)


def test_grid_is_boustrophedon():
    g = brillouin_grid(2, 5)
    steps = np.abs(np.diff(g, axis=0)).sum(axis=1)
    assert steps.max() == pytest.approx(2 * np.pi / 4)
