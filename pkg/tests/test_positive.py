import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_lab import presets
from floquet_lab.bands import spectrum
from floquet_lab.errors import HessianNotNegativeDefinite, PreconditionUnmet
from floquet_lab.positive import (
    LambdaFunction,
    b_average,
    check_negative_definite,
    lambda0_criteria,
    lambda_of_xi,
    maximize_lambda,
    ray_directions,
)

vec1 = st.floats(-3, 3)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_laplacian_lambda(x, y):
    ev = lambda_of_xi(presets.get("laplacian2d"), [x, y])
    assert ev.value == pytest.approx(-(x * x + y * y), abs=1e-9)
    np.testing.assert_allclose(ev.p_grid(), 1.0, atol=1e-9)


def test_drift_lambda(oracle):
    op = presets.get("drift1d")
    xs = (-1.0, 0.0, 0.5, 1.0, 2.0, 3.0)
    got = [lambda_of_xi(op, [x]).value for x in xs]
    np.testing.assert_allclose(got, oracle["drift_lambda_samples"], atol=1e-9)
    np.testing.assert_allclose(lambda_of_xi(op, [0.7]).p_grid(), 1.0, atol=1e-9)


def test_mathieu_principal(oracle):
    op = presets.get("mathieu")
    ev = lambda_of_xi(op, [0.0])
    assert ev.value == pytest.approx(oracle["mathieu_lambda1_0"], abs=1e-10)
    assert ev.value == pytest.approx(spectrum(op, [0.0])[0].real, abs=1e-10)
    p = ev.p_grid(65)
    assert p.min() > 0
    assert p.max() == pytest.approx(oracle["mathieu_ground_state_max"], abs=1e-9)
    assert ev.psi().mean() == pytest.approx(1.0, abs=1e-12)


def test_maximize_examples():
    lap = maximize_lambda(presets.get("laplacian2d"))
    assert lap.classification == "Singleton"
    assert abs(lap.lambda0) <= 1e-9 and np.abs(lap.xi_star).max() <= 1e-5
    np.testing.assert_allclose(lap.h(ray_directions(2, 8)), 0.0, atol=1e-5)

    drift = maximize_lambda(presets.get("drift1d"))
    assert drift.classification == "ConvexSurface"
    assert drift.lambda0 == pytest.approx(1.0, abs=1e-8)
    assert drift.xi_star[0] == pytest.approx(1.0, abs=1e-6)
    assert sorted(drift.samples[:, 0]) == pytest.approx([0.0, 2.0], abs=1e-8)
    assert drift.h([[1.0]])[0] == pytest.approx(2.0, abs=1e-8)
    assert drift.h([[-1.0]])[0] == pytest.approx(0.0, abs=1e-8)

    shifted = maximize_lambda(presets.get("shifted1d"))
    assert shifted.lambda0 == pytest.approx(1.0, abs=1e-8)
    assert sorted(shifted.samples[:, 0]) == pytest.approx([-1.0, 1.0], abs=1e-8)


def test_level_set_2d_is_convex():
    op = presets.get("laplacian2d").shifted(1.0)  # Lambda = 1 - |xi|^2, Xi is the unit circle
    level = maximize_lambda(op, directions=ray_directions(2, 16))
    assert level.classification == "ConvexSurface" and level.convex
    np.testing.assert_allclose(np.linalg.norm(level.samples, axis=1), 1.0, atol=1e-7)


def test_lambda0_criteria_examples():
    div = lambda0_criteria(presets.get("sin_divform"))
    assert np.abs(div["b_avg"]).max() <= 1e-12 and abs(div["lambda0"]) <= 1e-9
    drift = lambda0_criteria(presets.get("drift1d"))
    assert drift["b_avg"] == pytest.approx([2.0], abs=1e-10) and drift["consistent"]
    lap = lambda0_criteria(presets.get("laplacian2d"))
    assert np.abs(lap["gamma"]).max() <= 1e-12
    with pytest.raises(PreconditionUnmet):
        b_average(presets.get("shifted1d"))


@settings(max_examples=200)
@given(vec1, vec1, st.sampled_from([0.25, 0.5, 0.75]))
def test_concavity_1d(x1, x2, t):
    lam = _shared("mathieu")
    mid = lam([t * x1 + (1 - t) * x2])
    assert mid >= t * lam([x1]) + (1 - t) * lam([x2]) - 1e-7


@settings(max_examples=15)
@given(st.tuples(vec1, vec1), st.tuples(vec1, vec1), st.sampled_from([0.25, 0.5, 0.75]))
def test_concavity_2d(x1, x2, t):
    lam = _shared("shear2d")
    x1, x2 = np.array(x1), np.array(x2)
    x1 *= min(1.0, 3 / max(np.linalg.norm(x1), 1e-12))
    x2 *= min(1.0, 3 / max(np.linalg.norm(x2), 1e-12))
    assert lam(t * x1 + (1 - t) * x2) >= t * lam(x1) + (1 - t) * lam(x2) - 1e-7


@settings(max_examples=10)
@given(st.floats(-2, 2))
def test_hessian_negative_definite(x):
    lam = _shared("sin_divform")
    H = lam.hessian([x])
    assert check_negative_definite(H) < -1e-8


def test_hessian_check_rejects():
    with pytest.raises(HessianNotNegativeDefinite):
        check_negative_definite(np.diag([-1.0, 0.0]))


@pytest.mark.parametrize("name", ["drift1d", "shifted1d", "shear2d"])
def test_minimal_solution_residual(name):
    op = presets.get(name)
    level = maximize_lambda(op, directions=ray_directions(op.n, 8))
    xi = level.samples[0] if len(level.samples) else level.xi_star
    ev = lambda_of_xi(op, xi)
    pts = np.random.default_rng(5).uniform(-1, 2, size=(60, op.n))
    u, g, h = ev.u_jet(pts)
    res = op.apply_jet(pts, u, g, h)
    assert np.linalg.norm(res) <= 1e-7 * np.linalg.norm(u)


_CACHE = {}


def _shared(name):
    if name not in _CACHE:
        _CACHE[name] = LambdaFunction(presets.get(name))
    return _CACHE[name]
