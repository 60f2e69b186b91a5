import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floquet_lab import kernels, presets
from floquet_lab._kernels_py import assemble_galerkin as assemble_py
from floquet_lab.errors import AliasingRisk, AsymmetricA, ConfigError, NonFiniteInput, NotElliptic
from floquet_lab.operator_model import (
    CoefficientField,
    Lattice,
    assemble_shifted,
    build_operator,
    divergence_form,
    general,
    schrodinger,
)
from floquet_lab import spectral

TWO_PI = 2 * np.pi


def test_lattice_volumes():
    for n in (1, 2, 3):
        lat = Lattice(n)
        assert lat.cell_volume == pytest.approx(1.0)
        assert lat.brillouin_volume == pytest.approx(TWO_PI**n)
    with pytest.raises(ConfigError):
        Lattice(4)


def test_laplacian_entries():
    op = presets.get("laplacian2d")
    m = spectral.basis_indices(2, 4)
    mat = assemble_shifted(op, [0.0, 0.0], 4).matrix
    np.testing.assert_allclose(mat, np.diag((TWO_PI * m) ** 2 @ np.ones(2)), atol=1e-10)
    k = np.array([1.0, 0.0])
    mat = assemble_shifted(op, k, 4).matrix
    np.testing.assert_allclose(np.diag(mat), ((TWO_PI * m + k) ** 2).sum(axis=1), atol=1e-10)
    assert np.abs(mat - np.diag(np.diag(mat))).max() < 1e-12
    assert op.a_min == pytest.approx(1.0)


def test_mathieu_tridiagonal():
    op = presets.get("mathieu")
    mat = assemble_shifted(op, [0.0], 8).matrix
    m = np.arange(-8, 9)
    expect = np.diag((TWO_PI * m) ** 2) + 0.5 * (np.eye(17, k=1) + np.eye(17, k=-1))
    np.testing.assert_allclose(mat, expect, atol=1e-10)


def test_schrodinger_spec():
    op = build_operator({"kind": "Schrodinger", "n": 1, "grid_resolution": 16,
                         "coefficients": {"V": np.cos(TWO_PI * np.arange(16) / 16).tolist()}})
    assert op.kind == "Schrodinger"
    assert op.a_min == pytest.approx(1.0)
    np.testing.assert_allclose(op.c, op.V)


def test_divergence_form_expansion(oracle):
    op = presets.get("sin_divform")
    x = np.array(oracle["sin_divform_corrector_x"])
    _, b, _ = op.evaluate(x[:, None])
    np.testing.assert_allclose(b[:, 0].real, oracle["sin_divform_btilde"], atol=1e-10)


def test_validation_errors():
    with pytest.raises(NotElliptic):
        general([[-1.0]], n=1, resolution=4)
    with pytest.raises(AsymmetricA):
        general([[1.0, 0.5], [0.0, 1.0]], n=2, resolution=4)
    with pytest.raises(ConfigError):
        build_operator({"kind": "Nope", "n": 1})
    op = presets.get("mathieu")
    with pytest.raises(NonFiniteInput):
        assemble_shifted(op, [np.nan])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assemble_shifted(op, [0.0], 1)
    assert any(issubclass(x.category, AliasingRisk) for x in w)


def test_real_field_round_trip():
    rng = np.random.default_rng(3)
    vals = rng.normal(size=(8, 8))
    f = CoefficientField(vals)
    back = np.fft.ifftn(np.fft.ifftshift(f.fourier) * vals.size)
    assert np.abs(back.imag).max() <= 1e-12
    np.testing.assert_allclose(back.real, vals, atol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_adjoint_consistency(k1, k2):
    for name in ("checker2d", "shear2d"):
        op = presets.get(name)
        P = assemble_shifted(op, [k1, k2], 4).matrix
        Pt = assemble_shifted(op, [k1, k2], 4, adjoint=True).matrix
        # for real coefficients P^t(x, D + k) = conj(P(x, D + k))^H entrywise
        assert np.linalg.norm(P - Pt.conj().T) <= 1e-10 * np.linalg.norm(P)


@given(st.floats(-5, 5), st.floats(-np.pi, np.pi))
def test_constant_gauge(c0, k):
    op = presets.get("mathieu")
    a = np.linalg.eigvals(assemble_shifted(op, [k], 8).matrix)
    b = np.linalg.eigvals(assemble_shifted(op.shifted(c0), [k], 8).matrix)
    np.testing.assert_allclose(np.sort_complex(b), np.sort_complex(a + c0), atol=1e-9)


def test_resolution_convergence():
    op = presets.get("mathieu")
    a = np.sort(np.linalg.eigvals(assemble_shifted(op, [0.3], 16).matrix).real)[:5]
    b = np.sort(np.linalg.eigvals(assemble_shifted(op, [0.3], 32).matrix).real)[:5]
    np.testing.assert_allclose(a, b, atol=1e-8)


@given(st.floats(-2, 2), st.floats(-2, 2), st.booleans())
def test_backends_agree(kr, ki, adjoint):
    op = presets.get("checker2d")
    offsets, a_sup, b_sup, c_sup = op.support
    k = np.array([kr + 1j * ki, 0.5])
    ref = assemble_py(3, 2, k, offsets, a_sup, b_sup, c_sup, adjoint)
    got = kernels.assemble_galerkin(3, 2, k, offsets, a_sup, b_sup, c_sup, adjoint)
    np.testing.assert_allclose(got, ref, atol=1e-11)


def test_divergence_form_builder_matches_preset():
    x = np.arange(32) / 32
    op = divergence_form([[2 + np.sin(TWO_PI * x)]], n=1, resolution=32)
    np.testing.assert_allclose(op.b, presets.get("sin_divform").b, atol=1e-12)


def test_schrodinger_builder_is_laplacian_plus_v():
    op = schrodinger(3.0, n=2, resolution=4)
    lap = presets.get("laplacian2d")
    mat = assemble_shifted(op, [0.1, 0.2], 3).matrix
    ref = assemble_shifted(lap, [0.1, 0.2], 3).matrix + 3 * np.eye(49)
    np.testing.assert_allclose(mat, ref, atol=1e-10)


def test_pure_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    code = ("from floquet_lab import kernels, presets; from floquet_lab.bands import spectrum; "
            "print(kernels.BACKEND, round(float(spectrum(presets.get('mathieu'), [0.0])[0].real), 9))")
    env = dict(os.environ, FLOQUET_LAB_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.split() == ["python", "-0.012661595"]
