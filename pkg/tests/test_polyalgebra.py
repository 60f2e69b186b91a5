from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_lab import presets
from floquet_lab.bands import band_taylor
from floquet_lab.errors import NotHomogeneous, SeedNotHarmonic, ZeroPolynomial
from floquet_lab.polyalgebra import (
    GradedPolynomial,
    floquet_dimension,
    h_dim,
    homogeneous_dim,
    isomorphism_witness,
    kernel_basis,
    monomials,
    q_dim,
    qd_matrix,
    qharmonic_dim,
    right_inverse,
)

P = GradedPolynomial.parse


def test_closed_form_examples():
    assert (h_dim(2, 2), h_dim(3, 2), h_dim(1, 4)) == (5, 9, 2)
    assert (q_dim(2, 2), q_dim(1, 3), q_dim(0, 7)) == (6, 4, 1)


def test_h_q_identity():
    for n in range(1, 6):
        for N in range(0, 11):
            lower = q_dim(n - 1, N - 1) if N >= 1 else 0
            assert h_dim(n, N) == lower + q_dim(n - 1, N)


def test_canonical_form():
    p = GradedPolynomial(2, {(1, 0): 1.0, (0, 1): 0.0})
    assert list(p.terms) == [(1, 0)]
    assert (p - p).terms == {}
    q = P("xi1^2 - 3*xi1*xi2 + 2", 2)
    assert q.homogeneous(2).allclose(P("xi1^2 - 3*xi1*xi2", 2))
    assert q.homogeneous(0).allclose(GradedPolynomial.constant(2, 2.0))
    assert GradedPolynomial.from_json(2, q.to_json()) == q


def test_qd_matrix_derivative_rule():
    # Q = xi_1 acts as -i d/dx1 on {x^2, xy, y^2} -> {x, y}
    M = qd_matrix(P("xi1", 2), 1).matrix
    src = monomials(2, 2)
    assert list(src) == [(2, 0), (1, 1), (0, 2)]
    np.testing.assert_allclose(M, [[-2j, 0, 0], [0, -1j, 0]])


def test_laplace_kernel():
    basis = kernel_basis(P("xi1^2 + xi2^2", 2), 2)[2]
    assert len(basis) == 2
    for b in basis:
        assert P("xi1^2 + xi2^2", 2).apply(b).norm() <= 1e-12
    span = np.array([b.to_vector(2) for b in basis])
    # xy and x^2 - y^2 lie in the span
    for target in ([0, 1, 0], [1, 0, -1]):
        coeff = np.linalg.lstsq(span.T, np.array(target, dtype=complex), rcond=None)[0]
        assert np.linalg.norm(span.T @ coeff - target) <= 1e-12


def test_xi1xi2_kernel(oracle):
    Q = P("xi1*xi2", 2)
    basis = kernel_basis(Q, 2)[2]
    assert len(basis) == oracle["xi1xi2_kernel_deg2"]
    for b in basis:
        assert abs(b.coefficient((1, 1))) <= 1e-12
    assert qharmonic_dim(Q, 2, 2) == 5


def test_qharmonic_examples():
    assert qharmonic_dim(P("xi1^2 + xi2^2", 2), 2, 2) == 5
    assert qharmonic_dim(P("xi1 + I*xi2", 2), 2, 3) == q_dim(1, 3) == 4


def test_right_inverse_examples():
    lap = P("xi1^2 + xi2^2", 2)
    R = right_inverse(lap)
    r1 = R(GradedPolynomial.constant(2, 1.0))
    assert r1.allclose(P("-(x1^2 + x2^2)/4", 2))
    assert lap.apply(r1).allclose(GradedPolynomial.constant(2, 1.0), tol=1e-12)

    Q = P("xi1", 2)
    p = P("x2^2", 2)
    r = right_inverse(Q)(p)
    assert r.allclose(P("I*x1*x2^2", 2), tol=1e-12)
    assert Q.apply(r).allclose(p, tol=1e-12)
    assert right_inverse(Q)(GradedPolynomial.zero(2)).is_zero


def test_errors():
    with pytest.raises(ZeroPolynomial):
        qd_matrix(GradedPolynomial.zero(2), 0)
    with pytest.raises(NotHomogeneous):
        qd_matrix(P("xi1 + xi1^2", 2), 0)


def homogeneous_forms(max_n=3, max_deg=4):
    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_n))
        s = draw(st.integers(1, max_deg))
        mons = monomials(n, s)
        coeffs = draw(st.lists(st.floats(-2, 2), min_size=len(mons), max_size=len(mons)))
        coeffs[draw(st.integers(0, len(mons) - 1))] = draw(st.sampled_from([1.0, -1.5, 2.0]))
        return GradedPolynomial(n, dict(zip(mons, coeffs)))
    return build()


@settings(max_examples=50)
@given(homogeneous_forms())
def test_surjective(Q):
    for l in range(3):
        M = qd_matrix(Q, l)
        assert M.matrix.shape == (homogeneous_dim(Q.n, l), homogeneous_dim(Q.n, l + Q.degree))
        assert M.rank() == homogeneous_dim(Q.n, l)


@settings(max_examples=10)
@given(homogeneous_forms(max_n=2, max_deg=2), st.data())
def test_right_inverse_identity(Q, data):
    R = right_inverse(Q)
    for l in range(9):
        mons = monomials(Q.n, l)
        vec = data.draw(st.lists(st.floats(-1, 1), min_size=len(mons), max_size=len(mons)))
        p = GradedPolynomial.from_vector(Q.n, l, vec)
        assert (Q.apply(R(p)) - p).norm() <= 1e-12 * max(1.0, p.norm())
        assert R(p).degrees() in ([], [l + Q.degree])


@settings(max_examples=20)
@given(st.integers(1, 3), st.integers(0, 6), st.data())
def test_leading_form_dimensions(n, N, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    A = rng.normal(size=(n, n))
    quad = A @ A.T + 0.5 * np.eye(n)
    Q2 = GradedPolynomial(n, {tuple(np.eye(n, dtype=int)[i] + np.eye(n, dtype=int)[j]):
                              (quad[i, j] if i == j else 2 * quad[i, j])
                              for i in range(n) for j in range(i, n)})
    assert qharmonic_dim(Q2, n, N) == h_dim(n, N)
    w = rng.normal(size=n) + 1j * rng.normal(size=n) * data.draw(st.booleans())
    Q1 = GradedPolynomial(n, {tuple(np.eye(n, dtype=int)[i]): w[i] for i in range(n)})
    assert qharmonic_dim(Q1, n, N) == q_dim(n - 1, N)


def test_floquet_dimension_examples(oracle):
    lap = band_taylor(presets.get("laplacian2d"), [0.0, 0.0])
    assert floquet_dimension(lap, 2) == 5
    drift = band_taylor(presets.get("drift1d"), [0.0])
    assert all(floquet_dimension(drift, N) == 1 for N in range(5))
    mat = band_taylor(presets.get("mathieu"), [0.0], target=oracle["mathieu_lambda1_0"])
    assert floquet_dimension(mat, 3) == h_dim(1, 3) == 2
    for t, mult in ((lap, 1), (drift, 1)):
        n = t.leading.n
        assert all(floquet_dimension(t, N) <= mult * q_dim(n, N) for N in range(5))


def _synthetic(terms, l0):
    return SimpleNamespace(terms=terms, l0=l0)


def test_witness_single_term():
    n = 2
    zero = GradedPolynomial.zero(n)
    lam2 = P("xi1^2 + xi2^2", n)
    seeds = {2: P("x1*x2", n), 3: P("x1^3 - 3*x1*x2^2", n)}
    w = isomorphism_witness(_synthetic([zero, zero, lam2], 2), 3, seeds)
    for j, s in seeds.items():
        assert w.kernel[j].allclose(s) and w.harmonic[j].allclose(s)
    assert w.residual <= 1e-12


def test_witness_with_cubic_term():
    n = 2
    zero = GradedPolynomial.zero(n)
    terms = [zero, zero, P("xi1^2 + xi2^2", n), P("xi1^3", n)]
    seed = P("x1^3 - 3*x1*x2^2", n)
    w = isomorphism_witness(_synthetic(terms, 2), 3, {3: seed})
    # psi_2 = -R(lambda_3(D) psi_3) solves lambda_2(D) psi_2 + lambda_3(D) psi_3 = 0
    corr = right_inverse(terms[2])(terms[3].apply(seed))
    assert not corr.is_zero and w.kernel[2].allclose(-corr, tol=1e-12)
    assert w.residual <= 1e-9


def test_witness_zero_and_bad_seeds():
    n = 2
    zero = GradedPolynomial.zero(n)
    t = _synthetic([zero, zero, P("xi1^2 + xi2^2", n)], 2)
    w = isomorphism_witness(t, 3, {})
    assert all(p.is_zero for p in w.kernel)
    with pytest.raises(SeedNotHarmonic):
        isomorphism_witness(t, 2, {2: P("x1^2", n)})
