"""Polynomial spaces, constant-coefficient operators ``Q(D)`` and their kernels.

Throughout, ``D = (1/i) d/dx``, so the symbol ``xi_j`` acts as ``-i d/dx_j``.
Homogeneous polynomials of degree ``l`` in ``n`` variables are coordinatized in
the monomial basis returned by :func:`monomials` (lexicographic, ``x1`` first).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    NotHomogeneous,
    ResidualTooLarge,
    SeedNotHarmonic,
    ZeroPolynomial,
)

RANK_TOL = 1e-9


def q_dim(n, N):
    """Dimension of polynomials of degree ``<= N`` in ``n`` variables."""
    if n < 0 or N < 0:
        raise ValueError("q_dim needs n >= 0 and N >= 0")
    return math.comb(n + N, N)


def h_dim(n, N):
    """Dimension of harmonic polynomials of degree ``<= N`` in ``n`` variables."""
    if n < 1 or N < 0:
        raise ValueError("h_dim needs n >= 1 and N >= 0")
    tail = math.comb(n + N - 2, N - 2) if N >= 2 else 0
    return math.comb(n + N, N) - tail


def homogeneous_dim(n, d):
    if d < 0:
        return 0
    if n == 0:
        return 1 if d == 0 else 0
    return math.comb(n - 1 + d, d)


@lru_cache(maxsize=None)
def monomials(n, d):
    """Exponents of degree ``d`` in ``n`` variables, lexicographically descending."""
    if d < 0:
        return ()
    if n == 0:
        return ((),) if d == 0 else ()
    if n == 1:
        return ((d,),)
    out = []
    for j in range(d, -1, -1):
        out.extend((j,) + rest for rest in monomials(n - 1, d - j))
    return tuple(out)


@lru_cache(maxsize=None)
def _monomial_index(n, d):
    return {e: i for i, e in enumerate(monomials(n, d))}


class GradedPolynomial:
    """Sparse multivariate polynomial ``sum c_j x^j`` with complex coefficients."""

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None, tol=0.0):
        self.n = int(n)
        clean = {}
        for exp, val in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.n or min(exp, default=0) < 0:
                raise ValueError(f"bad exponent {exp} for {self.n} variables")
            val = complex(val)
            if abs(val) > tol:
                clean[exp] = clean.get(exp, 0) + val
        self.terms = {e: v for e, v in clean.items() if abs(v) > tol}

    # construction
    @classmethod
    def zero(cls, n):
        return cls(n)

    @classmethod
    def constant(cls, n, value):
        return cls(n, {(0,) * n: value})

    @classmethod
    def monomial(cls, n, exp, coeff=1.0):
        return cls(n, {tuple(exp): coeff})

    @classmethod
    def variable(cls, n, i):
        exp = [0] * n
        exp[i] = 1
        return cls(n, {tuple(exp): 1.0})

    @classmethod
    def from_vector(cls, n, degree, vec, tol=0.0):
        return cls(n, dict(zip(monomials(n, degree), vec)), tol=tol)

    @classmethod
    def from_terms(cls, n, items):
        """From ``[(exponent, coeff), ...]``; ``coeff`` may be ``[re, im]``."""
        terms = {}
        for exp, val in items:
            if isinstance(val, (list, tuple)):
                val = complex(val[0], val[1])
            key = tuple(exp)
            terms[key] = terms.get(key, 0) + complex(val)
        return cls(n, terms)

    @classmethod
    def parse(cls, text, n, prefix=None):
        """Parse an expression such as ``"xi1^2 + xi2^2"`` or ``"x1*x2"``."""
        import sympy

        text = text.replace("^", "**")
        if prefix is None:
            prefix = "xi" if "xi" in text else ("k" if "k" in text else "x")
        names = sympy.symbols(f"{prefix}1:{n + 1}")
        local = {str(s): s for s in names}
        local["I"] = sympy.I
        expr = sympy.sympify(text, locals=local)
        stray = expr.free_symbols - set(names)
        if stray:
            raise ValueError(f"unknown symbols {sorted(map(str, stray))}; use {prefix}1..{prefix}{n}")
        poly = sympy.Poly(sympy.expand(expr), *names)
        return cls(n, {e: complex(c) for e, c in poly.as_dict().items()})

    # inspection
    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    @property
    def is_zero(self):
        return not self.terms

    def degrees(self):
        return sorted({sum(e) for e in self.terms})

    def is_homogeneous(self):
        return len(self.degrees()) <= 1

    def homogeneous(self, l):
        return GradedPolynomial(self.n, {e: v for e, v in self.terms.items() if sum(e) == l})

    def to_vector(self, degree):
        idx = _monomial_index(self.n, degree)
        vec = np.zeros(len(idx), dtype=np.complex128)
        for e, v in self.terms.items():
            if sum(e) == degree:
                vec[idx[e]] = v
        return vec

    def norm(self):
        return float(math.sqrt(sum(abs(v) ** 2 for v in self.terms.values())))

    def chop(self, tol):
        return GradedPolynomial(self.n, self.terms, tol=tol)

    def coefficient(self, exp):
        return self.terms.get(tuple(exp), 0j)

    # arithmetic
    def __add__(self, other):
        if not isinstance(other, GradedPolynomial):
            other = GradedPolynomial.constant(self.n, other)
        terms = dict(self.terms)
        for e, v in other.terms.items():
            terms[e] = terms.get(e, 0) + v
        return GradedPolynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return GradedPolynomial(self.n, {e: -v for e, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GradedPolynomial):
            return GradedPolynomial(self.n, {e: v * other for e, v in self.terms.items()})
        terms = {}
        for e1, v1 in self.terms.items():
            for e2, v2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + v1 * v2
        return GradedPolynomial(self.n, terms)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, GradedPolynomial):
            return NotImplemented
        return self.n == other.n and (self - other).is_zero

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.terms.items(), key=lambda t: t[0]))))

    def allclose(self, other, tol=1e-10):
        return (self - other).norm() <= tol

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.complex128))
        out = np.zeros(points.shape[0], dtype=np.complex128)
        for e, v in self.terms.items():
            out += v * np.prod(points ** np.asarray(e), axis=1)
        return out

    def derivative(self, alpha):
        """``d^alpha`` of the polynomial (ordinary partial derivatives)."""
        alpha = tuple(alpha)
        terms = {}
        for e, v in self.terms.items():
            if all(a <= b for a, b in zip(alpha, e)):
                fac = 1.0
                for a, b in zip(alpha, e):
                    fac *= math.perm(b, a)
                new = tuple(b - a for a, b in zip(alpha, e))
                terms[new] = terms.get(new, 0) + v * fac
        return GradedPolynomial(self.n, terms)

    def as_operator(self):
        """Coefficients of ``Q(D)`` in the ``d^beta`` basis: ``Q(D) = sum c_beta d^beta``."""
        return {e: v * (-1j) ** sum(e) for e, v in self.terms.items()}

    def apply(self, p):
        """``Q(D) p`` for the polynomial ``p``."""
        out = GradedPolynomial.zero(p.n)
        for beta, coef in self.as_operator().items():
            out = out + p.derivative(beta) * coef
        return out

    # serialization
    def to_json(self):
        return [[list(e), [v.real, v.imag]] for e, v in sorted(self.terms.items(), reverse=True)]

    @classmethod
    def from_json(cls, n, data):
        if isinstance(data, str):
            data = json.loads(data)
        return cls.from_terms(n, data)

    def __repr__(self):
        if not self.terms:
            return f"GradedPolynomial({self.n}, 0)"
        parts = []
        for e, v in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"x{i + 1}^{p}" if p > 1 else f"x{i + 1}" for i, p in enumerate(e) if p)
            parts.append(f"({v:.6g})" + (f"*{mono}" if mono else ""))
        return f"GradedPolynomial({self.n}, {' + '.join(parts)})"


def _check_homogeneous(Q):
    if Q.is_zero:
        raise ZeroPolynomial("Q must be nonzero")
    if not Q.is_homogeneous():
        raise NotHomogeneous(f"Q has components of degrees {Q.degrees()}")
    return Q.degree


@dataclass(frozen=True)
class HomogeneousOperatorMatrix:
    """Matrix of ``Q(D): P_{l+s} -> P_l`` in the monomial bases."""

    n: int
    source_degree: int
    target_degree: int
    matrix: np.ndarray

    def rank(self, tol=RANK_TOL):
        return matrix_rank(self.matrix, tol)


def matrix_rank(mat, tol=RANK_TOL):
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def qd_matrix(Q, l):
    """Matrix of ``Q(D)`` from homogeneous degree ``l + s`` to degree ``l``."""
    s = _check_homogeneous(Q)
    n = Q.n
    src = monomials(n, l + s)
    tgt = _monomial_index(n, l)
    mat = np.zeros((len(tgt), len(src)), dtype=np.complex128)
    ops = Q.as_operator()
    for col, alpha in enumerate(src):
        for beta, coef in ops.items():
            if all(b <= a for a, b in zip(alpha, beta)):
                fac = 1.0
                for a, b in zip(alpha, beta):
                    fac *= math.perm(a, b)
                row = tgt[tuple(a - b for a, b in zip(alpha, beta))]
                mat[row, col] += coef * fac
    return HomogeneousOperatorMatrix(n=n, source_degree=l + s, target_degree=l, matrix=mat)


def _kernel_vectors(mat, tol=RANK_TOL):
    if mat.shape[0] == 0:
        return np.eye(mat.shape[1], dtype=np.complex128)
    _, sv, vh = np.linalg.svd(mat)
    rank = int(np.sum(sv > tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return vh[rank:].conj().T


def kernel_basis(Q, N):
    """Basis of ``Q``-harmonic polynomials of degree ``<= N``, grouped by degree."""
    s = _check_homogeneous(Q)
    basis = {}
    for d in range(N + 1):
        if d < s:
            vecs = np.eye(homogeneous_dim(Q.n, d), dtype=np.complex128)
        else:
            vecs = _kernel_vectors(qd_matrix(Q, d - s).matrix)
        basis[d] = [GradedPolynomial.from_vector(Q.n, d, v, tol=1e-14) for v in vecs.T]
    return basis


def qharmonic_dim(Q, n, N):
    """``sum_l dim ker(Q(D): P_l -> P_{l-s})`` over ``l <= N``, by numerical rank."""
    if Q.n != n:
        raise ValueError(f"Q has {Q.n} variables, expected {n}")
    s = _check_homogeneous(Q)
    total = 0
    for l in range(N + 1):
        dim_l = homogeneous_dim(n, l)
        if l < s:
            total += dim_l
        else:
            total += dim_l - qd_matrix(Q, l - s).rank()
    return total


class RightInverse:
    """Homogeneity-preserving right inverse of ``Q(D)``.

    On each ``P_l`` it is the pseudoinverse of the monomial-basis matrix of
    ``Q(D): P_{l+s} -> P_l``, i.e. the minimum coefficient-norm preimage.
    """

    def __init__(self, Q):
        self.degree = _check_homogeneous(Q)
        self.Q = Q
        self._pinv = {}

    def matrix(self, l):
        if l not in self._pinv:
            self._pinv[l] = np.linalg.pinv(qd_matrix(self.Q, l).matrix)
        return self._pinv[l]

    def __call__(self, p):
        out = GradedPolynomial.zero(self.Q.n)
        for l in p.degrees():
            vec = self.matrix(l) @ p.to_vector(l)
            out = out + GradedPolynomial.from_vector(self.Q.n, l + self.degree, vec)
        return out


def right_inverse(Q):
    return RightInverse(Q)


def floquet_dimension(taylor, N):
    """Dimension of order-``N`` Floquet solutions at a simple Fermi point."""
    return qharmonic_dim(taylor.leading, taylor.leading.n, N)


@dataclass
class IsomorphismWitness:
    kernel: list  # the polynomials solving the triangular system, by degree
    harmonic: list  # forward images, equal to the seeds
    residual: float


def isomorphism_witness(taylor, N, seeds, tol=1e-9):
    """Triangular back-substitution turning harmonic seeds into a solution of the dual system.

    ``taylor`` provides ``terms`` (homogeneous pieces ``lambda_l`` indexed by ``l``)
    and ``l0``.  ``seeds[j]`` must be ``lambda_l0``-harmonic and homogeneous of
    degree ``j``; missing seeds are zero.  Returns ``psi_0..psi_N`` with

        sum_{j >= i + l0} lambda_{j-i}(D) psi_j = 0,   i = 0..N-l0,

    together with the forward map ``phi_j = psi_j + R sum_{i>j} lambda_{i-j+l0}(D) psi_i``.
    """
    l0 = taylor.l0
    terms = list(taylor.terms)
    lead = terms[l0]
    n = lead.n
    R = RightInverse(lead)
    if isinstance(seeds, dict):
        seed_list = [seeds.get(j, GradedPolynomial.zero(n)) for j in range(N + 1)]
    else:
        seed_list = list(seeds) + [GradedPolynomial.zero(n)] * (N + 1 - len(seeds))
    scale = 1.0
    for j, seed in enumerate(seed_list):
        if seed.is_zero:
            continue
        if seed.degrees() != [j]:
            raise SeedNotHarmonic(f"seed {j} is not homogeneous of degree {j}")
        if lead.apply(seed).norm() > tol * max(seed.norm(), 1.0):
            raise SeedNotHarmonic(f"seed of degree {j} is not annihilated by the leading term")
        scale = max(scale, seed.norm())

    def lam(order):
        return terms[order] if order < len(terms) else GradedPolynomial.zero(n)

    psi = [None] * (N + 1)
    for m in range(N, -1, -1):
        rhs = GradedPolynomial.zero(n)
        for j in range(m + 1, N + 1):
            rhs = rhs + lam(j - m + l0).apply(psi[j])
        psi[m] = seed_list[m] - R(rhs)

    residual = 0.0
    for i in range(0, N - l0 + 1):
        acc = GradedPolynomial.zero(n)
        for j in range(i + l0, N + 1):
            acc = acc + lam(j - i).apply(psi[j])
        residual = max(residual, acc.norm())
    if residual > tol * scale:
        raise ResidualTooLarge(f"dual system residual {residual:.3e}")

    phi = []
    for j in range(N + 1):
        acc = GradedPolynomial.zero(n)
        for i in range(j + 1, N + 1):
            acc = acc + lam(i - j + l0).apply(psi[i])
        phi.append(psi[j] + R(acc))
    return IsomorphismWitness(kernel=psi, harmonic=phi, residual=residual)
