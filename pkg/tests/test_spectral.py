"""Bases, decompositions, quadrature, and the coercivity constant.

Oracles: interval eigenvalues are (n pi / L)^2 exactly; rectangle
eigenvalues come from a brute-force enumeration of wavenumber pairs; the
grid basis must converge to the analytic one; Parseval ties quadrature to
coefficient norms; the coercivity constant has a closed form for constant
weight functions.
"""

import numpy as np
import pytest

import hvisolve as hv


def test_interval_eigenvalues_exact():
    dom = hv.DomainSpec.interval(np.pi)
    basis = hv.build_basis(dom, 12)
    want = np.array([(n + 1) ** 2 for n in range(12)], dtype=float)
    assert np.allclose(basis.eigenvalues, want, rtol=1e-14, atol=0)
    assert basis.n_groups == 12
    assert all(len(g) == 1 for g in basis.distinct_groups)


def test_interval_general_length():
    Lv = 2.7
    dom = hv.DomainSpec.interval(Lv)
    basis = hv.build_basis(dom, 6)
    want = np.array([((n + 1) * np.pi / Lv) ** 2 for n in range(6)])
    assert np.allclose(basis.eigenvalues, want, rtol=1e-13)


def test_rectangle_eigenvalue_enumeration_oracle():
    # unit-pi square: lambda = p^2 + q^2; brute-force enumeration oracle
    dom = hv.DomainSpec.rectangle(np.pi, np.pi)
    basis = hv.build_basis(dom, 8)
    pairs = [(p, q) for p in range(1, 20) for q in range(1, 20)]
    oracle = sorted(p * p + q * q for p, q in pairs)[:8]
    assert np.allclose(basis.eigenvalues, oracle, rtol=1e-12)
    # lambda = 5 has multiplicity two: (1,2) and (2,1)
    vals = basis.distinct_values
    i5 = int(np.argmin(np.abs(vals - 5.0)))
    assert abs(vals[i5] - 5.0) < 1e-12
    assert len(basis.distinct_groups[i5]) == 2


def test_rectangle_distinct_group_values():
    dom = hv.DomainSpec.rectangle(np.pi, np.pi)
    basis = hv.build_basis(dom, 10)
    assert np.allclose(basis.distinct_values[:5], [2, 5, 8, 10, 13])


def test_modes_l2_orthonormal_interval():
    dom = hv.DomainSpec.interval(np.pi)
    basis = hv.build_basis(dom, 10)
    quad = hv.build_quadrature(dom, basis)
    U = basis.eval_modes(quad.nodes)
    G = U.T @ (quad.weights[:, None] * U)
    assert np.allclose(G, np.eye(10), atol=1e-12)


def test_modes_l2_orthonormal_rectangle():
    dom = hv.DomainSpec.rectangle(np.pi, 1.5)
    basis = hv.build_basis(dom, 9)
    quad = hv.build_quadrature(dom, basis)
    U = basis.eval_modes(quad.nodes)
    G = U.T @ (quad.weights[:, None] * U)
    assert np.allclose(G, np.eye(9), atol=1e-11)


def test_parseval_norms():
    dom = hv.DomainSpec.interval(np.pi)
    basis = hv.build_basis(dom, 14)
    quad = hv.build_quadrature(dom, basis)
    rng = np.random.default_rng(3)
    c = rng.standard_normal(14)
    x = hv.SpectralVector(c, basis)
    vals = basis.eval_modes(quad.nodes) @ c
    assert np.isclose(quad.integrate(vals ** 2), x.l2_norm ** 2, rtol=1e-12)
    assert np.isclose(x.h1_norm ** 2, float(np.sum(basis.eigenvalues * c * c)),
                      rtol=1e-14)


def test_grid1d_matches_analytic():
    Lv = np.pi
    dom = hv.DomainSpec.grid1d(Lv, 400)
    basis = hv.build_basis(dom, 6)
    want = np.array([(n + 1) ** 2 for n in range(6)], dtype=float)
    # second-difference eigenvalues converge at rate h^2
    assert np.allclose(basis.eigenvalues, want, rtol=3e-4)
    zz = np.linspace(0, Lv, 33)
    v1 = hv.evaluate(hv.unit_vector(basis, 0), zz)
    ref = np.sqrt(2 / Lv) * np.sin(zz)
    sign = np.sign(v1[1]) or 1.0
    assert np.allclose(sign * v1, ref, atol=2e-3)


def test_decompose_index_partition(basis68):
    dec = hv.decompose(basis68, 2, 2, 66)
    assert list(dec.indices_Hbar) == [0]
    assert list(dec.indices_Ek) == [1]
    assert list(dec.indices_Hhat) == list(range(2, 66))
    assert dec.dim_H0 == 2
    assert dec.dim_Hhat == 64
    assert list(dec.indices_V) == [1]
    assert list(dec.indices_Y) == [0]


def test_decompose_m_splits(basis68):
    dec = hv.decompose(basis68, 3, 2, 40)
    assert list(dec.indices_V) == [1, 2]
    assert list(dec.indices_Y) == [0]
    assert list(dec.indices_Hhat) == list(range(3, 40))


def test_decompose_rejects_bad_arguments(basis68):
    with pytest.raises(Exception):
        hv.decompose(basis68, 0, 0, 10)
    with pytest.raises(Exception):
        hv.decompose(basis68, 2, 3, 10)
    with pytest.raises(Exception):
        hv.decompose(basis68, 2, 2, 2)  # empty truncated high-mode space


def test_coercivity_constant_closed_form(basis68):
    dom = basis68.domain
    quad = hv.build_quadrature(dom, basis68)
    for eps in (0.1, 1.0, 4.0):
        beta = lambda z, e=eps: np.full(np.atleast_1d(z).shape[0], 9.0 - e)
        xi = hv.coercivity_constant(basis68, 2, beta, 40, quad)
        assert abs(xi - eps / 9.0) < 1e-8


def test_coercivity_direct_diagonalization_oracle(basis68):
    # nonconstant beta: compare against an explicit dense eigensolve
    import scipy.linalg

    dom = basis68.domain
    quad = hv.build_quadrature(dom, basis68)
    beta = lambda z: 2.0 + np.sin(np.atleast_1d(z))
    n_trunc = 20
    xi = hv.coercivity_constant(basis68, 2, beta, n_trunc, quad)
    idx = np.arange(2, n_trunc)
    U = basis68.eval_modes(quad.nodes)[:, idx]
    lam = basis68.eigenvalues[idx]
    B = U.T @ ((quad.weights * beta(quad.nodes))[:, None] * U)
    A = np.diag(lam) - B
    w = scipy.linalg.eigh(A, np.diag(lam), eigvals_only=True)
    assert abs(xi - w[0]) < 1e-10


def test_spectral_vector_arithmetic(basis68):
    rng = np.random.default_rng(0)
    a = hv.SpectralVector(rng.standard_normal(68), basis68)
    b = hv.SpectralVector(rng.standard_normal(68), basis68)
    s = a + b
    assert np.allclose(s.coeffs, a.coeffs + b.coeffs)
    d = a - b
    assert np.allclose(d.coeffs, a.coeffs - b.coeffs)
    n = -a
    assert np.allclose(n.coeffs, -a.coeffs)


def test_group_tolerance_merges_near_degenerate():
    # slightly perturbed square: tight tolerance splits the lambda = 5 pair,
    # loose tolerance keeps it merged
    dom = hv.DomainSpec.rectangle(np.pi, np.pi * (1 + 3e-8))
    tight = hv.build_basis(dom, 6, group_tol=1e-12)
    loose = hv.build_basis(dom, 6, group_tol=1e-6)
    sizes_tight = sorted(len(g) for g in tight.distinct_groups)
    sizes_loose = sorted(len(g) for g in loose.distinct_groups)
    assert max(sizes_loose) >= 2
    assert max(sizes_tight) == 1
