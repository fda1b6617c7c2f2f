import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brachisto.core import projector
from brachisto.geometry import (
    ChartError,
    NonTangentWarning,
    chart,
    complex_structure,
    coordinate_covariant,
    embed,
    embedding_jet,
    embedding_jet_fd,
    fs_metric,
    metric_fd,
    metric_G,
    riemann,
    riemann_fd,
    symplectic_omega,
    tangent_from_ket,
    tangent_project,
)

from conftest import ket

dims = st.integers(min_value=2, max_value=5)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _point(n, rng):
    psi = ket(n, rng)
    psi[0] = 0.5 + abs(psi[0])  # keep away from the chart boundary
    return chart(psi / np.linalg.norm(psi))


def _tangent(rho, rng):
    n = rho.shape[0]
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return tangent_project(rho, a + a.conj().T)


def test_chart_boundary_raises():
    with pytest.raises(ChartError):
        chart(np.array([0.0, 1.0]))


@given(dims, seeds)
@settings(max_examples=30, deadline=None)
def test_embed_inverts_chart(n, seed):
    rng = np.random.default_rng(seed)
    psi = ket(n, rng)
    np.testing.assert_allclose(embed(chart(psi)), projector(psi), atol=1e-12)


@given(dims, seeds)
@settings(max_examples=30, deadline=None)
def test_metric_inverse_and_hermiticity(n, seed):
    p = _point(n, np.random.default_rng(seed))
    md = fs_metric(p)
    np.testing.assert_allclose(md.g, md.g.conj().T, atol=1e-14)
    np.testing.assert_allclose(md.g @ md.g_inv.T, np.eye(n - 1), atol=1e-12)
    assert np.all(np.linalg.eigvalsh(md.g) > 0)


@given(dims, seeds)
@settings(max_examples=20, deadline=None)
def test_metric_is_pullback_of_trace_form(n, seed):
    p = _point(n, np.random.default_rng(seed))
    jet = embedding_jet(p)
    pulled = 0.5 * np.einsum("aij,bji->ab", jet.d, jet.dbar)
    np.testing.assert_allclose(pulled, fs_metric(p).g, atol=1e-12)


@given(dims, seeds)
@settings(max_examples=20, deadline=None)
def test_christoffel_from_metric_derivative(n, seed):
    p = _point(n, np.random.default_rng(seed))
    md = fs_metric(p)
    dg = metric_fd(p)  # [a, b, r]
    np.testing.assert_allclose(np.einsum("cr,abr->cab", md.g_inv, dg), md.christoffel, atol=1e-9)


@given(dims, seeds)
@settings(max_examples=15, deadline=None)
def test_curvature_matches_finite_differences(n, seed):
    p = _point(n, np.random.default_rng(seed))
    np.testing.assert_allclose(riemann_fd(p), riemann(p), atol=1e-8)


def test_curvature_checker_detects_perturbed_symbols():
    from brachisto.geometry import _christoffel_zw

    p = _point(3, np.random.default_rng(0))
    bad = riemann_fd(p, lambda z, w: _christoffel_zw(z, w) * (1 + 1e-3 * np.sum(w)))
    assert np.max(np.abs(bad - riemann(p))) > 1e-5


def test_curvature_symmetries():
    p = _point(4, np.random.default_rng(2))
    r = riemann(p)
    np.testing.assert_allclose(r, np.transpose(r, (2, 1, 0, 3)), atol=1e-15)  # a <-> c
    np.testing.assert_allclose(r, np.transpose(r, (0, 3, 2, 1)), atol=1e-15)  # b <-> d


@given(dims, seeds)
@settings(max_examples=15, deadline=None)
def test_embedding_jet_matches_finite_differences(n, seed):
    p = _point(n, np.random.default_rng(seed))
    exact, fd = embedding_jet(p), embedding_jet_fd(p)
    for name in ("d", "dbar"):
        np.testing.assert_allclose(getattr(fd, name), getattr(exact, name), atol=1e-10)
    for name in ("dd", "ddbar", "dbardbar"):
        np.testing.assert_allclose(getattr(fd, name), getattr(exact, name), atol=1e-6)


@given(dims, seeds)
@settings(max_examples=20, deadline=None)
def test_covariant_derivative_routes_agree(n, seed):
    p = _point(n, np.random.default_rng(seed))
    np.testing.assert_allclose(coordinate_covariant(p), coordinate_covariant(p, "projection"), atol=1e-12)
    jet = embedding_jet(p)
    for a in range(n - 1):
        for b in range(n - 1):
            assert np.max(np.abs(tangent_project(jet.rho, jet.ddbar[a, b]))) < 1e-12


@given(dims, seeds)
@settings(max_examples=40, deadline=None)
def test_complex_structure_and_symplectic_form(n, seed):
    rng = np.random.default_rng(seed)
    rho = projector(ket(n, rng))
    x, y = _tangent(rho, rng), _tangent(rho, rng)
    jx = complex_structure(rho, x)
    np.testing.assert_allclose(complex_structure(rho, jx), -x, atol=1e-12)
    assert abs(metric_G(jx, complex_structure(rho, y)) - metric_G(x, y)) < 1e-12
    w = symplectic_omega(rho, x, y)
    assert abs(w + symplectic_omega(rho, y, x)) < 1e-12
    assert abs(np.trace(rho @ (x @ y - y @ x)) - 2j * w) < 1e-12


def test_complex_structure_warns_on_normal_input():
    rho = projector(np.array([1.0, 0.0, 0.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(NonTangentWarning):
            complex_structure(rho, np.eye(3))


def test_tangent_from_ket_is_tangent():
    rng = np.random.default_rng(5)
    psi = ket(4, rng)
    u = ket(4, rng)
    u -= np.vdot(psi, u) * psi
    x = tangent_from_ket(psi, u)
    np.testing.assert_allclose(tangent_project(projector(psi), x), x, atol=1e-13)
