import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chowstab.projlin import (ContractError, GeodesicDirection, GroupElement, ProjectivePoint,
                              SingularityError, TangentVector, compound, exp_path, expm_hermitian,
                              fs_form, fs_form_checked, fs_gram, phi_dot, phi_sigma, pluecker,
                              pullback_fs_form, random_unitary)


def cvec(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def chart_metric(x, a, b, h=1e-4):
    """d d-bar log|z|^2 at x in directions a, b by polarized difference Laplacians."""
    def q(v):
        f = lambda s: np.log(np.vdot(x + s * v, x + s * v).real)
        return (f(h) + f(-h) + f(1j * h) + f(-1j * h) - 4 * f(0)) / (4 * h * h)
    return 0.25 * (q(a + b) - q(a - b) + 1j * q(a + 1j * b) - 1j * q(a - 1j * b))


# --- domain types ---------------------------------------------------------------

def test_projective_point_normalizes_and_rejects_zero():
    p = ProjectivePoint([3, 4j])
    assert np.isclose(np.linalg.norm(p.coords), 1.0)
    with pytest.raises(ContractError):
        ProjectivePoint([0, 0])


def test_tangent_vector_orthogonality(rng):
    x = ProjectivePoint(cvec(rng, 3))
    with pytest.raises(ContractError):
        TangentVector(x, x.coords)
    v = TangentVector.project(x, cvec(rng, 3))
    assert abs(np.vdot(x.coords, v.direction)) < 1e-12


def test_geodesic_direction_checks():
    with pytest.raises(ContractError):
        GeodesicDirection(np.diag([1.0, 1.0]))
    with pytest.raises(ContractError):
        GeodesicDirection(np.array([[0, 1], [0, 0]], dtype=complex))
    c = GeodesicDirection.random(4, np.random.default_rng(0))
    assert np.isclose(np.linalg.norm(c.matrix), 1.0)


def test_group_element_checks():
    with pytest.raises(SingularityError):
        GroupElement(np.diag([1.0, 0.0]))
    with pytest.raises(ContractError):
        GroupElement(np.eye(2) * 2, det_normalized=True)
    s = GroupElement.sl(np.diag([2.0, 3.0, 5.0]))
    assert abs(np.linalg.det(s.matrix) - 1) < 1e-12
    assert (s @ s.inverse()).is_unitary(1e-12)


# --- fs_form ---------------------------------------------------------------------

def test_fs_form_basis_value():
    assert np.isclose(fs_form([1, 0, 0], [0, 1, 0], [0, 1, 0]), 1.0)


def test_fs_form_zero_vectors(rng):
    assert fs_form(cvec(rng, 3), np.zeros(3), np.zeros(3)) == 0


def test_fs_form_chart_oracle(rng):
    x = np.array([1, 1, 0]) / np.sqrt(2)
    a = np.array([1, -1, 0]) / np.sqrt(2)
    b = np.array([0, 0, 1.0])
    for u, v in ((a, a), (b, b), (a, b)):
        val = fs_form(x, u, v)
        assert abs(val - chart_metric(x, u, v)) < 1e-6
    assert fs_form(x, a, a).real > 0 and abs(fs_form(x, a, a).imag) < 1e-15


def test_fs_form_checked_rejects_mismatched_base(rng):
    x = ProjectivePoint([1, 0, 0])
    y = ProjectivePoint([0, 1, 0])
    a = TangentVector.project(x, [0, 1, 1])
    b = TangentVector.project(y, [1, 0, 1])
    with pytest.raises(ContractError):
        fs_form_checked(x, a, b)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.complex_numbers(min_magnitude=0.1, max_magnitude=10,
                                                       allow_nan=False, allow_infinity=False))
def test_fs_form_projective_invariance(seed, lam):
    rng = np.random.default_rng(seed)
    x, a, b = cvec(rng, 4), cvec(rng, 4), cvec(rng, 4)
    # rescaling the point together with its tangent vectors leaves the form unchanged
    assert np.isclose(fs_form(lam * x, lam * a, lam * b), fs_form(x, a, b), rtol=1e-9, atol=1e-12)


# --- pullback ---------------------------------------------------------------------

def test_pullback_identity_and_unitary(rng):
    x, a, b = cvec(rng, 3), cvec(rng, 3), cvec(rng, 3)
    base = fs_form(x, a, b)
    assert np.isclose(pullback_fs_form(np.eye(3), x, a, b), base, atol=1e-14)
    u = random_unitary(3, rng)
    assert abs(pullback_fs_form(u, x, a, b) - base) < 1e-12


def test_pullback_matches_potential(rng):
    # sigma^* omega = omega + d d-bar phi_sigma, checked by differences of log|sigma z|^2
    s = np.diag([np.e, 1, 1])
    x = cvec(rng, 3)
    a = cvec(rng, 3)
    h = 1e-4
    f = lambda t: np.log(np.vdot(s @ (x + t * a), s @ (x + t * a)).real)
    lap = (f(h) + f(-h) + f(1j * h) + f(-1j * h) - 4 * f(0)) / (4 * h * h)
    assert abs(pullback_fs_form(s, x, a, a).real - lap) < 1e-6


# --- potentials ------------------------------------------------------------------

def test_phi_sigma_examples(rng):
    x = cvec(rng, 3)
    assert phi_sigma(np.eye(3), x) == 0
    t = 0.37
    s = exp_path(GeodesicDirection.diagonal([1, -1, 0]), t)
    assert np.isclose(phi_sigma(s, [1, 0, 0]), 2 * t)


def test_phi_sigma_cocycle(rng):
    s = GroupElement(cvec(rng, 3, 3))
    x = cvec(rng, 3)
    y = s.matrix @ x
    y = y / np.linalg.norm(y)
    assert np.isclose(phi_sigma(s.inverse(), y), -phi_sigma(s, x), atol=1e-12)


def test_phi_dot_examples(rng):
    assert phi_dot(np.eye(3), np.zeros((3, 3)), cvec(rng, 3)) == 0
    c = GeodesicDirection.diagonal([0.5, -0.5])
    assert np.isclose(phi_dot(np.eye(2), c, [1, 0]), 1.0)


def test_phi_dot_finite_difference(rng):
    c = GeodesicDirection.random(3, rng)
    s0 = GroupElement(cvec(rng, 3, 3))
    x = cvec(rng, 3)
    h = 1e-5
    fd = (phi_sigma(exp_path(c, h, s0), x) - phi_sigma(exp_path(c, -h, s0), x)) / (2 * h)
    an = phi_dot(s0, c, x)
    assert abs(fd - an) <= 1e-8 * max(1.0, abs(an))


# --- exp_path ---------------------------------------------------------------------

def test_exp_path_zero_and_diagonal(rng):
    s0 = GroupElement(cvec(rng, 3, 3))
    assert np.allclose(exp_path(GeodesicDirection.diagonal([1, -1, 0]), 0.0, s0).matrix, s0.matrix)
    c = np.array([0.3, -0.1, -0.2])
    e = exp_path(GeodesicDirection.diagonal(c), 1.7, s0).matrix
    assert np.allclose(e, np.diag(np.exp(1.7 * c)) @ s0.matrix, atol=1e-12)


def test_exp_path_group_law(rng):
    c = GeodesicDirection.random(4, rng)
    lhs = exp_path(c, 0.7).matrix
    rhs = exp_path(c, 0.4, exp_path(c, 0.3)).matrix
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_expm_hermitian_matches_series(rng):
    h = GeodesicDirection.random(3, rng).matrix * 0.5
    series = sum(np.linalg.matrix_power(h, k) / math.factorial(k) for k in range(25))
    assert np.allclose(expm_hermitian(h), series, atol=1e-13)


# --- Pluecker ------------------------------------------------------------------------

def test_pluecker_examples(rng):
    w = cvec(rng, 1, 4)
    assert np.allclose(pluecker(w), w[0])
    e = pluecker(np.eye(4)[:2])
    assert e[0] == 1 and np.all(e[1:] == 0)
    with pytest.raises(ContractError):
        pluecker(np.array([[1, 2, 3], [2, 4, 6]], dtype=complex))


def test_pluecker_unitary_norm_invariance(rng):
    for _ in range(5):
        w = cvec(rng, 2, 5)
        u = random_unitary(5, rng)
        assert np.isclose(np.linalg.norm(pluecker(w @ u.T)), np.linalg.norm(pluecker(w)))


def test_compound_is_multiplicative(rng):
    a, b = cvec(rng, 4, 4), cvec(rng, 4, 4)
    assert np.allclose(compound(a @ b, 2), compound(a, 2) @ compound(b, 2))
    w = cvec(rng, 2, 4)
    # minors of the transformed plane are the compound acting on the minors
    assert np.allclose(pluecker(w @ a.T), compound(a, 2) @ pluecker(w))


def test_fs_gram_is_positive_definite(rng):
    x = cvec(rng, 10, 4)
    v = cvec(rng, 10, 3, 4)
    g = fs_gram(x, v)
    assert np.all(np.linalg.eigvalsh(g) > 0)
