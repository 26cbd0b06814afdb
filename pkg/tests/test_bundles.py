import numpy as np
import pytest

from chowstab import bundles as bd
from chowstab.polynomial import HomogeneousPolynomial
from chowstab.projlin import (ContractError, GeodesicDirection, GroupElement, SingularityError,
                              exp_path, random_unitary)
from chowstab.sampler import SeededStream
from conftest import within

O1 = bd.o_minus_one_p1()
GR12 = bd.tautological_grassmannian(1, 1)
GR24 = bd.tautological_grassmannian(2, 3)


@pytest.fixture(scope="module")
def o1_batch():
    return bd.FrozenBundleBatch.draw(O1, 20_000, SeededStream(31))


def test_L_identity_exact():
    assert bd.donaldson_L(O1, None, 1000).value == 0


@pytest.mark.parametrize("bundle", [O1, GR12, GR24])
def test_L_unitary_invariance(bundle, rng):
    u = GroupElement(random_unitary(bundle.N, rng))
    assert within(bd.donaldson_L(bundle, u, 20_000, SeededStream(2)), 0.0, floor=1e-10)


@pytest.mark.parametrize("t", [0.2, 0.7])
def test_L_closed_form(t):
    est = bd.donaldson_L(O1, bd.sigma_diag(t), 100_000, SeededStream(3))
    assert within(est, bd.closed_form_L_o1(t))


def test_closed_form_quadrature():
    from scipy.integrate import quad
    t = 0.4
    val, _ = quad(lambda p: np.log(np.exp(2 * t) * p + np.exp(-2 * t) * (1 - p)), 0, 1)
    assert np.isclose(val, bd.closed_form_L_o1(t), rtol=1e-12)
    assert bd.closed_form_L_o1(0.0) == 0.0


def test_rank_deficient_frame_raises():
    bad = bd.BundleChart("bad", ("P", 1), 2, 1, lambda x: np.zeros((len(x), 2, 1)), 1.0)
    with pytest.raises(SingularityError):
        bd.donaldson_L(bad, bd.sigma_diag(0.1), 10)


def test_chart_contracts():
    with pytest.raises(ContractError):
        bd.BundleChart("x", ("P", 1), 2, 3, lambda x: x, 1.0)
    with pytest.raises(ContractError):
        bd.BundleChart("x", ("Q", 1), 2, 1, lambda x: x, 1.0)
    with pytest.raises(ContractError):
        bd.GiesekerPoint(np.zeros((2, 2)))


def test_L_derivative(o1_batch, rng):
    assert bd.L_derivative(o1_batch, None, np.zeros((2, 2))).value == 0
    c = GeodesicDirection.random(2, rng)
    s = bd.sigma_diag(0.3)
    h = 1e-5
    fd = (bd.donaldson_L(o1_batch, exp_path(c, h, s)).value
          - bd.donaldson_L(o1_batch, exp_path(c, -h, s)).value) / (2 * h)
    an = bd.L_derivative(o1_batch, s, c).value
    assert abs(fd - an) <= 1e-3 * abs(an)


def test_gr12_is_critical_at_identity(rng):
    c = GeodesicDirection.random(2, rng)
    assert within(bd.L_derivative(GR12, None, c, 20_000, SeededStream(4)), 0.0, floor=1e-12)


def test_L_second_derivative(o1_batch, rng):
    assert bd.L_second_derivative(o1_batch, None, np.zeros((2, 2))).value == 0
    for _ in range(20):
        c = GeodesicDirection.random(2, rng)
        s = exp_path(GeodesicDirection.random(2, rng), 0.5)
        d2 = bd.L_second_derivative(o1_batch, s, c)
        assert d2.value >= -3 * d2.stderr
    c = GeodesicDirection.random(2, rng)
    s = bd.sigma_diag(0.2)
    h = 1e-5
    fd = (bd.L_derivative(o1_batch, exp_path(c, h, s), c).value
          - bd.L_derivative(o1_batch, exp_path(c, -h, s), c).value) / (2 * h)
    an = bd.L_second_derivative(o1_batch, s, c).value
    assert abs(fd - an) <= 1e-4 * abs(an)


@pytest.mark.parametrize("bundle", [O1, GR12, GR24])
def test_gieseker_consistency(bundle):
    x = bundle.sample_base(SeededStream(5), 100)
    assert bundle.gieseker_residual(x) < bd.GIESEKER_RTOL


def test_gieseker_scaling_and_value(o1_batch):
    a = bd.gieseker_norm(None, o1_batch)
    b = bd.gieseker_norm(O1.gieseker.scale(2.0), o1_batch)
    assert abs(b.value - a.value - np.log(4.0)) < 1e-12
    assert abs(a.value) < 1e-12          # |x| = 1 makes the O(-1) integrand constant
    t = 0.3
    assert within(bd.gieseker_norm(None, O1, bd.sigma_diag(t), 100_000, SeededStream(6)),
                  bd.closed_form_L_o1(t))


def test_gieseker_unitary_invariance(rng):
    u = GroupElement(random_unitary(4, rng))
    assert within(bd.gieseker_log_ratio(GR24, u, 20_000, SeededStream(7)), 0.0, floor=1e-10)


def test_gieseker_required():
    pb = bd.polynomial_bundle([[HomogeneousPolynomial.linear([1, 0])],
                               [HomogeneousPolynomial.linear([0, 1])]])
    with pytest.raises(ContractError):
        bd.gieseker_norm(None, pb, None, 10)


@pytest.mark.parametrize("bundle", [O1, GR12])
def test_gieseker_identity(bundle):
    assert bd.theorem2_check(bundle, None).passed
    r = bd.theorem2_check(bundle, bd.sigma_diag(0.4, bundle.N), 40_000, 40_000)
    assert r.passed, r.to_dict()


def test_gieseker_identity_pointwise(o1_batch, rng):
    s = GroupElement.sl(exp_path(GeodesicDirection.random(2, rng), 0.6).matrix)
    lhs = bd.donaldson_L(o1_batch, s)
    rhs = bd.gieseker_log_ratio(o1_batch, s).scaled(O1.c)
    assert abs(lhs.value - rhs.value) < 1e-10


def test_residuals():
    st = bd.bundle_balanced_residual(GR12, None, 20_000, SeededStream(8))
    assert np.all(np.abs(st.residual) <= 3 * st.stderr + 1e-15)
    triv = bd.polynomial_bundle([[HomogeneousPolynomial.linear([1, 0]), HomogeneousPolynomial.linear([0, 1])],
                                 [HomogeneousPolynomial.linear([0, 1]), HomogeneousPolynomial.linear([-1, 0])]])
    assert bd.bundle_balanced_residual(triv, bd.sigma_diag(0.5), 500).residual_norm < 1e-12


def test_residual_unitary_equivariance(o1_batch, rng):
    u = random_unitary(2, rng)
    s = bd.sigma_diag(0.3)
    r0 = bd.bundle_balanced_residual(o1_batch, s).residual
    r1 = bd.bundle_balanced_residual(o1_batch, GroupElement(u @ s.matrix)).residual
    assert np.allclose(r1, u @ r0 @ u.conj().T, atol=1e-12)


@pytest.mark.parametrize("bundle", [O1, GR24])
def test_balance(bundle):
    batch = bd.FrozenBundleBatch.draw(bundle, 4000, SeededStream(9)).symmetrized()
    start = bd.bundle_balance_iterate(batch)
    assert start.converged and start.iteration <= 3
    st = bd.bundle_balance_iterate(batch, bd.sigma_diag(0.5, bundle.N))
    assert st.converged and st.residual_norm < 1e-8
    assert all(np.diff(st.L_trace) <= 1e-14)
    again = bd.bundle_balance_iterate(batch, st.sigma)
    assert again.iteration == 0 and abs(again.residual_norm - st.residual_norm) < 1e-12


def test_balance_max_iters_zero(o1_batch):
    s = bd.sigma_diag(0.5)
    st = bd.bundle_balance_iterate(o1_batch, s, max_iters=0)
    assert not st.converged and np.array_equal(st.sigma.matrix, s.matrix)


def test_polynomial_bundle_contracts():
    with pytest.raises(ContractError):
        bd.polynomial_bundle([])
    with pytest.raises(ContractError):
        bd.polynomial_bundle([[HomogeneousPolynomial.linear([1, 0])],
                              [HomogeneousPolynomial.fermat(2, 2)]])


def test_L_profile(o1_batch):
    c = GeodesicDirection.diagonal([1, -1])
    prof = bd.L_profile(o1_batch, c, [-0.2, 0.0, 0.2])
    assert prof[1].value == 0
    with pytest.raises(ContractError):
        bd.L_profile(o1_batch, c, [0.2, 0.0])
