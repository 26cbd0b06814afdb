import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from chowstab.polynomial import HomogeneousPolynomial
from chowstab.projlin import ContractError, SingularityError, phi_sigma, random_unitary
from chowstab.sampler import (MCEstimate, SeededStream, WeightedSampleBatch, estimate, sample_grassmannian,
                              sample_hypersurface, sample_pn, sample_pn_batch, volume)
from conftest import within


def moments(z):
    zz = np.einsum("ni,ni->n", z, z.conj()).real
    return np.einsum("ni,nj,n->nij", z, z.conj(), 1 / zz)


def test_stream_determinism_and_independence():
    a = SeededStream(7).rng().standard_normal(5)
    b = SeededStream(7).rng().standard_normal(5)
    c = SeededStream(7, 1).rng().standard_normal(5)
    d = SeededStream(7).child(0).rng().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    with pytest.raises(ContractError):
        SeededStream(-1)


def test_estimate_merge_pooling(rng):
    v = rng.standard_normal(1001)
    full = MCEstimate.from_samples(v)
    merged = MCEstimate.from_samples(v[:400]).merge(MCEstimate.from_samples(v[400:]))
    assert np.isclose(merged.value, full.value, rtol=1e-13)
    assert np.isclose(merged.stderr, full.stderr, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 50), st.integers(2, 50), st.integers(2, 50))
def test_merge_is_associative(seed, n1, n2, n3):
    rng = np.random.default_rng(seed)
    e = [MCEstimate.from_samples(rng.standard_normal(n)) for n in (n1, n2, n3)]
    a = e[0].merge(e[1]).merge(e[2])
    b = e[0].merge(e[1].merge(e[2]))
    assert np.isclose(a.value, b.value, rtol=1e-12, atol=1e-14)
    assert np.isclose(a.stderr, b.stderr, rtol=1e-10)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_pn_moment_identity(N):
    z = sample_pn(SeededStream(N), N, 20_000)
    m = moments(z)
    for i in range(N + 1):
        for j in range(N + 1):
            est = MCEstimate.from_samples(m[:, i, j])
            assert within(est, (i == j) / (N + 1))


def test_pn_unitary_potential_mean(rng):
    u = random_unitary(3, rng)
    z = sample_pn(SeededStream(3), 2, 20_000)
    assert within(MCEstimate.from_samples(phi_sigma(u, z)), 0.0, floor=1e-12)


def test_pn_log_coordinate_mean():
    z = sample_pn(SeededStream(4), 1, 40_000)
    est = MCEstimate.from_samples(np.log(np.abs(z[:, 0]) ** 2))
    exact, _ = integrate.quad(np.log, 0, 1)          # |z0|^2 is uniform on [0, 1]
    assert within(est, exact)


def test_grassmannian_rejects_full_space():
    with pytest.raises(ContractError):
        sample_grassmannian(SeededStream(0), 4, 3)


def test_grassmannian_orthonormal_rows():
    w = sample_grassmannian(SeededStream(1), 2, 4, 100)
    g = w @ np.swapaxes(w.conj(), -1, -2)
    assert np.allclose(g, np.eye(2), atol=1e-12)


def test_grassmannian_k1_matches_pn_moments():
    a = moments(sample_grassmannian(SeededStream(5), 1, 2, 20_000)[:, 0, :])
    b = moments(sample_pn(SeededStream(6), 2, 20_000))
    for i in range(3):
        ea = MCEstimate.from_samples(a[:, i, i])
        eb = MCEstimate.from_samples(b[:, i, i])
        assert abs(ea.value - eb.value) <= 3 * np.hypot(ea.stderr, eb.stderr)


def test_grassmannian_pluecker_moment_invariance(rng):
    from chowstab.projlin import pluecker
    u = random_unitary(4, rng)
    w1 = sample_grassmannian(SeededStream(8), 2, 3, 10_000)
    w2 = sample_grassmannian(SeededStream(9), 2, 3, 10_000) @ u.T
    p1 = np.abs(pluecker(w1)[:, 0]) ** 2
    p2 = np.abs(pluecker(w2)[:, 0]) ** 2
    e1, e2 = MCEstimate.from_samples(p1), MCEstimate.from_samples(p2)
    assert abs(e1.value - e2.value) <= 3 * np.hypot(e1.stderr, e2.stderr)


def test_linear_hypersurface_matches_pn():
    f = HomogeneousPolynomial.linear([1, 2j, -1])
    b = sample_hypersurface(SeededStream(2), f, 20_000)
    assert np.allclose(f(b.points), 0, atol=1e-12)
    # rotate the plane onto {z2 = 0} and compare to P^1 moments
    n = np.conj(np.array([1, 2j, -1])) / np.sqrt(6)
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(3)[:, :2]]))
    coords = b.points @ np.conj(q[:, 1:])
    m = moments(coords)
    for i in range(2):
        assert within(b.mean(m[:, i, i]), 0.5)


@pytest.mark.parametrize("d", [2, 3])
def test_hypersurface_mass_and_points(d):
    f = HomogeneousPolynomial.fermat(3, d)
    b = sample_hypersurface(SeededStream(d), f, 5_000)
    assert len(b) == d * 5_000
    est = MCEstimate.from_samples(np.bincount(b.groups, b.weights) * b.n_groups)
    assert within(est, d, floor=1e-9)
    assert volume(f) == d


def test_cubic_moment_is_balanced():
    f = HomogeneousPolynomial.fermat(3, 3)
    b = sample_hypersurface(SeededStream(11), f, 10_000)
    m = moments(b.points)
    for i in range(3):
        for j in range(3):
            assert within(b.mean(m[:, i, j]), (i == j) / 3)


def test_singular_hypersurface_raises():
    # a double line: every random line meets it in a double root where grad f = 0
    f = HomogeneousPolynomial.from_terms({(2, 0, 0): 1})
    with pytest.raises(SingularityError):
        sample_hypersurface(SeededStream(0), f, 100)


def test_chunking_and_workers_do_not_change_results():
    f = HomogeneousPolynomial.fermat(3, 3)
    a = sample_hypersurface(SeededStream(3), f, 3_000, chunk=1000, workers=1)
    b = sample_hypersurface(SeededStream(3), f, 3_000, chunk=1000, workers=3)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)


def test_estimate_contract():
    one = estimate(lambda z: np.ones(len(z)), lambda s, n: sample_pn(s, 2, n), 1000, SeededStream(0))
    assert one.value == 1 and one.stderr == 0
    g = lambda z: np.abs(z[:, 0]) ** 2
    samp = lambda s, n: sample_pn(s, 2, n)
    r1 = estimate(g, samp, 5000, SeededStream(1), chunk=700)
    r2 = estimate(g, samp, 5000, SeededStream(1), chunk=700, workers=4)
    assert r1 == r2
    with pytest.raises(FloatingPointError, match="not finite"), np.errstate(divide="ignore"):
        estimate(lambda z: np.log(np.zeros(len(z))), samp, 10, SeededStream(0))


def test_batch_text_roundtrip():
    b = sample_pn_batch(SeededStream(0), 2, 5)
    c = WeightedSampleBatch.loads(b.dumps())
    assert np.array_equal(b.points, c.points) and np.array_equal(b.weights, c.weights)
    with pytest.raises(ContractError, match="line 2"):
        WeightedSampleBatch.loads("# header\n0 1 x y\n")
