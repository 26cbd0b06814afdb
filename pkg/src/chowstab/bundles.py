"""Toy vector bundles E in C^N x X: the Donaldson functional L, its geodesic
derivatives, the Gieseker norm, the balanced residual and bundle balancing.

A bundle is presented by a frame evaluator ``A(x)``: an ``N x r`` matrix whose
columns span the fibre over ``x``. The base is P^M or a Grassmannian with its
FS probability measure, so ``V = 1`` throughout.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .polynomial import HomogeneousPolynomial
from .projlin import (ContractError, GeodesicDirection, GroupElement, SingularityError,
                      as_matrix, compound, exp_path, pluecker)
from .sampler import MCEstimate, SeededStream, sample_grassmannian_batch, sample_pn_batch
from .varieties import coordinate_group

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
GIESEKER_RTOL = 1e-8


@dataclass(frozen=True)
class GiesekerPoint:
    """Coefficient tensor ``a[mu, I]`` over increasing r-tuples I (lexicographic)."""

    tensor: np.ndarray

    def __post_init__(self):
        a = np.array(self.tensor, dtype=complex)
        if a.ndim != 2:
            raise ContractError("Gieseker tensor must be indexed by (mu, I)")
        if not np.any(a):
            raise ContractError("Gieseker tensor is identically zero")
        a.setflags(write=False)
        object.__setattr__(self, "tensor", a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor))

    def scale(self, lam: complex) -> "GiesekerPoint":
        return GiesekerPoint(lam * self.tensor)

    def act(self, sigma, r: int) -> "GiesekerPoint":
        """Natural action on the r-tuple indices via the r-th compound of sigma."""
        return GiesekerPoint(self.tensor @ compound(sigma, r).T)


@dataclass(frozen=True)
class BundleChart:
    """Frame presentation of a rank-r subbundle of the trivial C^N bundle.

    ``base`` is ``("P", M)`` or ``("Gr", k, M)`` (k-planes in C^{M+1}).
    ``tau`` evaluates a basis of sections of det E* at base points, shape
    ``(n, n_mu)``; with ``gieseker`` it must reproduce the r x r row minors of A.
    """

    name: str
    base: tuple
    N: int
    r: int
    frame: Callable[[np.ndarray], np.ndarray]
    c: float
    tau: Callable[[np.ndarray], np.ndarray] | None = None
    gieseker: GiesekerPoint | None = None
    base_dim: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.r <= self.N:
            raise ContractError("need 1 <= r <= N")
        if self.base[0] not in ("P", "Gr"):
            raise ContractError(f"unknown base {self.base[0]!r}")
        if (self.tau is None) != (self.gieseker is None):
            raise ContractError("tau and the Gieseker tensor come together")

    @property
    def has_gieseker(self) -> bool:
        return self.gieseker is not None

    def sample_base(self, stream: SeededStream, n: int) -> np.ndarray:
        if self.base[0] == "P":
            return sample_pn_batch(stream, self.base[1], n).points
        return sample_grassmannian_batch(stream, self.base[1], self.base[2], n)

    def frames(self, x: np.ndarray) -> np.ndarray:
        """Frames at base points with a full-rank check, shape ``(n, N, r)``."""
        a = np.asarray(self.frame(x), dtype=complex)
        if a.shape[1:] != (self.N, self.r):
            raise ContractError(f"frame has shape {a.shape[1:]}, expected {(self.N, self.r)}")
        sv = np.linalg.svd(a, compute_uv=False)
        bad = sv[:, -1] <= RANK_TOL * np.maximum(sv[:, 0], 1e-300)
        if np.any(bad):
            raise SingularityError(f"rank-deficient frame at sample {int(np.argmax(bad))}")
        return a

    def gieseker_residual(self, x: np.ndarray) -> float:
        """Max relative mismatch between row minors of A and sum_mu a^mu tau_mu."""
        if not self.has_gieseker:
            raise ContractError(f"bundle {self.name!r} has no Gieseker data")
        a = self.frames(x)
        minors = pluecker(np.swapaxes(a, -1, -2))
        pred = self.tau(x) @ self.gieseker.tensor
        scale = np.linalg.norm(minors, axis=-1)
        return float(np.max(np.linalg.norm(minors - pred, axis=-1) / scale))

    def descriptor(self) -> dict:
        return {"kind": "bundle", "name": self.name, "base": list(self.base), "N": self.N,
                "r": self.r, "c": self.c, **self.meta}


@dataclass(eq=False)
class FrozenBundleBatch:
    """Base sample and frames, reused across sigma for common random numbers."""

    bundle: BundleChart
    x: np.ndarray
    seed: int = 0
    orbit: int = 1

    @classmethod
    def draw(cls, bundle: BundleChart, n: int, stream: SeededStream) -> "FrozenBundleBatch":
        return cls(bundle, bundle.sample_base(stream, n), stream.seed)

    @property
    def frames(self) -> np.ndarray:
        if not hasattr(self, "_frames"):
            self._frames = self.bundle.frames(self.x)
        return self._frames

    def mean(self, values) -> MCEstimate:
        v = np.asarray(values)
        if self.orbit > 1:
            v = v.reshape((-1, self.orbit) + v.shape[1:]).mean(axis=1)
        return MCEstimate.from_samples(v, self.seed)

    def symmetrized(self) -> "FrozenBundleBatch":
        """Base sample averaged over coordinate shifts and sign flips of the base.

        For equivariant frames (the built-in examples) E[BB*] is then exactly
        (r/N) I. The estimator treats the orbit of one draw as one sample.
        """
        if self.bundle.base[0] == "P":
            size = self.bundle.base[1] + 1
        else:
            size = self.bundle.base[2] + 1
        group = coordinate_group(size, 2)
        x = np.stack([self.x @ g.T for g in group], axis=1)
        return FrozenBundleBatch(self.bundle, x.reshape((-1,) + self.x.shape[1:]), self.seed,
                                 len(group))


def _sigma(sigma, size: int) -> GroupElement:
    if sigma is None:
        return GroupElement.identity(size)
    return sigma if isinstance(sigma, GroupElement) else GroupElement(sigma)


def _is_identity(s: GroupElement) -> bool:
    return bool(np.array_equal(s.matrix, np.eye(s.size)))


def _direction(c, size: int) -> np.ndarray:
    cm = c.matrix if isinstance(c, GeodesicDirection) else np.asarray(c, dtype=complex)
    if cm.shape != (size, size):
        raise ContractError("direction has the wrong size")
    return cm


def _logdet_gram(a: np.ndarray) -> np.ndarray:
    g = np.swapaxes(a.conj(), -1, -2) @ a
    return np.linalg.slogdet(g)[1]


def _orthonormal(a: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(a)
    return q


def _batch(bundle_or_batch, n: int, stream) -> FrozenBundleBatch:
    if isinstance(bundle_or_batch, FrozenBundleBatch):
        return bundle_or_batch
    return FrozenBundleBatch.draw(bundle_or_batch, n, stream or SeededStream(0))


# --- the functional L and its derivatives ------------------------------------

def L_density(batch: FrozenBundleBatch, s: GroupElement) -> np.ndarray:
    a = batch.frames
    return batch.bundle.c * (_logdet_gram(s.matrix @ a) - _logdet_gram(a))


def donaldson_L(bundle, sigma=None, n: int = 50_000, stream: SeededStream | None = None) -> MCEstimate:
    """L(sigma) = c E[log det(A* sigma* sigma A) / det(A* A)]."""
    b = _batch(bundle, n, stream)
    s = _sigma(sigma, b.bundle.N)
    if _is_identity(s):
        return MCEstimate.exact(0.0, len(b.x), b.seed)
    return b.mean(L_density(b, s))


def L_derivative(bundle, sigma, c_dir, n: int = 50_000,
                 stream: SeededStream | None = None) -> MCEstimate:
    """d/dt L(exp(tc) sigma) at t = 0: c E[tr(B*(c + c*)B)], B orthonormal frame of sigma A."""
    b = _batch(bundle, n, stream)
    s = _sigma(sigma, b.bundle.N)
    cm = _direction(c_dir, b.bundle.N)
    if not np.any(cm):
        return MCEstimate.exact(0.0, len(b.x), b.seed)
    u = cm + cm.conj().T
    q = _orthonormal(s.matrix @ b.frames)
    vals = np.einsum("nir,ij,njr->n", q.conj(), u, q).real
    return b.mean(b.bundle.c * vals)


def L_second_derivative(bundle, sigma, c_dir, n: int = 50_000,
                        stream: SeededStream | None = None) -> MCEstimate:
    """d^2/dt^2 L(exp(tc) sigma) at t = 0: c E[tr((1 - P) u P u)], P = BB*."""
    b = _batch(bundle, n, stream)
    s = _sigma(sigma, b.bundle.N)
    cm = _direction(c_dir, b.bundle.N)
    if not np.any(cm):
        return MCEstimate.exact(0.0, len(b.x), b.seed)
    u = cm + cm.conj().T
    q = _orthonormal(s.matrix @ b.frames)
    p = q @ np.swapaxes(q.conj(), -1, -2)
    comp = np.eye(b.bundle.N) - p
    vals = np.einsum("nij,jk,nkl,li->n", comp, u, p, u).real
    return b.mean(b.bundle.c * vals)


# --- Gieseker norm and the identity check --------------------------------------

def _require_gieseker(bundle: BundleChart):
    if not bundle.has_gieseker:
        raise ContractError(f"bundle {bundle.name!r} has no Gieseker data")


def gieseker_norm(point: GiesekerPoint | None, bundle, sigma=None, n: int = 50_000,
                  stream: SeededStream | None = None) -> MCEstimate:
    """log ||sigma . a||^2 = E[log sum_I |sum_mu (sigma a)^mu_I tau_mu(x)|^2].

    The tensor norm is factored out, so scaling a by lambda adds exactly
    log|lambda|^2.
    """
    b = _batch(bundle, n, stream)
    _require_gieseker(b.bundle)
    pt = point if point is not None else b.bundle.gieseker
    s = _sigma(sigma, b.bundle.N)
    acted = pt if _is_identity(s) else pt.act(s, b.bundle.r)
    nrm = acted.norm
    vals = b.bundle.tau(b.x) @ (acted.tensor / nrm)
    est = b.mean(np.log(np.sum(np.abs(vals) ** 2, axis=-1)))
    return est.shifted(np.log(nrm ** 2))


def gieseker_log_ratio(bundle, sigma, n: int = 50_000,
                       stream: SeededStream | None = None) -> MCEstimate:
    """log(||sigma T||^2 / ||T||^2) on one shared base sample."""
    b = _batch(bundle, n, stream)
    _require_gieseker(b.bundle)
    s = _sigma(sigma, b.bundle.N)
    if _is_identity(s):
        return MCEstimate.exact(0.0, len(b.x), b.seed)
    pt = b.bundle.gieseker
    acted = pt.act(s, b.bundle.r)
    tau = b.bundle.tau(b.x)
    num = np.log(np.sum(np.abs(tau @ (acted.tensor / acted.norm)) ** 2, axis=-1))
    den = np.log(np.sum(np.abs(tau @ (pt.tensor / pt.norm)) ** 2, axis=-1))
    return b.mean(num - den).shifted(np.log(acted.norm ** 2) - np.log(pt.norm ** 2))


def theorem2_check(bundle: BundleChart, sigma, n_lhs: int = 50_000, n_rhs: int = 50_000,
                   seed_lhs: int = 5, seed_rhs: int = 6):
    """L(sigma) against c log(||sigma T||^2 / ||T||^2), independent seeds per side."""
    from .chow import CheckReport

    _require_gieseker(bundle)
    s = _sigma(sigma, bundle.N)
    if _is_identity(s):
        z = MCEstimate.exact(0.0)
        return CheckReport("theorem2", z, z)
    lhs = donaldson_L(bundle, s, n_lhs, SeededStream(seed_lhs))
    rhs = gieseker_log_ratio(bundle, s, n_rhs, SeededStream(seed_rhs)).scaled(bundle.c)
    return CheckReport("theorem2", lhs, rhs)


# --- balancing -------------------------------------------------------------------

@dataclass(frozen=True)
class BundleBalanceState:
    sigma: GroupElement
    residual: np.ndarray
    residual_norm: float
    iteration: int
    converged: bool = False
    stderr: np.ndarray | None = None
    trace: tuple = ()
    L_trace: tuple = ()

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "residual_norm": self.residual_norm,
                "converged": self.converged, "trace": list(self.trace),
                "L_trace": list(self.L_trace),
                "sigma": [[[v.real, v.imag] for v in row] for row in self.sigma.matrix]}


def _opnorm(h: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (h + h.conj().T)))))


def bundle_moment(batch: FrozenBundleBatch, sigma=None):
    """E[BB*] with B a pointwise orthonormal frame of sigma A, and entrywise stderr."""
    s = _sigma(sigma, batch.bundle.N)
    q = _orthonormal(s.matrix @ batch.frames)
    p = q @ np.swapaxes(q.conj(), -1, -2)
    if batch.orbit > 1:
        p = p.reshape((-1, batch.orbit) + p.shape[1:]).mean(axis=1)
    n = p.shape[0]
    mom = p.mean(axis=0)
    se = np.sqrt(np.sum(np.abs(p - mom) ** 2, axis=0) / (n - 1) / n) if n > 1 else None
    return mom, se


def bundle_balanced_residual(bundle, sigma=None, n: int = 50_000,
                             stream: SeededStream | None = None) -> BundleBalanceState:
    """E[BB*] - (r/N) I over the base."""
    b = _batch(bundle, n, stream)
    s = _sigma(sigma, b.bundle.N)
    mom, se = bundle_moment(b, s)
    res = mom - (b.bundle.r / b.bundle.N) * np.eye(b.bundle.N)
    res = 0.5 * (res + res.conj().T)
    return BundleBalanceState(s, res, _opnorm(res), 0, stderr=se)


def _inv_sqrt(q: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (q + q.conj().T))
    if w.min() <= 1e-12 * w.max():
        raise SingularityError("bundle moment matrix is numerically singular")
    return (v / np.sqrt(w)) @ v.conj().T


def bundle_balance_iterate(batch: FrozenBundleBatch, sigma_init=None, max_iters: int = 200,
                           tol: float = 1e-8) -> BundleBalanceState:
    """Fixed-point iteration sigma <- det-normalize(Q^{-1/2} sigma), Q = (N/r) E[BB*]."""
    N, r = batch.bundle.N, batch.bundle.r
    s = _sigma(sigma_init, N)
    trace, ltrace = [], []
    for it in range(max_iters + 1):
        st = bundle_balanced_residual(batch, s)
        trace.append(st.residual_norm)
        ltrace.append(float(donaldson_L(batch, s).value))
        log.debug("bundle balance iteration %d residual %.3e", it, st.residual_norm)
        if st.residual_norm < tol:
            return BundleBalanceState(s, st.residual, st.residual_norm, it, True, st.stderr,
                                      tuple(trace), tuple(ltrace))
        if it == max_iters:
            break
        q = (N / r) * (st.residual + (r / N) * np.eye(N))
        s = GroupElement.sl(_inv_sqrt(q) @ s.matrix)
    return BundleBalanceState(s, st.residual, st.residual_norm, max_iters, False, st.stderr,
                              tuple(trace), tuple(ltrace))


def L_profile(batch: FrozenBundleBatch, c, t_grid, sigma0=None) -> list[MCEstimate]:
    """L along exp(tc) sigma0 on a frozen batch."""
    cdir = c if isinstance(c, GeodesicDirection) else GeodesicDirection(c)
    t = [float(v) for v in t_grid]
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ContractError("t_grid must be strictly increasing")
    s0 = _sigma(sigma0, batch.bundle.N)
    return [donaldson_L(batch, exp_path(cdir, tv, s0) if tv != 0 else s0) for tv in t]


# --- built-in examples and polynomial frames ---------------------------------------

def o_minus_one_p1() -> BundleChart:
    """O(-1) in C^2 x P^1: A(x) = x, tau = (z0, z1), a = identity, c = 1."""
    return BundleChart(
        name="O(-1)/P1", base=("P", 1), N=2, r=1,
        frame=lambda x: np.asarray(x)[:, :, None], c=1.0,
        tau=lambda x: np.asarray(x), gieseker=GiesekerPoint(np.eye(2)), base_dim=1)


def tautological_grassmannian(k: int = 1, M: int = 1) -> BundleChart:
    """Tautological rank-k bundle on Gr(k, C^{M+1}) with Pluecker sections of det E*.

    c = (n/r) int c1(E*) omega^{n-1} / int omega^n with n = k(M+1-k) and
    c1(E*) the Pluecker hyperplane class, i.e. c = n / k.
    """
    N = M + 1
    n_dim = k * (N - k)
    n_mu = len(pluecker(np.eye(k, N)))
    return BundleChart(
        name=f"taut/Gr({k},{N})", base=("Gr", k, M), N=N, r=k,
        frame=lambda w: np.swapaxes(np.asarray(w), -1, -2), c=n_dim / k,
        tau=lambda w: pluecker(w), gieseker=GiesekerPoint(np.eye(n_mu)), base_dim=n_dim)


def polynomial_bundle(entries: list[list[HomogeneousPolynomial]], c: float = 1.0,
                      name: str = "user") -> BundleChart:
    """Bundle over P^M whose frame entries are homogeneous polynomials of one degree."""
    rows = len(entries)
    cols = len(entries[0]) if rows else 0
    if rows == 0 or cols == 0 or any(len(row) != cols for row in entries):
        raise ContractError("frame must be a non-empty rectangular array of polynomials")
    flat = [p for row in entries for p in row]
    nv = {p.n_vars for p in flat}
    deg = {p.degree for p in flat if p.terms}
    if len(nv) != 1 or len(deg) > 1:
        raise ContractError("frame entries must share variables and degree")
    M = nv.pop() - 1

    def frame(x):
        x = np.asarray(x)
        vals = np.stack([p(x) for p in flat], axis=-1)
        return vals.reshape(x.shape[0], rows, cols)

    return BundleChart(name=name, base=("P", M), N=rows, r=cols, frame=frame, c=float(c),
                       base_dim=M)


def sigma_diag(t: float, N: int = 2) -> GroupElement:
    """diag(e^t, e^-t, 1, ...)."""
    c = np.zeros(N)
    c[0], c[1] = 1.0, -1.0
    return exp_path(GeodesicDirection.diagonal(c), t)


def closed_form_L_o1(t: float) -> float:
    """L for O(-1)/P^1 at diag(e^t, e^-t): int_0^1 log(e^{2t} p + e^{-2t}(1-p)) dp."""
    a, b = np.exp(2 * t), np.exp(-2 * t)
    if abs(a - b) < 1e-15:
        return float(np.log(a))
    return float((a * np.log(a) - b * np.log(b)) / (a - b) - 1.0)
