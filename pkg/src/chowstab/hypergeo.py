"""Differential geometry of smooth hypersurfaces X = {f = 0} in P^{m+1}.

Batch conventions: points ``x`` have shape ``(n, m+2)``; tangent frames are
``(n, m, m+2)`` stacks of row vectors; Gram matrices are ``(n, m, m)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .polynomial import HomogeneousPolynomial
from .projlin import (ContractError, SingularityError, act, coords_of, fs_form, fs_gram,
                      hdot, normalize)

ON_X_TOL = 1e-8
SINGULAR_TOL = 1e-8
NEWTON_TOL = 1e-12
NEWTON_ITERS = 10
FD_STEP = 1e-3


def gradient(f: HomogeneousPolynomial, x) -> np.ndarray:
    return f.gradient(coords_of(x))


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal basis of T_x X = ker(grad f) cap x-perp plus a unit transversal Y."""

    base: np.ndarray          # (n, N+1) unit representatives
    vectors: np.ndarray       # (n, m, N+1)
    transversal: np.ndarray   # (n, N+1)

    @property
    def dim(self) -> int:
        return self.vectors.shape[-2]

    def full(self) -> np.ndarray:
        """Frame vectors followed by the transversal, shape ``(n, m+1, N+1)``."""
        return np.concatenate([self.vectors, self.transversal[..., None, :]], axis=-2)


def tangent_frame(f: HomogeneousPolynomial, x, check: bool = True) -> TangentFrame:
    x = normalize(np.atleast_2d(coords_of(x)))
    g = f.gradient(x)
    fnorm = f.coef_norm()
    if check:
        res = np.abs(f(x)) / fnorm
        if np.any(res > ON_X_TOL):
            raise ContractError(f"point is not on the hypersurface (|f|/|f|_coef = {res.max():.3g})")
    y = np.conj(g)
    y = y - hdot(y, x)[:, None] * x
    gn = np.linalg.norm(y, axis=-1)
    if np.any(gn < SINGULAR_TOL * fnorm):
        i = int(np.argmin(gn))
        raise SingularityError(f"singular point of the hypersurface at {x[i].tolist()}")
    y = y / gn[:, None]
    n1 = x.shape[-1]
    stacked = np.concatenate(
        [x[:, :, None], y[:, :, None], np.broadcast_to(np.eye(n1), (x.shape[0], n1, n1))], axis=2)
    q, _ = np.linalg.qr(stacked)
    vecs = np.swapaxes(q[:, :, 2:], 1, 2)
    return TangentFrame(x, vecs, y)


@dataclass(frozen=True)
class InducedMetric:
    """Gram matrix of (sigma^*)omega on a tangent frame."""

    frame: TangentFrame
    gram: np.ndarray

    def det(self) -> np.ndarray:
        return np.linalg.det(self.gram).real


def induced_metric(frame: TangentFrame, sigma=None) -> InducedMetric:
    return InducedMetric(frame, fs_gram(frame.base, frame.vectors, sigma))


def _whitened_eigs(g: np.ndarray, gs: np.ndarray):
    """Eigen-decomposition of G^{-1/2} Gs G^{-1/2} via a Cholesky whitening."""
    try:
        lo = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ContractError("reference Gram matrix is not positive definite") from None
    li = np.linalg.inv(lo)
    w = li @ gs @ np.conj(np.swapaxes(li, -1, -2))
    w = 0.5 * (w + np.conj(np.swapaxes(w, -1, -2)))
    lam, u = np.linalg.eigh(w)
    if np.any(lam <= 0):
        raise ContractError("second Gram matrix is not positive definite")
    return li, lam, u


def _elementary_symmetric(lam: np.ndarray) -> np.ndarray:
    """e_0..e_k of the last axis of ``lam`` (shape (..., k) -> (..., k+1))."""
    k = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (k + 1,), dtype=lam.dtype)
    e[..., 0] = 1.0
    for j in range(k):
        e[..., 1:j + 2] = e[..., 1:j + 2] + lam[..., j:j + 1] * e[..., 0:j + 1]
    return e


def mixed_wedge_ratios(g, gs) -> np.ndarray:
    """r_k = (omega^k wedge omega_s^{m-k}) / omega^m on a frame, k = 0..m.

    Read off det(s G + Gs) = det G * sum_k C(m,k) r_k s^k, so Gs = G gives r_k = 1.
    """
    g = g.gram if isinstance(g, InducedMetric) else np.asarray(g)
    gs = gs.gram if isinstance(gs, InducedMetric) else np.asarray(gs)
    _, lam, _ = _whitened_eigs(g, gs)
    m = lam.shape[-1]
    e = _elementary_symmetric(lam)
    binom = np.array([comb(m, k) for k in range(m + 1)], dtype=float)
    return e[..., ::-1] / binom


def mixed_form_ratios(g, gs, form) -> np.ndarray:
    """q_i = (alpha wedge omega^i wedge omega_s^{m-1-i}) / omega^m, i = 0..m-1.

    ``form`` is the Hermitian matrix of a (1,1)-form alpha on the same frame.
    """
    li, lam, u = _whitened_eigs(np.asarray(g), np.asarray(gs))
    m = lam.shape[-1]
    a = li @ np.asarray(form) @ np.conj(np.swapaxes(li, -1, -2))
    rho = np.einsum("...ji,...jk,...ki->...i", np.conj(u), a, u).real
    out = np.zeros(lam.shape[:-1] + (m,))
    for k in range(m):
        others = np.delete(lam, k, axis=-1)
        e = _elementary_symmetric(others)        # e_0..e_{m-1}
        # coefficient of s^i in prod_{j != k}(s + lam_j) is e_{m-1-i}
        out += rho[..., k:k + 1] * e[..., ::-1]
    norm = np.array([m * comb(m - 1, i) for i in range(m)], dtype=float)
    return out / norm


def xi(f: HomogeneousPolynomial, x, sigma=None, frame: TangentFrame | None = None) -> np.ndarray:
    """The function xi_sigma on X.

    sigma^*omega^m(frame) |Y f|^2 / |sigma x|^{2d}, divided by
    sigma^*omega^{m+1}(frame, Y). Positive on smooth X and independent of the
    frame completion.
    """
    if frame is None:
        frame = tangent_frame(f, x)
    x = frame.base
    m = frame.dim
    d = f.degree
    gm = fs_gram(x, frame.vectors, sigma)
    gm1 = fs_gram(x, frame.full(), sigma)
    yf = np.sum(f.gradient(x) * frame.transversal, axis=-1)
    sx = act(sigma, x)
    sxx = hdot(sx, sx).real
    num = np.linalg.det(gm).real * np.abs(yf) ** 2 / sxx ** d
    den = (m + 1) * np.linalg.det(gm1).real
    if np.any(np.abs(yf) ** 2 < 1e-24 * f.coef_norm() ** 2):
        raise SingularityError("transversal derivative Y(f) vanishes")
    return num / den


def xi_closed_form(f: HomogeneousPolynomial, x) -> np.ndarray:
    """|grad f|^2 / ((m+1) |x|^{2d-2}), the value of xi at sigma = I."""
    x = coords_of(x)
    m = f.n_vars - 2
    xx = hdot(x, x).real
    return np.sum(np.abs(f.gradient(x)) ** 2, axis=-1) / ((m + 1) * xx ** (f.degree - 1))


# --- Ricci curvature ---------------------------------------------------------

def curve_point(f: HomogeneousPolynomial, x: np.ndarray, v: np.ndarray, s) -> np.ndarray:
    """Point at parameter s on the holomorphic curve in X through x with tangent v.

    gamma(s) = x + s v + w(s) nvec with nvec = conj(grad f(x)) / |grad f(x)|^2,
    where w solves f(gamma(s)) = 0 by Newton iteration.
    """
    g0 = f.gradient(x)
    nvec = np.conj(g0) / np.sum(np.abs(g0) ** 2, axis=-1, keepdims=True)
    s = np.asarray(s)[..., None]
    base = x + s * v
    w = np.zeros(base.shape[:-1], dtype=complex)
    fn = f.coef_norm()
    for _ in range(NEWTON_ITERS):
        pt = base + w[..., None] * nvec
        val = f(pt)
        scale = fn * np.linalg.norm(pt, axis=-1) ** f.degree
        if np.all(np.abs(val) <= NEWTON_TOL * scale):
            return pt
        slope = np.sum(f.gradient(pt) * nvec, axis=-1)
        w = w - val / slope
    pt = base + w[..., None] * nvec
    scale = fn * np.linalg.norm(pt, axis=-1) ** f.degree
    if np.all(np.abs(f(pt)) <= NEWTON_TOL * scale):
        return pt
    raise SingularityError("Newton corrector failed to return to the hypersurface")


def _log_xi_levi_diag(f, x, v, h):
    """Central-difference Laplacian estimate of ddbar log xi (v, v-bar)."""
    offsets = np.array([h, -h, 1j * h, -1j * h])
    pts = curve_point(f, x[:, None, :], v[:, None, :], np.broadcast_to(offsets, x.shape[:1] + (4,)))
    lx = np.log(xi(f, pts.reshape(-1, x.shape[-1]))).reshape(-1, 4)
    l0 = np.log(xi(f, x))
    return (lx.sum(axis=1) - 4 * l0) / (4 * h * h)


def _levi_quadratic(f, x, v, h=FD_STEP):
    """Richardson-extrapolated Q(v) = ddbar log xi (v, v-bar), scale-aware."""
    nv = np.linalg.norm(v, axis=-1)
    safe = np.where(nv > 0, nv, 1.0)
    u = v / safe[:, None]
    d1 = _log_xi_levi_diag(f, x, u, h)
    d2 = _log_xi_levi_diag(f, x, u, h / 2)
    return np.where(nv > 0, (4 * d2 - d1) / 3 * nv ** 2, 0.0)


def _unit_representative(x, a, b):
    """Rescale x to unit length; tangent vectors scale with their representative."""
    x = np.atleast_2d(coords_of(x))
    nx = np.linalg.norm(x, axis=-1, keepdims=True)
    a = np.atleast_2d(np.asarray(a, dtype=complex)) / nx
    b = np.atleast_2d(np.asarray(b, dtype=complex)) / nx
    return x / nx, a, b


def levi_log_xi(f, x, a, b, method: str = "fd") -> np.ndarray:
    """ddbar log xi (A, B-bar) for tangent vectors A, B of X at x (batched)."""
    x, a, b = _unit_representative(x, a, b)
    a = a - hdot(a, x)[:, None] * x
    b = b - hdot(b, x)[:, None] * x
    if method == "analytic":
        return _levi_log_xi_analytic(f, x, a, b)
    if method != "fd":
        raise ContractError(f"unknown method {method!r}")
    if np.allclose(a, b, rtol=0, atol=1e-15):
        return _levi_quadratic(f, x, a).astype(complex)
    qa = _levi_quadratic(f, x, a)
    qb = _levi_quadratic(f, x, b)
    q1 = _levi_quadratic(f, x, a + b)
    q2 = _levi_quadratic(f, x, a + 1j * b)
    return 0.5 * (q1 - qa - qb) + 0.5j * (q2 - qa - qb)


def _levi_log_xi_analytic(f, x, a, b):
    """Exact Levi form of log|grad f|^2 - (d-1) log|z|^2 (log xi up to a constant)."""
    g = f.gradient(x)
    hs = f.hessian(x)
    ha = np.einsum("nij,nj->ni", hs, a)
    hb = np.einsum("nij,nj->ni", hs, b)
    gg = hdot(g, g).real
    lg = hdot(ha, hb) / gg - hdot(ha, g) * hdot(g, hb) / gg ** 2
    return lg - (f.degree - 1) * fs_form(x, a, b)


def ricci(f: HomogeneousPolynomial, x, a, b, method: str = "fd") -> np.ndarray:
    """Ric(omega)(A, B-bar) = (m+2-d) omega(A, B-bar) - ddbar log xi (A, B-bar)."""
    x, a, b = _unit_representative(x, a, b)
    m = f.n_vars - 2
    d = f.degree
    return (m + 2 - d) * fs_form(x, a, b) - levi_log_xi(f, x, a, b, method)


def ricci_matrix(f: HomogeneousPolynomial, frame: TangentFrame, method: str = "fd") -> np.ndarray:
    """Hermitian matrix Ric(e_j, e_k-bar) on the tangent frame, shape (n, m, m)."""
    x = frame.base
    vecs = frame.vectors
    n, m = vecs.shape[:2]
    d = f.degree
    if method == "analytic":
        levi = np.empty((n, m, m), dtype=complex)
        for j in range(m):
            for k in range(m):
                levi[:, j, k] = _levi_log_xi_analytic(f, x, vecs[:, j], vecs[:, k])
    else:
        q = np.empty((n, m))
        for j in range(m):
            q[:, j] = _levi_quadratic(f, x, vecs[:, j])
        levi = np.zeros((n, m, m), dtype=complex)
        for j in range(m):
            levi[:, j, j] = q[:, j]
            for k in range(j + 1, m):
                q1 = _levi_quadratic(f, x, vecs[:, j] + vecs[:, k])
                q2 = _levi_quadratic(f, x, vecs[:, j] + 1j * vecs[:, k])
                h = 0.5 * (q1 - q[:, j] - q[:, k]) + 0.5j * (q2 - q[:, j] - q[:, k])
                levi[:, j, k] = h
                levi[:, k, j] = np.conj(h)
    g = fs_gram(x, vecs)
    return (m + 2 - d) * g - levi


def scalar_curvature(f: HomogeneousPolynomial, x, method: str = "fd",
                     frame: TangentFrame | None = None) -> np.ndarray:
    """tr_omega Ric, normalized so a hyperplane in P^{m+1} gives m(m+1)."""
    if frame is None:
        frame = tangent_frame(f, x)
    ric = ricci_matrix(f, frame, method)
    g = fs_gram(frame.base, frame.vectors)
    return np.trace(np.linalg.solve(g, ric), axis1=-2, axis2=-1).real


def mu_invariant(m: int, d: int) -> int:
    """Average scalar curvature m(m+2-d) of a smooth degree-d hypersurface of dim m."""
    return m * (m + 2 - d)
