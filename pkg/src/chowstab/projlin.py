"""Projective and group-geometry primitives on P^N.

Points of P^N are homogeneous coordinate vectors; all batch functions accept
arrays of shape ``(..., N+1)`` and broadcast over the leading axes. The
Fubini-Study form is normalized as ``omega = (i/2pi) ddbar log|z|^2`` so that
``int_{P^n} omega^n = 1``; numerically ``omega(x)(A, B)`` is the Levi form of
``log|z|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

HERMITIAN_TOL = 1e-12
DET_TOL = 1e-10


class ContractError(ValueError):
    """An input violates the documented preconditions of an operation."""


class SingularityError(ArithmeticError):
    """A numerical singularity (degenerate matrix, singular point) was hit."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def coords_of(x) -> np.ndarray:
    """Homogeneous coordinates of a point or batch as a complex array."""
    if isinstance(x, ProjectivePoint):
        return x.coords
    return np.asarray(x, dtype=complex)


def normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def hdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hermitian product ``b* a`` (linear in ``a``), batched on the last axis."""
    return np.sum(a * np.conj(b), axis=-1)


@dataclass(frozen=True)
class ProjectivePoint:
    """A point of P^N, stored unit-normalized."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(c)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise ContractError("projective point needs a nonzero finite coordinate vector")
        object.__setattr__(self, "coords", _freeze(c / nrm))

    @property
    def dim(self) -> int:
        return self.coords.shape[0] - 1


@dataclass(frozen=True)
class TangentVector:
    """An element of T_x P^N, represented in x-perp."""

    base: ProjectivePoint
    direction: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=complex).reshape(-1)
        x = self.base.coords
        if d.shape != x.shape:
            raise ContractError("tangent direction has the wrong length")
        scale = max(1.0, float(np.linalg.norm(d)))
        if abs(np.vdot(x, d)) > HERMITIAN_TOL * scale:
            raise ContractError("tangent direction is not orthogonal to its base point")
        object.__setattr__(self, "direction", _freeze(d))

    @classmethod
    def project(cls, base: ProjectivePoint, v) -> "TangentVector":
        """Orthogonal projection of an arbitrary vector onto x-perp."""
        x = base.coords
        v = np.asarray(v, dtype=complex)
        return cls(base, v - np.vdot(x, v) * x)


@dataclass(frozen=True)
class GeodesicDirection:
    """Traceless Hermitian matrix generating the geodesic t -> exp(tc) sigma0."""

    matrix: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.matrix, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ContractError("direction must be a square matrix")
        scale = max(1.0, float(np.linalg.norm(c)))
        if np.linalg.norm(c - c.conj().T) > HERMITIAN_TOL * scale:
            raise ContractError("direction is not Hermitian")
        if abs(np.trace(c)) > HERMITIAN_TOL * scale:
            raise ContractError("direction is not traceless")
        object.__setattr__(self, "matrix", _freeze(c))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def diagonal(cls, entries) -> "GeodesicDirection":
        return cls(np.diag(np.asarray(entries, dtype=complex)))

    @classmethod
    def random(cls, size: int, rng: np.random.Generator) -> "GeodesicDirection":
        """Random traceless Hermitian direction with unit Frobenius norm."""
        g = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        h = 0.5 * (g + g.conj().T)
        h -= np.trace(h) / size * np.eye(size)
        h = 0.5 * (h + h.conj().T)
        return cls(h / np.linalg.norm(h))


@dataclass(frozen=True)
class GroupElement:
    """Invertible matrix acting on C^{N+1}; ``det_normalized`` marks SL elements."""

    matrix: np.ndarray
    det_normalized: bool = field(default=False)

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ContractError("group element must be a square matrix")
        if not np.all(np.isfinite(s)):
            raise ContractError("group element has non-finite entries")
        cond = np.linalg.cond(s)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularityError(f"group element is singular (cond={cond:.3g})")
        if self.det_normalized and abs(np.linalg.det(s) - 1.0) > DET_TOL:
            raise ContractError("group element flagged det-normalized but det != 1")
        object.__setattr__(self, "matrix", _freeze(s))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, size: int) -> "GroupElement":
        return cls(np.eye(size), det_normalized=True)

    @classmethod
    def sl(cls, matrix) -> "GroupElement":
        """Rescale ``matrix`` by a scalar so that its determinant is 1."""
        s = np.asarray(matrix, dtype=complex)
        det = np.linalg.det(s)
        if det == 0:
            raise SingularityError("cannot normalize a singular matrix")
        s = s / det ** (1.0 / s.shape[0])
        return cls(s, det_normalized=True)

    def inverse(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.matrix), self.det_normalized)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ other.matrix,
                            self.det_normalized and other.det_normalized)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        s = self.matrix
        return bool(np.linalg.norm(s.conj().T @ s - np.eye(self.size)) <= tol)


def as_matrix(sigma) -> np.ndarray:
    if sigma is None:
        return None
    if isinstance(sigma, GroupElement):
        return sigma.matrix
    return np.asarray(sigma, dtype=complex)


def act(sigma, x: np.ndarray) -> np.ndarray:
    """Apply a matrix to a batch of column vectors stored along the last axis."""
    s = as_matrix(sigma)
    if s is None:
        return x
    return x @ s.T


# --- Fubini-Study forms -----------------------------------------------------

def fs_form(x, a, b) -> np.ndarray:
    """Fubini-Study form omega(x)(A, B-bar).

    ``(|x|^2 (B* A) - (x* A)(B* x)) / |x|^4``. The x-components of A and B drop
    out, so any representative of the tangent vectors may be passed.
    """
    x, a, b = coords_of(x), _dir(a), _dir(b)
    xx = hdot(x, x).real
    return (xx * hdot(a, b) - hdot(a, x) * hdot(x, b)) / xx ** 2


def _dir(v):
    if isinstance(v, TangentVector):
        return v.direction
    return np.asarray(v, dtype=complex)


def fs_form_checked(x: ProjectivePoint, a: TangentVector, b: TangentVector) -> complex:
    if not (np.allclose(a.base.coords, x.coords, atol=1e-14)
            and np.allclose(b.base.coords, x.coords, atol=1e-14)):
        raise ContractError("tangent vectors are not based at x")
    return complex(fs_form(x, a, b))


def pullback_fs_form(sigma, x, a, b) -> np.ndarray:
    """(sigma^* omega)(x)(A, B-bar) = omega(sigma x)(sigma A, sigma B-bar)."""
    x, a, b = coords_of(x), _dir(a), _dir(b)
    return fs_form(act(sigma, x), act(sigma, a), act(sigma, b))


def fs_gram(x, vectors, sigma=None) -> np.ndarray:
    """Gram matrix ``G[..., j, k] = (sigma^* omega)(x)(v_j, v_k-bar)``.

    ``vectors`` has shape ``(..., k, N+1)``.
    """
    x = coords_of(x)
    if sigma is not None:
        x, vectors = act(sigma, x), act(sigma, vectors)
    xx = hdot(x, x).real[..., None, None]
    vx = vectors @ np.conj(x)[..., :, None]          # (..., k, 1): x* v_j
    return (xx * (vectors @ np.conj(np.swapaxes(vectors, -1, -2)))
            - vx * np.conj(np.swapaxes(vx, -1, -2))) / xx ** 2


# --- potentials -------------------------------------------------------------

def phi_sigma(sigma, x) -> np.ndarray:
    """Kahler potential log(|sigma x|^2 / |x|^2) of sigma^* omega relative to omega."""
    x = coords_of(x)
    sx = act(sigma, x)
    return np.log(hdot(sx, sx).real / hdot(x, x).real)


def phi_dot(sigma, c, x) -> np.ndarray:
    """Derivative of phi along exp(tc) sigma at t=0: y*(c*+c)y / y*y, y = sigma x."""
    x = coords_of(x)
    cm = c.matrix if isinstance(c, GeodesicDirection) else np.asarray(c, dtype=complex)
    u = cm + cm.conj().T
    y = act(sigma, x)
    return (hdot(act(u, y), y) / hdot(y, y)).real


def expm_hermitian(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(w)) @ v.conj().T


def exp_path(c, t: float, sigma0=None) -> GroupElement:
    """exp(tc) sigma0, with exp computed by Hermitian eigendecomposition."""
    cm = c.matrix if isinstance(c, GeodesicDirection) else np.asarray(c, dtype=complex)
    e = expm_hermitian(t * 0.5 * (cm + cm.conj().T))
    if sigma0 is None:
        return GroupElement(e, det_normalized=True)
    s0 = sigma0 if isinstance(sigma0, GroupElement) else GroupElement(sigma0)
    return GroupElement(e @ s0.matrix, s0.det_normalized)


def pluecker(w) -> np.ndarray:
    """All k x k minors of a k x (N+1) matrix (or batch), lexicographic column order."""
    w = np.asarray(w, dtype=complex)
    k, n1 = w.shape[-2:]
    if k > n1:
        raise ContractError("more rows than columns")
    sv = np.linalg.svd(w, compute_uv=False)
    if np.any(sv[..., -1] <= 1e-12 * np.maximum(sv[..., 0], 1e-300)):
        raise ContractError("rank-deficient matrix has no Pluecker coordinates")
    cols = list(combinations(range(n1), k))
    subs = np.stack([w[..., :, list(c)] for c in cols], axis=-3)
    return np.linalg.det(subs)


def compound(sigma, k: int) -> np.ndarray:
    """k-th compound matrix: the action of sigma on wedge^k, in lexicographic order."""
    s = as_matrix(sigma)
    idx = list(combinations(range(s.shape[0]), k))
    out = np.empty((len(idx), len(idx)), dtype=complex)
    for i, rows in enumerate(idx):
        for j, cols in enumerate(idx):
            out[i, j] = np.linalg.det(s[np.ix_(rows, cols)])
    return out


def random_unitary(size: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR of a complex Gaussian matrix with phase correction."""
    z = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
