"""Varieties that carry a Crofton/FS sampler and tangent frames, and frozen batches on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import hypergeo
from .polynomial import HomogeneousPolynomial
from .projlin import ContractError, coords_of, fs_gram, normalize
from .sampler import (DEFAULT_CHUNK, SeededStream, WeightedSampleBatch, sample_hypersurface,
                      sample_pn_batch)


class Hypersurface:
    """Smooth hypersurface {f = 0} in P^{m+1} with the restricted FS metric."""

    def __init__(self, f: HomogeneousPolynomial, name: str | None = None):
        if f.n_vars < 3:
            raise ContractError("need a hypersurface in P^N with N >= 2")
        self.f = f
        self.name = name or "hypersurface"

    @property
    def ambient_dim(self) -> int:
        return self.f.n_vars - 1

    @property
    def dim(self) -> int:
        return self.f.n_vars - 2

    @property
    def degree(self) -> int:
        return self.f.degree

    @property
    def volume(self) -> float:
        return float(self.f.degree)

    @property
    def mu(self) -> int:
        return hypergeo.mu_invariant(self.dim, self.degree)

    def sample(self, stream: SeededStream, n: int, chunk: int = DEFAULT_CHUNK,
               workers: int = 1) -> WeightedSampleBatch:
        return sample_hypersurface(stream, self.f, n, chunk, workers)

    def frame_vectors(self, x: np.ndarray) -> np.ndarray:
        return hypergeo.tangent_frame(self.f, x).vectors

    def symmetries(self) -> list[np.ndarray] | None:
        """Finite unitary symmetry group of f, if it contains the Fermat-type group."""
        return invariant_group(self.f)

    def descriptor(self) -> dict:
        return {"kind": "hypersurface", "name": self.name, "n_vars": self.f.n_vars,
                "degree": self.degree,
                "terms": [[list(e), [c.real, c.imag]] for e, c in sorted(self.f.terms.items())]}


class ProjectiveSpace:
    """P^N itself with its FS metric (volume 1)."""

    def __init__(self, N: int):
        if N < 1:
            raise ContractError("P^N needs N >= 1")
        self.N = N
        self.name = f"P{N}"

    @property
    def ambient_dim(self) -> int:
        return self.N

    @property
    def dim(self) -> int:
        return self.N

    @property
    def degree(self) -> int:
        return 1

    @property
    def volume(self) -> float:
        return 1.0

    @property
    def mu(self) -> int:
        return self.N * (self.N + 1)

    def sample(self, stream: SeededStream, n: int, chunk: int = DEFAULT_CHUNK,
               workers: int = 1) -> WeightedSampleBatch:
        return sample_pn_batch(stream, self.N, n, chunk, workers)

    def frame_vectors(self, x: np.ndarray) -> np.ndarray:
        x = normalize(np.atleast_2d(coords_of(x)))
        n1 = x.shape[-1]
        stacked = np.concatenate([x[:, :, None], np.broadcast_to(np.eye(n1), (x.shape[0], n1, n1))], axis=2)
        q, _ = np.linalg.qr(stacked)
        return np.swapaxes(q[:, :, 1:], 1, 2)

    def symmetries(self) -> list[np.ndarray]:
        return coordinate_group(self.N + 1, 2)

    def descriptor(self) -> dict:
        return {"kind": "projective_space", "name": self.name, "N": self.N}


def coordinate_group(size: int, order: int) -> list[np.ndarray]:
    """Cyclic coordinate shifts times order-th roots of unity on all but the last coordinate.

    Averaging z z* over this group gives a multiple of the identity.
    """
    shift = np.roll(np.eye(size), 1, axis=0)
    zeta = np.exp(2j * np.pi / order)
    out = []
    for k in range(size):
        perm = np.linalg.matrix_power(shift, k)
        for powers in np.ndindex(*(order,) * (size - 1)):
            phase = np.diag(np.append(zeta ** np.array(powers), 1.0))
            out.append(phase @ perm)
    return out


def invariant_group(f: HomogeneousPolynomial) -> list[np.ndarray] | None:
    """``coordinate_group(n_vars, d)`` when f is invariant under it (up to a scalar), else None."""
    if f.degree < 2:
        return None
    group = coordinate_group(f.n_vars, f.degree)
    shift = np.roll(np.eye(f.n_vars), 1, axis=0)
    zeta = np.exp(2j * np.pi / f.degree)
    gens = [shift] + [np.diag([zeta if j == i else 1.0 for j in range(f.n_vars)])
                      for i in range(f.n_vars - 1)]
    ref = np.array([f.terms[k] for k in sorted(f.terms)])
    for g in gens:
        h = f.substitute(g)
        if sorted(h.terms) != sorted(f.terms):
            return None
        hv = np.array([h.terms[k] for k in sorted(h.terms)])
        ratio = hv / ref
        if not np.allclose(ratio, ratio[0], rtol=1e-12, atol=0):
            return None
    return group


def symmetrize(batch: WeightedSampleBatch, group: list[np.ndarray]) -> WeightedSampleBatch:
    """Orbit of every point under a finite unitary group, sharing the original groups."""
    k = len(group)
    pts = np.concatenate([batch.points @ g.T for g in group])
    w = np.tile(batch.weights, k) / k
    groups = np.tile(batch.groups, k)
    return WeightedSampleBatch(pts, w, groups, batch.seed)


@dataclass(eq=False)
class FrozenBatch:
    """A sample batch on a variety with tangent frames and metric data cached.

    Reusing one frozen batch across sigma gives common random numbers for
    profiles and finite-difference checks.
    """

    variety: object
    batch: WeightedSampleBatch
    ricci_method: str = "fd"
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def draw(cls, variety, n: int, stream: SeededStream, **kw) -> "FrozenBatch":
        return cls(variety, variety.sample(stream, n, **{k: v for k, v in kw.items()
                                                         if k in ("chunk", "workers")}),
                   kw.get("ricci_method", "fd"))

    def symmetrized(self) -> "FrozenBatch":
        """The batch averaged over the variety's symmetry group (exactly balanced)."""
        group = self.variety.symmetries()
        if group is None:
            raise ContractError(f"{self.variety.name} has no built-in symmetry group")
        return FrozenBatch(self.variety, symmetrize(self.batch, group), self.ricci_method)

    @property
    def x(self) -> np.ndarray:
        return self.batch.points

    @cached_property
    def vectors(self) -> np.ndarray:
        return self.variety.frame_vectors(self.x)

    @cached_property
    def gram(self) -> np.ndarray:
        return fs_gram(self.x, self.vectors)

    @cached_property
    def ricci(self) -> np.ndarray:
        if not isinstance(self.variety, Hypersurface):
            return (self.variety.N + 1) * self.gram
        frame = hypergeo.TangentFrame(normalize(self.x), self.vectors, self._transversal())
        return hypergeo.ricci_matrix(self.variety.f, frame, self.ricci_method)

    def _transversal(self):
        return hypergeo.tangent_frame(self.variety.f, self.x).transversal

    def gram_sigma(self, sigma) -> np.ndarray:
        return fs_gram(self.x, self.vectors, sigma)

    @property
    def seed(self) -> int:
        return self.batch.seed

    def mean(self, values):
        return self.batch.mean(values)
