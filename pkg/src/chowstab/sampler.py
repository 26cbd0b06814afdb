"""Seeded Monte Carlo engines on P^N, Grassmannians and hypersurfaces.

Every sampler is a pure function of a :class:`SeededStream`. Large draws are
split into fixed-size chunks, each drawn from its own child stream, so results
do not depend on how many workers evaluate the chunks.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .polynomial import HomogeneousPolynomial
from .projlin import ContractError, SingularityError, normalize

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 8192
LEADING_COEF_TOL = 1e-12
ROOT_RESIDUAL_TOL = 1e-9
SINGULAR_GRAD_TOL = 1e-10
REPEATED_ROOT_TOL = 1e-7


@dataclass(frozen=True)
class SeededStream:
    seed: int
    stream_index: int = 0
    path: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ContractError("seed must be a 64-bit unsigned integer")

    def rng(self) -> np.random.Generator:
        key = (int(self.stream_index),) + tuple(int(p) for p in self.path)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(self.seed), spawn_key=key)))

    def child(self, j: int) -> "SeededStream":
        return SeededStream(self.seed, self.stream_index, self.path + (int(j),))


def _gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


# --- estimates --------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with standard error ``sample-std / sqrt(n)``."""

    value: complex | float
    stderr: float
    n_samples: int
    seed: int = 0

    @classmethod
    def from_samples(cls, values, seed: int = 0) -> "MCEstimate":
        v = np.asarray(values)
        n = v.shape[0]
        if n == 0:
            raise ContractError("no samples")
        mean = v.mean()
        if n > 1:
            var = np.sum(np.abs(v - mean) ** 2) / (n - 1)
            se = float(np.sqrt(var / n))
        else:
            se = float("inf")
        if not np.iscomplexobj(v):
            mean = float(mean)
        return cls(mean, se, int(n), int(seed))

    @classmethod
    def exact(cls, value, n_samples: int = 1, seed: int = 0) -> "MCEstimate":
        return cls(value, 0.0, n_samples, seed)

    @property
    def _m2(self) -> float:
        n = self.n_samples
        return self.stderr ** 2 * n * (n - 1) if n > 1 else 0.0

    def merge(self, other: "MCEstimate") -> "MCEstimate":
        """Pooled estimate of the same target from two disjoint sample sets."""
        n1, n2 = self.n_samples, other.n_samples
        n = n1 + n2
        delta = other.value - self.value
        mean = self.value + delta * n2 / n
        m2 = self._m2 + other._m2 + abs(delta) ** 2 * n1 * n2 / n
        se = float(np.sqrt(m2 / ((n - 1) * n))) if n > 1 else float("inf")
        return MCEstimate(mean, se, n, self.seed)

    def scaled(self, factor: float) -> "MCEstimate":
        return MCEstimate(self.value * factor, self.stderr * abs(factor), self.n_samples, self.seed)

    def shifted(self, offset) -> "MCEstimate":
        return MCEstimate(self.value + offset, self.stderr, self.n_samples, self.seed)

    def minus(self, other: "MCEstimate") -> "MCEstimate":
        """Difference of two independent estimates (errors added in quadrature)."""
        return MCEstimate(self.value - other.value, float(np.hypot(self.stderr, other.stderr)),
                          self.n_samples + other.n_samples, self.seed)

    def plus(self, other: "MCEstimate") -> "MCEstimate":
        return MCEstimate(self.value + other.value, float(np.hypot(self.stderr, other.stderr)),
                          self.n_samples + other.n_samples, self.seed)

    def to_dict(self) -> dict:
        v = self.value
        val = [v.real, v.imag] if isinstance(v, complex) else float(v)
        return {"value": val, "stderr": self.stderr, "n_samples": self.n_samples, "seed": self.seed}


# --- samplers on P^N and Grassmannians --------------------------------------

def sample_pn(stream: SeededStream, N: int, n: int | None = None) -> np.ndarray:
    """FS-uniform points of P^N as unit vectors, shape ``(n, N+1)``.

    With ``n=None`` a single point of shape ``(N+1,)`` is returned.
    """
    if N < 1:
        raise ContractError("P^N needs N >= 1")
    rng = stream.rng()
    z = _gaussian(rng, (1 if n is None else n, N + 1))
    z = normalize(z)
    return z[0] if n is None else z


def sample_grassmannian(stream: SeededStream, k: int, N: int, n: int | None = None) -> np.ndarray:
    """Haar-uniform k-planes in C^{N+1} as orthonormal-row matrices ``(n, k, N+1)``."""
    if not 1 <= k <= N:
        raise ContractError(f"need 1 <= k <= N for a proper k-plane in C^{N + 1}, got k={k}")
    rng = stream.rng()
    g = _gaussian(rng, (1 if n is None else n, N + 1, k))
    q, r = np.linalg.qr(g)
    # Fix the phase of each column so the map Gaussian -> frame is canonical.
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[..., None, :]
    w = np.swapaxes(q, -1, -2)
    return w[0] if n is None else w


# --- hypersurfaces ------------------------------------------------------------

@dataclass(frozen=True)
class WeightedSampleBatch:
    """Sample points with nonnegative weights.

    ``groups[i]`` labels the independent draw (e.g. the random line) that
    produced point ``i``; points within a group are correlated.
    """

    points: np.ndarray
    weights: np.ndarray
    groups: np.ndarray = field(default=None)
    seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != w.shape[0]:
            raise ContractError("point and weight counts differ")
        if np.any(w < 0):
            raise ContractError("negative weight")
        g = np.arange(pts.shape[0]) if self.groups is None else np.asarray(self.groups)
        for name, a in (("points", pts), ("weights", w), ("groups", g)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def n_groups(self) -> int:
        return int(self.groups.max()) + 1 if len(self) else 0

    def group_sums(self, values: np.ndarray) -> np.ndarray:
        """Weighted per-group sums of a per-point quantity (leading axis)."""
        v = np.asarray(values)
        wv = v * self.weights.reshape((-1,) + (1,) * (v.ndim - 1))
        out = np.zeros((self.n_groups,) + v.shape[1:], dtype=np.result_type(wv, float))
        np.add.at(out, self.groups, wv)
        return out

    def integrate(self, values) -> MCEstimate:
        """Estimate of the integral of ``values`` against the batch measure."""
        per = self.group_sums(values) * self.n_groups
        return MCEstimate.from_samples(per, self.seed)

    def mean(self, values) -> MCEstimate:
        """Estimate of the average of ``values`` against the normalized measure."""
        return self.integrate(values).scaled(1.0 / self.mass)

    def concat(self, other: "WeightedSampleBatch") -> "WeightedSampleBatch":
        # Keep the batch mass: weights are rescaled by the group-count ratio.
        n1, n2 = self.n_groups, other.n_groups
        w1 = self.weights * n1 / (n1 + n2)
        w2 = other.weights * n2 / (n1 + n2)
        return WeightedSampleBatch(np.concatenate([self.points, other.points]),
                                   np.concatenate([w1, w2]),
                                   np.concatenate([self.groups, other.groups + n1]),
                                   self.seed)

    def dumps(self) -> str:
        """One record per point: group, weight, then re/im coordinate pairs."""
        lines = ["# group weight re(z0) im(z0) ..."]
        for g, w, p in zip(self.groups, self.weights, self.points):
            coords = " ".join(f"{c.real:.17g} {c.imag:.17g}" for c in p)
            lines.append(f"{int(g)} {w:.17g} {coords}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, seed: int = 0) -> "WeightedSampleBatch":
        groups, weights, pts = [], [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                vals = [float(v) for v in parts]
            except ValueError as exc:
                raise ContractError(f"line {lineno}: {exc}") from None
            if len(vals) < 4 or len(vals) % 2:
                raise ContractError(f"line {lineno}: malformed point record")
            groups.append(int(vals[0]))
            weights.append(vals[1])
            c = np.array(vals[2:])
            pts.append(c[0::2] + 1j * c[1::2])
        return cls(np.array(pts), np.array(weights), np.array(groups), seed)


def _line_roots(f: HomogeneousPolynomial, p: np.ndarray, q: np.ndarray):
    """Roots of s -> f(p + s q) for a batch of lines; returns (roots, ok mask)."""
    d = f.degree
    coef = f.restrict_to_lines(p, q)                    # (L, d+1), low -> high
    lead = coef[:, d]
    ok = np.abs(lead) >= LEADING_COEF_TOL * np.linalg.norm(coef, axis=1)
    if d == 1:
        roots = (-coef[:, 0] / np.where(ok, lead, 1.0))[:, None]
        return roots, ok
    monic = coef[:, :d] / np.where(ok, lead, 1.0)[:, None]
    comp = np.zeros((coef.shape[0], d, d), dtype=complex)
    comp[:, 1:, :-1] = np.eye(d - 1)
    comp[:, :, -1] = -monic
    return np.linalg.eigvals(comp), ok


def _polish(f: HomogeneousPolynomial, x: np.ndarray, iters: int = 3) -> np.ndarray:
    """Newton steps toward {f = 0} along conj(grad f), on unit representatives."""
    for _ in range(iters):
        g = f.gradient(x)
        gg = np.sum(np.abs(g) ** 2, axis=-1)
        step = f(x) / np.where(gg > 0, gg, 1.0)
        x = normalize(x - step[..., None] * np.conj(g))
    return x


def relative_residual(f: HomogeneousPolynomial, x: np.ndarray) -> np.ndarray:
    return np.abs(f(x)) / (f.coef_norm() * np.linalg.norm(x, axis=-1) ** f.degree)


def _hypersurface_chunk(stream: SeededStream, f: HomogeneousPolynomial, n_lines: int):
    N = f.n_vars - 1
    d = f.degree
    rng = stream.rng()
    pts = np.empty((n_lines, d, N + 1), dtype=complex)
    filled = 0
    attempts = 0
    while filled < n_lines:
        attempts += 1
        if attempts > 50:
            raise SingularityError("could not draw enough admissible lines")
        want = n_lines - filled
        g = _gaussian(rng, (want, N + 1, 2))
        q_, r_ = np.linalg.qr(g)
        dg = np.diagonal(r_, axis1=-2, axis2=-1)
        q_ = q_ * (dg / np.abs(dg))[..., None, :]
        p, q = q_[..., 0], q_[..., 1]
        roots, ok = _line_roots(f, p, q)
        if not np.all(ok):
            log.debug("rejected %d lines with vanishing leading coefficient", int((~ok).sum()))
        p, q, roots = p[ok], q[ok], roots[ok]
        x = p[:, None, :] + roots[..., None] * q[:, None, :]
        x = _polish(f, normalize(x))
        res = relative_residual(f, x)
        bad = res > ROOT_RESIDUAL_TOL
        if np.any(bad):
            i = int(np.argwhere(bad)[0][0])
            raise SingularityError(
                f"root solver did not converge on line p={p[i].tolist()}, q={q[i].tolist()} "
                f"(residual {res[i].max():.3g})")
        if d > 1:
            # a smooth X meets almost no line tangentially; repeated roots on a
            # random line mean a non-reduced or singular hypersurface
            ov = np.abs(np.einsum("lai,lbi->lab", x, np.conj(x)))
            ov[:, np.arange(d), np.arange(d)] = 0.0
            sep = np.sqrt(np.clip(1.0 - ov.max(axis=(1, 2)) ** 2, 0.0, None))
            if np.any(sep < REPEATED_ROOT_TOL):
                i = int(np.argmin(sep))
                raise SingularityError(
                    f"repeated root on line p={p[i].tolist()}, q={q[i].tolist()}; "
                    "the hypersurface looks singular or non-reduced")
        gn = np.linalg.norm(f.gradient(x), axis=-1) / f.coef_norm()
        if np.any(gn < SINGULAR_GRAD_TOL):
            i = np.unravel_index(np.argmin(gn), gn.shape)
            raise SingularityError(f"near-singular point of the hypersurface at {x[i].tolist()}")
        take = min(want, x.shape[0])
        pts[filled:filled + take] = x[:take]
        filled += take
    return pts


def volume(f: HomogeneousPolynomial) -> float:
    """FS volume of a degree-d hypersurface with int_{P^n} omega^n = 1."""
    return float(f.degree)


def sample_hypersurface(stream: SeededStream, f: HomogeneousPolynomial, n_lines: int,
                        chunk: int = DEFAULT_CHUNK, workers: int = 1) -> WeightedSampleBatch:
    """Crofton sampling of X = {f = 0}: intersect with Haar-random projective lines.

    Each line meets X in d points; every point gets weight V/(d * n_lines) so the
    batch mass is V = d, and each point is FS-volume distributed on X.
    """
    if f.n_vars < 3:
        raise ContractError("hypersurface sampling needs at least P^2")
    d = f.degree
    sizes = _chunk_sizes(n_lines, chunk)
    jobs = [(stream.child(i), s) for i, s in enumerate(sizes)]
    parts = _map(lambda job: _hypersurface_chunk(job[0], f, job[1]), jobs, workers)
    pts = np.concatenate(parts, axis=0)
    groups = np.repeat(np.arange(n_lines), d)
    weights = np.full(n_lines * d, volume(f) / (d * n_lines))
    return WeightedSampleBatch(pts.reshape(-1, f.n_vars), weights, groups, stream.seed)


def sample_pn_batch(stream: SeededStream, N: int, n: int, chunk: int = DEFAULT_CHUNK,
                    workers: int = 1) -> WeightedSampleBatch:
    """Chunked FS-uniform batch on P^N with unit total mass."""
    sizes = _chunk_sizes(n, chunk)
    jobs = [(stream.child(i), s) for i, s in enumerate(sizes)]
    parts = _map(lambda job: sample_pn(job[0], N, job[1]), jobs, workers)
    pts = np.concatenate(parts, axis=0)
    return WeightedSampleBatch(pts, np.full(n, 1.0 / n), None, stream.seed)


def sample_grassmannian_batch(stream: SeededStream, k: int, N: int, n: int,
                              chunk: int = DEFAULT_CHUNK, workers: int = 1) -> np.ndarray:
    sizes = _chunk_sizes(n, chunk)
    jobs = [(stream.child(i), s) for i, s in enumerate(sizes)]
    parts = _map(lambda job: sample_grassmannian(job[0], k, N, job[1]), jobs, workers)
    return np.concatenate(parts, axis=0)


def _chunk_sizes(n: int, chunk: int) -> list[int]:
    if n < 1:
        raise ContractError("sample count must be positive")
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


# --- generic estimation ------------------------------------------------------

def estimate(integrand: Callable, sampler: Callable, n: int, stream: SeededStream,
             chunk: int = DEFAULT_CHUNK, workers: int = 1) -> MCEstimate:
    """Monte Carlo mean of ``integrand`` over draws of ``sampler``.

    ``sampler(stream, size)`` returns either an array of samples (leading axis
    indexes draws) or a :class:`WeightedSampleBatch`; ``integrand`` maps that to
    per-sample values. Chunks are merged in order, so the result is identical
    for any ``workers``.
    """
    if n < 2:
        raise ContractError("estimate needs n >= 2")
    sizes = _chunk_sizes(n, chunk)

    def run(job):
        sub, size = job
        draws = sampler(sub, size)
        vals = np.asarray(integrand(draws))
        if isinstance(draws, WeightedSampleBatch):
            per = draws.group_sums(vals) * draws.n_groups / draws.mass
            pts = draws.points
        else:
            per, pts = vals, draws
        finite = np.isfinite(per)
        if not np.all(finite):
            i = int(np.argwhere(~finite)[0][0])
            raise FloatingPointError(f"integrand is not finite at sample {np.asarray(pts[i]).tolist()}")
        return per

    parts = _map(run, [(stream.child(i), s) for i, s in enumerate(sizes)], workers)
    ests = [MCEstimate.from_samples(p, stream.seed) for p in parts]
    out = ests[0]
    for e in ests[1:]:
        out = out.merge(e)
    return out
