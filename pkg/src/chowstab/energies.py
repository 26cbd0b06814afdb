"""Energy functionals I, J, F0, Mabuchi on hypersurfaces, their geodesic
derivatives, the balanced residual, and the balancing iteration.

All functionals are estimated on a :class:`~chowstab.varieties.FrozenBatch`
of FS-distributed points of X; ``mean`` below is ``(1/vol X) int_X . omega^n``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hypergeo import mixed_form_ratios, mixed_wedge_ratios
from .projlin import (ContractError, GeodesicDirection, GroupElement, SingularityError, act,
                      as_matrix, exp_path, fs_form, hdot, phi_dot, phi_sigma)
from .sampler import MCEstimate, SeededStream
from .varieties import FrozenBatch

log = logging.getLogger(__name__)

ENERGIES = ("F0", "J", "I", "mabuchi")


@dataclass(frozen=True)
class EnergyReport:
    functional_name: str
    value: MCEstimate
    sigma: GroupElement
    variety: dict
    normalization: dict

    def to_dict(self) -> dict:
        s = self.sigma.matrix
        return {"functional": self.functional_name, **self.value.to_dict(),
                "sigma": [[[v.real, v.imag] for v in row] for row in s],
                "variety": self.variety, "normalization": self.normalization}


@dataclass(frozen=True)
class EnergyProfile:
    direction: GeodesicDirection
    base: GroupElement
    t_grid: tuple
    values: tuple
    functional_name: str = "F0"

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise ContractError("t_grid must be strictly increasing")

    def to_table(self) -> str:
        rows = ["t,value,stderr,seed"]
        for t, v in zip(self.t_grid, self.values):
            rows.append(f"{t:.17g},{float(np.real(v.value)):.17g},{v.stderr:.17g},{v.seed}")
        return "\n".join(rows) + "\n"

    def second_differences(self) -> list[tuple[float, float]]:
        """(second difference, propagated stderr) at interior points of a uniform grid."""
        t = np.asarray(self.t_grid)
        if len(t) < 3:
            return []
        h = np.diff(t)
        if not np.allclose(h, h[0], rtol=1e-9):
            raise ContractError("second differences need a uniform grid")
        out = []
        for i in range(1, len(t) - 1):
            a, b, c = self.values[i - 1], self.values[i], self.values[i + 1]
            val = (float(np.real(a.value)) - 2 * float(np.real(b.value)) + float(np.real(c.value))) / h[0] ** 2
            se = np.sqrt(a.stderr ** 2 + 4 * b.stderr ** 2 + c.stderr ** 2) / h[0] ** 2
            out.append((val, float(se)))
        return out


def _sigma(sigma, size: int) -> GroupElement:
    if sigma is None:
        return GroupElement.identity(size)
    return sigma if isinstance(sigma, GroupElement) else GroupElement(sigma)


def _normalization(batch: FrozenBatch) -> dict:
    v = batch.variety
    return {"V": v.volume, "mu": v.mu, "D": 1.0, "n": v.dim, "omega": "int_{P^k} omega^k = 1"}


def _report(name, est, sigma, batch) -> EnergyReport:
    return EnergyReport(name, est, sigma, batch.variety.descriptor(), _normalization(batch))


def _is_identity(s: GroupElement) -> bool:
    return bool(np.array_equal(s.matrix, np.eye(s.size)))


def _zero(batch: FrozenBatch) -> MCEstimate:
    return MCEstimate.exact(0.0, batch.batch.n_groups, batch.seed)


# --- pointwise integrands -------------------------------------------------

def _ratios(batch: FrozenBatch, s: GroupElement):
    gs = batch.gram_sigma(s)
    return gs, mixed_wedge_ratios(batch.gram, gs)


def _dphi_matrix(batch: FrozenBatch, s: GroupElement) -> np.ndarray:
    """Hermitian matrix of d phi wedge dbar phi on the frame."""
    x, vecs = batch.x, batch.vectors
    sx = act(s, x)
    sv = act(s, vecs)
    dphi = (np.einsum("nkj,nj->nk", sv, np.conj(sx)) / hdot(sx, sx)[:, None]
            - np.einsum("nkj,nj->nk", vecs, np.conj(x)) / hdot(x, x)[:, None])
    return dphi[:, :, None] * np.conj(dphi[:, None, :])


def f0_density(batch: FrozenBatch, s: GroupElement) -> np.ndarray:
    _, r = _ratios(batch, s)
    m = batch.variety.dim
    return -phi_sigma(s, batch.x) * r.sum(axis=1) / (m + 1)


def j_density(batch: FrozenBatch, s: GroupElement) -> np.ndarray:
    gs = batch.gram_sigma(s)
    m = batch.variety.dim
    q = mixed_form_ratios(batch.gram, gs, _dphi_matrix(batch, s))
    w = np.arange(1, m + 1, dtype=float)
    return q @ w / (m + 1)


def i_density(batch: FrozenBatch, s: GroupElement) -> np.ndarray:
    _, r = _ratios(batch, s)
    return phi_sigma(s, batch.x) * (1.0 - r[:, 0])


def mabuchi_density(batch: FrozenBatch, s: GroupElement) -> np.ndarray:
    gs, r = _ratios(batch, s)
    v = batch.variety
    m = v.dim
    r0 = r[:, 0]
    entropy = r0 * np.log(r0)
    q = mixed_form_ratios(batch.gram, gs, batch.ricci)
    phi = phi_sigma(s, batch.x)
    return entropy - phi * (q.sum(axis=1) - v.mu / (m + 1) * r.sum(axis=1))


_DENSITIES = {"F0": f0_density, "J": j_density, "I": i_density, "mabuchi": mabuchi_density}


def energy(name: str, batch: FrozenBatch, sigma=None) -> EnergyReport:
    if name not in _DENSITIES:
        raise ContractError(f"unknown functional {name!r}; expected one of {sorted(_DENSITIES)}")
    s = _sigma(sigma, batch.variety.ambient_dim + 1)
    if _is_identity(s):
        return _report(name, _zero(batch), s, batch)
    return _report(name, batch.mean(_DENSITIES[name](batch, s)), s, batch)


def f0_energy(batch: FrozenBatch, sigma=None) -> EnergyReport:
    """F0(phi_sigma) = -(1/V)(1/(n+1)) int phi sum_i omega^i omega_phi^{n-i}."""
    return energy("F0", batch, sigma)


def j_energy(batch: FrozenBatch, sigma=None) -> EnergyReport:
    return energy("J", batch, sigma)


def i_energy(batch: FrozenBatch, sigma=None) -> EnergyReport:
    return energy("I", batch, sigma)


def mabuchi_energy(batch: FrozenBatch, sigma=None) -> EnergyReport:
    """Direct (path-free) Mabuchi energy with Ricci from the xi identity."""
    return energy("mabuchi", batch, sigma)


# --- geodesic derivatives --------------------------------------------------

def _direction(c, size: int) -> np.ndarray:
    cm = c.matrix if isinstance(c, GeodesicDirection) else np.asarray(c, dtype=complex)
    if cm.shape != (size, size):
        raise ContractError("direction has the wrong size")
    return cm


def f0_derivative(batch: FrozenBatch, sigma, c) -> MCEstimate:
    """d/dt F0 along exp(tc) sigma at t = 0, i.e. -(1/V) int phi_dot omega_phi^n."""
    size = batch.variety.ambient_dim + 1
    s = _sigma(sigma, size)
    cm = _direction(c, size)
    if not np.any(cm):
        return _zero(batch)
    _, r = _ratios(batch, s)
    return batch.mean(-phi_dot(s, cm, batch.x) * r[:, 0])


def f0_second_derivative(batch: FrozenBatch, sigma, c) -> MCEstimate:
    """d^2/dt^2 F0 along exp(tc) sigma at t = 0 (nonpositive in expectation).

    The integrand of -V F'' is omega_sigma(u y, u y) - n d(phi_dot) wedge
    dbar(phi_dot) wedge omega_sigma^{n-1} over omega_sigma^n, weighted by
    omega_sigma^n / omega^n, with u = c + c* and y = sigma x.
    """
    size = batch.variety.ambient_dim + 1
    s = _sigma(sigma, size)
    cm = _direction(c, size)
    if not np.any(cm):
        return _zero(batch)
    u = cm + cm.conj().T
    y = act(s, batch.x)
    sv = act(s, batch.vectors)
    uy = act(u, y)
    first = fs_form(y, uy, uy).real
    dpd = fs_form(y[:, None, :], sv, uy[:, None, :])          # d phi_dot on the frame
    gs = batch.gram_sigma(s)
    sol = np.linalg.solve(gs, dpd[..., None])[..., 0]
    second = np.einsum("nk,nk->n", np.conj(dpd), sol).real
    r0 = (np.linalg.det(gs) / np.linalg.det(batch.gram)).real
    return batch.mean(-(first - second) * r0)


# --- balance ---------------------------------------------------------------

@dataclass(frozen=True)
class BalanceState:
    sigma: GroupElement
    residual: np.ndarray
    residual_norm: float
    iteration: int
    converged: bool = False
    stderr: np.ndarray | None = None
    trace: tuple = field(default=())

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "residual_norm": self.residual_norm,
                "converged": self.converged, "trace": list(self.trace),
                "sigma": [[[v.real, v.imag] for v in row] for row in self.sigma.matrix]}


def moment_matrix(batch: FrozenBatch, sigma=None):
    """Normalized second moment of sigma(X) and its entrywise stderr."""
    size = batch.variety.ambient_dim + 1
    s = _sigma(sigma, size)
    y = act(s, batch.x)
    proj = y[:, :, None] * np.conj(y[:, None, :]) / hdot(y, y).real[:, None, None]
    if _is_identity(s):
        r0 = np.ones(len(batch.x))
    else:
        gs = batch.gram_sigma(s)
        r0 = (np.linalg.det(gs) / np.linalg.det(batch.gram)).real
    b = batch.batch
    num = b.group_sums(proj * r0[:, None, None])
    den = b.group_sums(r0)
    mom = num.sum(axis=0) / den.sum()
    # ratio-estimator standard error, per entry
    dev = num - den[:, None, None] * mom
    k = num.shape[0]
    se = np.sqrt(np.sum(np.abs(dev) ** 2, axis=0) / (k - 1) / k) / (den.mean()) if k > 1 else None
    return mom, se


def _opnorm(h: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (h + h.conj().T)))))


def balanced_residual(batch: FrozenBatch, sigma=None) -> BalanceState:
    """Moment matrix of sigma(X) minus I/(N+1)."""
    size = batch.variety.ambient_dim + 1
    s = _sigma(sigma, size)
    mom, se = moment_matrix(batch, s)
    res = mom - np.eye(size) / size
    res = 0.5 * (res + res.conj().T)
    return BalanceState(s, res, _opnorm(res), 0, stderr=se)


def _inv_sqrt(q: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (q + q.conj().T))
    if w.min() <= 1e-12 * w.max():
        raise SingularityError("moment matrix is numerically singular")
    return (v / np.sqrt(w)) @ v.conj().T


def balance_iterate(batch: FrozenBatch, sigma_init=None, max_iters: int = 200,
                    tol: float = 1e-8) -> BalanceState:
    """Fixed-point iteration sigma <- det-normalize(Q^{-1/2} sigma), Q = (N+1) M(sigma)."""
    size = batch.variety.ambient_dim + 1
    s = _sigma(sigma_init, size)
    trace = []
    for it in range(max_iters + 1):
        st = balanced_residual(batch, s)
        trace.append(st.residual_norm)
        log.debug("balance iteration %d residual %.3e", it, st.residual_norm)
        if st.residual_norm < tol:
            return BalanceState(s, st.residual, st.residual_norm, it, True, st.stderr, tuple(trace))
        if it == max_iters:
            break
        q = size * (st.residual + np.eye(size) / size)
        s = GroupElement.sl(_inv_sqrt(q) @ s.matrix)
    return BalanceState(s, st.residual, st.residual_norm, max_iters, False, st.stderr, tuple(trace))


# --- profiles --------------------------------------------------------------

def energy_profile(name: str, batch: FrozenBatch, c, t_grid, sigma0=None) -> EnergyProfile:
    """Energy along exp(tc) sigma0 on a frozen batch (common random numbers)."""
    size = batch.variety.ambient_dim + 1
    s0 = _sigma(sigma0, size)
    cdir = c if isinstance(c, GeodesicDirection) else GeodesicDirection(c)
    t = tuple(float(v) for v in t_grid)
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ContractError("t_grid must be strictly increasing")
    vals = tuple(energy(name, batch, exp_path(cdir, tv, s0) if tv != 0 else s0).value for tv in t)
    return EnergyProfile(cdir, s0, t, vals, name)


def fresh_batch(variety, n: int, seed: int, stream_index: int = 0, **kw) -> FrozenBatch:
    return FrozenBatch.draw(variety, n, SeededStream(seed, stream_index), **kw)


def sigma_matrix(sigma) -> np.ndarray:
    return as_matrix(sigma)
