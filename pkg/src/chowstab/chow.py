"""Chow norm and #-seminorm of hypersurfaces, and the two identity verifiers.

For a hypersurface X = {f = 0} in P^{m+1} the Chow form is f itself, the
Grassmannian is P^{m+1}, D = 1 and V = vol(X) = d.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energies import f0_energy, mabuchi_energy
from .hypergeo import xi
from .polynomial import HomogeneousPolynomial
from .projlin import ContractError, GeodesicDirection, GroupElement, as_matrix, hdot
from .sampler import MCEstimate, SeededStream, sample_grassmannian_batch, sample_pn_batch
from .varieties import FrozenBatch, Hypersurface

D_HYPERSURFACE = 1.0


class DegenerateWeightError(ContractError):
    """The #-seminorm weights divide by d - 1 and are undefined for d = 1."""


@dataclass(frozen=True)
class ChowSection:
    poly: HomogeneousPolynomial

    def __post_init__(self):
        if self.poly.n_vars < 3:
            raise ContractError("Chow section of a hypersurface needs P^{m+1} with m >= 1")

    @property
    def degree(self) -> int:
        return self.poly.degree

    @property
    def m(self) -> int:
        return self.poly.n_vars - 2

    @property
    def volume(self) -> float:
        return float(self.degree)


@dataclass(frozen=True)
class NormReport:
    log_norm_sq: MCEstimate
    kind: str
    constants: dict
    components: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "log_norm_sq": self.log_norm_sq.to_dict(),
                "constants": self.constants,
                "components": {k: v.to_dict() for k, v in self.components.items()}}


def _poly(f) -> HomogeneousPolynomial:
    return f.poly if isinstance(f, ChowSection) else f


def _is_identity(sigma) -> bool:
    if sigma is None:
        return True
    s = as_matrix(sigma)
    return bool(np.array_equal(s, np.eye(s.shape[0])))


def _acted(f: HomogeneousPolynomial, sigma) -> HomogeneousPolynomial:
    return f if _is_identity(sigma) else f.transform(sigma)


def _constants(f: HomogeneousPolynomial) -> dict:
    return {"D": D_HYPERSURFACE, "m": f.n_vars - 2, "d": f.degree, "V": float(f.degree)}


def _log_ratio_samples(f: HomogeneousPolynomial, z: np.ndarray) -> np.ndarray:
    """log(|f(z)|^2 / |z|^{2d}) for the coefficient-normalized f."""
    fn = f.coef_norm()
    zz = hdot(z, z).real
    return np.log(np.abs(f(z) / fn) ** 2) - f.degree * np.log(zz)


def chow_norm(f, sigma=None, n: int = 100_000, stream: SeededStream | None = None) -> NormReport:
    """log ||sigma . f||^2 = (1/D) int_{P^{m+1}} log(|f(sigma^-1 z)|^2 / |z|^{2d}) omega^{m+1}.

    The coefficient norm is factored out of the integral, so scaling f by
    lambda shifts the result by exactly log|lambda|^2.
    """
    f = _poly(f)
    stream = stream or SeededStream(0)
    g = _acted(f, sigma)
    z = sample_pn_batch(stream, f.n_vars - 1, n).points
    est = MCEstimate.from_samples(_log_ratio_samples(g, z), stream.seed)
    est = est.shifted(np.log(g.coef_norm() ** 2))
    return NormReport(est.scaled(1.0 / D_HYPERSURFACE), "chow", _constants(f))


def chow_log_ratio(f, sigma, n: int = 100_000, stream: SeededStream | None = None) -> MCEstimate:
    """log(||sigma . f||^2 / ||f||^2) with the two integrals on shared sample points."""
    f = _poly(f)
    stream = stream or SeededStream(0)
    if _is_identity(sigma):
        return MCEstimate.exact(0.0, n, stream.seed)
    g = f.transform(sigma)
    z = sample_pn_batch(stream, f.n_vars - 1, n).points
    diff = _log_ratio_samples(g, z) - _log_ratio_samples(f, z)
    est = MCEstimate.from_samples(diff, stream.seed)
    return est.shifted(np.log(g.coef_norm() ** 2) - np.log(f.coef_norm() ** 2)).scaled(1.0 / D_HYPERSURFACE)


def sharp_weights(m: int, d: int) -> tuple[float, float]:
    """Weights of the Z-term and the ambient term in log ||f||_#^2."""
    if d < 2:
        raise DegenerateWeightError("the #-seminorm needs degree d >= 2 (weights divide by d - 1)")
    den = (m + 2) * (d - 1)
    return (m + 1) / den, (d - m - 2) / den


def _log_xi_term(g: HomogeneousPolynomial, n_lines: int, stream: SeededStream) -> MCEstimate:
    """(1/D) int_Z log xi omega^m for Z = {g = 0}, coefficient norm factored out."""
    gn = g.scale(1.0 / g.coef_norm())
    batch = Hypersurface(gn).sample(stream, n_lines)
    est = batch.integrate(np.log(xi(gn, batch.points)))
    return est.shifted(batch.mass * np.log(g.coef_norm() ** 2)).scaled(1.0 / D_HYPERSURFACE)


def sharp_seminorm(f, sigma=None, n_lines: int = 50_000, n_ambient: int = 100_000,
                   stream: SeededStream | None = None) -> NormReport:
    """log ||sigma . f||_#^2 in the hypersurface case.

    The Z-integral samples the zero set of sigma . f by random lines; the
    ambient integral is the Chow log-norm.
    """
    f = _poly(f)
    m, d = f.n_vars - 2, f.degree
    w_z, w_amb = sharp_weights(m, d)
    stream = stream or SeededStream(0)
    g = _acted(f, sigma)
    zterm = _log_xi_term(g, n_lines, stream.child(0))
    amb = chow_norm(g, None, n_ambient, stream.child(1)).log_norm_sq
    total = zterm.scaled(w_z).plus(amb.scaled(w_amb))
    return NormReport(total, "sharp", _constants(f), {"z_term": zterm, "ambient_term": amb})


def sharp_log_ratio(f, sigma, n_lines: int = 50_000, n_ambient: int = 100_000,
                    stream: SeededStream | None = None) -> MCEstimate:
    """log(||sigma . f||_#^2 / ||f||_#^2); the ambient parts share sample points."""
    f = _poly(f)
    m, d = f.n_vars - 2, f.degree
    w_z, w_amb = sharp_weights(m, d)
    stream = stream or SeededStream(0)
    if _is_identity(sigma):
        return MCEstimate.exact(0.0, n_lines + n_ambient, stream.seed)
    g = f.transform(sigma)
    z_sig = _log_xi_term(g, n_lines, stream.child(0))
    z_id = _log_xi_term(f, n_lines, stream.child(1))
    amb = chow_log_ratio(f, sigma, n_ambient, stream.child(2))
    return z_sig.minus(z_id).scaled(w_z).plus(amb.scaled(w_amb))


# --- identity verifiers -----------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    name: str
    lhs: MCEstimate
    rhs: MCEstimate
    sigmas: float = 3.0
    detail: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return float(np.real(self.lhs.value - self.rhs.value))

    @property
    def tolerance(self) -> float:
        return self.sigmas * float(np.hypot(self.lhs.stderr, self.rhs.stderr))

    @property
    def passed(self) -> bool:
        return abs(self.gap) <= self.tolerance

    @property
    def relative_precision(self) -> float:
        scale = max(abs(self.lhs.value), abs(self.rhs.value))
        return float(np.hypot(self.lhs.stderr, self.rhs.stderr) / scale) if scale > 0 else 0.0

    def to_dict(self) -> dict:
        return {"check": self.name,
                "lhs": float(np.real(self.lhs.value)), "lhs_stderr": self.lhs.stderr,
                "rhs": float(np.real(self.rhs.value)), "rhs_stderr": self.rhs.stderr,
                "gap": self.gap, "tolerance": self.tolerance, "pass": self.passed,
                "seeds": {"lhs": self.lhs.seed, "rhs": self.rhs.seed},
                "n_samples": {"lhs": self.lhs.n_samples, "rhs": self.rhs.n_samples},
                **self.detail}


def theorem5_check(f, sigma, n_lhs: int = 200_000, n_rhs: int = 400_000,
                   seed_lhs: int = 1, seed_rhs: int = 2) -> CheckReport:
    """-V (n+1) F0(phi_sigma) against log(||sigma f||^2 / ||f||^2), independent seeds."""
    f = _poly(f)
    n = f.n_vars - 2
    V = float(f.degree)
    if _is_identity(sigma):
        z = MCEstimate.exact(0.0)
        return CheckReport("theorem5", z, z)
    batch = FrozenBatch.draw(Hypersurface(f), n_lhs, SeededStream(seed_lhs))
    lhs = f0_energy(batch, sigma).value.scaled(-V * (n + 1))
    rhs = chow_log_ratio(f, sigma, n_rhs, SeededStream(seed_rhs))
    return CheckReport("theorem5", lhs, rhs)


def theorem6_check(f, sigma, n_lhs: int = 100_000, n_lines: int = 100_000,
                   n_ambient: int = 200_000, seed_lhs: int = 3, seed_rhs: int = 4,
                   ricci_method: str = "fd") -> CheckReport:
    """Mabuchi energy against D(m+2)(d-1)/(V(m+1)) log(||sigma f||_#^2 / ||f||_#^2)."""
    f = _poly(f)
    m, d = f.n_vars - 2, f.degree
    sharp_weights(m, d)
    V = float(d)
    if _is_identity(sigma):
        z = MCEstimate.exact(0.0)
        return CheckReport("theorem6", z, z)
    batch = FrozenBatch(Hypersurface(f), Hypersurface(f).sample(SeededStream(seed_lhs), n_lhs),
                        ricci_method)
    lhs = mabuchi_energy(batch, sigma).value
    const = D_HYPERSURFACE * (m + 2) * (d - 1) / (V * (m + 1))
    rhs = sharp_log_ratio(f, sigma, n_lines, n_ambient, SeededStream(seed_rhs)).scaled(const)
    return CheckReport("theorem6", lhs, rhs)


def grassmannian_balance_test(N: int, k: int, c, n: int = 100_000,
                              stream: SeededStream | None = None,
                              diagnostic: bool = False) -> MCEstimate:
    """Haar average of tr(Z*(c + c*)Z) over k-planes Z in C^{N+1}; zero for traceless c."""
    cm = c.matrix if isinstance(c, GeodesicDirection) else np.asarray(c, dtype=complex)
    if cm.shape != (N + 1, N + 1):
        raise ContractError("direction has the wrong size")
    if not diagnostic:
        GeodesicDirection(cm)
    stream = stream or SeededStream(0)
    if not np.any(cm):
        return MCEstimate.exact(0.0, n, stream.seed)
    u = cm + cm.conj().T
    w = sample_grassmannian_batch(stream, k, N, n)          # rows span the plane
    z = np.swapaxes(w, -1, -2)                              # (n, N+1, k), Z*Z = I
    vals = np.einsum("nik,ij,njk->n", np.conj(z), u, z).real
    return MCEstimate.from_samples(vals, stream.seed)
