"""Sparse homogeneous polynomials with vectorized evaluation and derivatives."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .projlin import ContractError, as_matrix


@dataclass(frozen=True, eq=False)
class HomogeneousPolynomial:
    """A degree-d form in ``n_vars`` variables, stored as exponent -> coefficient.

    ``exps`` is an integer array ``(T, n_vars)`` and ``coefs`` a complex array
    ``(T,)``; both are read-only.
    """

    exps: np.ndarray
    coefs: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.exps, dtype=np.int64)
        c = np.asarray(self.coefs, dtype=complex)
        if e.ndim != 2 or c.shape != (e.shape[0],):
            raise ContractError("exponent/coefficient arrays have mismatched shapes")
        if e.shape[0] == 0 or not np.any(c != 0):
            raise ContractError("polynomial has no nonzero coefficient")
        if np.any(e < 0):
            raise ContractError("negative exponent")
        degs = e.sum(axis=1)
        if np.any(degs != degs[0]) or degs[0] < 1:
            raise ContractError("terms do not share a common positive degree")
        if not np.all(np.isfinite(c)):
            raise ContractError("non-finite coefficient")
        e.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "exps", e)
        object.__setattr__(self, "coefs", c)

    @classmethod
    def from_terms(cls, terms: dict, n_vars: int | None = None) -> "HomogeneousPolynomial":
        acc: dict[tuple, complex] = defaultdict(complex)
        for exp, coef in terms.items():
            acc[tuple(int(v) for v in exp)] += complex(coef)
        keys = [k for k, v in acc.items() if v != 0]
        if not keys:
            raise ContractError("polynomial has no nonzero coefficient")
        if n_vars is not None and any(len(k) != n_vars for k in keys):
            raise ContractError("exponent length does not match n_vars")
        return cls(np.array(keys), np.array([acc[k] for k in keys]))

    @classmethod
    def fermat(cls, n_vars: int, degree: int) -> "HomogeneousPolynomial":
        return cls.from_terms({tuple(degree * (j == i) for j in range(n_vars)): 1.0
                               for i in range(n_vars)})

    @classmethod
    def linear(cls, coefs) -> "HomogeneousPolynomial":
        coefs = list(coefs)
        n = len(coefs)
        return cls.from_terms({tuple(int(j == i) for j in range(n)): c
                               for i, c in enumerate(coefs) if c != 0}, n)

    @property
    def n_vars(self) -> int:
        return self.exps.shape[1]

    @property
    def degree(self) -> int:
        return int(self.exps[0].sum())

    @property
    def terms(self) -> dict:
        return {tuple(int(v) for v in e): complex(c) for e, c in zip(self.exps, self.coefs)}

    def coef_norm(self) -> float:
        """Euclidean norm of the coefficient vector."""
        return float(np.linalg.norm(self.coefs))

    def __eq__(self, other):
        return isinstance(other, HomogeneousPolynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items(), key=lambda kv: kv[0])))

    def scale(self, lam: complex) -> "HomogeneousPolynomial":
        return HomogeneousPolynomial(self.exps, self.coefs * lam)

    def _monomials(self, x: np.ndarray, exps: np.ndarray) -> np.ndarray:
        # x: (..., n) -> (..., T)
        return np.prod(x[..., None, :] ** exps, axis=-1)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        return self._monomials(x, self.exps) @ self.coefs

    def gradient(self, x) -> np.ndarray:
        """Holomorphic gradient (df/dz_0, ..., df/dz_N), shape ``(..., n_vars)``."""
        x = np.asarray(x, dtype=complex)
        out = np.zeros(x.shape, dtype=complex)
        for i in range(self.n_vars):
            mask = self.exps[:, i] > 0
            if not np.any(mask):
                continue
            e = self.exps[mask].copy()
            c = self.coefs[mask] * e[:, i]
            e[:, i] -= 1
            out[..., i] = self._monomials(x, e) @ c
        return out

    def hessian(self, x) -> np.ndarray:
        """Holomorphic Hessian d^2 f / dz_i dz_j, shape ``(..., n_vars, n_vars)``."""
        x = np.asarray(x, dtype=complex)
        n = self.n_vars
        out = np.zeros(x.shape + (n,), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                e = self.exps.copy()
                c = self.coefs * e[:, i]
                e[:, i] -= 1
                c = c * e[:, j]
                e[:, j] -= 1
                mask = c != 0
                if not np.any(mask):
                    continue
                val = self._monomials(x, np.maximum(e[mask], 0)) @ c[mask]
                out[..., i, j] = val
                out[..., j, i] = val
        return out

    def substitute(self, matrix) -> "HomogeneousPolynomial":
        """The polynomial z -> f(M z) for a square matrix M, expanded exactly."""
        m = as_matrix(matrix)
        n = self.n_vars
        if m.shape != (n, n):
            raise ContractError("substitution matrix has the wrong size")
        d = self.degree
        # Expand every product of d linear forms (M z)_{i1} ... (M z)_{id}.
        out: dict[tuple, complex] = defaultdict(complex)
        monos = list(combinations_with_replacement(range(n), d))
        mono_exp = {}
        for mono in monos:
            e = [0] * n
            for v in mono:
                e[v] += 1
            mono_exp[mono] = tuple(e)
        for exp, coef in self.terms.items():
            factors = [i for i, k in enumerate(exp) for _ in range(k)]
            poly = {(0,) * n: coef}
            for i in factors:
                row = m[i]
                nxt: dict[tuple, complex] = defaultdict(complex)
                for e, c in poly.items():
                    for j in range(n):
                        if row[j] != 0:
                            e2 = list(e)
                            e2[j] += 1
                            nxt[tuple(e2)] += c * row[j]
                poly = nxt
            for e, c in poly.items():
                out[e] += c
        scale = max(abs(v) for v in out.values())
        kept = {e: c for e, c in out.items() if abs(c) > 1e-15 * scale}
        return HomogeneousPolynomial.from_terms(kept, n)

    def transform(self, sigma) -> "HomogeneousPolynomial":
        """The action sigma . f = f o sigma^{-1}, whose zero set is sigma(X)."""
        return self.substitute(np.linalg.inv(as_matrix(sigma)))

    def restrict_to_lines(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Coefficients (low -> high) of s -> f(p + s q) for batches of lines.

        Computed by evaluation at the (d+1)-th roots of unity and a DFT.
        """
        d = self.degree
        roots = np.exp(2j * np.pi * np.arange(d + 1) / (d + 1))
        pts = p[..., None, :] + roots[:, None] * q[..., None, :]
        vals = self(pts)
        return np.fft.fft(vals, axis=-1) / (d + 1)

    def euler_residual(self, x) -> np.ndarray:
        """Relative defect of the Euler identity sum z_i df/dz_i = d f."""
        x = np.asarray(x, dtype=complex)
        lhs = np.sum(x * self.gradient(x), axis=-1)
        rhs = self.degree * self(x)
        scale = self.coef_norm() * np.linalg.norm(x, axis=-1) ** self.degree
        return np.abs(lhs - rhs) / scale


def n_monomials(n_vars: int, degree: int) -> int:
    return comb(n_vars + degree - 1, degree)
