"""Built-in varieties, bundles and geodesic directions addressed by name."""
from __future__ import annotations

import numpy as np

from . import bundles
from .polynomial import HomogeneousPolynomial
from .projlin import ContractError, GeodesicDirection
from .varieties import Hypersurface

VARIETIES = {
    "hyperplane_p2": lambda: Hypersurface(HomogeneousPolynomial.linear([1, 1, 1]), "hyperplane_p2"),
    "hyperplane_p3": lambda: Hypersurface(HomogeneousPolynomial.linear([1, 1, 1, 1]), "hyperplane_p3"),
    "fermat_conic": lambda: Hypersurface(HomogeneousPolynomial.fermat(3, 2), "fermat_conic"),
    "fermat_cubic": lambda: Hypersurface(HomogeneousPolynomial.fermat(3, 3), "fermat_cubic"),
}

BUNDLES = {
    "o_minus_one_p1": bundles.o_minus_one_p1,
    "taut_gr12": lambda: bundles.tautological_grassmannian(1, 1),
    "taut_gr24": lambda: bundles.tautological_grassmannian(2, 3),
}

DIRECTIONS = ("diag", "random")


def names() -> dict:
    return {"varieties": sorted(VARIETIES), "bundles": sorted(BUNDLES),
            "directions": list(DIRECTIONS)}


def variety(name: str) -> Hypersurface:
    try:
        return VARIETIES[name]()
    except KeyError:
        raise ContractError(f"unknown variety {name!r}; known: {sorted(VARIETIES)}") from None


def bundle(name: str) -> bundles.BundleChart:
    try:
        return BUNDLES[name]()
    except KeyError:
        raise ContractError(f"unknown bundle {name!r}; known: {sorted(BUNDLES)}") from None


def lookup(name: str):
    """A registry variety or bundle by name."""
    if name in VARIETIES:
        return variety(name)
    if name in BUNDLES:
        return bundle(name)
    raise ContractError(f"unknown registry name {name!r}; known: "
                        f"{sorted(VARIETIES) + sorted(BUNDLES)}")


def direction(name: str, size: int, seed: int = 0) -> GeodesicDirection:
    """``diag``: diag(1, -1, 0, ...); ``random``: seeded unit traceless Hermitian."""
    if size < 2:
        raise ContractError("directions need size >= 2")
    if name == "diag":
        d = np.zeros(size)
        d[0], d[1] = 1.0, -1.0
        return GeodesicDirection.diagonal(d)
    if name == "random":
        return GeodesicDirection.random(size, np.random.default_rng(seed))
    raise ContractError(f"unknown direction {name!r}; known: {list(DIRECTIONS)}")
