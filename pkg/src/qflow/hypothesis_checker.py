"""Sign-pattern verification for kernel bases and moment-restoring perturbations.

A basis phi_1..phi_nu of the zero-weighted kernel complement satisfies the
nodal sign hypothesis when every sign pattern eps in {+-1}^nu is realized
simultaneously at some point: min_j eps_j phi_j(x) > 0.  The checker scans
all grid nodes, reports per-pattern witnesses and margins, and measures how
far each witness sits from the nearest sign violation in product geodesic
distance.  Margins are grid lower-bound estimates of the continuum
constants, so the report carries the factor resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product
from math import pi

import numpy as np

from .conformal_operator import conformal_weight
from .spectral_geometry import FactorGrid, ProductGrid


@dataclass(frozen=True)
class PatternResult:
    """Outcome of the node scan for one sign pattern."""

    pattern: tuple
    realized: bool
    margin: float           # max over nodes of min_j eps_j phi_j
    witness: tuple | None   # ((i1, i2), factor-1 coords, factor-2 coords)
    radius: float | None    # witness distance to the nearest violating node


@dataclass(frozen=True)
class SignPatternReport:
    nu: int
    resolution: tuple       # factor resolutions the estimates depend on
    results: tuple          # PatternResult per pattern, fixed enumeration order
    C: float                # min margin over realized patterns
    r0: float               # min persistence radius over realized patterns
    verdict: bool           # all 2^nu patterns realized
    missing: tuple          # unrealized patterns

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "resolution": list(self.resolution),
            "verdict": self.verdict,
            "C": self.C,
            "r0": self.r0,
            "missing_patterns": [list(p) for p in self.missing],
            "patterns": [
                {
                    "pattern": list(r.pattern),
                    "realized": r.realized,
                    "margin": r.margin,
                    "witness_index": list(r.witness[0]) if r.witness else None,
                    "witness_coords": ([list(r.witness[1]), list(r.witness[2])]
                                       if r.witness else None),
                    "radius": r.radius,
                }
                for r in self.results
            ],
        }


def _validated_stack(basis, grid: ProductGrid) -> np.ndarray:
    fields = [np.asarray(b, dtype=float) for b in basis]
    if not 1 <= len(fields) <= 8:
        raise ValueError("basis size must be between 1 and 8 "
                         "(sign patterns are enumerated exhaustively)")
    for b in fields:
        if b.shape != grid.shape:
            raise ValueError(f"basis field shape {b.shape} does not match "
                             f"grid nodes {grid.shape}")
    return np.stack(fields)


def _scan_pattern(stack: np.ndarray, eps) -> tuple[np.ndarray, tuple, float]:
    signed = stack * np.asarray(eps, dtype=float)[:, None, None]
    m = signed.min(axis=0)
    idx = np.unravel_index(int(np.argmax(m)), m.shape)
    return m, (int(idx[0]), int(idx[1])), float(m[idx])


def _factor_distances(factor: FactorGrid, index: int) -> np.ndarray:
    """Geodesic distance from one factor node to all of them."""
    if factor.kind == "sphere":
        th, ph = factor.nodes[:, 0], factor.nodes[:, 1]
        v = np.column_stack([np.sin(th) * np.cos(ph),
                             np.sin(th) * np.sin(ph),
                             np.cos(th)])
        return factor.size * np.arccos(np.clip(v @ v[index], -1.0, 1.0))
    d = np.abs(factor.nodes - factor.nodes[index])
    d = np.minimum(d, factor.size - d)       # torus minimal image
    return np.sqrt(np.sum(d * d, axis=1))


def _clearance(grid: ProductGrid, index: tuple, bad: np.ndarray) -> float:
    """Product geodesic distance from the node to the nearest flagged node."""
    if not bad.any():
        return float("inf")
    d1 = _factor_distances(grid.factors[0], index[0])
    d2 = _factor_distances(grid.factors[1], index[1])
    dist2 = d1[:, None] ** 2 + d2[None, :] ** 2
    return float(np.sqrt(np.min(dist2[bad])))


def _witness(grid: ProductGrid, index: tuple) -> tuple:
    return (index,
            tuple(float(v) for v in grid.factors[0].nodes[index[0]]),
            tuple(float(v) for v in grid.factors[1].nodes[index[1]]))


def check_sign_condition(basis, grid: ProductGrid) -> SignPatternReport:
    """Scan every sign pattern of the basis over all grid nodes.

    Unrealized patterns are reported in the verdict, never raised.
    """
    stack = _validated_stack(basis, grid)
    nu = stack.shape[0]
    results = []
    for eps in iter_product((1, -1), repeat=nu):
        m, idx, margin = _scan_pattern(stack, eps)
        if margin > 0.0:
            results.append(PatternResult(eps, True, margin, _witness(grid, idx),
                                         _clearance(grid, idx, m <= 0.0)))
        else:
            results.append(PatternResult(eps, False, margin, None, None))
    realized = [r for r in results if r.realized]
    missing = tuple(r.pattern for r in results if not r.realized)
    return SignPatternReport(
        nu=nu,
        resolution=tuple(f.resolution for f in grid.factors),
        results=tuple(results),
        C=min((r.margin for r in realized), default=0.0),
        r0=min((r.radius for r in realized), default=0.0),
        verdict=not missing,
        missing=missing,
    )


def nodal_margin(basis, eps, grid: ProductGrid) -> tuple:
    """Witness, margin, and persistence radius for one sign pattern.

    Raises when the pattern is not realized anywhere on the grid.
    """
    stack = _validated_stack(basis, grid)
    eps = tuple(int(e) for e in eps)
    if len(eps) != stack.shape[0] or any(e not in (1, -1) for e in eps):
        raise ValueError(f"sign pattern {eps} does not match a basis of size "
                         f"{stack.shape[0]}")
    m, idx, margin = _scan_pattern(stack, eps)
    if margin <= 0.0:
        raise ValueError(f"sign pattern {eps} is not realized on the grid")
    return _witness(grid, idx), margin, _clearance(grid, idx, m <= 0.0)


def perturb_initial(v: np.ndarray, phi: np.ndarray, k: int,
                    grid: ProductGrid, n: int = 4) -> np.ndarray:
    """Restore a nonzero weighted moment by an O(1/k) bump where phi > 0.

    Returns v unchanged when int(phi e^{nv}) is already nonzero.  Otherwise
    returns v_k = (1/n) log(e^{nv} + (h + delta)/k) with h a squared-cosine
    cap on the super-level set {phi > max(phi)/2} and delta a small positive
    offset chosen so int((h + delta) phi) > 0; then int(phi e^{n v_k}) > 0
    strictly and ||v_k - v||_inf decreases to 0 as k grows.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    v = np.asarray(v, dtype=float)
    phi = np.asarray(phi, dtype=float)
    for name, a in (("v", v), ("phi", phi)):
        if a.shape != grid.shape:
            raise ValueError(f"{name} shape {a.shape} does not match grid "
                             f"nodes {grid.shape}")
    sup = float(np.max(np.abs(phi)))
    if sup == 0.0:
        raise ValueError("phi vanishes identically")
    w = conformal_weight(v, n)
    if abs(grid.integrate(phi * w)) > 1e-12 * sup * grid.integrate(w):
        return v

    # a constant-sign phi cannot reach this point with nonzero values
    mx = float(phi.max())
    assert mx > 0.0, "zero moment forces phi to change sign"
    thresh = 0.5 * mx
    s = np.clip((mx - phi) / (mx - thresh), 0.0, 1.0)
    h = np.where(phi > thresh, np.cos(0.5 * pi * s) ** 2, 0.0)
    ih = grid.integrate(h * phi)         # > 0: h lives where phi > mx/2
    iphi = grid.integrate(phi)
    feasible = [2.0 ** -i for i in range(21) if ih + 2.0 ** -i * iphi > 0.0]
    if not feasible:
        raise ValueError("no feasible bump offset: phi too negatively skewed")
    delta = min(feasible) / 2.0
    return np.logaddexp(n * v, np.log((h + delta) / k)) / n
