"""Quadrature grids and spectral transforms on product model manifolds.

A scalar field on the product of two factor manifolds is stored as a 2-D
array indexed (factor-1 node, factor-2 node).  Each factor carries a real
basis (spherical harmonics or Fourier pairs) sampled at quadrature nodes
chosen so that products of any two retained basis functions integrate
exactly.  Analysis and synthesis are then dense matrix products per factor,
and the discrete L2 pairing is an exact inner product on the resolved
subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi, sqrt

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import lpmv


@dataclass(frozen=True)
class FactorGrid:
    """One factor of the product manifold: nodes, weights, modal basis.

    eigenvalues holds the Laplacian spectrum per mode with the convention
    Delta phi = -lam phi, lam >= 0, sorted nondecreasing; lam = 0 appears
    exactly once (the constant mode).
    """

    kind: str                   # "sphere" or "torus"
    resolution: int             # max harmonic degree L_max or Fourier index K_max
    size: float                 # sphere radius a or torus side length L
    nodes: np.ndarray           # (n_nodes, 2) coordinates: (theta, phi) or (x, y)
    weights: np.ndarray         # (n_nodes,) quadrature weights, sum = factor volume
    basis: np.ndarray           # (n_nodes, n_modes) real basis sampled at the nodes
    eigenvalues: np.ndarray     # (n_modes,) Laplacian eigenvalue per mode
    mode_labels: tuple          # per-mode labels: (l, m) or ((k1, k2), parity)

    @property
    def volume(self) -> float:
        return 4.0 * pi * self.size ** 2 if self.kind == "sphere" else self.size ** 2

    @property
    def n_nodes(self) -> int:
        return self.basis.shape[0]

    @property
    def n_modes(self) -> int:
        return self.basis.shape[1]


def build_sphere_grid(L_max: int, a: float = 1.0) -> FactorGrid:
    """Gauss-Legendre x equispaced grid on the radius-a sphere.

    (L_max+1) colatitude nodes integrate Legendre-polynomial content up to
    degree 2*L_max+1 exactly; 2*L_max+2 longitudes do the same for Fourier
    content, so products of two retained harmonics are integrated exactly.
    Basis functions are real spherical harmonics, unit-normalized on the
    unit sphere, grouped by degree l with m = 0, cos, sin ordering.
    """
    if L_max < 4:
        raise ValueError("L_max must be >= 4 to resolve the first harmonics "
                         "plus quadratic nonlinearity")
    if a <= 0:
        raise ValueError("sphere radius must be positive")
    n_th = L_max + 1
    n_ph = 2 * L_max + 2
    x, w_gl = leggauss(n_th)                      # nodes in cos(theta)
    theta = np.arccos(x)
    phi = 2.0 * pi * np.arange(n_ph) / n_ph
    weights = np.outer(w_gl * a * a, np.full(n_ph, 2.0 * pi / n_ph)).ravel()

    cols = []
    labels = []
    lam = []
    for l in range(L_max + 1):
        for m in range(0, l + 1):
            Plm = lpmv(m, l, x)
            if m == 0:
                norm = sqrt((2 * l + 1) / (4.0 * pi))
                cols.append(np.outer(norm * Plm, np.ones(n_ph)))
                labels.append((l, 0))
                lam.append(l * (l + 1) / a ** 2)
            else:
                norm = sqrt(2.0) * sqrt((2 * l + 1) / (4.0 * pi)
                                        * factorial(l - m) / factorial(l + m))
                cols.append(np.outer(norm * Plm, np.cos(m * phi)))
                labels.append((l, m))
                cols.append(np.outer(norm * Plm, np.sin(m * phi)))
                labels.append((l, -m))
                lam.extend([l * (l + 1) / a ** 2] * 2)

    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    return FactorGrid(
        kind="sphere",
        resolution=L_max,
        size=float(a),
        nodes=np.column_stack([TH.ravel(), PH.ravel()]),
        weights=weights,
        basis=np.stack([c.ravel() for c in cols], axis=1),
        eigenvalues=np.asarray(lam),
        mode_labels=tuple(labels),
    )


def build_torus_grid(K_max: int, L: float) -> FactorGrid:
    """Equispaced (2K_max+1)^2 grid on the side-L flat torus.

    The odd node count makes products of retained Fourier modes alias-free
    under the trapezoid rule.  Modes are the constant plus cos/sin pairs for
    wave vectors k with |k_i| <= K_max, sorted by |k|^2.
    """
    if K_max < 2:
        raise ValueError("K_max must be >= 2")
    if L <= 0:
        raise ValueError("torus side length must be positive")
    n = 2 * K_max + 1
    xs = L * np.arange(n) / n
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    weights = np.full(n * n, (L / n) ** 2)

    # one representative per {k, -k} pair
    ks = [(k1, k2)
          for k1 in range(-K_max, K_max + 1)
          for k2 in range(-K_max, K_max + 1)
          if (k1 > 0) or (k1 == 0 and k2 > 0)]
    ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k))

    cols = [np.ones(n * n)]
    labels = [((0, 0), "c")]
    mu = [0.0]
    for k1, k2 in ks:
        ph = 2.0 * pi * (k1 * X + k2 * Y) / L
        cols.append(np.cos(ph).ravel())
        labels.append(((k1, k2), "c"))
        cols.append(np.sin(ph).ravel())
        labels.append(((k1, k2), "s"))
        mu.extend([(k1 ** 2 + k2 ** 2) * (2.0 * pi / L) ** 2] * 2)

    order = np.argsort(np.asarray(mu), kind="stable")
    return FactorGrid(
        kind="torus",
        resolution=K_max,
        size=float(L),
        nodes=np.column_stack([X.ravel(), Y.ravel()]),
        weights=weights,
        basis=np.stack(cols, axis=1)[:, order],
        eigenvalues=np.asarray(mu)[order],
        mode_labels=tuple(labels[i] for i in order),
    )


class ProductGrid:
    """Tensor product of two factor grids with precomputed transform data.

    Fields are (n1, n2) arrays; coefficients are (m1, m2) arrays following
    the convention c = <field, e> / <e, e> per product mode e.  The analysis
    matrices fold the quadrature weights and discrete mode norms, so
    synthesize(analyze(f)) reproduces any band-limited f to rounding.
    """

    def __init__(self, factor1: FactorGrid, factor2: FactorGrid):
        self.factors = (factor1, factor2)
        self.volume = factor1.volume * factor2.volume
        self.weights = np.outer(factor1.weights, factor2.weights)
        # discrete mode norms <e, e> per factor; quadrature exactness makes
        # these the analytic values up to rounding
        n1 = factor1.weights @ factor1.basis ** 2
        n2 = factor2.weights @ factor2.basis ** 2
        self._analysis1 = (factor1.basis * factor1.weights[:, None]).T / n1[:, None]
        self._analysis2 = (factor2.basis * factor2.weights[:, None]).T / n2[:, None]
        self.mode_norm2 = np.outer(n1, n2)
        # factor Laplacian eigenvalues broadcast over the product mode table
        self.eigen1 = factor1.eigenvalues[:, None]
        self.eigen2 = factor2.eigenvalues[None, :]
        if self.n_nodes < self.n_modes:
            raise ValueError("underdetermined transform: fewer nodes than modes")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.factors[0].n_nodes, self.factors[1].n_nodes)

    @property
    def mode_shape(self) -> tuple[int, int]:
        return (self.factors[0].n_modes, self.factors[1].n_modes)

    @property
    def n_nodes(self) -> int:
        return self.factors[0].n_nodes * self.factors[1].n_nodes

    @property
    def n_modes(self) -> int:
        return self.factors[0].n_modes * self.factors[1].n_modes

    def _check_field(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field, dtype=float)
        if field.shape != self.shape:
            raise ValueError(f"field shape {field.shape} does not match grid "
                             f"nodes {self.shape}")
        return field

    def analyze(self, field: np.ndarray) -> np.ndarray:
        """Spectral coefficients c_m = <field, e_m> / <e_m, e_m>."""
        field = self._check_field(field)
        return self._analysis1 @ field @ self._analysis2.T

    def synthesize(self, coefficients: np.ndarray) -> np.ndarray:
        """Field values from coefficients; inverse of analyze on band-limited content."""
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != self.mode_shape:
            raise ValueError(f"coefficient shape {coefficients.shape} does not "
                             f"match mode table {self.mode_shape}")
        return self.factors[0].basis @ coefficients @ self.factors[1].basis.T

    def integrate(self, field: np.ndarray) -> float:
        return float(np.vdot(self.weights, self._check_field(field)))

    def inner_product(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.vdot(self.weights, self._check_field(f) * self._check_field(g)))

    def l2_norm(self, field: np.ndarray) -> float:
        return sqrt(max(self.inner_product(field, field), 0.0))

    def constant_field(self, value: float = 1.0) -> np.ndarray:
        return np.full(self.shape, float(value))

    def mode_field(self, i: int, j: int) -> np.ndarray:
        """The product basis function for factor mode indices (i, j)."""
        return np.outer(self.factors[0].basis[:, i], self.factors[1].basis[:, j])

    def node_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Factor coordinates of every product node, each (n1, n2, 2)."""
        c1 = self.factors[0].nodes[:, None, :].repeat(self.shape[1], axis=1)
        c2 = self.factors[1].nodes[None, :, :].repeat(self.shape[0], axis=0)
        return c1, c2
