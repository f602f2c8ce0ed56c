"""GJMS-type model operators, backgrounds, and the conformal transformation law.

The operator is defined spectrally: apply = synthesize(symbol * analyze(u)).
Because analysis and synthesis share one quadrature-exact basis, the discrete
operator is exactly self-adjoint, nonnegative, and annihilates its declared
kernel, independent of any aliasing in the flow's nonlinearity.  Those three
structural facts are what every conservation law downstream relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral_geometry import ProductGrid


class ExponentCapError(RuntimeError):
    """Conformal exponent left the representable range (blow-up territory)."""


# |n u| beyond this makes e^{n u} meaningless in doubles long before overflow
EXPONENT_CAP = 300.0


def conformal_weight(u: np.ndarray, n: int, sign: int = 1,
                     cap: float = EXPONENT_CAP) -> np.ndarray:
    """e^{sign * n * u} with an exponent guard."""
    m = n * float(np.max(np.abs(u)))
    if not np.isfinite(m) or m > cap:
        raise ExponentCapError(f"conformal exponent |n*u| = {m:.3g} exceeds cap {cap:g}")
    return np.exp(sign * n * u)


@dataclass(frozen=True)
class SpectralOperator:
    """Nonnegative spectral symbol on a product grid, with explicit kernel."""

    grid: ProductGrid
    symbol: np.ndarray          # (m1, m2) multiplier per product mode, >= 0
    kernel_mask: np.ndarray     # boolean (m1, m2): symbol exactly zero
    lambda1: float              # smallest positive symbol value
    name: str

    @property
    def sigma_max(self) -> float:
        return float(self.symbol.max())

    @property
    def kernel_dim(self) -> int:
        return int(self.kernel_mask.sum())


def _finalize(grid: ProductGrid, symbol: np.ndarray, declared: np.ndarray,
              name: str) -> SpectralOperator:
    if np.any(symbol[declared] != 0.0):
        raise AssertionError("declared kernel modes have nonzero symbol")
    off = symbol[~declared]
    if off.size and off.min() <= 0.0:
        raise AssertionError("symbol not positive off the declared kernel")
    return SpectralOperator(grid=grid, symbol=symbol, kernel_mask=declared,
                            lambda1=float(off.min()) if off.size else 0.0,
                            name=name)


def model_s2xt2_operator(grid: ProductGrid) -> SpectralOperator:
    """Fourth-order model operator on S2(1) x T2(L).

    Symbol sigma(lam, mu) = (lam + mu)^2 - 2*lam + 2*mu with lam the sphere
    eigenvalue and mu the torus eigenvalue.  The kernel is the constant plus
    the three degree-1 sphere harmonics (lam = 2, mu = 0), so the operator
    has a 4-dimensional kernel with the sphere directions x, y, z as the
    non-constant part.  The unit sphere radius is required: it calibrates
    the first sphere eigenvalue to 2, which the -2*lam term cancels.
    """
    f1, f2 = grid.factors
    if f1.kind != "sphere" or f2.kind != "torus":
        raise ValueError("model operator expects a sphere x torus grid")
    if f1.size != 1.0:
        raise ValueError("model operator requires sphere radius 1 "
                         "(kernel calibration)")
    lam, mu = grid.eigen1, grid.eigen2
    symbol = (lam + mu) ** 2 - 2.0 * lam + 2.0 * mu
    declared = ((lam == 0.0) & (mu == 0.0)) | ((lam == 2.0) & (mu == 0.0))
    return _finalize(grid, symbol, declared, "model_s2xt2")


def flat_t4_operator(grid: ProductGrid) -> SpectralOperator:
    """Bi-Laplacian symbol (lam + mu)^2 on T2 x T2; kernel = constants."""
    f1, f2 = grid.factors
    if f1.kind != "torus" or f2.kind != "torus":
        raise ValueError("flat operator expects a torus x torus grid")
    lam, mu = grid.eigen1, grid.eigen2
    symbol = (lam + mu) ** 2
    declared = (lam == 0.0) & (mu == 0.0)
    return _finalize(grid, symbol, declared, "flat_t4")


def apply_operator(P: SpectralOperator, u: np.ndarray) -> np.ndarray:
    """P u = synthesize(symbol * analyze(u)); self-adjoint by construction."""
    return P.grid.synthesize(P.symbol * P.grid.analyze(u))


@dataclass(frozen=True)
class KernelProjection:
    """Coefficients of the orthogonal projection onto the operator kernel,
    in the basis {1, phi_1, ..., phi_nu}."""

    a0: float
    a: np.ndarray

    @property
    def sum_abs_a(self) -> float:
        return float(np.sum(np.abs(self.a)))


@dataclass(frozen=True)
class ConformalBackground:
    """Operator, background curvature Q0, and kernel decomposition data.

    moment_basis spans the zero-Q0-weighted part of the kernel (fields phi
    with integral of Q0*phi = 0), orthonormalized in L2.  kernel_basis is
    {1} plus that span when k_p != 0, or {1} plus the raw non-constant
    kernel modes otherwise; projections solve the Gram system rather than
    assuming orthogonality.
    """

    operator: SpectralOperator
    q0: np.ndarray
    n: int
    k_p: float
    kernel_basis: tuple        # fields, first entry the constant 1
    moment_basis: tuple        # nu fields, orthonormal, zero Q0-weighted integral
    gram: np.ndarray

    @property
    def grid(self) -> ProductGrid:
        return self.operator.grid

    @property
    def nu(self) -> int:
        return len(self.moment_basis)

    @property
    def lambda1(self) -> float:
        return self.operator.lambda1


def total_q_curvature(background: ConformalBackground) -> float:
    """Total background curvature k_p = integral of Q0."""
    return background.grid.integrate(background.q0)


def _nonconstant_kernel_fields(operator: SpectralOperator) -> list:
    grid = operator.grid
    fields = []
    for i, j in np.argwhere(operator.kernel_mask):
        if operator.grid.eigen1[i, 0] == 0.0 and operator.grid.eigen2[0, j] == 0.0:
            continue
        psi = grid.mode_field(int(i), int(j))
        fields.append(psi / grid.l2_norm(psi))
    return fields


def make_background(operator: SpectralOperator, q0: np.ndarray,
                    n: int = 4) -> ConformalBackground:
    if n < 4 or n % 2:
        raise ValueError("dimension n must be an even integer >= 4")
    grid = operator.grid
    q0 = np.asarray(q0, dtype=float)
    if q0.shape != grid.shape:
        raise ValueError("Q0 field shape does not match grid")
    k_p = grid.integrate(q0)
    psi = _nonconstant_kernel_fields(operator)

    if not psi:
        moment = ()
    elif k_p == 0.0:
        # the constant direction cannot absorb the Q0-weighted integral
        moment = None
    else:
        # shift each kernel mode by a constant to kill its Q0-weighted
        # integral, then orthonormalize preserving order and orientation
        shifted = [p - (grid.integrate(q0 * p) / k_p) * grid.constant_field()
                   for p in psi]
        moment = []
        for j, phi in enumerate(shifted):
            for prev in moment:
                phi = phi - grid.inner_product(phi, prev) * prev
            nrm = grid.l2_norm(phi)
            if nrm <= 1e-12:
                raise ValueError("degenerate kernel basis after Q0 constraint")
            phi = phi / nrm
            if grid.inner_product(phi, psi[j]) < 0:
                phi = -phi
            moment.append(phi)
        moment = tuple(moment)

    if moment is None:
        kernel = (grid.constant_field(),) + tuple(psi)
        moment = ()
    else:
        kernel = (grid.constant_field(),) + tuple(moment)

    m = len(kernel)
    gram = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            gram[i, j] = gram[j, i] = grid.inner_product(kernel[i], kernel[j])

    return ConformalBackground(operator=operator, q0=q0, n=n, k_p=k_p,
                               kernel_basis=kernel, moment_basis=moment,
                               gram=gram)


def moment_basis(background: ConformalBackground) -> tuple:
    """Orthonormal basis of the zero-weighted kernel complement.

    Raises when k_p = 0 while non-constant kernel modes exist: the
    decomposition of the kernel into constants plus zero-weighted part is
    unavailable there.  A trivial kernel returns the empty basis.
    """
    if background.k_p == 0.0 and background.operator.kernel_dim > 1:
        raise ValueError("k_p = 0: kernel decomposition unavailable")
    return background.moment_basis


def project_kernel(u: np.ndarray, background: ConformalBackground) -> KernelProjection:
    """Orthogonal projection of u onto the operator kernel via Gram solve."""
    grid = background.grid
    rhs = np.array([grid.inner_product(u, b) for b in background.kernel_basis])
    try:
        coef = np.linalg.solve(background.gram, rhs)
    except np.linalg.LinAlgError as e:
        raise ValueError("singular Gram matrix: degenerate kernel basis") from e
    return KernelProjection(a0=float(coef[0]), a=coef[1:])


def q_curvature(u: np.ndarray, background: ConformalBackground) -> np.ndarray:
    """Curvature of the conformal metric: e^{-n u} (P u + Q0)."""
    w = conformal_weight(u, background.n, sign=-1)
    return w * (apply_operator(background.operator, u) + background.q0)


def sphere_xyz_fields(grid: ProductGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cartesian coordinate fields x, y, z of the sphere factor, constant in
    the second factor.  These span the non-constant kernel of the model
    operator and are sup-normalized (peak 1 on the continuum sphere)."""
    f1 = grid.factors[0]
    if f1.kind != "sphere":
        raise ValueError("first factor is not a sphere")
    theta, phi = f1.nodes[:, 0], f1.nodes[:, 1]
    ones = np.ones(grid.shape[1])
    x = np.outer(np.sin(theta) * np.cos(phi), ones)
    y = np.outer(np.sin(theta) * np.sin(phi), ones)
    z = np.outer(np.cos(theta), ones)
    return x, y, z


def zonal_harmonic_field(grid: ProductGrid, degree: int) -> np.ndarray:
    """Legendre polynomial P_degree(cos theta) on the sphere factor,
    sup-normalized (P_l(1) = 1), constant in the second factor."""
    f1 = grid.factors[0]
    if f1.kind != "sphere":
        raise ValueError("first factor is not a sphere")
    ct = np.cos(f1.nodes[:, 0])
    vals = np.polynomial.legendre.legval(ct, [0.0] * degree + [1.0])
    return np.outer(vals, np.ones(grid.shape[1]))
