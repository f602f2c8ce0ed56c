"""Grid construction, quadrature exactness, and transform identities."""

import numpy as np
import pytest

from qflow.spectral_geometry import (ProductGrid, build_sphere_grid,
                                     build_torus_grid)

TWO_PI = 2.0 * np.pi


def test_sphere_grid_counts_and_weights():
    g = build_sphere_grid(4)
    assert g.kind == "sphere"
    assert g.n_nodes == 5 * 10
    assert g.n_modes == 25
    assert g.weights.sum() == pytest.approx(4.0 * np.pi, rel=1e-14)
    assert np.count_nonzero(g.eigenvalues == 0.0) == 1
    assert g.eigenvalues[0] == 0.0


def test_sphere_basis_orthonormal():
    g = build_sphere_grid(5)
    gram = (g.basis * g.weights[:, None]).T @ g.basis
    assert np.allclose(gram, np.eye(g.n_modes), atol=1e-12)


def test_sphere_eigenvalues_follow_degree():
    g = build_sphere_grid(4)
    for (l, _), lam in zip(g.mode_labels, g.eigenvalues):
        assert lam == pytest.approx(l * (l + 1), abs=1e-12)


def test_sphere_radius_scaling():
    g = build_sphere_grid(4, a=2.0)
    assert g.weights.sum() == pytest.approx(16.0 * np.pi, rel=1e-14)
    first = [lam for (l, _), lam in zip(g.mode_labels, g.eigenvalues) if l == 1]
    assert np.allclose(first, 0.5)


def test_sphere_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_sphere_grid(3)
    with pytest.raises(ValueError):
        build_sphere_grid(8, a=0.0)


def test_torus_grid_counts_and_weights():
    g = build_torus_grid(2, TWO_PI)
    assert g.kind == "torus"
    assert g.n_nodes == 25
    assert g.n_modes == 25
    assert g.weights.sum() == pytest.approx(TWO_PI ** 2, rel=1e-14)
    assert np.count_nonzero(g.eigenvalues == 0.0) == 1
    # side length 2*pi makes the spectrum the raw |k|^2 values
    assert sorted(set(g.eigenvalues)) == [0.0, 1.0, 2.0, 4.0, 5.0, 8.0]


def test_torus_mode_norms():
    L = 3.0
    g = build_torus_grid(2, L)
    norms = g.weights @ g.basis ** 2
    assert norms[0] == pytest.approx(L * L, rel=1e-13)
    assert np.allclose(norms[1:], L * L / 2.0, rtol=1e-13)


def test_torus_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_torus_grid(1, 1.0)
    with pytest.raises(ValueError):
        build_torus_grid(2, 0.0)


def test_product_volume_and_constant(mini_grid):
    vol = 4.0 * np.pi * TWO_PI ** 2
    assert mini_grid.volume == pytest.approx(vol, rel=1e-14)
    assert mini_grid.integrate(mini_grid.constant_field(1.0)) == pytest.approx(
        vol, rel=1e-13)
    assert mini_grid.n_nodes == 50 * 25
    assert mini_grid.n_modes == 25 * 25


def test_product_transform_roundtrip(mini_grid):
    rng = np.random.default_rng(0)
    coef = rng.standard_normal(mini_grid.mode_shape)
    field = mini_grid.synthesize(coef)
    assert np.allclose(mini_grid.analyze(field), coef, atol=1e-11)


def test_product_mode_pairings(mini_grid):
    e_a = mini_grid.mode_field(3, 2)
    e_b = mini_grid.mode_field(5, 2)
    e_c = mini_grid.mode_field(3, 4)
    assert mini_grid.inner_product(e_a, e_a) == pytest.approx(
        mini_grid.mode_norm2[3, 2], rel=1e-12)
    assert abs(mini_grid.inner_product(e_a, e_b)) < 1e-12
    assert abs(mini_grid.inner_product(e_a, e_c)) < 1e-12


def test_product_norm_consistency(mini_grid):
    rng = np.random.default_rng(1)
    f = mini_grid.synthesize(rng.standard_normal(mini_grid.mode_shape))
    assert mini_grid.l2_norm(f) == pytest.approx(
        np.sqrt(mini_grid.inner_product(f, f)), rel=1e-14)


def test_field_shape_validation(mini_grid):
    with pytest.raises(ValueError):
        mini_grid.analyze(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        mini_grid.synthesize(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        mini_grid.integrate(np.zeros(7))


def test_node_positions_layout(mini_grid):
    c1, c2 = mini_grid.node_positions()
    assert c1.shape == (*mini_grid.shape, 2)
    assert c2.shape == (*mini_grid.shape, 2)
    # factor-1 coordinates constant along axis 1 and vice versa
    assert np.all(c1[:, 0, :] == c1[:, -1, :])
    assert np.all(c2[0, :, :] == c2[-1, :, :])
