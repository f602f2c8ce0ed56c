"""Shared fixtures: grids, backgrounds, and the reference runs.

The run-record fixtures integrate full cases (minutes each on one core);
they are session-scoped and built only when a test requests them.
"""

import numpy as np
import pytest

from qflow.cli_runner import RunConfig, preset_config, run_case
from qflow.conformal_operator import (flat_t4_operator, make_background,
                                      model_s2xt2_operator)
from qflow.spectral_geometry import (ProductGrid, build_sphere_grid,
                                     build_torus_grid)

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def default_grid():
    return ProductGrid(build_sphere_grid(8), build_torus_grid(4, TWO_PI))


@pytest.fixture(scope="session")
def default_background(default_grid):
    op = model_s2xt2_operator(default_grid)
    return make_background(op, default_grid.constant_field(-2.0))


@pytest.fixture(scope="session")
def positive_background(default_grid):
    op = model_s2xt2_operator(default_grid)
    return make_background(op, default_grid.constant_field(2.0))


@pytest.fixture(scope="session")
def mini_grid():
    return ProductGrid(build_sphere_grid(4), build_torus_grid(2, TWO_PI))


@pytest.fixture(scope="session")
def mini_background(mini_grid):
    op = model_s2xt2_operator(mini_grid)
    return make_background(op, mini_grid.constant_field(-2.0))


@pytest.fixture(scope="session")
def mini_positive(mini_grid):
    op = model_s2xt2_operator(mini_grid)
    return make_background(op, mini_grid.constant_field(2.0))


@pytest.fixture(scope="session")
def t4_grid():
    return ProductGrid(build_torus_grid(2, TWO_PI), build_torus_grid(2, TWO_PI))


@pytest.fixture(scope="session")
def t4_background(t4_grid):
    return make_background(flat_t4_operator(t4_grid), t4_grid.constant_field(0.0))


# -- full-scale reference runs (acceptance) -----------------------------

@pytest.fixture(scope="session")
def caseA_record():
    return run_case(preset_config("caseA"))


@pytest.fixture(scope="session")
def caseB_record():
    return run_case(preset_config("caseB"))


@pytest.fixture(scope="session")
def bump_record():
    cfg = preset_config("caseA")
    cfg.f_mode = "bump"
    cfg.conv_tol = 1e-6
    return run_case(cfg)


@pytest.fixture(scope="session")
def certify_records():
    records = []
    for seed in range(5):
        cfg = preset_config("caseB")
        cfg.seed = seed
        cfg.c_stab = 1.0
        cfg.u0_perturb_amp = 0.05
        records.append(run_case(cfg))
    return records


# -- reduced-resolution runs (fast unit-level end-to-end) ---------------

@pytest.fixture(scope="session")
def miniA_record():
    cfg = RunConfig(L_max=4, K_max=2, q0_const=-2.0, u0_mode="random",
                    u0_amp=0.3, t_end=30.0)
    return run_case(cfg)


@pytest.fixture(scope="session")
def miniB_record():
    # raised dt_min cuts the step-collapse tail without changing the outcome
    cfg = RunConfig(L_max=4, K_max=2, q0_const=2.0, u0_mode="zonal",
                    u0_degree=1, u0_amp=0.1, c_stab=1.0, dt_min=1e-5,
                    t_end=5.0)
    return run_case(cfg)
