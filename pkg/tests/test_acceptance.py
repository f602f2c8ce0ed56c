"""End-to-end acceptance checks, one per advertised guarantee.

Each test prints a single ``acceptance [label]: PASS`` or ``FAIL`` line so a
verbose run doubles as an acceptance report.  Thresholds are the shipped
guarantees, not observed best cases.
"""

import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
from scipy.integrate import quad

from qflow import flow_engine
from qflow.cli_runner import (build_initial_field, build_prescribed_field,
                              make_flow_config, preset_config, run_case,
                              unit_random_band)
from qflow.conformal_operator import (apply_operator, conformal_weight,
                                      project_kernel, q_curvature,
                                      sphere_xyz_fields)
from qflow.diagnostics import dissipation_check
from qflow.flow_engine import make_state
from qflow.hypothesis_checker import check_sign_condition, perturb_initial


def _report(label, problems):
    if problems:
        print(f"acceptance [{label}]: FAIL: " + "; ".join(problems))
    else:
        print(f"acceptance [{label}]: PASS")
    assert not problems


def test_operator_structural_exactness(default_grid, default_background):
    problems = []
    grid, bg = default_grid, default_background
    op = bg.operator
    rng = np.random.default_rng(2024)

    t0 = time.perf_counter()
    worst_gap = 0.0
    min_quad = np.inf
    worst_slack = np.inf
    for _ in range(100):
        u = unit_random_band(grid, rng, 8, 4)
        v = unit_random_band(grid, rng, 8, 4)
        u = u / grid.l2_norm(u)
        v = v / grid.l2_norm(v)
        Pu = apply_operator(op, u)
        Pv = apply_operator(op, v)
        worst_gap = max(worst_gap, abs(grid.inner_product(Pu, v)
                                       - grid.inner_product(u, Pv)))
        q = grid.inner_product(Pu, u)
        min_quad = min(min_quad, q)
        proj = project_kernel(u, bg)
        uhat = proj.a0 * bg.kernel_basis[0]
        for aj, phi in zip(proj.a, bg.kernel_basis[1:]):
            uhat = uhat + aj * phi
        slack = q - bg.lambda1 * grid.l2_norm(u - uhat) ** 2 * (1.0 - 1e-8)
        worst_slack = min(worst_slack, slack)
    elapsed = time.perf_counter() - t0

    if worst_gap > 1e-10:
        problems.append(f"self-adjointness gap {worst_gap:.3e} > 1e-10")
    if min_quad < 0.0:
        problems.append(f"quadratic form went negative: {min_quad:.3e}")
    if worst_slack < 0.0:
        problems.append(f"spectral-gap inequality violated by {worst_slack:.3e}")

    kernel_fields = [grid.constant_field(1.0 / np.sqrt(grid.volume)),
                     *bg.moment_basis]
    for w in sphere_xyz_fields(grid):
        kernel_fields.append(w / np.max(np.abs(w)))
    worst_ker = max(grid.l2_norm(apply_operator(op, f)) for f in kernel_fields)
    if worst_ker > 1e-10:
        problems.append(f"kernel annihilation residual {worst_ker:.3e} > 1e-10")
    if elapsed > 10.0:
        problems.append(f"structural loop took {elapsed:.1f} s > 10 s")
    _report("operator-exactness", problems)


def test_volume_conservation(caseA_record, caseB_record, default_grid,
                             default_background):
    problems = []
    for name, rec in (("caseA", caseA_record), ("caseB", caseB_record)):
        assert rec.config.renormalize is False
        drift = rec.result.max_volume_drift
        if drift > 1e-8:
            problems.append(f"{name} relative volume drift {drift:.3e} > 1e-8")

    # single-step drift must shrink by ~2^5 when the step is halved
    cfg = preset_config("caseA")
    u0 = build_initial_field(cfg, default_grid)
    fc = make_flow_config(cfg, default_background,
                          build_prescribed_field(cfg, default_grid), u0)
    st = make_state(0.0, u0, default_background)
    dt0 = 8.0 * flow_engine.stability_dt(st, fc)
    drifts = [abs(flow_engine.step_rk4(st, dt, fc).volume - st.volume)
              / st.volume for dt in (dt0, 0.5 * dt0)]
    ratio = drifts[0] / drifts[1]
    if not 25.6 <= ratio <= 38.4:
        problems.append(f"one-step drift reduction {ratio:.2f} outside 32 +- 20%"
                        f" (drifts {drifts[0]:.3e}, {drifts[1]:.3e})")
    _report("volume-conservation", problems)


def test_energy_dissipation(caseA_record, default_grid, default_background):
    problems = []
    viol = caseA_record.result.max_ii_violation
    if viol > 1e-10:
        problems.append(f"energy increased by {viol:.3e} (normalized) > 1e-10")

    cfg = preset_config("caseA")
    u = 0.05 * unit_random_band(default_grid, np.random.default_rng(7), 2, 1)
    fc = make_flow_config(cfg, default_background,
                          build_prescribed_field(cfg, default_grid), u)
    st = make_state(0.0, u, default_background)
    gaps = [dissipation_check(st, fc, dtp)[2] for dtp in (1e-5, 5e-6)]
    ratio = gaps[0] / gaps[1]
    if not 2.8 <= ratio <= 5.2:
        problems.append(f"dissipation-identity gap ratio {ratio:.2f} outside "
                        f"4 +- 30% (gaps {gaps[0]:.3e}, {gaps[1]:.3e})")
    _report("energy-dissipation", problems)


def test_moment_law(caseB_record):
    problems = []
    rec = caseB_record
    if rec.status.kind != "blowup":
        problems.append(f"expected blow-up, got {rec.status.kind}")
    err = rec.manifest["moment_law_max_error"]
    if err is None or err > 1e-6:
        problems.append(f"moment law relative error {err} > 1e-6")
    cert = rec.certificate
    rel_rate = abs(cert.rate_fit - cert.rate_theory) / cert.rate_theory
    if rel_rate > 1e-4:
        problems.append(f"fitted growth rate off by {rel_rate:.3e} relative")

    # independent one-dimensional quadrature for the zonal initial data
    pref = 8.0 * np.pi ** 3
    V0_oracle = pref * quad(lambda t: np.exp(0.4 * t), -1.0, 1.0)[0]
    m0_oracle = pref * quad(lambda t: t * np.exp(0.4 * t), -1.0, 1.0)[0]
    rel_V = abs(cert.V0 - V0_oracle) / V0_oracle
    rel_m = abs(cert.m0 - m0_oracle) / abs(m0_oracle)
    if rel_V > 1e-8:
        problems.append(f"initial volume vs quadrature oracle: {rel_V:.3e}")
    if rel_m > 1e-8:
        problems.append(f"initial moment vs quadrature oracle: {rel_m:.3e}")
    _report("moment-law", problems)


def test_blowup_bound(certify_records):
    problems = []
    for i, rec in enumerate(certify_records):
        if rec.status.kind != "blowup":
            problems.append(f"seed {i}: expected blow-up, got {rec.status.kind}")
            continue
        cert = rec.certificate
        if cert is None:
            problems.append(f"seed {i}: no certificate")
            continue
        if cert.T_observed > cert.T_bound_proof:
            problems.append(f"seed {i}: T_observed {cert.T_observed:.6g} "
                            f"exceeds bound {cert.T_bound_proof:.6g}")
        d = cert.to_dict()
        if "T_bound_proof" not in d or "T_bound_theorem" not in d:
            problems.append(f"seed {i}: certificate missing a bound field")
        elif d["T_bound_theorem"] < d["T_bound_proof"]:
            problems.append(f"seed {i}: theorem bound below proof bound")
    _report("blowup-bound", problems)


def test_convergence_and_prescribed_curvature(caseA_record, bump_record,
                                              default_grid,
                                              default_background):
    problems = []
    if caseA_record.status.kind != "converged":
        problems.append(f"caseA ended {caseA_record.status.kind}")
    res = caseA_record.result.rows[-1].residual
    if res > 1e-6:
        problems.append(f"caseA final residual {res:.3e} > 1e-6")
    monitors = caseA_record.manifest["monitors"]
    if sorted(monitors) != ["a0", "dirichlet", "sum_abs_a"]:
        problems.append(f"unexpected monitor set {sorted(monitors)}")
    for name, m in monitors.items():
        if m["flag"]:
            problems.append(f"monitor {name} exceeded 10x its early maximum "
                            f"({m['overall_max']:.3e} vs "
                            f"{m['first_quarter_max']:.3e})")

    if bump_record.status.kind != "converged":
        problems.append(f"bump run ended {bump_record.status.kind}")
    f = build_prescribed_field(bump_record.config, default_grid)
    u = bump_record.result.final_state.u
    intf = default_grid.integrate(f * conformal_weight(u, 4))
    target = (default_background.k_p / intf) * f
    Q = q_curvature(u, default_background)
    rel = np.max(np.abs(Q - target)) / np.max(np.abs(target))
    if rel > 1e-5:
        problems.append(f"steady curvature misses k_p f / int(f e^(4u)) "
                        f"by {rel:.3e} relative sup > 1e-5")
    _report("convergence-prescribed-f", problems)


def test_constant_fixed_points(default_grid, default_background):
    problems = []
    cfg = preset_config("caseA")
    u0 = default_grid.constant_field(0.1)
    fc = make_flow_config(cfg, default_background,
                          build_prescribed_field(cfg, default_grid), u0)
    r = flow_engine.rhs(make_state(0.0, u0, default_background), fc)
    sup = float(np.max(np.abs(r)))
    rms = default_grid.l2_norm(r) / np.sqrt(default_grid.volume)
    if sup > 1e-12:
        problems.append(f"constant-data velocity sup {sup:.3e} > 1e-12")
    if rms > 1e-12:
        problems.append(f"constant-data velocity rms {rms:.3e} > 1e-12")

    rec = run_case(replace(cfg, u0_mode="constant", u0_amp=0.1))
    if rec.status.kind != "converged" or rec.result.accepted_steps != 0:
        problems.append(f"constant run: {rec.status.kind} after "
                        f"{rec.result.accepted_steps} steps, expected "
                        f"immediate convergence")
    _report("constant-fixed-points", problems)


def test_sign_hypothesis_and_perturbation(default_grid):
    problems = []
    xyz = sphere_xyz_fields(default_grid)
    rep = check_sign_condition(xyz, default_grid)
    if not rep.verdict or len(rep.results) != 8:
        problems.append(f"coordinate basis missing patterns {rep.missing}")
    if rep.C < 0.5:
        problems.append(f"uniform margin {rep.C:.4f} < 0.5")

    z = xyz[2]
    rep2 = check_sign_condition((z, z), default_grid)
    if rep2.verdict:
        problems.append("degenerate pair passed the sign condition")
    if rep2.missing != ((1, -1), (-1, 1)):
        problems.append(f"degenerate pair missing {rep2.missing}, expected "
                        f"((1, -1), (-1, 1))")

    v = np.zeros(default_grid.shape)
    sups = []
    for k in (1, 10, 100):
        vk = perturb_initial(v, z, k, default_grid)
        m = default_grid.integrate(z * np.exp(4.0 * vk))
        if not m > 0.0:
            problems.append(f"k = {k}: restored moment {m:.3e} not positive")
        sups.append(float(np.max(np.abs(vk - v))))
    if not sups[0] > sups[1] > sups[2]:
        problems.append(f"perturbation sizes not decreasing: {sups}")
    _report("sign-hypothesis", problems)


def test_repeat_run_determinism(tmp_path):
    problems = []
    payloads = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        proc = subprocess.run(
            [sys.executable, "-m", "qflow.cli_runner", "run",
             "--case", "caseA", "--t-end", "0.02", "--out", str(out)],
            capture_output=True, text=True, cwd=str(tmp_path))
        if proc.returncode != 0:
            problems.append(f"run {i} exited {proc.returncode}: "
                            f"{proc.stderr.strip()[:200]}")
            continue
        payloads.append((out / "series.csv").read_bytes())
    if len(payloads) == 2:
        if not payloads[0]:
            problems.append("empty time series")
        if payloads[0] != payloads[1]:
            problems.append("repeated run produced a different series.csv")
    _report("determinism", problems)
