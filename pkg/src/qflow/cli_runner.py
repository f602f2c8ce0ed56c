"""Command-line entry points: configured runs, artifacts, and certificates.

Config files are plain ``key = value`` text ('#' starts a comment).  A
``case`` line loads one of the built-in presets; later lines override
individual fields, so put ``case`` first.  Presets:

  caseA   negative total curvature, random initial data; converges
  caseB   positive total curvature, first-harmonic initial data; blows up
  caseB0  positive total curvature with all kernel moments zero at t=0
  caseT4  flat four-torus sanity case (k_p = 0); decays to zero curvature

Every run writes a CSV time series, a JSON manifest echoing the resolved
configuration, and, when applicable, a blow-up certificate and a
sign-hypothesis report.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from math import pi

import numpy as np

from . import __version__
from . import flow_engine
from .conformal_operator import (ConformalBackground, conformal_weight,
                                 flat_t4_operator, make_background,
                                 model_s2xt2_operator, sphere_xyz_fields,
                                 total_q_curvature, zonal_harmonic_field)
from .diagnostics import (BlowupCertificate, apriori_monitors, blowup_bound,
                          fit_moment_rate, moment_law_max_error)
from .flow_engine import FlowConfig, FlowRunResult, TerminationStatus
from .hypothesis_checker import SignPatternReport, check_sign_condition
from .spectral_geometry import ProductGrid, build_sphere_grid, build_torus_grid


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Fully resolved run configuration; defaults match the caseA preset."""

    case: str | None = None
    manifold: str = "s2xt2"          # "s2xt2" or "t4"
    L_max: int = 8
    K_max: int = 4
    L: float = 2.0 * pi
    q0_const: float = -2.0
    f_mode: str = "const"            # "const" or "bump"
    f_value: float = 1.0
    f_bump_amp: float = 0.3
    u0_mode: str = "random"          # "random", "zonal", "constant"
    u0_amp: float = 0.3
    u0_degree: int = 1               # zonal harmonic degree
    u0_band_l: int = 2               # random band: first-factor cutoff
    u0_band_k: int = 1               # random band: second-factor cutoff
    u0_perturb_amp: float = 0.0      # extra seeded random band component
    scheme: str = "rk4"
    dt: float | None = None          # fixed step; None = stability-derived
    dt_min: float = 1e-7
    dt_max: float = 0.05
    c_stab: float = 1.0
    atol: float = 1e-9
    rtol: float = 1e-8
    t_end: float = 30.0
    conv_tol: float = 1e-8
    u_max_blowup: float = 25.0
    renormalize: bool = False
    sample_every: int = 100
    seed: int = 0
    out: str | None = None


PRESETS = {
    "caseA": dict(manifold="s2xt2", q0_const=-2.0, f_mode="const",
                  u0_mode="random", u0_amp=0.3, scheme="rk4", c_stab=1.0,
                  t_end=30.0, conv_tol=1e-8, seed=0),
    # quartered step keeps the recorded moment law inside 1e-6 relative
    "caseB": dict(manifold="s2xt2", q0_const=2.0, f_mode="const",
                  u0_mode="zonal", u0_degree=1, u0_amp=0.1, scheme="rk4",
                  c_stab=0.25, t_end=5.0, seed=0),
    "caseB0": dict(manifold="s2xt2", q0_const=2.0, f_mode="const",
                   u0_mode="zonal", u0_degree=2, u0_amp=0.1, scheme="rk4",
                   c_stab=0.25, t_end=5.0, seed=0),
    # halved step cap: the mild 256 stiffness bound otherwise leaves
    # visible O(dt^5) volume drift per step
    "caseT4": dict(manifold="t4", K_max=2, L=2.0 * pi, q0_const=0.0,
                   f_mode="const", u0_mode="random", u0_amp=0.1, scheme="rk4",
                   c_stab=0.5, t_end=80.0, seed=0),
}

_INT_KEYS = {"L_max", "K_max", "u0_degree", "u0_band_l", "u0_band_k",
             "sample_every", "seed"}
_FLOAT_KEYS = {"L", "q0_const", "f_value", "f_bump_amp", "u0_amp",
               "u0_perturb_amp", "dt_min", "dt_max", "c_stab", "atol", "rtol",
               "t_end", "conv_tol", "u_max_blowup"}
_STR_KEYS = {"manifold", "f_mode", "u0_mode", "scheme", "out"}
_BOOL_KEYS = {"renormalize"}


def preset_config(case: str) -> RunConfig:
    if case not in PRESETS:
        raise ConfigError(f"unknown case {case!r}; presets: "
                          + ", ".join(sorted(PRESETS)))
    cfg = RunConfig(case=case)
    for key, val in PRESETS[case].items():
        setattr(cfg, key, val)
    return cfg


def _apply_key(cfg: RunConfig, key: str, val: str, where: str) -> None:
    if key == "case":
        try:
            base = preset_config(val)
        except ConfigError as e:
            raise ConfigError(f"{where}: {e}") from None
        cfg.__dict__.update(base.__dict__)
        return
    if key == "dt":
        if val.lower() in ("auto", "none"):
            cfg.dt = None
            return
        key_set = _FLOAT_KEYS | {"dt"}
    else:
        key_set = None
    try:
        if key in _INT_KEYS:
            setattr(cfg, key, int(val))
        elif key in _FLOAT_KEYS or (key_set and key in key_set):
            setattr(cfg, key, float(val))
        elif key in _BOOL_KEYS:
            low = val.lower()
            if low in ("on", "true", "1", "yes"):
                setattr(cfg, key, True)
            elif low in ("off", "false", "0", "no"):
                setattr(cfg, key, False)
            else:
                raise ValueError(val)
        elif key in _STR_KEYS:
            setattr(cfg, key, val)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{where}: invalid value {val!r} for key {key!r}") from None


def validate_config(cfg: RunConfig, where: str = "config") -> RunConfig:
    def bad(msg):
        raise ConfigError(f"{where}: {msg}")

    if cfg.manifold not in ("s2xt2", "t4"):
        bad(f"manifold must be 's2xt2' or 't4', got {cfg.manifold!r}")
    if cfg.L_max < 4:
        bad("L_max must be >= 4")
    if cfg.K_max < 2:
        bad("K_max must be >= 2")
    if cfg.L <= 0:
        bad("torus side L must be positive")
    if cfg.f_mode not in ("const", "bump"):
        bad(f"f_mode must be 'const' or 'bump', got {cfg.f_mode!r}")
    if cfg.f_value <= 0:
        bad("f_value must be positive")
    if cfg.f_mode == "bump" and cfg.manifold != "s2xt2":
        bad("f_mode 'bump' is defined on the sphere-torus manifold only")
    if cfg.u0_mode not in ("random", "zonal", "constant"):
        bad(f"u0_mode must be 'random', 'zonal', or 'constant', got {cfg.u0_mode!r}")
    if cfg.u0_mode == "zonal" and cfg.manifold != "s2xt2":
        bad("u0_mode 'zonal' needs a sphere factor")
    if cfg.u0_degree < 1:
        bad("u0_degree must be >= 1")
    if cfg.u0_band_l < 0 or cfg.u0_band_k < 0:
        bad("band cutoffs must be nonnegative")
    if cfg.u0_perturb_amp < 0:
        bad("u0_perturb_amp must be nonnegative")
    if cfg.scheme not in flow_engine.SCHEMES:
        bad(f"scheme must be one of {flow_engine.SCHEMES}, got {cfg.scheme!r}")
    if cfg.seed < 0:
        bad("seed must be nonnegative")
    if cfg.t_end <= 0:
        bad("t_end must be positive")
    if cfg.sample_every < 1:
        bad("sample_every must be >= 1")
    for name in ("dt_min", "dt_max", "c_stab", "atol", "rtol", "conv_tol",
                 "u_max_blowup"):
        if getattr(cfg, name) <= 0:
            bad(f"{name} must be positive")
    if cfg.dt is not None and cfg.dt <= 0:
        bad("dt must be positive (or 'auto')")
    if not cfg.dt_min < cfg.dt_max:
        bad("dt_min must be below dt_max")
    return cfg


def parse_config(path: str) -> RunConfig:
    """Read and validate a key = value config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    cfg = RunConfig()
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {text!r}")
        key, _, val = text.partition("=")
        _apply_key(cfg, key.strip(), val.strip(), f"{path}:{lineno}")
    return validate_config(cfg, where=path)


# -- field construction -------------------------------------------------

def build_grid(cfg: RunConfig) -> ProductGrid:
    if cfg.manifold == "s2xt2":
        return ProductGrid(build_sphere_grid(cfg.L_max),
                           build_torus_grid(cfg.K_max, cfg.L))
    return ProductGrid(build_torus_grid(cfg.K_max, cfg.L),
                       build_torus_grid(cfg.K_max, cfg.L))


def build_background(cfg: RunConfig, grid: ProductGrid) -> ConformalBackground:
    op = (model_s2xt2_operator(grid) if cfg.manifold == "s2xt2"
          else flat_t4_operator(grid))
    return make_background(op, grid.constant_field(cfg.q0_const))


def _band_indices(factor, band: int) -> list:
    if factor.kind == "sphere":
        return [i for i, (l, _) in enumerate(factor.mode_labels) if l <= band]
    return [i for i, (kvec, _) in enumerate(factor.mode_labels)
            if max(abs(kvec[0]), abs(kvec[1])) <= band]


def unit_random_band(grid: ProductGrid, rng: np.random.Generator,
                     band1: int, band2: int) -> np.ndarray:
    """Random band-limited field with unit rms amplitude."""
    sel1 = _band_indices(grid.factors[0], band1)
    sel2 = _band_indices(grid.factors[1], band2)
    coef = np.zeros(grid.mode_shape)
    coef[np.ix_(sel1, sel2)] = rng.standard_normal((len(sel1), len(sel2)))
    u = grid.synthesize(coef)
    nrm = grid.l2_norm(u)
    if nrm == 0.0:
        raise ValueError("degenerate random draw")
    return u * (np.sqrt(grid.volume) / nrm)


def build_initial_field(cfg: RunConfig, grid: ProductGrid) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    if cfg.u0_mode == "constant":
        u = grid.constant_field(cfg.u0_amp)
    elif cfg.u0_mode == "zonal":
        u = cfg.u0_amp * zonal_harmonic_field(grid, cfg.u0_degree)
    else:
        u = cfg.u0_amp * unit_random_band(grid, rng, cfg.u0_band_l,
                                          cfg.u0_band_k)
    if cfg.u0_perturb_amp > 0.0:
        u = u + cfg.u0_perturb_amp * unit_random_band(grid, rng, cfg.u0_band_l,
                                                      cfg.u0_band_k)
    return u


def bump_profile(grid: ProductGrid) -> np.ndarray:
    """Deterministic smooth profile in [0, 1], band-limited by construction.

    Built from explicit products of low harmonics so a flow started with
    f = 1 + amp * bump can still reach a spectrally exact steady state.
    """
    x, _, z = sphere_xyz_fields(grid)
    p2 = zonal_harmonic_field(grid, 2)
    f2 = grid.factors[1]
    c1 = np.cos(2.0 * pi * f2.nodes[:, 0] / f2.size)[None, :]
    s2 = np.sin(2.0 * pi * f2.nodes[:, 1] / f2.size)[None, :]
    raw = z + 0.6 * x * c1 + 0.4 * p2 * s2
    lo, hi = float(raw.min()), float(raw.max())
    return (raw - lo) / (hi - lo)


def build_prescribed_field(cfg: RunConfig, grid: ProductGrid) -> np.ndarray:
    f = grid.constant_field(cfg.f_value)
    if cfg.f_mode == "bump":
        f = f + cfg.f_bump_amp * bump_profile(grid)
    return f


# -- run orchestration --------------------------------------------------

MOMENT_EPS = 1e-12      # relative floor below which a moment counts as zero


@dataclass
class RunRecord:
    config: RunConfig
    manifest: dict
    status: TerminationStatus
    result: FlowRunResult
    certificate: BlowupCertificate | None
    certificate_note: str | None
    sign_report: SignPatternReport | None


def _initial_certificate(u0: np.ndarray, background: ConformalBackground):
    """Blow-up certificate for the kernel direction with the largest initial
    moment, or a note when every tracked moment vanishes."""
    grid = background.grid
    x, y, z = sphere_xyz_fields(grid)
    candidates = (("sphere_z", z, 0), ("sphere_x", x, 1), ("sphere_y", y, 2))
    w0 = conformal_weight(u0, background.n)
    V0 = grid.integrate(w0)
    moments = [grid.integrate(phi * w0) for _, phi, _ in candidates]
    best = int(np.argmax(np.abs(moments)))
    phi_id, phi, row_index = candidates[best]
    if abs(moments[best]) <= MOMENT_EPS * V0:
        return None, None, ("all tracked kernel moments vanish at t = 0; the "
                            "blow-up bound does not apply (perturb_initial "
                            "can restore a nonzero moment)")
    return blowup_bound(u0, phi, background, phi_id=phi_id), row_index, None


def make_flow_config(cfg: RunConfig, background: ConformalBackground,
                     f: np.ndarray, u0: np.ndarray) -> FlowConfig:
    return FlowConfig(background=background, f=f, u0=u0, scheme=cfg.scheme,
                      dt=cfg.dt, dt_min=cfg.dt_min, dt_max=cfg.dt_max,
                      c_stab=cfg.c_stab, atol=cfg.atol, rtol=cfg.rtol,
                      t_end=cfg.t_end, conv_tol=cfg.conv_tol,
                      u_max_blowup=cfg.u_max_blowup,
                      renormalize=cfg.renormalize,
                      sample_every=cfg.sample_every)


def run_case(cfg: RunConfig) -> RunRecord:
    """Build the configured problem, integrate it, and assemble artifacts."""
    validate_config(cfg)
    grid = build_grid(cfg)
    background = build_background(cfg, grid)
    f = build_prescribed_field(cfg, grid)
    u0 = build_initial_field(cfg, grid)

    sign_report = (check_sign_condition(background.moment_basis, grid)
                   if background.nu else None)
    certificate = cert_row = None
    cert_note = None
    if background.k_p > 0.0 and background.nu:
        certificate, cert_row, cert_note = _initial_certificate(u0, background)

    result = flow_engine.run(make_flow_config(cfg, background, f, u0))

    if certificate is not None:
        if result.status.kind == "blowup":
            certificate.T_observed = result.status.t_final
        certificate.rate_fit = fit_moment_rate(result.rows, j=cert_row)

    manifest = _build_manifest(cfg, grid, background, f, result, sign_report,
                               certificate, cert_note)
    return RunRecord(config=cfg, manifest=manifest, status=result.status,
                     result=result, certificate=certificate,
                     certificate_note=cert_note, sign_report=sign_report)


def _build_manifest(cfg, grid, background, f, result, sign_report,
                    certificate, cert_note) -> dict:
    manifest = {
        "version": __version__,
        "config": asdict(cfg),
        "grid": {
            "factors": [
                {"kind": fac.kind, "resolution": fac.resolution,
                 "size": fac.size, "nodes": fac.n_nodes, "modes": fac.n_modes}
                for fac in grid.factors
            ],
            "n_nodes": grid.n_nodes,
            "n_modes": grid.n_modes,
            "volume": grid.volume,
        },
        "operator": {
            "name": background.operator.name,
            "sigma_max": background.operator.sigma_max,
            "lambda1": background.lambda1,
            "kernel_dim": background.operator.kernel_dim,
        },
        "background": {
            "n": background.n,
            "k_p": background.k_p,
            "total_q_check": total_q_curvature(background),
            "nu": background.nu,
        },
        "initial": {"V0": result.V0},
        "termination": {"kind": result.status.kind,
                        "t_final": result.status.t_final,
                        "reason": result.status.reason},
        "steps": {"accepted": result.accepted_steps,
                  "rejected": result.rejected_steps},
        "conservation": {"max_volume_drift": result.max_volume_drift,
                         "max_ii_violation": result.max_ii_violation},
    }
    if background.k_p < 0.0:
        manifest["monitors"] = apriori_monitors(result.rows)
    if background.nu and background.k_p != 0.0 and float(np.ptp(f)) == 0.0:
        manifest["moment_law_max_error"] = moment_law_max_error(result.rows,
                                                                background)
    if sign_report is not None:
        manifest["hypothesis"] = {"verdict": sign_report.verdict,
                                  "C": sign_report.C, "r0": sign_report.r0}
    if certificate is not None:
        manifest["certificate"] = certificate.to_dict()
    if cert_note:
        manifest["certificate_note"] = cert_note
    return manifest


# -- output writing -----------------------------------------------------

_FMT = "%.17g"


def write_series_csv(rows, nu: int, path: str) -> None:
    """Time series with '.' decimals, '\\n' endings, 17 significant digits."""
    header = (["t", "volume", "II_f", "dirichlet", "a0"]
              + [f"a{j}" for j in range(1, nu + 1)]
              + ["sum_abs_a"]
              + [f"m_phi_{j}" for j in range(1, nu + 1)]
              + ["residual", "min_u", "max_u", "dt"])
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            vals = (r.t, r.volume, r.ii, r.dirichlet, r.a0, *r.a, r.sum_abs_a,
                    *r.moments, r.residual, r.min_u, r.max_u, r.dt)
            fh.write(",".join(_FMT % v for v in vals) + "\n")


def write_outputs(record: RunRecord, out_dir: str) -> dict:
    """Write series/manifest/certificate/hypothesis files; returns paths.

    Every file is attempted even if an earlier one fails; failures are
    reported together at the end.
    """
    os.makedirs(out_dir, exist_ok=True)
    nu = record.manifest["background"]["nu"]
    plan = [("series", os.path.join(out_dir, "series.csv"),
             lambda p: write_series_csv(record.result.rows, nu, p)),
            ("manifest", os.path.join(out_dir, "manifest.json"),
             lambda p: _write_json(record.manifest, p))]
    if record.certificate is not None:
        plan.append(("certificate", os.path.join(out_dir, "certificate.json"),
                     lambda p: _write_json(record.certificate.to_dict(), p)))
    if record.sign_report is not None:
        plan.append(("hypothesis", os.path.join(out_dir, "hypothesis.json"),
                     lambda p: _write_json(record.sign_report.to_dict(), p)))
    written = {}
    failures = []
    for name, path, writer in plan:
        try:
            writer(path)
            written[name] = path
        except OSError as e:
            failures.append(f"{name} ({path}): {e}")
    if failures:
        raise OSError("failed to write: " + "; ".join(failures))
    return written


def _write_json(obj: dict, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- CLI ----------------------------------------------------------------

def _add_common_flags(p: argparse.ArgumentParser, with_run_flags=True) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="config file to load")
    src.add_argument("--case", metavar="NAME",
                     help="preset name: " + ", ".join(sorted(PRESETS)))
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--seed", type=int, metavar="N",
                   help="seed for randomized initial data")
    if with_run_flags:
        p.add_argument("--dt", metavar="X",
                       help="fixed time step, or 'auto' (default)")
        p.add_argument("--t-end", type=float, metavar="X", dest="t_end",
                       help="time horizon")
        p.add_argument("--renormalize", choices=("on", "off"),
                       help="constant-shift volume renormalization per step")


def _load_config(args, default_case: str) -> RunConfig:
    if getattr(args, "config", None):
        cfg = parse_config(args.config)
    elif getattr(args, "case", None):
        cfg = preset_config(args.case)
    else:
        cfg = preset_config(default_case)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "dt", None) is not None:
        _apply_key(cfg, "dt", args.dt, "--dt")
    if getattr(args, "t_end", None) is not None:
        cfg.t_end = args.t_end
    if getattr(args, "renormalize", None) is not None:
        cfg.renormalize = args.renormalize == "on"
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    return validate_config(cfg, where="options")


def _default_out(cfg: RunConfig, tag: str) -> str:
    label = cfg.case or "custom"
    return cfg.out or f"qflow_{tag}_{label}_seed{cfg.seed}"


def _exit_code(record: RunRecord) -> int:
    kind = record.status.kind
    if kind in ("converged", "maxtime"):
        return 0
    if kind == "blowup":
        if record.manifest["background"]["k_p"] <= 0.0:
            return 1
        cert = record.certificate
        if cert is None or cert.T_observed is None:
            return 0        # predicted regime, no tracked moment to bound
        return 0 if cert.T_observed <= cert.T_bound_proof else 1
    return 2


def cmd_run(args) -> int:
    cfg = _load_config(args, "caseA")
    record = run_case(cfg)
    written = write_outputs(record, _default_out(cfg, "run"))
    st = record.status
    print(f"case {cfg.case or 'custom'}: {st.kind} at t = {st.t_final:.6g} "
          f"({st.reason})")
    cons = record.manifest["conservation"]
    print(f"volume drift max {cons['max_volume_drift']:.3e}, "
          f"energy increase max {cons['max_ii_violation']:.3e}, "
          f"steps {record.result.accepted_steps}")
    if record.certificate is not None:
        c = record.certificate
        t_obs = "n/a" if c.T_observed is None else f"{c.T_observed:.6g}"
        print(f"certificate [{c.phi_id}]: T_observed {t_obs}, "
              f"T_bound_proof {c.T_bound_proof:.6g}")
    if record.certificate_note:
        print(f"note: {record.certificate_note}")
    for name, path in written.items():
        print(f"wrote {name}: {path}")
    return _exit_code(record)


def cmd_check_hypothesis(args) -> int:
    cfg = _load_config(args, "caseA")
    grid = build_grid(cfg)
    background = build_background(cfg, grid)
    if not background.nu:
        print("kernel holds constants only; sign hypothesis is vacuous")
        return 0
    report = check_sign_condition(background.moment_basis, grid)
    print(f"patterns realized: {2 ** report.nu - len(report.missing)}"
          f"/{2 ** report.nu}, verdict: {'pass' if report.verdict else 'fail'}")
    print(f"C = {report.C:.6g}, r0 = {report.r0:.6g} "
          f"(grid resolution {report.resolution})")
    for r in report.results:
        mark = "ok " if r.realized else "MISSING"
        print(f"  {r.pattern}: {mark} margin {r.margin: .6g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "hypothesis.json")
        _write_json(report.to_dict(), path)
        print(f"wrote hypothesis: {path}")
    return 0 if report.verdict else 1


def cmd_certify_blowup(args) -> int:
    if getattr(args, "config", None):
        cfg = _load_config(args, "caseB")
    else:
        cfg = _load_config(args, "caseB")
        # certification cares about the observed blow-up time, not the
        # resolved moment law, so run at the full stability step with the
        # standard perturbed initial data
        cfg.c_stab = 1.0
        cfg.u0_perturb_amp = 0.05
        validate_config(cfg)
    record = run_case(cfg)
    if record.certificate is None:
        print("no certificate: " + (record.certificate_note
                                    or "total curvature not positive"))
        return 1
    write_outputs(record, _default_out(cfg, "certify"))
    c = record.certificate
    print(f"phi = {c.phi_id}: m0 = {c.m0:.10g}, V0 = {c.V0:.10g}")
    print(f"T_bound_proof = {c.T_bound_proof:.10g}, "
          f"T_bound_theorem = {c.T_bound_theorem:.10g}")
    rate = "n/a" if c.rate_fit is None else f"{c.rate_fit:.10g}"
    print(f"rate_theory = {c.rate_theory:.10g}, rate_fit = {rate}")
    if record.status.kind != "blowup":
        print(f"FAIL: run ended with status {record.status.kind}, no blow-up")
        return 1
    print(f"T_observed = {c.T_observed:.10g}")
    if c.T_observed <= c.T_bound_proof:
        print("PASS: blow-up within the certified bound")
        return 0
    print("FAIL: blow-up after the certified bound")
    return 1


def cmd_sweep(args) -> int:
    cfg = _load_config(args, "caseT4")
    t_end = args.t_end if args.t_end is not None else 0.01
    levels = args.levels
    if levels < 2:
        raise ConfigError("--levels must be >= 2")
    grid = build_grid(cfg)
    background = build_background(cfg, grid)
    f = build_prescribed_field(cfg, grid)
    u0 = build_initial_field(cfg, grid)
    base = make_flow_config(cfg, background, f, u0)
    if cfg.dt is not None:
        dt0 = cfg.dt
    else:
        dt0 = flow_engine.stability_dt(flow_engine.make_state(0.0, u0,
                                                              background), base)
    finals = []
    dts = [dt0 / 2 ** i for i in range(levels + 1)]
    for dt in dts:
        run_cfg = replace(base, dt=dt, t_end=t_end, conv_tol=1e-300,
                          sample_every=10 ** 9)
        res = flow_engine.run(run_cfg)
        if res.status.kind == "error":
            print(f"dt = {dt:.6g}: integration failed ({res.status.reason})")
            return 2
        finals.append(res.final_state.u)
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])]
    print(f"sweep to t = {t_end:g} ({cfg.case or 'custom'}):")
    print("dt,err_vs_half,order")
    lines = ["dt,err_vs_half,order"]
    for i, d in enumerate(diffs):
        order = (np.log2(d / diffs[i + 1]) if i + 1 < len(diffs) and diffs[i + 1] > 0
                 else float("nan"))
        line = f"{_FMT % dts[i]},{_FMT % d},{order:.3f}"
        print(line)
        lines.append(line)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "sweep.csv")
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote sweep: {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qflow",
        description="Structure-preserving simulator for prescribed "
                    "Q-curvature flow on product model manifolds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a flow case and write artifacts")
    _add_common_flags(p_run)

    p_chk = sub.add_parser("check-hypothesis",
                           help="verify the nodal sign hypothesis for the "
                                "configured kernel basis")
    _add_common_flags(p_chk, with_run_flags=False)

    p_cert = sub.add_parser("certify-blowup",
                            help="run the positive-curvature case and check "
                                 "the blow-up time bound (default: caseB "
                                 "with a seeded perturbation)")
    _add_common_flags(p_cert)

    p_sw = sub.add_parser("sweep",
                          help="fixed-step convergence-order table "
                               "(halving dt, default caseT4)")
    _add_common_flags(p_sw)
    p_sw.add_argument("--levels", type=int, default=3, metavar="N",
                      help="number of dt halvings (default 3)")

    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "check-hypothesis": cmd_check_hypothesis,
                "certify-blowup": cmd_certify_blowup, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
