"""Time integration of the conformal curvature flow.

The evolution is du/dt = -1/2 e^{-nu}(P u + Q0) + 1/2 k_p f / int(f e^{nu}).
Constants are equilibria when f and Q0 are constant, the conformal volume
int e^{nu} is conserved exactly by the semi-discrete system, and the energy
II_f decreases along solutions; the integrators here are chosen and capped
so those structural facts survive time discretization to stated tolerances.

Schemes: classical rk4 with a stiffness-derived step cap (default), an
embedded 5(4) pair with error control ("adaptive"), and a Lawson
integrating-factor rk4 ("ifrk4") that treats a frozen mean-coefficient
linear part exactly, useful for long smooth decay phases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log, sqrt

import numpy as np

from .conformal_operator import (ConformalBackground, ExponentCapError,
                                 conformal_weight, project_kernel)
from .diagnostics import DiagnosticRow

SCHEMES = ("rk4", "adaptive", "ifrk4")

# Cash-Karp 5(4) embedded pair
_CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


@dataclass(frozen=True)
class FlowState:
    t: float
    u: np.ndarray
    weight: np.ndarray      # cached e^{n u}
    volume: float           # cached integral of the weight


def make_state(t: float, u: np.ndarray, background: ConformalBackground) -> FlowState:
    w = conformal_weight(u, background.n)
    return FlowState(t=t, u=u, weight=w, volume=background.grid.integrate(w))


@dataclass
class FlowConfig:
    background: ConformalBackground
    f: np.ndarray
    u0: np.ndarray
    scheme: str = "rk4"
    dt: float | None = None          # fixed step override; None = stability-derived
    dt_min: float = 1e-7
    dt_max: float = 0.05
    c_stab: float = 1.0
    atol: float = 1e-9               # adaptive scheme error control
    rtol: float = 1e-8
    t_end: float = 30.0
    conv_tol: float = 1e-8           # on ||du/dt||_L2 / sqrt(volume)
    u_max_blowup: float = 25.0
    renormalize: bool = False
    sample_every: int = 100

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if float(np.min(self.f)) <= 0.0:
            raise ValueError("prescribed curvature weight f must be positive")
        if not (self.dt_min < self.dt_max):
            raise ValueError("dt_min must be below dt_max")
        for name in ("atol", "rtol", "conv_tol", "c_stab", "u_max_blowup"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError("fixed dt must be positive")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


@dataclass(frozen=True)
class TerminationStatus:
    kind: str               # converged | blowup | maxtime | error
    t_final: float
    reason: str


@dataclass
class FlowRunResult:
    status: TerminationStatus
    final_state: FlowState
    rows: list
    V0: float
    max_volume_drift: float
    max_ii_violation: float
    accepted_steps: int
    rejected_steps: int


def _rhs_parts(u: np.ndarray, background: ConformalBackground, f: np.ndarray,
               wf: np.ndarray):
    """Velocity field plus every intermediate worth reusing."""
    grid = background.grid
    en = np.exp(-background.n * u)
    w = 1.0 / en
    intf = float(np.vdot(wf, w))
    Pu = grid.synthesize(background.operator.symbol * grid.analyze(u))
    r = -0.5 * en * (Pu + background.q0) + (0.5 * background.k_p / intf) * f
    return r, Pu, en, w, intf


def rhs(state: FlowState, config: FlowConfig) -> np.ndarray:
    """Flow velocity at the state; raises past the exponent cap."""
    conformal_weight(state.u, config.background.n)   # cap guard
    wf = config.background.grid.weights * config.f
    assert float(np.vdot(wf, state.weight)) > 0.0
    return _rhs_parts(state.u, config.background, config.f, wf)[0]


def _rhs_only(u, background, f, wf):
    return _rhs_parts(u, background, f, wf)[0]


def step_rk4(state: FlowState, dt: float, config: FlowConfig,
             k1: np.ndarray | None = None) -> FlowState:
    """One classical Runge-Kutta step (negative dt allowed for probes)."""
    bg = config.background
    wf = bg.grid.weights * config.f
    u = state.u
    if k1 is None:
        k1 = _rhs_only(u, bg, config.f, wf)
    k2 = _rhs_only(u + 0.5 * dt * k1, bg, config.f, wf)
    k3 = _rhs_only(u + 0.5 * dt * k2, bg, config.f, wf)
    k4 = _rhs_only(u + dt * k3, bg, config.f, wf)
    return make_state(state.t + dt, u + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4), bg)


def step_ck54(state: FlowState, dt: float, config: FlowConfig,
              k1: np.ndarray | None = None) -> tuple[FlowState, float]:
    """One embedded Cash-Karp 5(4) step; returns (trial state, error norm).

    The error norm is the rms of the component error against atol + rtol
    scaling; <= 1 means the step meets the configured tolerances.
    """
    bg = config.background
    wf = bg.grid.weights * config.f
    u = state.u
    ks = [k1 if k1 is not None else _rhs_only(u, bg, config.f, wf)]
    for row in _CK_A[1:]:
        stage = u + dt * sum(a * k for a, k in zip(row, ks))
        ks.append(_rhs_only(stage, bg, config.f, wf))
    u5 = u + dt * sum(b * k for b, k in zip(_CK_B5, ks) if b)
    u4 = u + dt * sum(b * k for b, k in zip(_CK_B4, ks) if b)
    scale = config.atol + config.rtol * np.maximum(np.abs(u), np.abs(u5))
    err = float(np.sqrt(np.mean(((u5 - u4) / scale) ** 2)))
    return make_state(state.t + dt, u5, bg), err


def step_ifrk4(state: FlowState, dt: float, config: FlowConfig) -> FlowState:
    """Lawson rk4: exact exponential of the frozen mean-coefficient linear part.

    The linear term -1/2 e^{-nu} P u is approximated by -1/2 cbar P u with
    cbar the volume average of e^{-nu}, which is diagonal in mode space and
    integrated exactly; only the remainder is treated explicitly.  Stable at
    steps well beyond the rk4 stiffness cap once the solution is smooth.
    """
    bg = config.background
    grid = bg.grid
    wf = grid.weights * config.f
    u = state.u
    cbar = grid.integrate(1.0 / state.weight) / grid.volume
    A = -0.5 * cbar * bg.operator.symbol
    E1 = np.exp(dt * A)
    Eh = np.exp(0.5 * dt * A)

    def remainder(v):
        r, Pu, _, _, _ = _rhs_parts(v, bg, config.f, wf)
        return r + 0.5 * cbar * Pu

    def expmap(E, w):
        # e^{tA} acts diagonally on resolved modes and as the identity on
        # off-band content (the operator vanishes there)
        return w + grid.synthesize((E - 1.0) * grid.analyze(w))

    k1 = remainder(u)
    ua = expmap(Eh, u + 0.5 * dt * k1)
    k2 = remainder(ua)
    ub = expmap(Eh, u) + 0.5 * dt * k2
    k3 = remainder(ub)
    uc = expmap(E1, u) + dt * expmap(Eh, k3)
    k4 = remainder(uc)
    unew = (expmap(E1, u + (dt / 6.0) * k1)
            + (dt / 3.0) * expmap(Eh, k2 + k3) + (dt / 6.0) * k4)
    return make_state(state.t + dt, unew, bg)


def step(state: FlowState, dt: float, config: FlowConfig):
    """One step of the configured scheme.

    Returns (state, error_norm) where the error norm is None for the
    non-embedded schemes.
    """
    if config.scheme == "adaptive":
        return step_ck54(state, dt, config)
    if config.scheme == "ifrk4":
        return step_ifrk4(state, dt, config), None
    return step_rk4(state, dt, config), None


def stability_dt(state: FlowState, config: FlowConfig) -> float:
    """Explicit-scheme step cap c_stab / (max e^{-nu} * sigma_max),
    clamped to [dt_min, dt_max]."""
    raw = _stability_raw(state, config)
    return min(max(raw, config.dt_min), config.dt_max)


def _stability_raw(state: FlowState, config: FlowConfig) -> float:
    emax = float(np.max(1.0 / state.weight))
    return config.c_stab / (emax * config.background.operator.sigma_max)


def renormalize_volume(state: FlowState, V0: float,
                       n: int) -> FlowState:
    """Shift u by a constant so the conformal volume returns to V0."""
    if state.volume <= 0.0 or V0 <= 0.0:
        raise ValueError("volumes must be positive")
    c = V0 / state.volume
    if c == 1.0:
        return state
    return FlowState(t=state.t, u=state.u + log(c) / n,
                     weight=state.weight * c, volume=V0)


def run(config: FlowConfig) -> FlowRunResult:
    """Advance the flow to convergence, blow-up, or the time horizon.

    Deterministic for a fixed config.  Emits one diagnostic row every
    sample_every accepted steps plus the initial and final states; tracks
    worst-case volume drift and energy monotonicity violation per accepted
    step along the way.
    """
    bg = config.background
    grid = bg.grid
    n = bg.n
    W = grid.weights
    wf = W * config.f
    wq = W * bg.q0
    wphi = [W * p for p in bg.moment_basis]
    sqrt_vol = sqrt(grid.volume)
    resid_scale = grid.l2_norm(bg.q0) or 1.0
    sigma_max = bg.operator.sigma_max

    state = make_state(0.0, np.array(config.u0, dtype=float, copy=True), bg)
    V0 = state.volume
    rows: list[DiagnosticRow] = []
    prev_ii = None
    max_ii_violation = 0.0
    max_drift = 0.0
    accepted = 0
    rejected = 0
    dt_last = 0.0
    dt_next = None
    status = None

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        while True:
            r, Pu, en, w, intf = _rhs_parts(state.u, bg, config.f, wf)
            conv = sqrt(max(float(np.vdot(W, r * r)), 0.0)) / sqrt_vol
            dirichlet = float(np.vdot(W, Pu * state.u))
            ii = (0.5 * n * dirichlet + n * float(np.vdot(wq, state.u))
                  - bg.k_p * log(intf))
            if prev_ii is not None and ii > prev_ii:
                max_ii_violation = max(max_ii_violation, ii - prev_ii)
            prev_ii = ii
            drift = abs(state.volume - V0) / V0
            max_drift = max(max_drift, drift)

            def current_row(dt_col):
                proj = project_kernel(state.u, bg)
                return DiagnosticRow(
                    t=state.t, volume=state.volume, ii=ii, dirichlet=dirichlet,
                    a0=proj.a0, a=tuple(float(v) for v in proj.a),
                    sum_abs_a=proj.sum_abs_a,
                    moments=tuple(float(np.vdot(wp, w)) for wp in wphi),
                    residual=2.0 * conv * sqrt_vol / resid_scale,
                    min_u=float(state.u.min()), max_u=float(state.u.max()),
                    dt=dt_col)

            emitted = False
            if accepted % config.sample_every == 0:
                rows.append(current_row(dt_last))
                emitted = True

            if conv < config.conv_tol:
                status = TerminationStatus("converged", state.t,
                                           f"residual metric {conv:.3e} below tol")
                break
            if state.t >= config.t_end * (1.0 - 1e-14):
                status = TerminationStatus("maxtime", state.t, "time horizon reached")
                break
            amp = float(np.max(np.abs(state.u)))
            if amp > config.u_max_blowup:
                status = TerminationStatus("blowup", state.t,
                                           f"max|u| = {amp:.3f} exceeded threshold")
                break

            raw = _stability_raw(state, config)
            if config.dt is not None:
                dt = config.dt
            elif config.scheme == "adaptive":
                dt = dt_next if dt_next is not None else min(raw, config.dt_max)
            else:
                if raw < config.dt_min:
                    status = TerminationStatus(
                        "blowup", state.t,
                        f"stability step {raw:.3e} collapsed below dt_min")
                    break
                dt = min(max(raw, config.dt_min), config.dt_max)
            dt = min(dt, config.t_end - state.t)

            try:
                if config.scheme == "adaptive" and config.dt is None:
                    while True:
                        trial, err = step_ck54(state, dt, config, k1=r)
                        if np.isfinite(err) and err <= 1.0:
                            grow = min(5.0, max(0.2, 0.9 * err ** -0.2 if err > 0 else 5.0))
                            dt_next = min(dt * grow, _stability_raw(state, config),
                                          config.dt_max)
                            break
                        rejected += 1
                        shrink = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.25)
                        dt *= shrink
                        if dt < config.dt_min:
                            trial = None
                            break
                    if trial is None:
                        if np.isfinite(state.u).all():
                            status = TerminationStatus(
                                "blowup", state.t,
                                f"adaptive step collapsed below dt_min {config.dt_min:g}")
                        else:
                            status = TerminationStatus("error", state.t,
                                                       "nonfinite state")
                        break
                    new_state = trial
                elif config.scheme == "adaptive":
                    new_state, _ = step_ck54(state, dt, config, k1=r)
                elif config.scheme == "ifrk4":
                    new_state = step_ifrk4(state, dt, config)
                else:
                    new_state = step_rk4(state, dt, config, k1=r)
            except ExponentCapError as e:
                status = TerminationStatus("blowup", state.t, str(e))
                break

            if not np.isfinite(new_state.u).all():
                status = TerminationStatus("error", state.t,
                                           "nonfinite values after step")
                break
            if config.renormalize:
                new_state = renormalize_volume(new_state, V0, n)
            state = new_state
            dt_last = dt
            accepted += 1

        if not emitted:
            rows.append(current_row(dt_last))

    return FlowRunResult(status=status, final_state=state, rows=rows, V0=V0,
                         max_volume_drift=max_drift,
                         max_ii_violation=max_ii_violation,
                         accepted_steps=accepted, rejected_steps=rejected)
