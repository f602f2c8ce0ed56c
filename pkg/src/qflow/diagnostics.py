"""Diagnostic quantities: energy, moments, residuals, and the blow-up bound.

Everything here is a pure function of a field or a recorded time series, so
the flow engine can be cross-checked against independent reimplementations
of the same formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np

from .conformal_operator import ConformalBackground, apply_operator, conformal_weight


class MomentHypothesisError(RuntimeError):
    """The tracked kernel moment of the initial data vanishes."""


@dataclass(frozen=True)
class DiagnosticRow:
    """One sampled instant of a flow run (serializes to one CSV record)."""

    t: float
    volume: float
    ii: float               # Lyapunov energy II_f
    dirichlet: float        # integral of (P u) * u
    a0: float               # constant part of the kernel projection
    a: tuple                # remaining kernel projection coefficients
    sum_abs_a: float
    moments: tuple          # integral of phi_j e^{n u} per moment-basis field
    residual: float         # normalized stationarity residual
    min_u: float
    max_u: float
    dt: float


@dataclass
class BlowupCertificate:
    """Finite-time blow-up certificate for positive total curvature.

    T_bound_proof carries the extra 1/n factor relative to T_bound_theorem;
    both are recorded, the tighter proof variant is the one acceptance
    checks against.
    """

    phi_id: str
    sup_phi: float
    V0: float
    m0: float
    T_bound_proof: float
    T_bound_theorem: float
    rate_theory: float
    T_observed: float | None = None
    rate_fit: float | None = None

    def to_dict(self) -> dict:
        return {
            "phi_id": self.phi_id,
            "sup_phi": self.sup_phi,
            "V0": self.V0,
            "m0": self.m0,
            "T_bound_proof": self.T_bound_proof,
            "T_bound_theorem": self.T_bound_theorem,
            "T_observed": self.T_observed,
            "rate_fit": self.rate_fit,
            "rate_theory": self.rate_theory,
        }


def flow_energy(u: np.ndarray, background: ConformalBackground,
                f: np.ndarray) -> float:
    """Lyapunov energy II_f = (n/2) <P u, u> + n int(Q0 u) - k_p log int(f e^{nu})."""
    grid = background.grid
    n = background.n
    w = conformal_weight(u, n)
    intf = grid.integrate(f * w)
    assert intf > 0.0, "f > 0 makes the conformal volume positive"
    Pu = apply_operator(background.operator, u)
    return (0.5 * n * grid.inner_product(Pu, u)
            + n * grid.integrate(background.q0 * u)
            - background.k_p * log(intf))


def kernel_moment(u: np.ndarray, phi: np.ndarray,
                  background: ConformalBackground) -> float:
    """Weighted kernel moment: integral of phi e^{n u}."""
    w = conformal_weight(u, background.n)
    return background.grid.integrate(phi * w)


def moment_law_prediction(t: float, m0: float, background: ConformalBackground,
                          V0: float, f: np.ndarray | None = None) -> float:
    """Closed-form moment evolution m0 * exp(n k_p t / (2 V0)).

    The exponential law is derived for constant f only; passing a
    non-constant f is rejected.
    """
    if f is not None and float(np.ptp(f)) > 1e-14 * float(np.max(np.abs(f))):
        raise ValueError("moment law requires constant f")
    return m0 * np.exp(background.n * background.k_p * t / (2.0 * V0))


def flow_residual(u: np.ndarray, background: ConformalBackground,
                  f: np.ndarray) -> tuple[np.ndarray, float]:
    """Stationarity residual e^{-nu}(P u + Q0) - k_p f / int(f e^{nu}).

    The norm is L2, normalized by the L2 norm of Q0 (or left absolute when
    Q0 vanishes identically, as in the flat sanity case).
    """
    grid = background.grid
    wminus = conformal_weight(u, background.n, sign=-1)
    wplus = 1.0 / wminus
    intf = grid.integrate(f * wplus)
    Pu = apply_operator(background.operator, u)
    field = wminus * (Pu + background.q0) - (background.k_p / intf) * f
    scale = grid.l2_norm(background.q0)
    if scale == 0.0:
        scale = 1.0
    return field, grid.l2_norm(field) / scale


def dissipation_check(state, config, dt_probe: float) -> tuple[float, float, float]:
    """Centered-difference energy slope against -2n int e^{nu} |du/dt|^2.

    Probes one explicit step forward and one backward from the state; the
    reported gap shrinks quadratically in dt_probe.
    """
    from . import flow_engine  # local import, avoids a module cycle

    bg = config.background
    r = flow_engine.rhs(state, config)
    rhs_val = -2.0 * bg.n * bg.grid.integrate(state.weight * r * r)
    plus = flow_engine.step_rk4(state, dt_probe, config)
    minus = flow_engine.step_rk4(state, -dt_probe, config)
    lhs = (flow_energy(plus.u, bg, config.f)
           - flow_energy(minus.u, bg, config.f)) / (2.0 * dt_probe)
    return lhs, rhs_val, abs(lhs - rhs_val)


def apriori_monitors(rows: list, t_final: float | None = None) -> dict:
    """Empirical boundedness flags for the convergence-regime monitors.

    For each monitored series (Dirichlet energy, |a0|, sum |a_j|) the
    maximum over the first quarter of the run is compared with the overall
    maximum; a flag is raised on growth beyond 10x.
    """
    if not rows:
        raise ValueError("no rows to monitor")
    if t_final is None:
        t_final = rows[-1].t
    cutoff = t_final / 4.0
    series = {
        "dirichlet": [abs(r.dirichlet) for r in rows],
        "a0": [abs(r.a0) for r in rows],
        "sum_abs_a": [r.sum_abs_a for r in rows],
    }
    early = [i for i, r in enumerate(rows) if r.t <= cutoff] or [0]
    report = {}
    for name, vals in series.items():
        q1 = max(vals[i] for i in early)
        allmax = max(vals)
        report[name] = {
            "first_quarter_max": q1,
            "overall_max": allmax,
            "flag": bool(allmax > 10.0 * q1 and allmax > 1e-12),
        }
    return report


def fit_moment_rate(rows: list, j: int = 0) -> float | None:
    """Least-squares slope of log |m_phi_j(t)| over the recorded rows."""
    ts, ys = [], []
    for r in rows:
        if j < len(r.moments) and abs(r.moments[j]) > 0.0:
            ts.append(r.t)
            ys.append(log(abs(r.moments[j])))
    if len(ts) < 2 or ts[-1] == ts[0]:
        return None
    return float(np.polyfit(np.asarray(ts), np.asarray(ys), 1)[0])


def moment_law_max_error(rows: list, background: ConformalBackground,
                         min_m0: float = 1e-8) -> float | None:
    """Worst relative deviation of the recorded moments from the exponential
    law, over output times and moment indices with |m0| above min_m0."""
    if not rows or not rows[0].moments:
        return None
    V0 = rows[0].volume
    rate = background.n * background.k_p / (2.0 * V0)
    worst = None
    for j, m0 in enumerate(rows[0].moments):
        if abs(m0) <= min_m0:
            continue
        for r in rows:
            err = abs(r.moments[j] - m0 * np.exp(rate * r.t)) / abs(m0)
            worst = err if worst is None else max(worst, err)
    return worst


def blowup_bound(u0: np.ndarray, phi: np.ndarray,
                 background: ConformalBackground,
                 phi_id: str = "phi") -> BlowupCertificate:
    """Certificate with the finite-time blow-up bound for k_p > 0.

    T_bound_proof = (2 V0 / (n k_p)) log(sup|phi| V0 / |m0|) where V0 and m0
    are the conformal volume and tracked moment of the initial data; the
    theorem-statement variant without the 1/n is recorded alongside.
    """
    if background.k_p <= 0.0:
        raise ValueError("blow-up bound requires positive total curvature k_p")
    grid = background.grid
    n = background.n
    w0 = conformal_weight(u0, n)
    V0 = grid.integrate(w0)
    m0 = grid.integrate(phi * w0)
    sup_phi = float(np.max(np.abs(phi)))
    if abs(m0) <= 1e-12 * sup_phi * V0:
        raise MomentHypothesisError(
            "initial kernel moment vanishes; the bound does not apply. "
            "Perturb the initial data (perturb_initial) to restore it.")
    logterm = log(sup_phi * V0 / abs(m0))
    T_proof = (2.0 * V0 / (n * background.k_p)) * logterm
    return BlowupCertificate(
        phi_id=phi_id,
        sup_phi=sup_phi,
        V0=V0,
        m0=m0,
        T_bound_proof=T_proof,
        T_bound_theorem=n * T_proof,
        rate_theory=n * background.k_p / (2.0 * V0),
    )
