"""Transformer top-oil and hot-spot temperature dynamics.

Top-oil rise follows a first-order lag toward the loading-dependent
steady-state rise, discretized with the bilinear transform:

    delta[k] = (du[k] + du[k-1]) / (1 + zeta) - (1 - zeta)/(1 + zeta) * delta[k-1]

with zeta = 2 tau / dt.  Hot-spot rise is instantaneous and linear in the
effective GIC (eta = R * I_eff); the absolute hot-spot temperature is
ambient + top-oil rise + hot-spot rise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .data import ABSENT, CaseData, FieldScenario
from .dcnet import FieldVector, assemble, effective_gic, solve_dc

__all__ = [
    "apparent_power",
    "steady_rise",
    "step_topoil",
    "hotspot_rise",
    "TransformerTrace",
    "ThermalTrace",
    "simulate",
    "topoil_series",
]

Loading = Mapping[int, float] | Callable[[float], Mapping[int, float]] | None


def apparent_power(p: float, q: float) -> float:
    """sqrt(p^2 + q^2); under the dc approximation q = 0 and s = |p|."""
    return math.hypot(p, q)


def steady_rise(s: float, s_rated: float, delta_rated: float) -> float:
    """Steady-state top-oil rise [degC] for apparent loading s.

    Quadratic in the fractional loading: delta_rated * (s / s_rated)^2.
    """
    if s_rated <= 0:
        raise ValueError("rated apparent power must be > 0")
    k = s / s_rated
    return delta_rated * k * k

def step_topoil(delta_prev: float, du_prev: float, du_now: float, zeta: float) -> float:
    """One bilinear-transform step of the top-oil lag.

    Preserves fixed points exactly: constant inputs reproduce themselves.
    """
    if zeta <= 0:
        raise ValueError("zeta must be > 0")
    return (du_now + du_prev) / (1.0 + zeta) - (1.0 - zeta) / (1.0 + zeta) * delta_prev


def hotspot_rise(i_eff: float, r_coeff: float) -> float:
    """Hot-spot rise over top-oil [degC], linear in the effective GIC."""
    if i_eff < 0:
        raise ValueError("effective GIC must be >= 0")
    return r_coeff * i_eff


def topoil_series(du: np.ndarray, zeta: float, delta0: float) -> np.ndarray:
    """Run the top-oil recursion over a du series; returns delta[0..K].

    du[0] is treated as the steady input already present at the initial
    sample, i.e. the recursion pairs (du[k-1], du[k]) per step with
    delta[0] = delta0.
    """
    delta = np.empty(len(du))
    delta[0] = delta0
    for k in range(1, len(du)):
        delta[k] = step_topoil(delta[k - 1], du[k - 1], du[k], zeta)
    return delta


@dataclass(frozen=True)
class TransformerTrace:
    """Per-transformer temperature time series (arrays over the grid)."""

    branch: int            # ac branch id
    t: np.ndarray          # minutes
    i_eff: np.ndarray      # effective GIC [A]
    delta_to: np.ndarray   # top-oil rise [degC]
    eta_hs: np.ndarray     # hot-spot rise [degC]
    hotspot: np.ndarray    # absolute hot-spot [degC]
    limit: float           # applicable cap [degC]

    @property
    def violations(self) -> np.ndarray:
        return self.hotspot > self.limit

    @property
    def peak(self) -> float:
        return float(np.max(self.hotspot))


@dataclass(frozen=True)
class ThermalTrace:
    """Simulation result; traces keyed by ac branch id."""

    traces: Mapping[int, TransformerTrace]
    t: np.ndarray

    def any_violation(self) -> bool:
        return any(bool(tr.violations.any()) for tr in self.traces.values())


def _loading_at(loading: Loading, t: float) -> Mapping[int, float]:
    if loading is None:
        return {}
    if callable(loading):
        return loading(t)
    return loading


def simulate(case: CaseData, scenario: FieldScenario, *, loading: Loading = None,
             topology: Mapping[int, int] | None = None,
             dt: float | None = None) -> ThermalTrace:
    """Simulate transformer temperatures over a field scenario.

    The scenario is resampled on a uniform grid of step ``dt`` (default:
    the scenario's own dt, which must divide its span).  At every grid
    point the dc network is solved for the interpolated field to get
    effective GICs; ``loading`` supplies per-ac-branch apparent power
    [p.u.] either as a constant map or a callable of time (absent
    entries mean unloaded).  Initial top-oil rise follows to_inited:
    1 starts from to_init, 0 from the steady-state rise of the first
    sample's loading.

    Only transformers with thermal data are traced (synthetic GSU rows
    have none).
    """
    grid = scenario.grid(dt)
    tgrid = np.asarray(grid)

    eff_series: dict[int, np.ndarray] = {}
    rows = [(pos, row) for pos, row in case.xfmr_rows()
            if row.branch != ABSENT and case.thermal_for(row.branch) is not None]
    per_pos = {pos: np.zeros(len(grid)) for pos, _ in rows}
    for k, t in enumerate(grid):
        field = FieldVector(*scenario.at(t))
        sol = solve_dc(assemble(case, field, overrides=scenario.overrides_at(t),
                                topology=topology))
        eff = effective_gic(case, sol)
        for pos, _ in rows:
            per_pos[pos][k] = eff.get(pos, 0.0)

    traces = {}
    for pos, row in rows:
        th = case.thermal_for(row.branch)
        br = case.ac_branch(row.branch)
        zeta = 2.0 * th.to_time_c / (tgrid[1] - tgrid[0]) if len(tgrid) > 1 else math.inf
        du = np.empty(len(grid))
        for k, t in enumerate(grid):
            s = abs(_loading_at(loading, t).get(row.branch, 0.0))
            du[k] = steady_rise(s, br.rating, th.to_rated)
        # pre-initial input sustains the initial state (matches the
        # optimization model's convention, so verify stays closed-loop)
        delta0 = th.to_init if th.to_inited else du[0]
        du[0] = delta0
        if len(tgrid) > 1:
            delta = topoil_series(du, zeta, delta0)
        else:
            delta = np.array([delta0])
        i_eff = per_pos[pos]
        eta = th.hs_coeff * i_eff
        hotspot = th.temp_amb + delta + eta
        limit = case.hotspot_limit_for(row)
        traces[row.branch] = TransformerTrace(
            branch=row.branch, t=tgrid, i_eff=i_eff, delta_to=delta,
            eta_hs=eta, hotspot=hotspot, limit=limit)

    return ThermalTrace(traces=traces, t=tgrid)
