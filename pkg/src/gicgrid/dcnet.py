"""Equivalent dc network: field projection, assembly and quasi-dc solve.

The dc circuit is solved per phase at face value of the case data: every
gmd_branch contributes admittance a_e = 1/br_r, every gmd_bus its
grounding admittance a_i = g_gnd, and series induced voltages are folded
into Norton current injections so a single symmetric linear solve
G V = J yields the node voltages.  Branch currents then follow from
I_e = a_e (V_f - V_t + V_src).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple

import numpy as np

from .data import ABSENT, BranchGmdData, CaseData, CaseReferenceError, GmdBranch

__all__ = [
    "EARTH_RADIUS_KM",
    "FieldVector",
    "DcEdge",
    "DcSystem",
    "GicSolution",
    "SingularNetworkError",
    "MissingCoordinates",
    "branch_lengths",
    "induced_voltage",
    "branch_voltage",
    "assemble",
    "solve_dc",
    "effective_gic",
    "winding_ids",
]

EARTH_RADIUS_KM = 6371.0


class SingularNetworkError(ArithmeticError):
    """Raised when an ungrounded dc component is solved with pinning disabled."""


class FieldVector(NamedTuple):
    """Uniform geoelectric field as north/east components [V/km]."""

    e_north: float
    e_east: float

    @classmethod
    def from_mag_dir(cls, e_mag: float, e_dir_deg: float) -> "FieldVector":
        """Build from magnitude and geographic bearing (clockwise from north)."""
        phi = math.radians(90.0 - e_dir_deg)
        return cls(e_mag * math.sin(phi), e_mag * math.cos(phi))

    def scaled(self, c: float) -> "FieldVector":
        return FieldVector(self.e_north * c, self.e_east * c)


def branch_lengths(case: CaseData, branch: GmdBranch) -> tuple[float, float]:
    """Northward/eastward displacement (L_N, L_E) [km] between branch endpoints.

    Equirectangular approximation on a 6371 km sphere:
    L_N = R dlat, L_E = R dlon cos(mean lat).  Requires coordinates for the
    parent buses of both endpoint gmd buses.
    """
    f_parent = case.gmd_bus(branch.f_bus).parent
    t_parent = case.gmd_bus(branch.t_bus).parent
    fc = case.coords_for(f_parent)
    tc = case.coords_for(t_parent)
    if fc is None or tc is None:
        missing = f_parent if fc is None else t_parent
        raise MissingCoordinates(
            f"gmd_branch {branch.index}: bus {missing} has no bus_gmd coordinates")
    l_n = EARTH_RADIUS_KM * math.radians(tc.lat - fc.lat)
    l_e = (EARTH_RADIUS_KM * math.radians(tc.lon - fc.lon)
           * math.cos(math.radians((fc.lat + tc.lat) / 2.0)))
    return l_n, l_e


class MissingCoordinates(LookupError):
    """A branch endpoint bus lacks bus_gmd coordinates."""


def induced_voltage(e_mag: float, e_dir_deg: float, l_n: float, l_e: float) -> float:
    """Series voltage [V] induced on a branch by a uniform field.

    The direction is a geographic bearing (clockwise from north); it is
    converted to the math convention phi' (counter-clockwise from east)
    before projecting: V = |E| (sin(phi') L_N + cos(phi') L_E).
    """
    if e_mag < 0:
        raise ValueError("field magnitude must be >= 0")
    phi = math.radians(90.0 - e_dir_deg)
    return e_mag * (math.sin(phi) * l_n + math.cos(phi) * l_e)


def winding_ids(row: BranchGmdData) -> tuple[int, ...]:
    """gmd_branch ids acting as transformer windings for a branch_gmd row."""
    return tuple(w for w in (row.gmd_br_hi, row.gmd_br_lo,
                             row.gmd_br_se, row.gmd_br_co) if w != ABSENT)


def branch_voltage(case: CaseData, branch: GmdBranch, field: FieldVector | None,
                   overrides: Mapping[int, float] | None = None,
                   winding_set: frozenset[int] | None = None) -> float:
    """Induced voltage for one gmd branch under the given field.

    Precedence: per-branch override, else uniform-field projection, else
    the stored br_v.  Transformer windings always get 0 under a uniform
    field (their length is negligible).  The projection uses the bearing
    from the endpoint coordinates but rescales the displacement to the
    stored len_km when present, so the case's authoritative route length
    is honored.
    """
    if overrides and branch.index in overrides:
        return overrides[branch.index]
    if field is None:
        return branch.br_v
    if winding_set is None:
        winding_set = _winding_set(case)
    if branch.index in winding_set:
        return 0.0
    l_n, l_e = branch_lengths(case, branch)
    norm = math.hypot(l_n, l_e)
    if branch.len_km > 0 and norm > 0:
        scale = branch.len_km / norm
        l_n, l_e = l_n * scale, l_e * scale
    # components already folded into the field vector; project directly
    return field.e_north * l_n + field.e_east * l_e


def _winding_set(case: CaseData) -> frozenset[int]:
    ids: set[int] = set()
    for row in case.branch_gmd:
        if row.is_xfmr:
            ids.update(winding_ids(row))
    return frozenset(ids)


@dataclass(frozen=True)
class DcEdge:
    index: int        # gmd_branch id
    f: int            # row in the node ordering
    t: int
    a: float          # admittance [S]
    v_src: float      # series induced voltage [V]
    parent: int       # ac branch id or -1


@dataclass(frozen=True)
class DcSystem:
    """Assembled dc nodal system G V = J."""

    node_ids: tuple[int, ...]          # gmd_bus ids in matrix order
    index: Mapping[int, int]           # gmd_bus id -> row
    G: np.ndarray                      # conductance matrix [S]
    J: np.ndarray                      # Norton injections [A]
    edges: tuple[DcEdge, ...]
    ground: np.ndarray                 # per-node grounding admittance [S]


def assemble(case: CaseData, field: FieldVector | None = None, *,
             overrides: Mapping[int, float] | None = None,
             topology: Mapping[int, int] | None = None) -> DcSystem:
    """Build the dc nodal system for one time point.

    ``topology`` optionally overrides the nominal status per ac branch id
    (1 in service, 0 open); gmd branches whose parent is open, whose own
    status is 0, or whose parent is a series-capacitor branch are left
    out of the solve set.  With ``field`` None and no overrides the stored
    br_v values drive the solve.
    """
    nodes = tuple(b.index for b in case.gmd_buses if b.status)
    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    G = np.zeros((n, n))
    J = np.zeros(n)
    ground = np.zeros(n)
    for b in case.gmd_buses:
        if b.status:
            ground[index[b.index]] = b.g_gnd
            G[index[b.index], index[b.index]] += b.g_gnd

    series_cap_branches = {row.branch for row in case.branch_gmd
                           if row.type == "series_cap"}
    winding_set = _winding_set(case)

    edges = []
    for e in case.gmd_branches:
        if not e.status:
            continue
        if e.parent != ABSENT:
            if e.parent in series_cap_branches:
                continue
            z = case.ac_branch(e.parent).status
            if topology is not None and e.parent in topology:
                z = topology[e.parent]
            if not z:
                continue
        if e.f_bus not in index or e.t_bus not in index:
            continue
        v = branch_voltage(case, e, field, overrides, winding_set)
        a = e.a
        i, j = index[e.f_bus], index[e.t_bus]
        G[i, i] += a
        G[j, j] += a
        G[i, j] -= a
        G[j, i] -= a
        J[j] += a * v
        J[i] -= a * v
        edges.append(DcEdge(index=e.index, f=i, t=j, a=a, v_src=v, parent=e.parent))

    return DcSystem(node_ids=nodes, index=index, G=G, J=J,
                    edges=tuple(edges), ground=ground)


@dataclass(frozen=True)
class GicSolution:
    """Quasi-dc solution for one time point."""

    node_voltages: Mapping[int, float]      # gmd_bus id -> V [volts]
    branch_currents: Mapping[int, float]    # gmd_branch id -> I [A, f->t]
    effective: Mapping[int, float] | None = None  # branch_gmd row pos -> I_eff [A]
    t: float | None = None
    kcl_residual: float = 0.0

    def with_effective(self, eff: Mapping[int, float]) -> "GicSolution":
        return replace(self, effective=dict(eff))


def solve_dc(sys: DcSystem, *, pin_floating: bool = True) -> GicSolution:
    """Solve G V = J and recover branch currents.

    Connected components without any path to ground have no unique
    potential reference; the lowest-id node of each such component is
    pinned to 0 V (currents are unaffected).  With ``pin_floating`` False
    a SingularNetworkError names the offending component instead.
    """
    n = len(sys.node_ids)
    if n == 0:
        return GicSolution(node_voltages={}, branch_currents={})
    G = sys.G.copy()
    J = sys.J.copy()

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in sys.edges:
        parent[find(e.f)] = find(e.t)
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    for members in comps.values():
        if any(sys.ground[i] > 0 for i in members):
            continue
        node_ids = [sys.node_ids[i] for i in members]
        if not pin_floating:
            raise SingularNetworkError(
                f"dc component with no ground path: gmd buses {sorted(node_ids)}")
        if len(members) > 1:
            warnings.warn(
                f"pinning ungrounded dc component (gmd buses {sorted(node_ids)}) to 0 V",
                stacklevel=2)
        pin = min(members)
        G[pin, :] = 0.0
        G[:, pin] = 0.0
        G[pin, pin] = 1.0
        J[pin] = 0.0

    V = np.linalg.solve(G, J)

    currents = {}
    inflow = np.zeros(n)
    for e in sys.edges:
        i_e = e.a * (V[e.f] - V[e.t] + e.v_src)
        currents[e.index] = i_e
        inflow[e.t] += i_e
        inflow[e.f] -= i_e
    residual = float(np.max(np.abs(inflow - sys.ground * V))) if n else 0.0
    scale = max(float(np.max(np.abs(sys.J))) if n else 0.0, 1.0)
    if residual > 1e-6 * scale:
        raise SingularNetworkError(
            f"dc solve lost accuracy: KCL residual {residual:.3e} A "
            f"(injection scale {scale:.3e} A); check admittance conditioning")

    voltages = {nid: float(V[i]) for i, nid in enumerate(sys.node_ids)}
    return GicSolution(node_voltages=voltages, branch_currents=currents,
                       kcl_residual=residual)


def effective_gic(case: CaseData, sol: GicSolution) -> dict[int, float]:
    """Per-transformer effective GIC magnitudes [A].

    Keyed by branch_gmd row position.  Winding currents are taken as
    solved (orientation per the case file); winding branches absent from
    the solution (switched-off parents) contribute zero.  gwye-delta uses
    |I_hi|; gwye-gwye |(a I_hi + I_lo)/a|; autos |(a I_se + I_co)/(a+1)|;
    everything else is 0.
    """
    out: dict[int, float] = {}

    def cur(wid: int) -> float:
        if wid == ABSENT:
            raise CaseReferenceError("winding reference absent for declared config")
        case.gmd_branch(wid)  # raises CaseReferenceError for malformed data
        return sol.branch_currents.get(wid, 0.0)

    for pos, row in case.xfmr_rows():
        cfg = row.config
        if cfg == "gwye-delta":
            out[pos] = abs(cur(row.gmd_br_hi))
        elif cfg == "gwye-gwye":
            alpha = case.turns_ratio(row)
            out[pos] = abs((alpha * cur(row.gmd_br_hi) + cur(row.gmd_br_lo)) / alpha)
        elif cfg == "gwye-gwye-auto":
            alpha = case.turns_ratio(row)
            out[pos] = abs((alpha * cur(row.gmd_br_se) + cur(row.gmd_br_co))
                           / (alpha + 1.0))
        else:  # delta-delta
            out[pos] = 0.0
    return out
