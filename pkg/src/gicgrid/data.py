"""Domain model, case-file parsing/serialization and cross-table validation.

A case document is a single JSON object with top-level arrays named
``bus, gen, branch, gmd_bus, gmd_branch, branch_gmd, branch_thermal,
bus_gmd`` plus a scalar ``base_mva``.  The dc-side tables mirror the
conventional GMD extension tables of matpower-style cases: a separate
quasi-dc network (gmd_bus/gmd_branch), per-transformer winding
configuration data (branch_gmd), transformer thermal data
(branch_thermal) and bus coordinates (bus_gmd).

Absent integer references are encoded as -1 throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

__all__ = [
    "CaseError",
    "CaseStructureError",
    "CaseReferenceError",
    "CaseInvariantError",
    "Bus",
    "Generator",
    "AcBranch",
    "GmdBus",
    "GmdBranch",
    "BranchGmdData",
    "ThermalData",
    "BusGmdData",
    "FieldSample",
    "FieldScenario",
    "CaseData",
    "ABSENT",
    "XFMR_CONFIGS",
    "parse_case",
    "parse_case_file",
    "serialize_case",
    "estimate_missing_gsu",
    "make_ramp_scenario",
    "load_scenario",
    "load_scenario_file",
]

ABSENT = -1

BUS_TYPES = ("PQ", "PV", "slack")
BRANCH_GMD_TYPES = ("xfmr", "line", "series_cap")
XFMR_CONFIGS = ("gwye-gwye", "gwye-delta", "delta-delta", "gwye-gwye-auto")


class CaseError(ValueError):
    """Base class for case-document problems."""


class CaseStructureError(CaseError):
    """Missing table, missing field, or malformed value."""


class CaseReferenceError(CaseError):
    """An id reference does not resolve."""


class CaseInvariantError(CaseError):
    """A row violates a domain invariant."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bus:
    index: int
    base_kv: float
    bus_type: str = "PQ"
    pd: float = 0.0           # active load [p.u.]
    qd: float = 0.0           # reactive load [p.u.]
    g_shunt: float = 0.0      # shunt conductance [p.u.]
    vmin: float = 0.9
    vmax: float = 1.1


@dataclass(frozen=True)
class Generator:
    index: int
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    cost0: float = 0.0        # fixed cost
    cost1: float = 0.0        # linear cost [per p.u.]
    cost2: float = 0.0        # quadratic cost [per p.u.^2], must be >= 0
    pg: float = 0.0           # dispatch setpoint used by fixed-dispatch power flow
    vg: float = 1.0           # voltage setpoint for PV/slack buses


@dataclass(frozen=True)
class AcBranch:
    index: int
    f_bus: int
    t_bus: int
    b: float                  # series susceptance, p = b * (theta_f - theta_t)
    rating: float             # thermal limit [p.u.]
    angle_max: float = 0.6    # closed-state angle-difference limit [rad]
    angle_big_m: float = math.pi  # open-state angle-difference bound [rad]
    switchable: bool = False
    status: int = 1           # nominal in-service status


@dataclass(frozen=True)
class GmdBus:
    index: int
    parent: int               # ac bus id
    status: int
    g_gnd: float              # admittance to ground [S]; 0 for non-substation nodes
    name: str = ""


@dataclass(frozen=True)
class GmdBranch:
    index: int
    f_bus: int                # gmd_bus id
    t_bus: int                # gmd_bus id
    parent: int               # ac branch id, or -1 for synthetic GSU windings
    status: int
    br_r: float               # branch resistance [ohm]
    br_v: float = 0.0         # induced quasi-dc voltage [V]
    len_km: float = 0.0
    name: str = ""

    @property
    def a(self) -> float:
        """DC admittance 1/br_r [S]."""
        return 1.0 / self.br_r


@dataclass(frozen=True)
class BranchGmdData:
    branch: int               # ac branch id, -1 for synthetic GSU rows
    hi_bus: int
    lo_bus: int
    gmd_br_hi: int
    gmd_br_lo: int
    gmd_k: float              # reactive-loss scaling factor [p.u.], -1 when absent
    gmd_br_se: int
    gmd_br_co: int
    baseMVA: float
    dispatch: int             # stored, unused
    type: str                 # xfmr | line | series_cap
    config: str               # winding configuration or "none"
    turns_ratio: float | None = None   # derived from hi/lo base_kv when omitted
    gic_bound: float | None = None     # max allowed effective GIC [A]
    hotspot_limit: float | None = None  # hot-spot cap [degC], defaults to hs_inst_lim

    @property
    def is_xfmr(self) -> bool:
        return self.type == "xfmr"


@dataclass(frozen=True)
class ThermalData:
    branch: int               # ac branch id
    xfmr: int
    temp_amb: float           # [degC]
    hs_inst_lim: float        # instantaneous hot-spot limit [degC]
    hs_avg_lim: float         # 8-hour average limit [degC] (reported only)
    hs_rated: float           # hot-spot rise at rated power [degC] (stored, unused)
    to_time_c: float          # top-oil time constant [min]
    to_rated: float           # top-oil rise at rated power [degC]
    to_init: float            # initial top-oil rise [degC] when to_inited=1
    to_inited: int            # 1: use to_init; 0: steady-state initialization
    hs_coeff: float           # hot-spot rise per effective GIC ampere [degC/A]


@dataclass(frozen=True)
class BusGmdData:
    bus: int
    lat: float
    lon: float


@dataclass(frozen=True)
class FieldSample:
    t: float                  # minutes
    e_mag: float              # V/km
    e_dir: float              # geographic bearing, degrees clockwise from north


@dataclass(frozen=True)
class FieldScenario:
    """Time series of a spatially uniform geoelectric field.

    ``voltage_overrides`` maps gmd_branch id -> ((t, volts), ...); an
    override takes precedence over the uniform-field projection for that
    branch.  Between samples both field and overrides interpolate
    linearly; outside the sampled range the end values hold.
    """

    samples: tuple[FieldSample, ...]
    dt: float = 5.0
    voltage_overrides: Mapping[int, tuple[tuple[float, float], ...]] = field(
        default_factory=dict)

    def __post_init__(self):
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("scenario sample times must be strictly increasing")
        if self.dt <= 0:
            raise ValueError("scenario dt must be positive")
        if any(s.e_mag < 0 for s in self.samples):
            raise ValueError("field magnitude must be non-negative")

    @property
    def t_start(self) -> float:
        return self.samples[0].t

    @property
    def t_end(self) -> float:
        return self.samples[-1].t

    def at(self, t: float) -> tuple[float, float]:
        """Interpolated field vector (e_north, e_east) in V/km at time t.

        Interpolation is done on the north/east components so that
        direction changes blend physically.
        """
        pts = self.samples
        if t <= pts[0].t:
            s = pts[0]
            return _field_components(s.e_mag, s.e_dir)
        if t >= pts[-1].t:
            s = pts[-1]
            return _field_components(s.e_mag, s.e_dir)
        for a, b in zip(pts, pts[1:]):
            if a.t <= t <= b.t:
                w = (t - a.t) / (b.t - a.t)
                na, ea = _field_components(a.e_mag, a.e_dir)
                nb, eb = _field_components(b.e_mag, b.e_dir)
                return (na + w * (nb - na), ea + w * (eb - ea))
        raise AssertionError("unreachable")

    def overrides_at(self, t: float) -> dict[int, float]:
        """Per-branch induced-voltage overrides [V] interpolated at time t."""
        out = {}
        for branch_id, series in self.voltage_overrides.items():
            out[branch_id] = _interp_series(series, t)
        return out

    def grid(self, dt: float | None = None) -> list[float]:
        """Uniform time grid t_start..t_end at step dt; dt must divide the span."""
        dt = self.dt if dt is None else dt
        span = self.t_end - self.t_start
        n = span / dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"dt={dt} does not divide scenario span {span}")
        n = int(round(n))
        return [self.t_start + k * dt for k in range(n + 1)]


def _field_components(e_mag: float, e_dir_deg: float) -> tuple[float, float]:
    """Geographic bearing (clockwise from north) -> (E_north, E_east)."""
    phi = math.radians(90.0 - e_dir_deg)  # math convention, ccw from east
    return (e_mag * math.sin(phi), e_mag * math.cos(phi))


def _interp_series(series: Sequence[tuple[float, float]], t: float) -> float:
    if t <= series[0][0]:
        return series[0][1]
    if t >= series[-1][0]:
        return series[-1][1]
    for (ta, va), (tb, vb) in zip(series, series[1:]):
        if ta <= t <= tb:
            return va + (t - ta) / (tb - ta) * (vb - va)
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class CaseData:
    """Immutable network description; safe to share across concurrent solves."""

    base_mva: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    ac_branches: tuple[AcBranch, ...]
    gmd_buses: tuple[GmdBus, ...]
    gmd_branches: tuple[GmdBranch, ...]
    branch_gmd: tuple[BranchGmdData, ...]
    thermal: tuple[ThermalData, ...]
    bus_gmd: tuple[BusGmdData, ...]

    # -- lookup helpers (desk scale; rebuilt per call) --

    def bus(self, index: int) -> Bus:
        return _by_index(self.buses, index, "bus")

    def ac_branch(self, index: int) -> AcBranch:
        return _by_index(self.ac_branches, index, "branch")

    def gmd_bus(self, index: int) -> GmdBus:
        return _by_index(self.gmd_buses, index, "gmd_bus")

    def gmd_branch(self, index: int) -> GmdBranch:
        return _by_index(self.gmd_branches, index, "gmd_branch")

    def branch_gmd_for(self, branch: int) -> BranchGmdData | None:
        for row in self.branch_gmd:
            if row.branch == branch:
                return row
        return None

    def thermal_for(self, branch: int) -> ThermalData | None:
        for row in self.thermal:
            if row.branch == branch:
                return row
        return None

    def coords_for(self, bus: int) -> BusGmdData | None:
        for row in self.bus_gmd:
            if row.bus == bus:
                return row
        return None

    def xfmr_rows(self) -> list[tuple[int, BranchGmdData]]:
        """(row position, row) for every transformer row in branch_gmd."""
        return [(i, r) for i, r in enumerate(self.branch_gmd) if r.is_xfmr]

    def turns_ratio(self, row: BranchGmdData) -> float:
        """Winding turns ratio for the effective-GIC formulas.

        gwye-gwye (and gwye-delta) use hi/lo voltage ratio; autos use the
        series/common ratio hi/lo - 1.  An explicit turns_ratio field wins.
        """
        if row.turns_ratio is not None:
            return row.turns_ratio
        hi = self.bus(row.hi_bus).base_kv
        lo = self.bus(row.lo_bus).base_kv
        if row.config == "gwye-gwye-auto":
            return hi / lo - 1.0
        return hi / lo

    def hotspot_limit_for(self, row: BranchGmdData) -> float | None:
        """Hot-spot cap for a transformer row; falls back to hs_inst_lim."""
        if row.hotspot_limit is not None:
            return row.hotspot_limit
        th = self.thermal_for(row.branch)
        return th.hs_inst_lim if th is not None else None

    def ckt_numbers(self) -> dict[int, int]:
        """Circuit number per ac branch id among parallel branches (1-based)."""
        seen: dict[tuple[int, int], int] = {}
        out = {}
        for br in sorted(self.ac_branches, key=lambda b: b.index):
            key = (min(br.f_bus, br.t_bus), max(br.f_bus, br.t_bus))
            seen[key] = seen.get(key, 0) + 1
            out[br.index] = seen[key]
        return out


def _by_index(rows: Iterable, index: int, what: str):
    for r in rows:
        if r.index == index:
            return r
    raise CaseReferenceError(f"{what} id {index} does not exist")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TABLES = ("bus", "gen", "branch", "gmd_bus", "gmd_branch", "branch_gmd",
           "branch_thermal", "bus_gmd")


def _need(row: Mapping, key: str, table: str, i: int):
    if key not in row:
        raise CaseStructureError(f"{table} row {i}: missing field '{key}'")
    return row[key]


def _opt(row: Mapping, key: str, default):
    v = row.get(key, default)
    return default if v is None else v


def parse_case(text: str) -> "CaseData":
    """Parse and validate a case document.

    Raises CaseStructureError / CaseReferenceError / CaseInvariantError,
    each naming the offending table and row.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseStructureError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CaseStructureError("top level must be an object")
    for t in _TABLES:
        if t not in doc:
            raise CaseStructureError(f"missing table '{t}'")
        if not isinstance(doc[t], list):
            raise CaseStructureError(f"table '{t}' must be an array")
    if "base_mva" not in doc:
        raise CaseStructureError("missing 'base_mva'")

    buses = tuple(
        Bus(index=int(_need(r, "index", "bus", i)),
            base_kv=float(_need(r, "base_kv", "bus", i)),
            bus_type=str(_opt(r, "bus_type", "PQ")),
            pd=float(_opt(r, "pd", 0.0)), qd=float(_opt(r, "qd", 0.0)),
            g_shunt=float(_opt(r, "g_shunt", 0.0)),
            vmin=float(_opt(r, "vmin", 0.9)), vmax=float(_opt(r, "vmax", 1.1)))
        for i, r in enumerate(doc["bus"]))
    gens = tuple(
        Generator(index=int(_need(r, "index", "gen", i)),
                  bus=int(_need(r, "bus", "gen", i)),
                  pmin=float(_need(r, "pmin", "gen", i)),
                  pmax=float(_need(r, "pmax", "gen", i)),
                  qmin=float(_opt(r, "qmin", -1e3)), qmax=float(_opt(r, "qmax", 1e3)),
                  cost0=float(_opt(r, "cost_0", 0.0)),
                  cost1=float(_opt(r, "cost_1", 0.0)),
                  cost2=float(_opt(r, "cost_2", 0.0)),
                  pg=float(_opt(r, "pg", 0.0)), vg=float(_opt(r, "vg", 1.0)))
        for i, r in enumerate(doc["gen"]))
    branches = tuple(
        AcBranch(index=int(_need(r, "index", "branch", i)),
                 f_bus=int(_need(r, "f_bus", "branch", i)),
                 t_bus=int(_need(r, "t_bus", "branch", i)),
                 b=float(_need(r, "b", "branch", i)),
                 rating=float(_need(r, "rating", "branch", i)),
                 angle_max=float(_opt(r, "angle_max", 0.6)),
                 angle_big_m=float(_opt(r, "angle_big_m", math.pi)),
                 switchable=bool(_opt(r, "switchable", False)),
                 status=int(_opt(r, "status", 1)))
        for i, r in enumerate(doc["branch"]))
    gmd_buses = tuple(
        GmdBus(index=int(_need(r, "index", "gmd_bus", i)),
               parent=int(_need(r, "parent", "gmd_bus", i)),
               status=int(_opt(r, "status", 1)),
               g_gnd=float(_need(r, "g_gnd", "gmd_bus", i)),
               name=str(_opt(r, "name", "")))
        for i, r in enumerate(doc["gmd_bus"]))
    gmd_branches = tuple(
        GmdBranch(index=int(_need(r, "index", "gmd_branch", i)),
                  f_bus=int(_need(r, "f_bus", "gmd_branch", i)),
                  t_bus=int(_need(r, "t_bus", "gmd_branch", i)),
                  parent=int(_need(r, "parent", "gmd_branch", i)),
                  status=int(_opt(r, "status", 1)),
                  br_r=float(_need(r, "br_r", "gmd_branch", i)),
                  br_v=float(_opt(r, "br_v", 0.0)),
                  len_km=float(_opt(r, "len_km", 0.0)),
                  name=str(_opt(r, "name", "")))
        for i, r in enumerate(doc["gmd_branch"]))
    branch_gmd = tuple(
        BranchGmdData(branch=int(_need(r, "branch", "branch_gmd", i)),
                      hi_bus=int(_need(r, "hi_bus", "branch_gmd", i)),
                      lo_bus=int(_need(r, "lo_bus", "branch_gmd", i)),
                      gmd_br_hi=int(_opt(r, "gmd_br_hi", ABSENT)),
                      gmd_br_lo=int(_opt(r, "gmd_br_lo", ABSENT)),
                      gmd_k=float(_opt(r, "gmd_k", ABSENT)),
                      gmd_br_se=int(_opt(r, "gmd_br_se", ABSENT)),
                      gmd_br_co=int(_opt(r, "gmd_br_co", ABSENT)),
                      baseMVA=float(_opt(r, "baseMVA", ABSENT)),
                      dispatch=int(_opt(r, "dispatch", 1)),
                      type=str(_need(r, "type", "branch_gmd", i)),
                      config=str(_opt(r, "config", "none")),
                      turns_ratio=_float_or_none(r.get("turns_ratio")),
                      gic_bound=_float_or_none(r.get("gic_bound")),
                      hotspot_limit=_float_or_none(r.get("hotspot_limit")))
        for i, r in enumerate(doc["branch_gmd"]))
    thermal = []
    for i, r in enumerate(doc["branch_thermal"]):
        is_x = int(_opt(r, "xfmr", 0))
        if not is_x:
            # rows for non-transformers carry -1 sentinels; treated as absent
            continue
        thermal.append(
            ThermalData(branch=int(_need(r, "branch", "branch_thermal", i)),
                        xfmr=1,
                        temp_amb=float(_need(r, "temp_amb", "branch_thermal", i)),
                        hs_inst_lim=float(_need(r, "hs_inst_lim", "branch_thermal", i)),
                        hs_avg_lim=float(_opt(r, "hs_avg_lim", ABSENT)),
                        hs_rated=float(_opt(r, "hs_rated", ABSENT)),
                        to_time_c=float(_need(r, "to_time_c", "branch_thermal", i)),
                        to_rated=float(_need(r, "to_rated", "branch_thermal", i)),
                        to_init=float(_opt(r, "to_init", 0.0)),
                        to_inited=int(_opt(r, "to_inited", 0)),
                        hs_coeff=float(_need(r, "hs_coeff", "branch_thermal", i))))
    bus_gmd = tuple(
        BusGmdData(bus=int(_need(r, "bus", "bus_gmd", i)),
                   lat=float(_need(r, "lat", "bus_gmd", i)),
                   lon=float(_need(r, "lon", "bus_gmd", i)))
        for i, r in enumerate(doc["bus_gmd"]))

    case = CaseData(base_mva=float(doc["base_mva"]), buses=buses, generators=gens,
                    ac_branches=branches, gmd_buses=gmd_buses,
                    gmd_branches=gmd_branches, branch_gmd=branch_gmd,
                    thermal=tuple(thermal), bus_gmd=bus_gmd)
    validate_case(case)
    return case


def _float_or_none(v) -> float | None:
    return None if v is None else float(v)


def parse_case_file(path) -> CaseData:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_case(fh.read())


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate_case(case: CaseData) -> None:
    bus_ids = {b.index for b in case.buses}
    if len(bus_ids) != len(case.buses):
        raise CaseInvariantError("bus: duplicate indices")
    for i, b in enumerate(case.buses):
        if b.base_kv <= 0:
            raise CaseInvariantError(f"bus row {i} (id {b.index}): base_kv must be > 0")
        if b.vmin > b.vmax:
            raise CaseInvariantError(f"bus row {i} (id {b.index}): vmin > vmax")
        if b.bus_type not in BUS_TYPES:
            raise CaseInvariantError(f"bus row {i} (id {b.index}): bad bus_type '{b.bus_type}'")

    for i, g in enumerate(case.generators):
        if g.bus not in bus_ids:
            raise CaseReferenceError(f"gen row {i} (id {g.index}): bus {g.bus} does not exist")
        if g.pmin > g.pmax:
            raise CaseInvariantError(f"gen row {i} (id {g.index}): pmin > pmax")
        if g.cost2 < 0:
            raise CaseInvariantError(f"gen row {i} (id {g.index}): cost_2 must be >= 0 (convex)")

    br_ids = {br.index for br in case.ac_branches}
    if len(br_ids) != len(case.ac_branches):
        raise CaseInvariantError("branch: duplicate indices")
    for i, br in enumerate(case.ac_branches):
        for side in (br.f_bus, br.t_bus):
            if side not in bus_ids:
                raise CaseReferenceError(f"branch row {i} (id {br.index}): bus {side} does not exist")
        if br.rating <= 0:
            raise CaseInvariantError(f"branch row {i} (id {br.index}): rating must be > 0")
        if br.angle_max > br.angle_big_m:
            raise CaseInvariantError(
                f"branch row {i} (id {br.index}): angle_max exceeds angle_big_m")

    _check_slack(case)

    gmd_bus_ids = {b.index for b in case.gmd_buses}
    if len(gmd_bus_ids) != len(case.gmd_buses):
        raise CaseInvariantError("gmd_bus: duplicate indices")
    for i, gb in enumerate(case.gmd_buses):
        if gb.parent not in bus_ids:
            raise CaseReferenceError(f"gmd_bus row {i} (id {gb.index}): parent bus {gb.parent} does not exist")
        if gb.g_gnd < 0:
            raise CaseInvariantError(f"gmd_bus row {i} (id {gb.index}): g_gnd must be >= 0")

    gmd_br_ids = {b.index for b in case.gmd_branches}
    if len(gmd_br_ids) != len(case.gmd_branches):
        raise CaseInvariantError("gmd_branch: duplicate indices")
    for i, e in enumerate(case.gmd_branches):
        for side in (e.f_bus, e.t_bus):
            if side not in gmd_bus_ids:
                raise CaseReferenceError(
                    f"gmd_branch row {i} (id {e.index}): gmd_bus {side} does not exist")
        if e.parent != ABSENT and e.parent not in br_ids:
            raise CaseReferenceError(
                f"gmd_branch row {i} (id {e.index}): parent branch {e.parent} does not exist")
        if e.br_r <= 0:
            raise CaseInvariantError(f"gmd_branch row {i} (id {e.index}): br_r must be > 0")
        if e.len_km < 0:
            raise CaseInvariantError(f"gmd_branch row {i} (id {e.index}): len_km must be >= 0")

    _WINDING_REQS = {
        "gwye-delta": ("gmd_br_hi",),
        "gwye-gwye": ("gmd_br_hi", "gmd_br_lo"),
        "gwye-gwye-auto": ("gmd_br_se", "gmd_br_co"),
        "delta-delta": (),
    }
    seen_branch_rows = set()
    for i, row in enumerate(case.branch_gmd):
        where = f"branch_gmd row {i} (branch {row.branch})"
        if row.branch != ABSENT:
            if row.branch not in br_ids:
                raise CaseReferenceError(f"{where}: branch does not exist")
            if row.branch in seen_branch_rows:
                raise CaseInvariantError(f"{where}: duplicate row for this branch")
            seen_branch_rows.add(row.branch)
        if row.type not in BRANCH_GMD_TYPES:
            raise CaseInvariantError(f"{where}: bad type '{row.type}'")
        if row.is_xfmr != (row.config != "none"):
            raise CaseInvariantError(f"{where}: type=xfmr iff config != none")
        for side in (row.hi_bus, row.lo_bus):
            if side != ABSENT and side not in bus_ids:
                raise CaseReferenceError(f"{where}: bus {side} does not exist")
        if row.is_xfmr:
            if row.config not in XFMR_CONFIGS:
                raise CaseInvariantError(f"{where}: unknown config '{row.config}'")
            for fieldname in _WINDING_REQS[row.config]:
                wid = getattr(row, fieldname)
                if wid == ABSENT:
                    raise CaseInvariantError(
                        f"{where}: config {row.config} requires {fieldname}")
                if wid not in gmd_br_ids:
                    raise CaseReferenceError(f"{where}: {fieldname}={wid} does not exist")
            if row.config in ("gwye-gwye", "gwye-gwye-auto"):
                alpha = row.turns_ratio
                if alpha is None:
                    hi = case.bus(row.hi_bus).base_kv
                    lo = case.bus(row.lo_bus).base_kv
                    alpha = hi / lo - 1.0 if row.config.endswith("auto") else hi / lo
                if alpha <= 0:
                    raise CaseInvariantError(f"{where}: turns ratio must be > 0")
        else:
            for fieldname in ("gmd_br_hi", "gmd_br_lo", "gmd_br_se", "gmd_br_co"):
                if getattr(row, fieldname) != ABSENT:
                    raise CaseInvariantError(
                        f"{where}: non-transformer rows must carry -1 in {fieldname}")
        if row.gic_bound is not None and row.gic_bound <= 0:
            raise CaseInvariantError(f"{where}: gic_bound must be > 0")

    seen_thermal = set()
    for i, th in enumerate(case.thermal):
        where = f"branch_thermal row {i} (branch {th.branch})"
        if th.branch not in br_ids:
            raise CaseReferenceError(f"{where}: branch does not exist")
        if th.branch in seen_thermal:
            raise CaseInvariantError(f"{where}: duplicate row for this branch")
        seen_thermal.add(th.branch)
        if th.to_time_c <= 0:
            raise CaseInvariantError(f"{where}: to_time_c must be > 0")
        if th.to_rated <= 0:
            raise CaseInvariantError(f"{where}: to_rated must be > 0")
        if th.hs_inst_lim < th.hs_avg_lim:
            raise CaseInvariantError(f"{where}: hs_inst_lim < hs_avg_lim")
        if th.hs_coeff < 0:
            raise CaseInvariantError(f"{where}: hs_coeff must be >= 0")

    # every real ac transformer carries exactly one thermal row
    for i, row in enumerate(case.branch_gmd):
        if row.is_xfmr and row.branch != ABSENT and row.branch not in seen_thermal:
            raise CaseInvariantError(
                f"branch_gmd row {i}: transformer branch {row.branch} has no branch_thermal row")

    seen_coords = set()
    for i, c in enumerate(case.bus_gmd):
        where = f"bus_gmd row {i} (bus {c.bus})"
        if c.bus not in bus_ids:
            raise CaseReferenceError(f"{where}: bus does not exist")
        if c.bus in seen_coords:
            raise CaseInvariantError(f"{where}: duplicate row for this bus")
        seen_coords.add(c.bus)
        if not -90 <= c.lat <= 90:
            raise CaseInvariantError(f"{where}: lat out of range")
        if not -180 <= c.lon <= 180:
            raise CaseInvariantError(f"{where}: lon out of range")


def _check_slack(case: CaseData) -> None:
    """Exactly one slack per energized connected ac component.

    Components formed by in-service branches; components without any
    generator or load are allowed to have no slack (de-energized islands).
    """
    parent = {b.index: b.index for b in case.buses}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for br in case.ac_branches:
        if br.status:
            parent[find(br.f_bus)] = find(br.t_bus)
    comps: dict[int, list[Bus]] = {}
    for b in case.buses:
        comps.setdefault(find(b.index), []).append(b)
    gen_buses = {g.bus for g in case.generators}
    for root, members in comps.items():
        slacks = [b.index for b in members if b.bus_type == "slack"]
        if len(slacks) > 1:
            raise CaseInvariantError(
                f"bus component containing bus {members[0].index}: multiple slack buses {slacks}")
        energized = any(b.index in gen_buses or b.pd != 0 or b.qd != 0 for b in members)
        if energized and not slacks:
            raise CaseInvariantError(
                f"bus component containing bus {members[0].index}: no slack bus")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def serialize_case(case: CaseData) -> str:
    """Serialize to the JSON case format; parse(serialize(c)) == c."""
    def bus_row(b: Bus):
        return {"index": b.index, "base_kv": b.base_kv, "bus_type": b.bus_type,
                "pd": b.pd, "qd": b.qd, "g_shunt": b.g_shunt,
                "vmin": b.vmin, "vmax": b.vmax}

    def gen_row(g: Generator):
        return {"index": g.index, "bus": g.bus, "pmin": g.pmin, "pmax": g.pmax,
                "qmin": g.qmin, "qmax": g.qmax, "cost_0": g.cost0,
                "cost_1": g.cost1, "cost_2": g.cost2, "pg": g.pg, "vg": g.vg}

    def branch_row(br: AcBranch):
        return {"index": br.index, "f_bus": br.f_bus, "t_bus": br.t_bus,
                "b": br.b, "rating": br.rating, "angle_max": br.angle_max,
                "angle_big_m": br.angle_big_m, "switchable": br.switchable,
                "status": br.status}

    def gmd_bus_row(gb: GmdBus):
        return {"index": gb.index, "parent": gb.parent, "status": gb.status,
                "g_gnd": gb.g_gnd, "name": gb.name}

    def gmd_branch_row(e: GmdBranch):
        return {"index": e.index, "f_bus": e.f_bus, "t_bus": e.t_bus,
                "parent": e.parent, "status": e.status, "br_r": e.br_r,
                "br_v": e.br_v, "len_km": e.len_km, "name": e.name}

    def branch_gmd_row(r: BranchGmdData):
        row = {"branch": r.branch, "hi_bus": r.hi_bus, "lo_bus": r.lo_bus,
               "gmd_br_hi": r.gmd_br_hi, "gmd_br_lo": r.gmd_br_lo,
               "gmd_k": r.gmd_k, "gmd_br_se": r.gmd_br_se,
               "gmd_br_co": r.gmd_br_co, "baseMVA": r.baseMVA,
               "dispatch": r.dispatch, "type": r.type, "config": r.config}
        if r.turns_ratio is not None:
            row["turns_ratio"] = r.turns_ratio
        if r.gic_bound is not None:
            row["gic_bound"] = r.gic_bound
        if r.hotspot_limit is not None:
            row["hotspot_limit"] = r.hotspot_limit
        return row

    def thermal_row(th: ThermalData):
        return {"branch": th.branch, "xfmr": th.xfmr, "temp_amb": th.temp_amb,
                "hs_inst_lim": th.hs_inst_lim, "hs_avg_lim": th.hs_avg_lim,
                "hs_rated": th.hs_rated, "to_time_c": th.to_time_c,
                "to_rated": th.to_rated, "to_init": th.to_init,
                "to_inited": th.to_inited, "hs_coeff": th.hs_coeff}

    def bus_gmd_row(c: BusGmdData):
        return {"bus": c.bus, "lat": c.lat, "lon": c.lon}

    doc = {
        "base_mva": case.base_mva,
        "bus": [bus_row(b) for b in case.buses],
        "gen": [gen_row(g) for g in case.generators],
        "branch": [branch_row(br) for br in case.ac_branches],
        "gmd_bus": [gmd_bus_row(gb) for gb in case.gmd_buses],
        "gmd_branch": [gmd_branch_row(e) for e in case.gmd_branches],
        "branch_gmd": [branch_gmd_row(r) for r in case.branch_gmd],
        "branch_thermal": [thermal_row(th) for th in case.thermal],
        "bus_gmd": [bus_gmd_row(c) for c in case.bus_gmd],
    }
    return json.dumps(doc, indent=1)


# ---------------------------------------------------------------------------
# GSU estimation
# ---------------------------------------------------------------------------

def estimate_missing_gsu(case: CaseData, *, winding_r: float = 0.1,
                         ground_s: float = 5.0, gmd_k: float = 0.0) -> CaseData:
    """Add synthetic GSU transformers for generators whose bus has none.

    Each missing GSU is modeled as delta-gwye with the grounded wye on the
    network side: one gmd_branch of resistance ``winding_r`` from the bus's
    dc node to the substation neutral, plus a gwye-delta branch_gmd row so
    the winding contributes an effective GIC.  Synthetic rows carry
    branch = -1 (they correspond to no ac branch) and gmd_k as given
    (default 0: dc-network effect only).  A dc bus node or neutral is
    created when the case lacks one (neutral grounding ``ground_s``).
    Original rows are never touched; a no-op when every generator bus
    already has a transformer.
    """
    covered = set()
    for row in case.branch_gmd:
        if row.is_xfmr:
            covered.add(row.hi_bus)
            covered.add(row.lo_bus)

    missing = [g for g in case.generators if g.bus not in covered]
    if not missing:
        return case

    gmd_buses = list(case.gmd_buses)
    gmd_branches = list(case.gmd_branches)
    branch_gmd = list(case.branch_gmd)
    next_bus = max((b.index for b in gmd_buses), default=0) + 1
    next_br = max((e.index for e in gmd_branches), default=0) + 1

    def dc_node(ac_bus: int, grounded: bool) -> int:
        nonlocal next_bus
        for gb in gmd_buses:
            if gb.parent == ac_bus and (gb.g_gnd > 0) == grounded:
                return gb.index
        kind = "sub" if grounded else "bus"
        gb = GmdBus(index=next_bus, parent=ac_bus, status=1,
                    g_gnd=ground_s if grounded else 0.0,
                    name=f"dc_{kind}{ac_bus}_est")
        gmd_buses.append(gb)
        next_bus += 1
        return gb.index

    for gen in missing:
        node = dc_node(gen.bus, grounded=False)
        neutral = dc_node(gen.bus, grounded=True)
        winding = GmdBranch(index=next_br, f_bus=node, t_bus=neutral,
                            parent=ABSENT, status=1, br_r=winding_r,
                            br_v=0.0, len_km=0.0, name=f"gsu_est_gen{gen.index}")
        gmd_branches.append(winding)
        branch_gmd.append(BranchGmdData(
            branch=ABSENT, hi_bus=gen.bus, lo_bus=ABSENT,
            gmd_br_hi=winding.index, gmd_br_lo=ABSENT, gmd_k=gmd_k,
            gmd_br_se=ABSENT, gmd_br_co=ABSENT, baseMVA=case.base_mva,
            dispatch=1, type="xfmr", config="gwye-delta"))
        next_br += 1
        covered.add(gen.bus)

    return replace(case, gmd_buses=tuple(gmd_buses),
                   gmd_branches=tuple(gmd_branches),
                   branch_gmd=tuple(branch_gmd))


# ---------------------------------------------------------------------------
# field scenarios
# ---------------------------------------------------------------------------

def make_ramp_scenario(peak: float, rise_min: float, fall_min: float,
                       dt: float = 5.0, direction_deg: float = 90.0) -> FieldScenario:
    """Piecewise-linear up/down field ramp sampled every dt minutes.

    Defaults to an eastward (90 deg geographic) field.  The ramp rises
    linearly 0 -> peak over rise_min, then falls back to 0 over fall_min.
    """
    if peak < 0:
        raise ValueError("peak must be >= 0")
    span = rise_min + fall_min
    n = span / dt
    if abs(n - round(n)) > 1e-9:
        raise ValueError("dt must divide rise_min + fall_min")
    samples = []
    for k in range(int(round(n)) + 1):
        t = k * dt
        if t <= rise_min:
            mag = peak * (t / rise_min) if rise_min > 0 else peak
        else:
            mag = peak * (1.0 - (t - rise_min) / fall_min) if fall_min > 0 else 0.0
        samples.append(FieldSample(t=t, e_mag=mag, e_dir=direction_deg))
    return FieldScenario(samples=tuple(samples), dt=dt)


def load_scenario(text: str, dt: float = 5.0,
                  overrides_text: str | None = None) -> FieldScenario:
    """Load a scenario from CSV text with header t_min,e_mag_vkm,e_dir_deg.

    Optional overrides CSV has header t_min,gmd_branch_id,volts.
    """
    samples = []
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "t_min,e_mag_vkm,e_dir_deg":
        raise CaseStructureError("scenario CSV must start with header t_min,e_mag_vkm,e_dir_deg")
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise CaseStructureError(f"scenario CSV: bad row '{ln}'")
        samples.append(FieldSample(t=float(parts[0]), e_mag=float(parts[1]),
                                   e_dir=float(parts[2])))
    overrides: dict[int, list[tuple[float, float]]] = {}
    if overrides_text is not None:
        olines = [ln.strip() for ln in overrides_text.strip().splitlines() if ln.strip()]
        if not olines or olines[0].replace(" ", "") != "t_min,gmd_branch_id,volts":
            raise CaseStructureError("override CSV must start with header t_min,gmd_branch_id,volts")
        for ln in olines[1:]:
            parts = ln.split(",")
            if len(parts) != 3:
                raise CaseStructureError(f"override CSV: bad row '{ln}'")
            overrides.setdefault(int(parts[1]), []).append((float(parts[0]), float(parts[2])))
    frozen = {}
    for branch_id, series in overrides.items():
        series = tuple(sorted(series))
        if any(b[0] <= a[0] for a, b in zip(series, series[1:])):
            raise CaseStructureError(
                f"override CSV: duplicate time for gmd_branch {branch_id}")
        frozen[branch_id] = series
    return FieldScenario(samples=tuple(samples), dt=dt, voltage_overrides=frozen)


def load_scenario_file(path, dt: float = 5.0, overrides_path=None) -> FieldScenario:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    otext = None
    if overrides_path is not None:
        with open(overrides_path, "r", encoding="utf-8") as fh:
            otext = fh.read()
    return load_scenario(text, dt=dt, overrides_text=otext)
