"""Geomagnetically induced currents in power networks: quasi-dc solve,
ac power flow coupling, transformer heating, and time-extended switching
mitigation."""

from .data import (ABSENT, AcBranch, BranchGmdData, Bus, BusGmdData, CaseData,
                   CaseError, CaseInvariantError, CaseReferenceError,
                   CaseStructureError, FieldSample, FieldScenario, Generator,
                   GmdBranch, GmdBus, ThermalData, estimate_missing_gsu,
                   load_scenario, load_scenario_file, make_ramp_scenario,
                   parse_case, parse_case_file, serialize_case)
from .dcnet import (DcSystem, FieldVector, GicSolution, assemble,
                    branch_lengths, effective_gic, induced_voltage, solve_dc)
from .coupling import (AcSolution, PowerFlowError, QLoss, ac_power_flow,
                       qloss, sequential_gic_ac)
from .thermal import (ThermalTrace, TransformerTrace, apparent_power,
                      hotspot_rise, simulate, steady_rise, step_topoil)
from .mitigation import (MitigationInfeasible, MitigationPlan, OtsModel,
                         OtsOptions, VerifyReport, build_model,
                         enumerate_solve, solve, verify_plan)
from .lp import LpProblem, LpResult, lp_solve
from . import cases

__version__ = "0.1.0"
