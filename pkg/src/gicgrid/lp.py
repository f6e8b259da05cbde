"""Thin linear-programming layer over scipy's HiGHS backend.

Problems are held in standard form (minimize c x subject to
A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub) with sparse constraint
matrices.  All variable bounds are expected to be finite; the model
builders guarantee that via their big-M construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

__all__ = ["LpProblem", "LpResult", "LpNumericalError", "lp_solve"]

FEASIBILITY_TOL = 1e-7


class LpNumericalError(ArithmeticError):
    """Solver reported a numerical failure; message carries diagnostics."""


@dataclass
class LpProblem:
    c: np.ndarray
    A_ub: sp.csr_matrix | None
    b_ub: np.ndarray | None
    A_eq: sp.csr_matrix | None
    b_eq: np.ndarray | None
    lb: np.ndarray
    ub: np.ndarray

    @property
    def n(self) -> int:
        return len(self.c)


@dataclass
class LpResult:
    status: str                     # optimal | infeasible | unbounded
    objective: float | None
    x: np.ndarray | None
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    residual: float = 0.0
    message: str = ""


def lp_solve(prob: LpProblem, *, lb: np.ndarray | None = None,
             ub: np.ndarray | None = None) -> LpResult:
    """Solve an LP; optional lb/ub arrays override the problem bounds.

    The bound override keeps branch-and-bound cheap: one assembled matrix
    is reused across nodes that only tighten variable bounds.  Returns an
    optimal basic solution with primal residual <= 1e-7, or a definite
    infeasible/unbounded status.
    """
    lo = prob.lb if lb is None else lb
    hi = prob.ub if ub is None else ub
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("all variable bounds must be finite")
    res = linprog(prob.c, A_ub=prob.A_ub, b_ub=prob.b_ub,
                  A_eq=prob.A_eq, b_eq=prob.b_eq,
                  bounds=np.column_stack([lo, hi]), method="highs")
    if res.status == 2:
        return LpResult(status="infeasible", objective=None, x=None,
                        message=res.message)
    if res.status == 3:
        return LpResult(status="unbounded", objective=None, x=None,
                        message=res.message)
    if res.status != 0:
        raise LpNumericalError(_numerical_report(prob, res))

    x = np.asarray(res.x)
    residual = _primal_residual(prob, x, lo, hi)
    if residual > FEASIBILITY_TOL:
        raise LpNumericalError(
            f"primal residual {residual:.3e} exceeds {FEASIBILITY_TOL:.0e}; "
            + _numerical_report(prob, res))
    return LpResult(status="optimal", objective=float(res.fun), x=x,
                    dual_ub=None if res.ineqlin is None else np.asarray(res.ineqlin.marginals),
                    dual_eq=None if res.eqlin is None else np.asarray(res.eqlin.marginals),
                    residual=residual, message=res.message)


def _primal_residual(prob: LpProblem, x: np.ndarray, lo, hi) -> float:
    worst = 0.0
    if prob.A_ub is not None and prob.A_ub.shape[0]:
        worst = max(worst, float(np.max(prob.A_ub @ x - prob.b_ub, initial=0.0)))
    if prob.A_eq is not None and prob.A_eq.shape[0]:
        worst = max(worst, float(np.max(np.abs(prob.A_eq @ x - prob.b_eq), initial=0.0)))
    worst = max(worst, float(np.max(lo - x, initial=0.0)))
    worst = max(worst, float(np.max(x - hi, initial=0.0)))
    return worst


def _numerical_report(prob: LpProblem, res) -> str:
    cond = "n/a"
    if prob.A_eq is not None and 0 < prob.A_eq.shape[0] <= 2000:
        try:
            a = prob.A_eq.toarray()
            s = np.linalg.svd(a, compute_uv=False)
            nz = s[s > 0]
            if len(nz):
                cond = f"{nz[0] / nz[-1]:.3e}"
        except Exception:
            pass
    return f"LP numerical failure (status {res.status}): {res.message}; A_eq condition ~ {cond}"
