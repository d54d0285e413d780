"""Sparse LP/MILP container shared by the simplex, branch-and-bound and MPS code."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "L", "E", "G"
SENSES = (LE, EQ, GE)

# centralized tolerances
FEAS_TOL = 1e-7
OPT_TOL = 1e-7
INT_TOL = 1e-6


class LpError(RuntimeError):
    pass


class NumericalInstability(LpError):
    pass


class DeadlineReached(LpError):
    """The wall-clock deadline passed in the middle of a solve."""


class LpProblem:
    """Variables with bounds/objective/integrality plus sparse constraint rows.

    The objective is always maximized.
    """

    def __init__(self, name: str = "problem"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self.integer: list[bool] = []
        self.row_names: list[str] = []
        self.row_cols: list[list[int]] = []
        self.row_vals: list[list[float]] = []
        self.row_sense: list[str] = []
        self.rhs: list[float] = []
        self._var_index: dict[str, int] = {}
        self._row_index: dict[str, int] = {}

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, obj: float = 0.0,
                integer: bool = False) -> int:
        if name in self._var_index:
            raise LpError(f"duplicate variable name {name!r}")
        if lb > ub:
            raise LpError(f"variable {name!r}: lower bound {lb} exceeds upper bound {ub}")
        idx = len(self.var_names)
        self._var_index[name] = idx
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.integer.append(bool(integer))
        return idx

    def add_row(self, name: str, coeffs: dict[int, float], sense: str, rhs: float) -> int:
        if name in self._row_index:
            raise LpError(f"duplicate row name {name!r}")
        if sense not in SENSES:
            raise LpError(f"row {name!r}: bad sense {sense!r}")
        if not math.isfinite(rhs):
            raise LpError(f"row {name!r}: rhs must be finite")
        cols, vals = [], []
        for j, v in coeffs.items():
            if not 0 <= j < self.n_vars:
                raise LpError(f"row {name!r} references undeclared variable {j}")
            if v != 0.0:
                cols.append(int(j))
                vals.append(float(v))
        idx = len(self.row_names)
        self._row_index[name] = idx
        self.row_names.append(name)
        self.row_cols.append(cols)
        self.row_vals.append(vals)
        self.row_sense.append(sense)
        self.rhs.append(float(rhs))
        return idx

    def var(self, name: str) -> int:
        return self._var_index[name]

    def row(self, name: str) -> int:
        return self._row_index[name]

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def matrix(self) -> sp.csr_matrix:
        indptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(c) for c in self.row_cols])
        indices = np.fromiter((j for c in self.row_cols for j in c), dtype=np.int64,
                              count=int(indptr[-1]))
        data = np.fromiter((v for r in self.row_vals for v in r), dtype=float,
                           count=int(indptr[-1]))
        A = sp.csr_matrix((data, indices, indptr), shape=(self.n_rows, self.n_vars))
        A.sort_indices()  # canonical form, independent of coefficient insertion order
        return A

    def arrays(self):
        """(c, A, sense, rhs, lb, ub, integer) as numpy arrays."""
        return (np.array(self.obj, dtype=float), self.matrix(),
                np.array(self.row_sense), np.array(self.rhs, dtype=float),
                np.array(self.lb, dtype=float), np.array(self.ub, dtype=float),
                np.array(self.integer, dtype=bool))

    def copy(self) -> "LpProblem":
        out = LpProblem(self.name)
        out.var_names = list(self.var_names)
        out.lb, out.ub = list(self.lb), list(self.ub)
        out.obj, out.integer = list(self.obj), list(self.integer)
        out.row_names = list(self.row_names)
        out.row_cols = [list(c) for c in self.row_cols]
        out.row_vals = [list(v) for v in self.row_vals]
        out.row_sense, out.rhs = list(self.row_sense), list(self.rhs)
        out._var_index = dict(self._var_index)
        out._row_index = dict(self._row_index)
        return out

    def evaluate(self, x) -> np.ndarray:
        """Row activities ``A @ x``."""
        return self.matrix() @ np.asarray(x, dtype=float)

    def row_violations(self, x, scaled: bool = True) -> np.ndarray:
        """Per-row violation; ``scaled`` divides each row by its largest |coefficient|."""
        x = np.asarray(x, dtype=float)
        act = self.evaluate(x)
        rhs = np.array(self.rhs)
        sense = np.array(self.row_sense)
        viol = np.zeros(self.n_rows)
        viol[sense == LE] = np.maximum(act - rhs, 0)[sense == LE]
        viol[sense == GE] = np.maximum(rhs - act, 0)[sense == GE]
        viol[sense == EQ] = np.abs(act - rhs)[sense == EQ]
        if scaled:
            norms = np.array([max((abs(v) for v in vals), default=1.0) for vals in self.row_vals])
            viol = viol / norms
        return viol

    def max_violation(self, x, scaled: bool = True) -> float:
        """Largest row (equilibrated by default) or bound violation."""
        x = np.asarray(x, dtype=float)
        viol = self.row_violations(x, scaled)
        bviol = np.maximum(np.array(self.lb) - x, 0) + np.maximum(x - np.array(self.ub), 0)
        return float(max(viol.max(initial=0.0), bviol.max(initial=0.0)))

    def to_text(self) -> str:
        """Human-readable dump, one constraint per line."""
        out = [f"\\ {self.name}", "maximize"]
        out.append("  obj: " + _expr(self.var_names, range(self.n_vars), self.obj))
        out.append("subject to")
        op = {LE: "<=", EQ: "=", GE: ">="}
        for k in range(self.n_rows):
            out.append(f"  {self.row_names[k]}: "
                       f"{_expr(self.var_names, self.row_cols[k], self.row_vals[k])} "
                       f"{op[self.row_sense[k]]} {self.rhs[k]!r}")
        out.append("bounds")
        for j, name in enumerate(self.var_names):
            out.append(f"  {self.lb[j]!r} <= {name} <= {self.ub[j]!r}")
        ints = [n for n, f in zip(self.var_names, self.integer) if f]
        if ints:
            out.append("binary")
            out.extend(f"  {n}" for n in ints)
        out.append("end")
        return "\n".join(out) + "\n"


def _expr(names, cols, vals) -> str:
    terms = [f"{v!r} {names[j]}" for j, v in zip(cols, vals) if v != 0]
    return " + ".join(terms) if terms else "0"


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    basis: Optional[object] = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"
