import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

LE, GE, EQ = "<=", ">=", "="
Row = Tuple[Dict[int, Fraction], str, Fraction]

MAX_PIVOTS = 100_000


class LPError(RuntimeError):
    """Raised when a linear program cannot be solved to a certified optimum."""

    pass


class InfeasibleLPError(LPError):
    pass


class UnboundedLPError(LPError):
    pass


@dataclass
class LinearProgram:
    """minimize c.x subject to rows, 0 <= x_j <= upper_j (None for no bound)."""

    objective: List[Fraction]
    rows: List[Row] = field(default_factory=list)
    upper: List[Optional[Fraction]] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def violations(self, values: Sequence[Fraction]) -> List[str]:
        problems = []
        for j, x in enumerate(values):
            if x < 0 or (self.upper[j] is not None and x > self.upper[j]):
                problems.append(f"x{j} = {x} outside its bounds")
        for idx, (coeffs, sense, rhs) in enumerate(self.rows):
            lhs = sum((a * values[j] for j, a in coeffs.items()), Fraction(0))
            ok = lhs <= rhs if sense == LE else lhs >= rhs if sense == GE else lhs == rhs
            if not ok:
                problems.append(f"row {idx}: {lhs} {sense} {rhs} fails")
        return problems

    def value_of(self, values: Sequence[Fraction]) -> Fraction:
        return sum((c * x for c, x in zip(self.objective, values)), Fraction(0))


@dataclass
class SimplexResult:
    values: List[Fraction]
    objective: Fraction
    # reduced costs of the final nonbasic columns, all >= 0 at optimality
    reduced_costs: Dict[int, Fraction]
    pivots: int


class BoundedSimplex:
    """
    Exact two-phase primal simplex over Fractions with Bland's rule.
    Upper bounds are kept implicit by complementing x_j into u_j - x_j.
    Rows store only the coefficients of nonbasic columns.
    """

    def __init__(self, program: LinearProgram):
        self.program = program
        self.upper: List[Optional[Fraction]] = [
            None if u is None else Fraction(u) for u in program.upper
        ]
        self.rows: List[Dict[int, Fraction]] = []
        self.rhs: List[Fraction] = []
        self.basis: List[int] = []
        self.artificial = set()
        next_var = program.n_vars
        for coeffs, sense, b in program.rows:
            row = {j: Fraction(a) for j, a in coeffs.items() if a != 0}
            b = Fraction(b)
            slack_sign = {LE: 1, GE: -1, EQ: 0}[sense]
            if b < 0:
                row = {j: -a for j, a in row.items()}
                b, slack_sign = -b, -slack_sign
            if slack_sign:
                self.upper.append(None)
                row[next_var] = Fraction(slack_sign)
                next_var += 1
            if slack_sign == 1:
                basic = next_var - 1
            else:
                basic = next_var
                self.upper.append(None)
                self.artificial.add(basic)
                next_var += 1
            row.pop(basic, None)
            self.rows.append(row)
            self.rhs.append(b)
            self.basis.append(basic)
        self.flipped = [False] * next_var
        self.reduced: Dict[int, Fraction] = {}
        self.z0 = Fraction(0)
        self.pivots = 0

    def _price(self, costs: Dict[int, Fraction]):
        """Expresses the objective in terms of the current nonbasic columns."""
        reduced: Dict[int, Fraction] = defaultdict(Fraction)
        z0 = Fraction(0)
        for j, c in costs.items():
            if c == 0:
                continue
            if self.flipped[j]:
                z0 += c * self.upper[j]
                c = -c
            reduced[j] += c
        for r, B in enumerate(self.basis):
            cB = reduced.pop(B, Fraction(0))
            if cB:
                z0 += cB * self.rhs[r]
                for k, a in self.rows[r].items():
                    reduced[k] -= cB * a
        self.reduced = {j: v for j, v in reduced.items() if v != 0}
        self.z0 = z0

    def _flip(self, j: int):
        u = self.upper[j]
        for r, row in enumerate(self.rows):
            a = row.get(j)
            if a:
                self.rhs[r] -= a * u
                row[j] = -a
        c = self.reduced.get(j)
        if c:
            self.z0 += c * u
            self.reduced[j] = -c
        self.flipped[j] = not self.flipped[j]

    def _flip_basic(self, r: int):
        B = self.basis[r]
        self.rows[r] = {k: -a for k, a in self.rows[r].items()}
        self.rhs[r] = self.upper[B] - self.rhs[r]
        self.flipped[B] = not self.flipped[B]

    def _pivot(self, r: int, j: int):
        row = self.rows[r]
        p = row.pop(j)
        leaving = self.basis[r]
        new = {k: a / p for k, a in row.items()}
        new[leaving] = 1 / p
        beta = self.rhs[r] / p
        self.rows[r], self.rhs[r], self.basis[r] = new, beta, j
        for s, other in enumerate(self.rows):
            if s == r:
                continue
            a = other.pop(j, None)
            if not a:
                continue
            for k, v in new.items():
                value = other.get(k, 0) - a * v
                if value:
                    other[k] = value
                else:
                    other.pop(k, None)
            self.rhs[s] -= a * beta
        c = self.reduced.pop(j, None)
        if c:
            self.z0 += c * beta
            for k, v in new.items():
                value = self.reduced.get(k, 0) - c * v
                if value:
                    self.reduced[k] = value
                else:
                    self.reduced.pop(k, None)
        self.pivots += 1

    def _step(self) -> str:
        entering = [j for j, v in self.reduced.items() if v < 0]
        if not entering:
            return "optimal"
        j = min(entering)
        # (ratio, blocking variable, row); row None means a bound flip of j
        best = (self.upper[j], j, None) if self.upper[j] is not None else None
        for r, row in enumerate(self.rows):
            a = row.get(j)
            if not a:
                continue
            B = self.basis[r]
            if a > 0:
                ratio = self.rhs[r] / a
            elif self.upper[B] is not None:
                ratio = (self.upper[B] - self.rhs[r]) / (-a)
            else:
                continue
            if best is None or (ratio, B) < best[:2]:
                best = (ratio, B, r)
        if best is None:
            return "unbounded"
        r = best[2]
        if r is None:
            self._flip(j)
        else:
            if self.rows[r][j] < 0:
                self._flip_basic(r)
            self._pivot(r, j)
        return "continue"

    def _run(self, phase: str):
        while True:
            status = self._step()
            if status == "optimal":
                return
            if status == "unbounded":
                raise UnboundedLPError(f"objective is unbounded below ({phase})")
            if self.pivots > MAX_PIVOTS:
                raise LPError(f"no optimum after {MAX_PIVOTS} pivots ({phase})")

    def _drop_artificials(self):
        keep = []
        for r, B in enumerate(self.basis):
            if B not in self.artificial:
                keep.append(r)
                continue
            columns = [k for k, a in self.rows[r].items() if k not in self.artificial]
            if columns:
                self._pivot(r, min(columns))
                keep.append(r)
            else:
                logging.debug(f"simplex: dropping redundant row {r}")
        self.rows = [self.rows[r] for r in keep]
        self.rhs = [self.rhs[r] for r in keep]
        self.basis = [self.basis[r] for r in keep]
        for row in self.rows:
            for a in self.artificial:
                row.pop(a, None)

    def solve(self) -> SimplexResult:
        if self.artificial:
            self._price({a: Fraction(1) for a in self.artificial})
            self._run("phase I")
            if self.z0 > 0:
                raise InfeasibleLPError(f"infeasible: phase I stopped at {self.z0}")
            self._drop_artificials()
        costs = {j: Fraction(c) for j, c in enumerate(self.program.objective)}
        self._price(costs)
        self._run("phase II")

        position = {B: r for r, B in enumerate(self.basis)}
        values = []
        for j in range(self.program.n_vars):
            x = self.rhs[position[j]] if j in position else Fraction(0)
            values.append(self.upper[j] - x if self.flipped[j] else x)
        result = SimplexResult(values, self.z0, dict(self.reduced), self.pivots)
        logging.debug(f"simplex: optimum {self.z0} after {self.pivots} pivots")
        return result


def solve_exact(program: LinearProgram) -> SimplexResult:
    """Solves exactly and re-verifies feasibility, the objective and optimality."""
    result = BoundedSimplex(program).solve()
    problems = program.violations(result.values)
    if problems:
        raise LPError(f"simplex returned an infeasible point: {problems[0]}")
    if program.value_of(result.values) != result.objective:
        raise LPError("simplex objective disagrees with the recomputed value")
    if any(v < 0 for v in result.reduced_costs.values()):
        raise LPError("negative reduced cost left at the reported optimum")
    return result


def solve_float(program: LinearProgram) -> Tuple[float, np.ndarray]:
    """Floating-point cross-check through scipy's HiGHS backend."""
    n = program.n_vars
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for coeffs, sense, rhs in program.rows:
        dense = np.zeros(n)
        for j, a in coeffs.items():
            dense[j] = float(a)
        if sense == EQ:
            A_eq.append(dense)
            b_eq.append(float(rhs))
        elif sense == LE:
            A_ub.append(dense)
            b_ub.append(float(rhs))
        else:
            A_ub.append(-dense)
            b_ub.append(-float(rhs))
    res = linprog(
        c=np.array([float(c) for c in program.objective]),
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=[(0, None if u is None else float(u)) for u in program.upper],
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleLPError(res.message)
    if res.status == 3:
        raise UnboundedLPError(res.message)
    if not res.success:
        raise LPError(res.message)
    return float(res.fun), res.x
