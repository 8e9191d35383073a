"""Decomposition loop: binary master over plant openings plus averaged cuts.

The master minimizes fixed cost plus a lower envelope of the sampled mean
recourse cost; the envelope starts at zero (recourse costs are nonnegative)
and grows by one aggregated cut per iteration. The master itself is solved
exactly: exhaustive enumeration up to ENUMERATION_LIMIT candidate plants,
depth-first branch and bound with the single-cut relaxation bound beyond.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .instance import Design, Instance, ValidationError
from .recourse import RecourseSolver, cut_terms_from

ENUMERATION_LIMIT = 20
ENUM_BATCH = 1 << 16


class IterationLimitError(RuntimeError):
    """Convergence loop exceeded its iteration cap; carries the bound traces."""

    def __init__(self, message: str, lb_trace: list, ub_trace: list):
        super().__init__(message)
        self.lb_trace = lb_trace
        self.ub_trace = ub_trace


@dataclass(frozen=True)
class OptimalityCut:
    constant: float
    coeff: dict  # plant candidate -> money

    def value_at(self, open_map: dict) -> float:
        return self.constant + sum(self.coeff[j] * open_map[j] for j in self.coeff)


@dataclass
class LShapedResult:
    design: Design
    objective: float       # best sampled total cost found (the final upper bound)
    iterations: int
    lb_trace: list = field(default_factory=list)
    ub_trace: list = field(default_factory=list)
    cuts: list = field(default_factory=list)


def _theta_floor(values: np.ndarray) -> np.ndarray:
    return np.maximum(values, 0.0)


def solve_master(
    instance: Instance,
    cuts: list,
    forced: dict | None = None,
    enumeration_limit: int = ENUMERATION_LIMIT,
) -> tuple[Design, float]:
    """Global minimizer of fixed cost + cut envelope over nonempty designs."""
    plants = list(instance.plant_candidates)
    forced = dict(forced or {})
    unknown = sorted(set(forced) - set(plants))
    if unknown:
        raise ValidationError(f"forced assignment for non-candidates: {unknown}")

    if len(plants) <= enumeration_limit:
        return _master_by_enumeration(instance, plants, cuts, forced)
    return _master_by_branch_and_bound(instance, plants, cuts, forced)


def _master_by_enumeration(instance, plants, cuts, forced):
    n = len(plants)
    fixed = np.array([instance.fixed_cost[j] for j in plants])
    consts = np.array([c.constant for c in cuts]) if cuts else np.zeros(0)
    coefs = (
        np.array([[c.coeff[j] for j in plants] for c in cuts]) if cuts else np.zeros((0, n))
    )
    forced_pos = {plants.index(j): v for j, v in forced.items()}

    best_value = np.inf
    best_bits = None
    shifts = np.arange(n - 1, -1, -1)
    for start in range(1, 1 << n, ENUM_BATCH):
        stop = min(start + ENUM_BATCH, 1 << n)
        codes = np.arange(start, stop, dtype=np.int64)
        designs = (codes[:, None] >> shifts) & 1
        mask = np.ones(len(codes), dtype=bool)
        for pos, v in forced_pos.items():
            mask &= designs[:, pos] == v
        if not mask.any():
            continue
        designs = designs[mask]
        values = designs @ fixed
        if cuts:
            theta = _theta_floor((designs @ coefs.T + consts).max(axis=1))
        else:
            theta = np.zeros(len(designs))
        values = values + theta
        local = int(np.argmin(values))
        if values[local] < best_value - 1e-15:
            best_value = float(values[local])
            best_bits = designs[local].copy()
    if best_bits is None:
        raise ValidationError("forced assignments close every plant")
    design = Design(open={j: int(b) for j, b in zip(plants, best_bits)})
    return design, best_value


def _master_by_branch_and_bound(instance, plants, cuts, forced):
    n = len(plants)
    fixed = np.array([instance.fixed_cost[j] for j in plants])
    consts = [c.constant for c in cuts]
    coefs = [np.array([c.coeff[j] for j in plants]) for c in cuts]
    order = list(range(n))  # canonical order keeps tie-breaking deterministic

    best = {"value": np.inf, "bits": None}

    def bound(assign: np.ndarray, depth: int) -> float:
        """Lower bound over all completions; the >=1-plant constraint is relaxed."""
        assigned = np.zeros(n, dtype=bool)
        assigned[order[:depth]] = True
        opened = assigned & (assign == 1)
        free = ~assigned
        base = float(fixed[opened].sum())
        cands = [base + float(np.minimum(0.0, fixed[free]).sum())]  # theta >= 0 floor
        for const, coef in zip(consts, coefs):
            assigned_part = const + float(coef[opened].sum())
            free_part = float(np.minimum(0.0, fixed[free] + coef[free]).sum())
            cands.append(base + assigned_part + free_part)
        return max(cands)

    def evaluate(bits: np.ndarray) -> float:
        value = float(fixed[bits == 1].sum())
        theta = 0.0
        for const, coef in zip(consts, coefs):
            theta = max(theta, const + float(coef[bits == 1].sum()))
        return value + theta

    def dfs(assign: np.ndarray, depth: int):
        if depth == n:
            if assign.sum() < 1:
                return
            value = evaluate(assign)
            if value < best["value"] - 1e-15:
                best["value"] = value
                best["bits"] = assign.copy()
            return
        if bound(assign, depth) >= best["value"]:
            return
        pos = order[depth]
        j = plants[pos]
        choices = (forced[j],) if j in forced else (0, 1)
        for v in choices:
            assign[pos] = v
            dfs(assign, depth + 1)
        assign[pos] = 0

    dfs(np.zeros(n, dtype=np.int64), 0)
    if best["bits"] is None:
        raise ValidationError("forced assignments close every plant")
    design = Design(open={j: int(b) for j, b in zip(plants, best["bits"])})
    return design, float(best["value"])


def run_lshaped(
    instance: Instance,
    scenarios: list,
    epsilon: float,
    forced: dict | None = None,
    max_iterations: int = 500,
    solver: RecourseSolver | None = None,
) -> LShapedResult:
    """Alternate master solves and scenario solves until the gap closes."""
    if not scenarios:
        raise ValidationError("need at least one scenario")
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    solver = solver or RecourseSolver(instance)
    plants = list(instance.plant_candidates)
    n_scen = len(scenarios)

    cuts: list[OptimalityCut] = []
    lb_trace: list[float] = []
    ub_trace: list[float] = []
    ub = np.inf
    incumbent: Design | None = None

    for iteration in range(1, max_iterations + 1):
        candidate, lb = solve_master(instance, cuts, forced)
        lb_trace.append(lb)

        fixed = sum(instance.fixed_cost[j] * candidate.open[j] for j in plants)
        mean_recourse = 0.0
        mean_const = 0.0
        mean_coeff = {j: 0.0 for j in plants}
        for scen in scenarios:
            sol = solver.solve(candidate, scen)
            mean_recourse += sol.objective / n_scen
            const, coeff = cut_terms_from(instance, scen, sol)
            mean_const += const / n_scen
            for j in plants:
                mean_coeff[j] += coeff[j] / n_scen
        z_n = fixed + mean_recourse
        if incumbent is None or z_n < ub:
            ub = z_n
            incumbent = candidate
        ub_trace.append(ub)

        gap = (ub - lb) / ub if ub > 0 else 0.0
        if gap <= epsilon:
            return LShapedResult(
                design=incumbent,
                objective=ub,
                iterations=iteration,
                lb_trace=lb_trace,
                ub_trace=ub_trace,
                cuts=cuts,
            )
        cuts.append(OptimalityCut(constant=mean_const, coeff=dict(mean_coeff)))

    raise IterationLimitError(
        f"no convergence within {max_iterations} iterations", lb_trace, ub_trace
    )
