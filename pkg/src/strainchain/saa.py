"""Replicated sampling driver: statistical bounds around the sampled optimum.

Each pass runs M independent replications (optionally in parallel threads),
solves each replication's sampled problem exactly with the decomposition
loop, evaluates every candidate design on one shared evaluation batch
(common random numbers), and forms a confidence lower bound from the
replication objectives and an upper bound at the chosen design. Passes
repeat with fresh counter-derived seeds until the statistical gap closes or
the pass cap is hit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import math

from .instance import Design, Instance, ValidationError, validate_design
from .lshaped import run_lshaped
from .recourse import RecourseSolver
from .scenarios import RiskOverrides, sample_batch
from .stats import critical_values

ROLE_OPTIMIZE, ROLE_EVALUATE = 0, 1


@dataclass(frozen=True)
class SaaConfig:
    replications: int = 5                 # M
    optimization_scenarios: int = 30      # N per replication
    evaluation_scenarios: int = 300       # N' shared evaluation sample
    alpha: float = 0.01                   # confidence parameter for both bounds
    outer_gap_tolerance: float = 0.02     # stop when (U - L)/U falls below this
    inner_gap_tolerance: float = 1e-5     # decomposition loop tolerance
    base_seed: int = 20240101
    optimize_overrides: RiskOverrides = field(default_factory=RiskOverrides)
    evaluate_overrides: RiskOverrides = field(default_factory=RiskOverrides)
    forced_open: dict = field(default_factory=dict)   # plant -> 0/1 pinned in the master
    max_passes: int = 5
    max_iterations: int = 500             # decomposition iteration cap

    def validated(self) -> "SaaConfig":
        if self.replications < 2:
            raise ValidationError("need at least two replications")
        if self.optimization_scenarios < 1:
            raise ValidationError("need at least one optimization scenario")
        if self.evaluation_scenarios < self.optimization_scenarios:
            raise ValidationError("evaluation sample must be at least the optimization sample")
        if not 0.0 < self.alpha < 0.5:
            raise ValidationError("alpha must lie strictly inside (0, 0.5)")
        if not (self.outer_gap_tolerance > 0 and self.inner_gap_tolerance > 0):
            raise ValidationError("tolerances must be positive")
        if self.max_passes < 1 or self.max_iterations < 1:
            raise ValidationError("pass and iteration caps must be positive")
        return self


@dataclass(frozen=True)
class CostBreakdown:
    fixed: float
    raw_and_inbound: float              # raw material plus supplier-to-plant transport
    production_and_outbound: float      # production plus plant-to-country transport
    shortage_baseline: float            # baseline-price shortage cost
    shortage_escalation: float          # ban-induced price bump on the escalated tranche

    def total(self) -> float:
        return (
            self.fixed
            + self.raw_and_inbound
            + self.production_and_outbound
            + self.shortage_baseline
            + self.shortage_escalation
        )


@dataclass(frozen=True)
class DesignEvaluation:
    mean_objective: float
    std_error: float
    expected_shortage: dict             # country -> E[unmet demand]
    expected_demand: dict               # country -> E[demand] on the same sample
    expected_raw_flow: dict             # (supplier, plant) -> E[flow]
    expected_drug_flow: dict            # (plant, country) -> E[flow]
    sales_volume: float                 # E[total drug volume shipped]
    breakdown: CostBreakdown


@dataclass(frozen=True)
class SaaReport:
    replication_objectives: list
    candidate_designs: list
    incumbent: Design
    lower_bound: float
    upper_bound: float
    gap: float
    eval_objective: float
    eval_std_error: float
    evaluation: DesignEvaluation
    passes: int
    gap_unresolved: bool
    overrides_differ: bool


def evaluate_design(
    instance: Instance,
    design: Design,
    scenarios: list,
    solver: RecourseSolver | None = None,
) -> DesignEvaluation:
    """Sample mean, standard error, and per-country/cost detail for one design."""
    validate_design(instance, design)
    if not scenarios:
        raise ValidationError("need at least one evaluation scenario")
    solver = solver or RecourseSolver(instance)
    n = len(scenarios)
    fixed = sum(instance.fixed_cost[j] * design.open[j] for j in instance.plant_candidates)

    samples = []
    shortage = {k: 0.0 for k in instance.countries}
    demand = {k: 0.0 for k in instance.countries}
    raw_flow = {arc: 0.0 for arc in solver.u_arcs}
    drug_flow = {arc: 0.0 for arc in solver.v_arcs}
    raw_cost = outbound_cost = base_short = esc_short = sales = 0.0

    for scen in scenarios:
        sol = solver.solve(design, scen)
        samples.append(fixed + sol.objective)
        for k in instance.countries:
            shortage[k] += sol.shortage[k] / n
            demand[k] += scen.demand[k] / n
            base_short += instance.shortage_price[k] * sol.shortage[k] / n
            esc_short += scen.price_increase * sol.shortage_aux[k] / n
        for (i, j), v in sol.raw_flow.items():
            raw_flow[(i, j)] += v / n
            raw_cost += (instance.raw_cost[i] + instance.transport1[(i, j)]) * v / n
        for (j, k), v in sol.drug_flow.items():
            drug_flow[(j, k)] += v / n
            outbound_cost += (
                instance.production_cost[j] + instance.transport2[(j, k)]
            ) * v / n
            sales += v / n

    mean = sum(samples) / n
    if n > 1:
        var = sum((s - mean) ** 2 for s in samples) / ((n - 1) * n)
    else:
        var = 0.0
    return DesignEvaluation(
        mean_objective=mean,
        std_error=math.sqrt(var),
        expected_shortage=shortage,
        expected_demand=demand,
        expected_raw_flow=raw_flow,
        expected_drug_flow=drug_flow,
        sales_volume=sales,
        breakdown=CostBreakdown(
            fixed=fixed,
            raw_and_inbound=raw_cost,
            production_and_outbound=outbound_cost,
            shortage_baseline=base_short,
            shortage_escalation=esc_short,
        ),
    )


def confidence_bounds(
    objectives: list, alpha: float, eval_mean: float, eval_std_error: float
) -> tuple[float, float]:
    """Lower bound from the replication objectives, upper bound at a design.

    lower = mean(objectives) - t_{alpha, M-1} * sqrt(var / ((M-1) M))
    upper = eval_mean + z_alpha * eval_std_error
    """
    m_reps = len(objectives)
    if m_reps < 2:
        raise ValidationError("need at least two replication objectives")
    z_bar = sum(objectives) / m_reps
    var_bar = sum((z - z_bar) ** 2 for z in objectives) / ((m_reps - 1) * m_reps)
    t_crit, z_crit = critical_values(alpha, m_reps - 1)
    return z_bar - t_crit * math.sqrt(var_bar), eval_mean + z_crit * eval_std_error


def _run_replication(instance, config, solver, pass_idx, m):
    scens = sample_batch(
        instance,
        (config.base_seed, pass_idx, ROLE_OPTIMIZE, m),
        config.optimization_scenarios,
        config.optimize_overrides,
    )
    result = run_lshaped(
        instance,
        scens,
        epsilon=config.inner_gap_tolerance,
        forced=config.forced_open or None,
        max_iterations=config.max_iterations,
        solver=solver,
    )
    return result.objective, result.design


def run_saa(instance: Instance, config: SaaConfig, threads: int = 1) -> SaaReport:
    config = config.validated()
    solver = RecourseSolver(instance)
    m_reps = config.replications

    last = None
    for pass_idx in range(config.max_passes):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(_run_replication, instance, config, solver, pass_idx, m)
                    for m in range(m_reps)
                ]
                outcomes = [f.result() for f in futures]
        else:
            outcomes = [
                _run_replication(instance, config, solver, pass_idx, m)
                for m in range(m_reps)
            ]
        objectives = [z for z, _ in outcomes]
        designs = [d for _, d in outcomes]

        eval_batch = sample_batch(
            instance,
            (config.base_seed, pass_idx, ROLE_EVALUATE),
            config.evaluation_scenarios,
            config.evaluate_overrides,
        )
        evals: dict = {}
        for d in designs:
            if d.key() not in evals:
                evals[d.key()] = evaluate_design(instance, d, eval_batch, solver)
        best_m = min(range(m_reps), key=lambda m: evals[designs[m].key()].mean_objective)
        incumbent = designs[best_m]
        chosen = evals[incumbent.key()]

        lower, upper = confidence_bounds(
            objectives, config.alpha, chosen.mean_objective, chosen.std_error
        )
        gap = (upper - lower) / upper if upper > 0 else 0.0

        last = SaaReport(
            replication_objectives=objectives,
            candidate_designs=designs,
            incumbent=incumbent,
            lower_bound=lower,
            upper_bound=upper,
            gap=gap,
            eval_objective=chosen.mean_objective,
            eval_std_error=chosen.std_error,
            evaluation=chosen,
            passes=pass_idx + 1,
            gap_unresolved=gap > config.outer_gap_tolerance,
            overrides_differ=config.optimize_overrides != config.evaluate_overrides,
        )
        if not last.gap_unresolved:
            break
    return last
