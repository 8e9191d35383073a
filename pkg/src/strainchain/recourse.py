"""Second-stage solver: exact flows, shortages, duals, and optimality cuts.

The scenario problem is a min-cost transshipment: raw material moves from
suppliers to open plants, drugs move from plants to countries, unmet demand
is absorbed by two parallel penalty arcs per country (a tranche at the
baseline price capped by the ban-shielded volume, the remainder at baseline
plus the scenario's price bump), and local excess is free. Export gates and
the shielded tranche are variable upper bounds, so the LP solved has one row
per supplier, plant, country, and plant-balance only. Duals for the gate and
tranche families are reconstructed from reduced costs; they are always
feasible for the row formulation, which is what makes the cuts valid at
every design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Design, Instance, validate_design
from .scenarios import Scenario, country_retained
from .simplex import SimplexError, solve_bounded_lp

BALANCE_TOL = 1e-7       # absolute feasibility tolerance on balance rows
DUALITY_REL_TOL = 1e-6   # relative primal/dual agreement required per solve

GATE_SELF, GATE_ALLY, GATE_GENERAL = 0, 1, 2


class RecourseError(RuntimeError):
    """Numerical failure inside a scenario solve."""


@dataclass(frozen=True)
class DualVector:
    supplier_capacity: dict    # supplier -> multiplier (<= 0)
    supply_gate: dict          # (supplier, plant) cross arcs -> multiplier (<= 0)
    plant_capacity: dict       # plant -> multiplier (<= 0)
    distribution_gate: dict    # (plant, country) cross arcs -> multiplier (<= 0)
    demand: dict               # country -> multiplier (free sign)
    flow_balance: dict         # plant -> multiplier (free sign)
    shortage_aux: dict         # country -> multiplier (>= 0)


@dataclass(frozen=True)
class RecourseSolution:
    raw_flow: dict             # (supplier, plant) -> units
    drug_flow: dict            # (plant, country) -> units
    shortage: dict             # country -> units of unmet demand
    shortage_aux: dict         # country -> escalated tranche of the shortage
    excess: dict               # country -> leftover retained exports
    objective: float
    duals: DualVector
    design: Design             # the first-stage decision this solve used


class RecourseSolver:
    """Reusable scenario solver; precomputes everything design-independent."""

    def __init__(self, instance: Instance):
        self.instance = instance
        K = list(instance.countries)
        self.K = K
        self.sup = list(instance.suppliers)
        self.pl = list(instance.plant_candidates)
        nI, nJ, nK = len(self.sup), len(self.pl), len(K)
        self.nI, self.nJ, self.nK = nI, nJ, nK
        kpos = {k: n for n, k in enumerate(K)}
        self.kpos = kpos

        ally_raw = instance.ally_supply_arcs()
        ally_dist = instance.ally_distribution_arcs()

        def gate_class(a: str, bnode: str, ally_arcs) -> int:
            if a == bnode:
                return GATE_SELF
            return GATE_ALLY if (a, bnode) in ally_arcs else GATE_GENERAL

        self.u_arcs = [(i, j) for i in self.sup for j in self.pl]
        self.v_arcs = [(j, k) for j in self.pl for k in K]
        self.u_gate = np.array(
            [gate_class(i, j, ally_raw) for i, j in self.u_arcs], dtype=np.int8
        )
        self.v_gate = np.array(
            [gate_class(j, k, ally_dist) for j, k in self.v_arcs], dtype=np.int8
        )
        self.u_origin = np.array([kpos[i] for i, _ in self.u_arcs])
        self.v_origin = np.array([kpos[j] for j, _ in self.v_arcs])

        nU, nV = nI * nJ, nJ * nK
        self.oU, self.oV = 0, nU
        self.oS1 = nU + nV
        self.oS2 = self.oS1 + nK
        self.oE = self.oS2 + nK
        self.oSlackS = self.oE + nK
        self.oSlackP = self.oSlackS + nI
        n = self.oSlackP + nJ
        m = nI + nJ + nK + nJ
        self.n, self.m = n, m
        self.rSup, self.rPl, self.rDem, self.rBal = (
            0,
            nI,
            nI + nJ,
            nI + nJ + nK,
        )

        A = np.zeros((m, n))
        for a, (i, j) in enumerate(self.u_arcs):
            si, pj = self.sup.index(i), self.pl.index(j)
            A[self.rSup + si, self.oU + a] = 1.0
            A[self.rBal + pj, self.oU + a] = 1.0
        for a, (j, k) in enumerate(self.v_arcs):
            pj = self.pl.index(j)
            A[self.rPl + pj, self.oV + a] = 1.0
            A[self.rDem + kpos[k], self.oV + a] = 1.0
            A[self.rBal + pj, self.oV + a] = -1.0
        for kn in range(nK):
            A[self.rDem + kn, self.oS1 + kn] = 1.0
            A[self.rDem + kn, self.oS2 + kn] = 1.0
            A[self.rDem + kn, self.oE + kn] = -1.0
        A[self.rSup : self.rSup + nI, self.oSlackS : self.oSlackS + nI] = np.eye(nI)
        A[self.rPl : self.rPl + nJ, self.oSlackP : self.oSlackP + nJ] = np.eye(nJ)
        self.A = A

        base_cost = np.zeros(n)
        for a, (i, j) in enumerate(self.u_arcs):
            base_cost[self.oU + a] = instance.raw_cost[i] + instance.transport1[(i, j)]
        for a, (j, k) in enumerate(self.v_arcs):
            base_cost[self.oV + a] = instance.production_cost[j] + instance.transport2[(j, k)]
        price = np.array([instance.shortage_price[k] for k in K])
        base_cost[self.oS1 : self.oS1 + nK] = price
        base_cost[self.oS2 : self.oS2 + nK] = price  # price bump added per scenario
        self.base_cost = base_cost

        self.sup_capacity = np.array([instance.supplier_capacity[i] for i in self.sup])
        self.pl_capacity = np.array([instance.plant_capacity[j] for j in self.pl])
        self.exports_general = np.array([instance.exports_general[k] for k in K])
        self.exports_to_c1 = np.array([instance.exports_to_c1[k] for k in K])
        self.ally_mask = np.array([k in set(instance.ally_group) for k in K])
        self.plant_mask = np.array([k in set(self.pl) for k in K])
        self.pl_row_of_country = np.array([self.pl.index(k) if k in self.pl else -1 for k in K])

    # -- scenario/design dependent pieces ---------------------------------

    def _scenario_arrays(self, scenario: Scenario):
        a_sup = self.sup_capacity * np.array(
            [scenario.supplier_avail[i] for i in self.sup]
        )
        b_pl = self.pl_capacity * np.array([scenario.plant_avail[j] for j in self.pl])
        demand = np.array([scenario.demand[k] for k in self.K])
        g = np.array([scenario.ban_general[k] for k in self.K], dtype=float)
        g_ally = np.ones(self.nK)
        for k, v in scenario.ban_ally.items():
            g_ally[self.kpos[k]] = v
        retained_k = self.exports_general * (1.0 - g) + self.exports_to_c1 * np.where(
            self.ally_mask, 1.0 - g_ally, 1.0 - g
        )
        return a_sup, b_pl, demand, g, g_ally, retained_k

    def _gate_values(self, gate_class: np.ndarray, origin: np.ndarray, g, g_ally) -> np.ndarray:
        vals = np.ones(len(gate_class))
        general = gate_class == GATE_GENERAL
        vals[general] = g[origin[general]]
        ally = gate_class == GATE_ALLY
        vals[ally] = g_ally[origin[ally]]
        return vals

    def solve(self, design: Design, scenario: Scenario) -> RecourseSolution:
        validate_design(self.instance, design)
        nI, nJ, nK = self.nI, self.nJ, self.nK
        a_sup, b_pl, demand, g, g_ally, retained_k = self._scenario_arrays(scenario)
        y = np.array([float(design.open[j]) for j in self.pl])

        cost = self.base_cost.copy()
        cost[self.oS2 : self.oS2 + nK] += scenario.price_increase

        gate_u = self._gate_values(self.u_gate, self.u_origin, g, g_ally)
        gate_v = self._gate_values(self.v_gate, self.v_origin, g, g_ally)
        upper = np.full(self.n, np.inf)
        # cross-country arcs are capped by origin capacity x export gate x Y;
        # self arcs stay unbounded (capacity and balance rows still bind them)
        cap_u = np.repeat(a_sup, nJ) * gate_u * np.tile(y, nI)
        upper[self.oU : self.oU + nI * nJ] = np.where(
            self.u_gate != GATE_SELF, cap_u, np.inf
        )
        cap_v = np.repeat(b_pl, nK) * gate_v * np.repeat(y, nK)
        upper[self.oV : self.oV + nJ * nK] = np.where(
            self.v_gate != GATE_SELF, cap_v, np.inf
        )
        # shielded tranche: only a country with its own open plant and an
        # active general ban keeps its demand at the baseline price
        shield = demand * (1.0 - g)
        y_country = np.zeros(nK)
        y_country[self.pl_row_of_country >= 0] = y[
            self.pl_row_of_country[self.pl_row_of_country >= 0]
        ]
        upper[self.oS1 : self.oS1 + nK] = np.where(
            self.plant_mask, shield * y_country, 0.0
        )

        b = np.concatenate([a_sup, b_pl * y, demand - retained_k, np.zeros(nJ)])

        basis = np.empty(self.m, dtype=np.intp)
        basis[self.rSup : self.rSup + nI] = self.oSlackS + np.arange(nI)
        basis[self.rPl : self.rPl + nJ] = self.oSlackP + np.arange(nJ)
        rhs_dem = b[self.rDem : self.rDem + nK]
        basis[self.rDem : self.rDem + nK] = np.where(
            rhs_dem >= 0, self.oS2 + np.arange(nK), self.oE + np.arange(nK)
        )
        # the self-distribution column of each plant carries its balance row
        basis[self.rBal : self.rBal + nJ] = self.oV + np.array(
            [pj * nK + self.kpos[j] for pj, j in enumerate(self.pl)]
        )

        try:
            sol = solve_bounded_lp(self.A, b, cost, upper, basis)
        except SimplexError as exc:
            raise RecourseError(f"scenario solve failed: {exc}") from exc

        return self._package(sol, design, scenario, demand, retained_k)

    def _package(self, sol, design, scenario, demand, retained_k):
        nI, nJ, nK = self.nI, self.nJ, self.nK
        x = sol.x
        u_vals = x[self.oU : self.oU + nI * nJ]
        v_vals = x[self.oV : self.oV + nJ * nK]
        s1 = x[self.oS1 : self.oS1 + nK]
        s2 = x[self.oS2 : self.oS2 + nK]
        e = x[self.oE : self.oE + nK]

        inflow = u_vals.reshape(nI, nJ).sum(axis=0)
        outflow = v_vals.reshape(nJ, nK).sum(axis=1)
        scale = 1.0 + float(np.abs(sol.x).max(initial=0.0))
        if np.abs(inflow - outflow).max(initial=0.0) > BALANCE_TOL * scale:
            raise RecourseError("flow balance residual beyond tolerance")
        served = v_vals.reshape(nJ, nK).sum(axis=0)
        residual = served + s1 + s2 - e + retained_k - demand
        if np.abs(residual).max(initial=0.0) > BALANCE_TOL * scale:
            raise RecourseError("demand balance residual beyond tolerance")

        y_rows = sol.row_duals
        pi_sup = np.minimum(0.0, y_rows[self.rSup : self.rSup + nI])
        pi_pl = np.minimum(0.0, y_rows[self.rPl : self.rPl + nJ])
        pi_dem = y_rows[self.rDem : self.rDem + nK]
        pi_bal = y_rows[self.rBal : self.rBal + nJ]
        rc = sol.reduced_costs
        gate_dual_u = np.minimum(0.0, rc[self.oU : self.oU + nI * nJ])
        gate_dual_u[self.u_gate == GATE_SELF] = 0.0
        gate_dual_v = np.minimum(0.0, rc[self.oV : self.oV + nJ * nK])
        gate_dual_v[self.v_gate == GATE_SELF] = 0.0
        aux_dual = np.maximum(0.0, -rc[self.oS1 : self.oS1 + nK])

        duals = DualVector(
            supplier_capacity={i: float(pi_sup[si]) for si, i in enumerate(self.sup)},
            supply_gate={
                arc: float(gate_dual_u[a])
                for a, arc in enumerate(self.u_arcs)
                if self.u_gate[a] != GATE_SELF
            },
            plant_capacity={j: float(pi_pl[pj]) for pj, j in enumerate(self.pl)},
            distribution_gate={
                arc: float(gate_dual_v[a])
                for a, arc in enumerate(self.v_arcs)
                if self.v_gate[a] != GATE_SELF
            },
            demand={k: float(pi_dem[kn]) for kn, k in enumerate(self.K)},
            flow_balance={j: float(pi_bal[pj]) for pj, j in enumerate(self.pl)},
            shortage_aux={k: float(aux_dual[kn]) for kn, k in enumerate(self.K)},
        )

        solution = RecourseSolution(
            raw_flow={arc: float(u_vals[a]) for a, arc in enumerate(self.u_arcs)},
            drug_flow={arc: float(v_vals[a]) for a, arc in enumerate(self.v_arcs)},
            shortage={k: float(s1[kn] + s2[kn]) for kn, k in enumerate(self.K)},
            shortage_aux={k: float(s2[kn]) for kn, k in enumerate(self.K)},
            excess={k: float(e[kn]) for kn, k in enumerate(self.K)},
            objective=sol.objective,
            duals=duals,
            design=design,
        )

        const, coeff = cut_terms_from(self.instance, scenario, solution)
        tight = const + sum(coeff[j] * design.open[j] for j in self.pl)
        tol = DUALITY_REL_TOL * max(1.0, abs(solution.objective))
        if abs(tight - solution.objective) > tol:
            raise RecourseError(
                f"duality violation: dual value {tight!r} vs objective {solution.objective!r}"
            )
        return solution


def solve_recourse(instance: Instance, design: Design, scenario: Scenario) -> RecourseSolution:
    return RecourseSolver(instance).solve(design, scenario)


# -- optimality-cut terms ----------------------------------------------------


def cut_terms_from(
    instance: Instance, scenario: Scenario, solution: RecourseSolution
) -> tuple[float, dict]:
    """Affine minorant of the scenario cost as a function of the design.

    constant + sum_j coeff[j] * Y_j underestimates the scenario's optimal
    cost at every feasible design and matches it at the design that produced
    the solution.
    """
    duals = solution.duals
    a_sup = {
        i: instance.supplier_capacity[i] * scenario.supplier_avail[i]
        for i in instance.suppliers
    }
    b_pl = {
        j: instance.plant_capacity[j] * scenario.plant_avail[j]
        for j in instance.plant_candidates
    }
    ally_raw = instance.ally_supply_arcs()
    ally_dist = instance.ally_distribution_arcs()

    constant = sum(duals.supplier_capacity[i] * a_sup[i] for i in instance.suppliers)
    for k in instance.countries:
        rhs = scenario.demand[k] - country_retained(
            instance, k, scenario.ban_general, scenario.ban_ally
        )
        constant += duals.demand[k] * rhs

    coeff = {j: 0.0 for j in instance.plant_candidates}
    for (i, j), pi in duals.supply_gate.items():
        gate_val = (
            scenario.ban_ally[i] if (i, j) in ally_raw else scenario.ban_general[i]
        )
        coeff[j] += pi * a_sup[i] * gate_val
    for j in instance.plant_candidates:
        coeff[j] += duals.plant_capacity[j] * b_pl[j]
    for (j, k), pi in duals.distribution_gate.items():
        gate_val = (
            scenario.ban_ally[j] if (j, k) in ally_dist else scenario.ban_general[j]
        )
        coeff[j] += pi * b_pl[j] * gate_val
    for j in instance.plant_candidates:
        shield = scenario.demand[j] * (1 - scenario.ban_general[j])
        coeff[j] += duals.shortage_aux[j] * (-shield)
    return float(constant), coeff


def recourse_cut_terms(
    instance: Instance, scenario: Scenario, solution: RecourseSolution
) -> tuple[float, dict]:
    """Cut terms with the tightness/duality guarantee re-verified."""
    constant, coeff = cut_terms_from(instance, scenario, solution)
    value = constant + sum(coeff[j] * solution.design.open[j] for j in coeff)
    tol = DUALITY_REL_TOL * max(1.0, abs(solution.objective))
    if abs(value - solution.objective) > tol:
        raise RecourseError(
            f"duality violation: cut value {value!r} vs objective {solution.objective!r}"
        )
    return constant, coeff


# -- structural diagnostics ---------------------------------------------------


def check_structural_theorems(
    instance: Instance,
    design: Design,
    scenario: Scenario,
    solution: RecourseSolution,
    tol: float = 1e-6,
) -> list:
    """Diagnostics on an optimal solution; returns human-readable violations.

    Three families of checks:
    - retained exports that cover a banning country's demand must leave it
      with zero shortage, zero inflow, and the implied excess;
    - every positive drug flow needs an open trade route and at least one
      supplier route whose full delivery chain beats the penalty saved;
    - no plant may keep serving a destination when rerouting one unit to a
      strictly more penalized, reachable, undersupplied destination would pay.
    """
    violations: list[str] = []
    ally_group = set(instance.ally_group)
    ally_raw = instance.ally_supply_arcs()
    ally_dist = instance.ally_distribution_arcs()
    co = scenario.price_increase
    g, ga = scenario.ban_general, scenario.ban_ally
    d = scenario.demand
    inflow = {
        k: sum(solution.drug_flow[(j, k)] for j in instance.plant_candidates)
        for k in instance.countries
    }

    def shield_cap(k: str) -> float:
        if k in instance.plant_candidates and design.open[k]:
            return d[k] * (1 - g[k])
        return 0.0

    # retained exports covering demand force the market shut
    for k in instance.countries:
        e_gen = instance.exports_general[k]
        e_c1 = instance.exports_to_c1[k]
        hit = False
        expected_excess = None
        if k not in ally_group:
            if g[k] == 0 and e_gen + e_c1 >= d[k] - tol:
                hit = True
                expected_excess = e_gen + e_c1 - d[k]
        else:
            if g[k] == 0 and e_gen >= d[k] - tol:
                hit = True
            if ga[k] == 0 and e_c1 >= d[k] - tol:
                hit = True
            if g[k] == 0 and ga[k] == 0 and e_gen + e_c1 >= d[k] - tol:
                hit = True
                expected_excess = e_gen + e_c1 - d[k]
        if not hit:
            continue
        scale = 1.0 + abs(d[k])
        if solution.shortage[k] > tol * scale:
            violations.append(f"covered-market: shortage {solution.shortage[k]!r} at {k}")
        if inflow[k] > tol * scale:
            violations.append(f"covered-market: inflow {inflow[k]!r} into {k}")
        if expected_excess is not None and abs(solution.excess[k] - expected_excess) > tol * scale:
            violations.append(
                f"covered-market: excess {solution.excess[k]!r} at {k}, expected {expected_excess!r}"
            )

    def route_open(a: str, bnode: str, ally_arcs) -> bool:
        if a == bnode:
            return True
        if (a, bnode) in ally_arcs:
            return bool(ga[a])
        return bool(g[a])

    # positive flows need open routes and a profitable supplier chain
    for (j, k), flow in solution.drug_flow.items():
        if flow <= tol * (1.0 + d.get(k, 0.0)):
            continue
        if not route_open(j, k, ally_dist):
            violations.append(f"flow-necessity: {j}->{k} positive despite a closed route")
            continue
        chain_ok = False
        for i in instance.suppliers:
            if instance.supplier_capacity[i] * scenario.supplier_avail[i] <= tol:
                continue
            if not route_open(i, j, ally_raw):
                continue
            chain = (
                instance.raw_cost[i]
                + instance.transport1[(i, j)]
                + instance.production_cost[j]
                + instance.transport2[(j, k)]
            )
            if instance.shortage_price[k] + co > chain - tol:
                chain_ok = True
                break
        if not chain_ok:
            violations.append(
                f"flow-necessity: {j}->{k} positive but no supplier chain beats the penalty"
            )

    # priority rule: one-unit reroute from a served destination to a hungrier one
    price = instance.shortage_price
    for j in instance.plant_candidates:
        if not design.open[j]:
            continue
        b_eff = instance.plant_capacity[j] * scenario.plant_avail[j]
        for k2 in instance.countries:
            flow = solution.drug_flow[(j, k2)]
            if flow <= tol * (1.0 + d[k2]):
                continue
            # marginal relief at the currently served destination (upper estimate)
            if solution.excess[k2] > tol * (1.0 + d[k2]):
                out_rate = 0.0
            else:
                bump2 = co if solution.shortage[k2] >= shield_cap(k2) - tol else 0.0
                out_rate = price[k2] + bump2
            for k1 in instance.countries:
                if k1 == k2:
                    continue
                s1 = solution.shortage[k1]
                if s1 <= tol * (1.0 + d[k1]):
                    continue
                if not route_open(j, k1, ally_dist):
                    continue
                if j != k1:
                    gate = ga[j] if (j, k1) in ally_dist else g[j]
                    if solution.drug_flow[(j, k1)] >= b_eff * gate * design.open[j] - tol * (
                        1.0 + b_eff
                    ):
                        continue  # arc already at capacity
                bump1 = co if s1 > shield_cap(k1) + tol else 0.0
                gain = (
                    (price[k1] + bump1 - instance.transport2[(j, k1)])
                    - (out_rate - instance.transport2[(j, k2)])
                )
                if gain > tol * (1.0 + abs(price[k1]) + abs(price[k2]) + co):
                    violations.append(
                        f"priority: {j} serves {k2} while rerouting one unit to {k1} "
                        f"saves {gain!r}"
                    )
    return violations
