"""Shared fixtures and independent oracles for the test suite.

The raw-formulation oracle rebuilds the scenario problem with one explicit
row per constraint (capacities, gated arcs, demand, balance, shortage links)
and hands it to scipy's HiGHS, completely bypassing the package's LP path.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from strainchain import Design, DiscretePmf, Instance, Scenario, make_instance
from strainchain.recourse import RecourseSolver
from strainchain.scenarios import country_retained, retained_exports


def degenerate_pmf(level: float = 1.0) -> DiscretePmf:
    return DiscretePmf(levels=(level,), probs=(1.0,))


def tiny_instance(
    countries=("a",),
    suppliers=None,
    plants=None,
    c1=None,
    allies=(),
    demand=None,
    price=None,
    raw_cost=None,
    production_cost=None,
    fixed_cost=None,
    transport1=None,
    transport2=None,
    supplier_capacity=None,
    plant_capacity=None,
    exports_general=None,
    exports_to_c1=None,
    beta=0.0,
    ban_threshold=0.8,
    export_prob=None,
    ally_export_prob=None,
    demand_sd=None,
    income=None,
) -> Instance:
    """Deterministic hand instance with every omitted field defaulted sensibly."""
    countries = tuple(sorted(countries))
    suppliers = tuple(sorted(suppliers if suppliers is not None else countries))
    plants = tuple(sorted(plants if plants is not None else countries))
    c1 = c1 or countries[0]
    levels = ("HIC", "UMIC", "LMIC", "LIC")
    income = income or {k: levels[n % 4] for n, k in enumerate(countries)}
    demand = demand or {k: 10.0 for k in countries}
    price = price or {k: 10.0 for k in countries}
    ally_group = tuple(sorted(set(allies) | {c1}))
    return make_instance(
        countries=countries,
        suppliers=suppliers,
        plant_candidates=plants,
        interest_country=c1,
        allies=tuple(allies),
        income_level=income,
        raw_cost=raw_cost or {i: 1.0 for i in suppliers},
        production_cost=production_cost or {j: 2.0 for j in plants},
        fixed_cost=fixed_cost or {j: 5.0 for j in plants},
        transport1=transport1
        or {(i, j): 0.0 for i in suppliers for j in plants},
        transport2=transport2
        or {(j, k): 0.0 for j in plants for k in countries},
        shortage_price=price,
        supplier_capacity=supplier_capacity or {i: 100.0 for i in suppliers},
        plant_capacity=plant_capacity or {j: 120.0 for j in plants},
        exports_general=exports_general or {k: 0.0 for k in countries},
        exports_to_c1=exports_to_c1 or {k: 0.0 for k in countries},
        beta=beta,
        ban_threshold=ban_threshold,
        export_prob=export_prob or {k: 1.0 for k in countries},
        ally_export_prob=ally_export_prob or {k: 1.0 for k in ally_group},
        demand_mean=demand,
        demand_sd=demand_sd or {k: 0.0 for k in countries},
        supplier_avail_prob={i: 1.0 for i in suppliers},
        plant_avail_prob={j: 1.0 for j in plants},
        supplier_strain_pmf={i: degenerate_pmf() for i in suppliers},
        plant_strain_pmf={j: degenerate_pmf() for j in plants},
    )


def plain_scenario(inst: Instance, demand=None, sup=None, pl=None, g=None, ga=None) -> Scenario:
    """Scenario with explicit fields; retained exports and price derived."""
    demand = demand or {k: inst.demand_mean[k] for k in inst.countries}
    sup = sup or {i: 1.0 for i in inst.suppliers}
    pl = pl or {j: 1.0 for j in inst.plant_candidates}
    g = g or {k: 1 for k in inst.countries}
    ga = dict(ga) if ga else {k: 1 for k in inst.ally_group}
    for k in inst.ally_group:  # an open general flag always opens the ally flag
        if g[k] == 1:
            ga[k] = 1
    retained = retained_exports(inst, g, ga)
    return Scenario(
        supplier_avail=sup,
        plant_avail=pl,
        demand=demand,
        ban_general=g,
        ban_ally=ga,
        retained_exports=retained,
        price_increase=inst.beta * retained,
        probability=1.0,
    )


def small_random_instance(seed: int, n_countries: int = 5, with_allies: bool = True) -> Instance:
    """Hand-scaled random instance (demands and capacities O(10)).

    Every country is both a supplier and a plant candidate so all trade-arc
    classes appear; modest magnitudes keep absolute LP tolerances meaningful.
    """
    rng = np.random.default_rng(seed)
    countries = tuple(f"k{n}" for n in range(n_countries))
    c1 = countries[0]
    others = list(countries[1:])
    n_allies = max(1, (n_countries - 1) // 2) if with_allies and others else 0
    allies = tuple(sorted(str(a) for a in rng.choice(others, n_allies, replace=False)))
    demand = {k: float(rng.uniform(1.0, 20.0)) for k in countries}
    total = sum(demand.values())
    exports_to_c1 = {k: float(demand[k] * rng.uniform(0.0, 0.5)) for k in countries}
    if not allies:
        exports_to_c1[c1] = 0.0  # the c1 entry means "exports to allies": none exist
    income_cycle = ("HIC", "UMIC", "LMIC", "LIC")
    return make_instance(
        countries=countries,
        suppliers=countries,
        plant_candidates=countries,
        interest_country=c1,
        allies=allies,
        income_level={k: income_cycle[n % 4] for n, k in enumerate(countries)},
        raw_cost={i: float(rng.uniform(0.2, 1.0)) for i in countries},
        production_cost={j: float(rng.uniform(0.5, 2.0)) for j in countries},
        fixed_cost={j: float(rng.uniform(2.0, 15.0)) for j in countries},
        transport1={
            (i, j): 0.0 if i == j else float(rng.uniform(0.05, 0.8))
            for i in countries
            for j in countries
        },
        transport2={
            (j, k): 0.0 if j == k else float(rng.uniform(0.05, 0.8))
            for j in countries
            for k in countries
        },
        shortage_price={k: float(rng.uniform(2.0, 9.0)) for k in countries},
        supplier_capacity={i: float(total * rng.uniform(0.3, 0.8)) for i in countries},
        plant_capacity={j: float(total * rng.uniform(0.3, 0.8)) for j in countries},
        exports_general={k: float(demand[k] * rng.uniform(0.0, 1.2)) for k in countries},
        exports_to_c1=exports_to_c1,
        beta=float(rng.uniform(0.005, 0.05)),
        ban_threshold=float(rng.uniform(0.7, 0.95)),
        export_prob={k: float(rng.uniform(0.3, 0.95)) for k in countries},
        ally_export_prob={
            k: float(rng.uniform(0.5, 0.99)) for k in sorted(set(allies) | {c1})
        },
        demand_mean=demand,
        demand_sd={k: float(demand[k] * rng.uniform(0.05, 0.4)) for k in countries},
        supplier_avail_prob={i: float(rng.uniform(0.7, 1.0)) for i in countries},
        plant_avail_prob={j: float(rng.uniform(0.7, 1.0)) for j in countries},
        supplier_strain_pmf={
            i: DiscretePmf(levels=(0.7, 0.85, 1.0), probs=(0.2, 0.3, 0.5)) for i in countries
        },
        plant_strain_pmf={
            j: DiscretePmf(levels=(0.7, 0.85, 1.0), probs=(0.15, 0.25, 0.6)) for j in countries
        },
    )


def enumerate_designs(instance: Instance, forced: dict | None = None):
    plants = list(instance.plant_candidates)
    forced = forced or {}
    for bits in itertools.product([0, 1], repeat=len(plants)):
        if sum(bits) < 1:
            continue
        open_map = dict(zip(plants, bits))
        if any(open_map[j] != v for j, v in forced.items()):
            continue
        yield Design(open=open_map)


def enumeration_optimum(instance, scenarios, solver=None, forced=None):
    """Brute-force sampled optimum: direct recourse solves at every design."""
    solver = solver or RecourseSolver(instance)
    best_val, best_design = np.inf, None
    for design in enumerate_designs(instance, forced):
        fixed = sum(
            instance.fixed_cost[j] * design.open[j] for j in instance.plant_candidates
        )
        mean_q = sum(solver.solve(design, s).objective for s in scenarios) / len(scenarios)
        value = fixed + mean_q
        if value < best_val - 1e-12:
            best_val, best_design = value, design
    return best_val, best_design


def raw_lp_objective(inst: Instance, design: Design, scen: Scenario) -> float:
    """Independent oracle: explicit row formulation solved by scipy HiGHS."""
    I, J, K = list(inst.suppliers), list(inst.plant_candidates), list(inst.countries)
    ally_raw, ally_dist = inst.ally_supply_arcs(), inst.ally_distribution_arcs()
    nI, nJ, nK = len(I), len(J), len(K)
    nU, nV = nI * nJ, nJ * nK
    n = nU + nV + 3 * nK
    oS, oSp, oE = nU + nV, nU + nV + nK, nU + nV + 2 * nK
    uidx = {(i, j): a for a, (i, j) in enumerate((i, j) for i in I for j in J)}
    vidx = {(j, k): nU + a for a, (j, k) in enumerate((j, k) for j in J for k in K)}
    a_sup = {i: inst.supplier_capacity[i] * scen.supplier_avail[i] for i in I}
    b_pl = {j: inst.plant_capacity[j] * scen.plant_avail[j] for j in J}

    c = np.zeros(n)
    for (i, j), col in uidx.items():
        c[col] = inst.raw_cost[i] + inst.transport1[(i, j)]
    for (j, k), col in vidx.items():
        c[col] = inst.production_cost[j] + inst.transport2[(j, k)]
    for kn, k in enumerate(K):
        c[oS + kn] = inst.shortage_price[k]
        c[oSp + kn] = scen.price_increase

    Aub, bub = [], []
    for i in I:
        row = np.zeros(n)
        for j in J:
            row[uidx[(i, j)]] = 1
        Aub.append(row)
        bub.append(a_sup[i])
    for (i, j), col in uidx.items():
        if i == j:
            continue
        gate = scen.ban_ally[i] if (i, j) in ally_raw else scen.ban_general[i]
        row = np.zeros(n)
        row[col] = 1
        Aub.append(row)
        bub.append(a_sup[i] * gate * design.open[j])
    for j in J:
        row = np.zeros(n)
        for k in K:
            row[vidx[(j, k)]] = 1
        Aub.append(row)
        bub.append(b_pl[j] * design.open[j])
    for (j, k), col in vidx.items():
        if j == k:
            continue
        gate = scen.ban_ally[j] if (j, k) in ally_dist else scen.ban_general[j]
        row = np.zeros(n)
        row[col] = 1
        Aub.append(row)
        bub.append(b_pl[j] * gate * design.open[j])
    for kn, k in enumerate(K):
        row = np.zeros(n)
        row[oS + kn] = 1
        row[oSp + kn] = -1
        cap = (
            scen.demand[k] * (1 - scen.ban_general[k]) * design.open[k]
            if k in design.open
            else 0.0
        )
        Aub.append(row)
        bub.append(cap)

    Aeq, beq = [], []
    for kn, k in enumerate(K):
        row = np.zeros(n)
        for j in J:
            row[vidx[(j, k)]] = 1
        row[oS + kn] = 1
        row[oE + kn] = -1
        Aeq.append(row)
        beq.append(scen.demand[k] - country_retained(inst, k, scen.ban_general, scen.ban_ally))
    for j in J:
        row = np.zeros(n)
        for i in I:
            row[uidx[(i, j)]] = 1
        for k in K:
            row[vidx[(j, k)]] -= 1
        Aeq.append(row)
        beq.append(0.0)

    res = linprog(
        c,
        A_ub=np.array(Aub),
        b_ub=np.array(bub),
        A_eq=np.array(Aeq),
        b_eq=np.array(beq),
        bounds=(0, None),
        method="highs",
    )
    assert res.status == 0, res.message
    return float(res.fun)
