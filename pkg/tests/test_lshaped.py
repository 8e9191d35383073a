import numpy as np
import pytest

from strainchain import (
    OptimalityCut,
    RecourseSolver,
    RiskOverrides,
    ValidationError,
    run_lshaped,
    sample_batch,
    solve_master,
)
from strainchain.lshaped import (
    IterationLimitError,
    _master_by_branch_and_bound,
    _master_by_enumeration,
)

from helpers import enumeration_optimum, plain_scenario, small_random_instance, tiny_instance


def two_plant_instance():
    inst = tiny_instance(countries=("a", "b"))
    return inst.perturbed(fixed_cost={"a": 5.0, "b": 7.0})


def test_master_without_cuts_opens_the_cheapest_plant():
    design, lb = solve_master(two_plant_instance(), [])
    assert design.open == {"a": 1, "b": 0}
    assert lb == pytest.approx(5.0)


def test_master_with_one_cut_hand_enumeration():
    cut = OptimalityCut(constant=10.0, coeff={"a": -3.0, "b": -2.0})
    design, lb = solve_master(two_plant_instance(), [cut])
    # candidates: (1,0)->12, (0,1)->15, (1,1)->17
    assert design.open == {"a": 1, "b": 0}
    assert lb == pytest.approx(12.0)


def test_master_honors_forced_assignments():
    cut = OptimalityCut(constant=10.0, coeff={"a": -3.0, "b": -2.0})
    design, lb = solve_master(two_plant_instance(), [cut], forced={"b": 1})
    assert design.open == {"a": 0, "b": 1}
    assert lb == pytest.approx(15.0)


def test_master_rejects_unsatisfiable_forcing():
    with pytest.raises(ValidationError):
        solve_master(two_plant_instance(), [], forced={"a": 0, "b": 0})
    with pytest.raises(ValidationError):
        solve_master(two_plant_instance(), [], forced={"zzz": 1})


def test_theta_floor_applies_when_cuts_go_negative():
    cut = OptimalityCut(constant=-100.0, coeff={"a": 0.0, "b": 0.0})
    design, lb = solve_master(two_plant_instance(), [cut])
    assert lb == pytest.approx(5.0)  # theta clamps at zero, not -100


def test_branch_and_bound_agrees_with_enumeration():
    rng = np.random.default_rng(12)
    for _ in range(40):
        inst = small_random_instance(seed=int(rng.integers(1_000_000)), n_countries=5)
        plants = list(inst.plant_candidates)
        cuts = [
            OptimalityCut(
                constant=float(rng.uniform(0.0, 300.0)),
                coeff={j: float(rng.uniform(-120.0, 20.0)) for j in plants},
            )
            for _ in range(int(rng.integers(0, 4)))
        ]
        forced = {plants[0]: int(rng.integers(0, 2))} if rng.random() < 0.5 else {}
        d1, v1 = _master_by_enumeration(inst, plants, cuts, forced)
        d2, v2 = _master_by_branch_and_bound(inst, plants, cuts, forced)
        assert v1 == pytest.approx(v2, rel=1e-9, abs=1e-9)
        assert d1.open == d2.open


def _scenario_pool(inst, seed, n):
    return sample_batch(inst, seed, n, RiskOverrides(export_prob_scale=0.5, ban_threshold=0.95))


def test_deterministic_instance_matches_design_enumeration():
    inst = small_random_instance(seed=21, n_countries=4)
    scen = [plain_scenario(inst)]
    solver = RecourseSolver(inst)
    result = run_lshaped(inst, scen, epsilon=1e-9, solver=solver)
    best_val, best_design = enumeration_optimum(inst, scen, solver)
    assert result.objective == pytest.approx(best_val, rel=1e-6)
    assert result.design.open == best_design.open


def test_exactness_against_enumeration_on_sampled_pools():
    for trial in range(8):
        inst = small_random_instance(seed=700 + trial, n_countries=4)
        scens = _scenario_pool(inst, (9, trial), 15)
        solver = RecourseSolver(inst)
        result = run_lshaped(inst, scens, epsilon=1e-9, solver=solver)
        best_val, best_design = enumeration_optimum(inst, scens, solver)
        assert result.objective == pytest.approx(best_val, rel=1e-6)
        assert result.design.open == best_design.open


def test_infinite_tolerance_stops_after_the_first_iteration():
    inst = small_random_instance(seed=33, n_countries=4)
    scens = _scenario_pool(inst, (10, 0), 8)
    result = run_lshaped(inst, scens, epsilon=np.inf)
    assert result.iterations == 1
    assert result.cuts == []
    no_cut_design, _ = solve_master(inst, [])
    assert result.design.open == no_cut_design.open


def test_traces_are_monotone_and_runs_are_reproducible():
    inst = small_random_instance(seed=44, n_countries=5)
    scens = _scenario_pool(inst, (11, 0), 25)
    first = run_lshaped(inst, scens, epsilon=1e-9)
    second = run_lshaped(inst, scens, epsilon=1e-9)
    assert first == second
    assert all(b >= a - 1e-9 for a, b in zip(first.lb_trace, first.lb_trace[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(first.ub_trace, first.ub_trace[1:]))
    assert (first.ub_trace[-1] - first.lb_trace[-1]) <= 1e-9 * max(1.0, first.ub_trace[-1])


def test_forced_opening_restricts_the_feasible_set():
    inst = small_random_instance(seed=55, n_countries=4)
    scens = _scenario_pool(inst, (12, 0), 10)
    free = run_lshaped(inst, scens, epsilon=1e-9)
    c1 = inst.interest_country
    forced = run_lshaped(inst, scens, epsilon=1e-9, forced={c1: 1})
    assert forced.design.open[c1] == 1
    assert forced.objective >= free.objective - 1e-9


def test_empty_scenario_list_is_rejected():
    inst = small_random_instance(seed=67, n_countries=3)
    with pytest.raises(ValidationError):
        run_lshaped(inst, [], epsilon=1e-5)
    with pytest.raises(ValidationError):
        run_lshaped(inst, _scenario_pool(inst, (14, 0), 3), epsilon=0.0)


def test_iteration_cap_carries_traces():
    inst = small_random_instance(seed=66, n_countries=5)
    scens = _scenario_pool(inst, (13, 0), 20)
    with pytest.raises(IterationLimitError) as err:
        run_lshaped(inst, scens, epsilon=1e-12, max_iterations=1)
    assert len(err.value.lb_trace) == 1
    assert len(err.value.ub_trace) == 1
