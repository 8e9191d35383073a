import csv
import dataclasses
import json

import pytest

from strainchain import (
    RiskOverrides,
    SaaConfig,
    ValidationError,
    build_artifact,
    load_artifact,
    run_saa,
    write_report,
)
from strainchain.report import artifact_from_dict, artifact_to_dict

from helpers import small_random_instance


def make_run(seed=101, allies=True):
    inst = small_random_instance(seed=seed, n_countries=4, with_allies=allies)
    cfg = SaaConfig(
        replications=2,
        optimization_scenarios=4,
        evaluation_scenarios=12,
        base_seed=9,
        outer_gap_tolerance=100.0,
        optimize_overrides=RiskOverrides(export_prob_scale=0.7),
        evaluate_overrides=RiskOverrides(export_prob_scale=0.7),
    )
    report = run_saa(inst, cfg)
    artifact = build_artifact(
        inst, report, {"instance": "inst.json", "saa": {"base_seed": 9}}, {"solve_seconds": 1.0}
    )
    return inst, artifact


def read_csv(path):
    with path.open(encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_outputs_are_byte_identical_across_reruns(tmp_path):
    _, artifact = make_run()
    d1, d2 = tmp_path / "one", tmp_path / "two"
    write_report(artifact, d1)
    write_report(artifact, d2)
    for name in (
        "report.json",
        "shortage_by_country.csv",
        "shortage_by_income.csv",
        "flows.csv",
        "bounds.csv",
    ):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_report_json_round_trips_to_an_equal_artifact(tmp_path):
    _, artifact = make_run()
    write_report(artifact, tmp_path)
    loaded = load_artifact(tmp_path / "report.json")
    assert loaded == dataclasses.replace(artifact, timings={})
    assert artifact_from_dict(artifact_to_dict(artifact)) == dataclasses.replace(
        artifact, timings={}
    )


def test_timings_live_outside_report_json(tmp_path):
    _, artifact = make_run()
    write_report(artifact, tmp_path)
    payload = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert "timings" not in payload
    assert "solve_seconds" in json.loads((tmp_path / "timings.json").read_text(encoding="utf-8"))


def test_country_csv_columns_and_row_order(tmp_path):
    inst, artifact = make_run()
    write_report(artifact, tmp_path)
    rows = read_csv(tmp_path / "shortage_by_country.csv")
    assert rows[0] == [
        "country",
        "income_level",
        "ally",
        "plant_open",
        "expected_demand",
        "expected_shortage",
        "shortage_fraction",
    ]
    assert [r[0] for r in rows[1:]] == list(inst.countries)
    for r in rows[1:]:
        assert r[2] in ("true", "false")
        float(r[4]), float(r[5]), float(r[6])


def test_income_rows_reproduce_the_global_shortage_fraction(tmp_path):
    _, artifact = make_run()
    write_report(artifact, tmp_path)
    income = read_csv(tmp_path / "shortage_by_income.csv")[1:]
    total_dem = sum(float(r[2]) for r in income)
    total_short = sum(float(r[3]) for r in income)
    recombined = sum(float(r[2]) * float(r[4]) for r in income)  # demand * class fraction
    assert recombined == pytest.approx(total_short, rel=1e-9)
    country = read_csv(tmp_path / "shortage_by_country.csv")[1:]
    assert total_dem == pytest.approx(sum(float(r[4]) for r in country), rel=1e-9)
    assert total_short == pytest.approx(sum(float(r[5]) for r in country), rel=1e-9)


def test_ally_column_is_all_false_without_allies(tmp_path):
    _, artifact = make_run(seed=102, allies=False)
    write_report(artifact, tmp_path)
    rows = read_csv(tmp_path / "shortage_by_country.csv")[1:]
    assert all(r[2] == "false" for r in rows)


def test_bounds_csv_lists_replications_then_bounds(tmp_path):
    _, artifact = make_run()
    write_report(artifact, tmp_path)
    rows = read_csv(tmp_path / "bounds.csv")
    metrics = [r[0] for r in rows[1:]]
    n_reps = len(artifact.saa.replication_objectives)
    assert metrics == ["z_N"] * n_reps + ["L", "U", "gap"]
    assert float(rows[1 + n_reps][2]) == artifact.saa.lower_bound


def test_non_finite_numbers_are_refused(tmp_path):
    _, artifact = make_run()
    poisoned = dataclasses.replace(
        artifact, per_country=artifact.per_country + [{"country": "x", "expected_demand": float("nan")}]
    )
    with pytest.raises(ValidationError, match="non-finite"):
        write_report(poisoned, tmp_path)


def test_breakdown_mismatch_is_refused():
    inst, artifact = make_run()
    bad_breakdown = dataclasses.replace(artifact.saa.evaluation.breakdown, fixed=1e9)
    bad_eval = dataclasses.replace(artifact.saa.evaluation, breakdown=bad_breakdown)
    bad_saa = dataclasses.replace(artifact.saa, evaluation=bad_eval)
    with pytest.raises(ValidationError, match="breakdown"):
        build_artifact(inst, bad_saa, {}, {})


def test_csv_files_use_crlf_line_endings(tmp_path):
    # RFC-4180 line separator
    _, artifact = make_run()
    write_report(artifact, tmp_path)
    raw = (tmp_path / "flows.csv").read_bytes()
    assert b"\r\n" in raw
