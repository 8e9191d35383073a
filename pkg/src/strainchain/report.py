"""Run artifacts: deterministic JSON/CSV emission and round-trip loading.

report.json is byte-identical for identical configs (thread counts and
wall-clock timings never enter it; timings go to a separate sidecar). CSVs
are RFC-4180 (csv module defaults), UTF-8, '.' decimals, with canonical
country ordering so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .instance import INCOME_LEVELS, Design, Instance, ValidationError
from .saa import CostBreakdown, DesignEvaluation, SaaReport

BREAKDOWN_REL_TOL = 1e-6


@dataclass(frozen=True)
class RunArtifact:
    config_echo: dict          # resolved settings the run actually used
    saa: SaaReport
    per_country: list          # one row per country: shortage, income, flags
    flows: list                # expected flows on every arc
    timings: dict = field(default_factory=dict)  # wall-clock seconds, sidecar only


def _pairs_to_rows(pairs: dict) -> list:
    return [[a, b, v] for (a, b), v in sorted(pairs.items())]


def _rows_to_pairs(rows: list) -> dict:
    return {(a, b): v for a, b, v in rows}


def evaluation_to_dict(ev: DesignEvaluation) -> dict:
    return {
        "mean_objective": ev.mean_objective,
        "std_error": ev.std_error,
        "expected_shortage": dict(sorted(ev.expected_shortage.items())),
        "expected_demand": dict(sorted(ev.expected_demand.items())),
        "expected_raw_flow": _pairs_to_rows(ev.expected_raw_flow),
        "expected_drug_flow": _pairs_to_rows(ev.expected_drug_flow),
        "sales_volume": ev.sales_volume,
        "breakdown": {
            "fixed": ev.breakdown.fixed,
            "raw_and_inbound": ev.breakdown.raw_and_inbound,
            "production_and_outbound": ev.breakdown.production_and_outbound,
            "shortage_baseline": ev.breakdown.shortage_baseline,
            "shortage_escalation": ev.breakdown.shortage_escalation,
        },
    }


def evaluation_from_dict(d: dict) -> DesignEvaluation:
    return DesignEvaluation(
        mean_objective=d["mean_objective"],
        std_error=d["std_error"],
        expected_shortage=dict(d["expected_shortage"]),
        expected_demand=dict(d["expected_demand"]),
        expected_raw_flow=_rows_to_pairs(d["expected_raw_flow"]),
        expected_drug_flow=_rows_to_pairs(d["expected_drug_flow"]),
        sales_volume=d["sales_volume"],
        breakdown=CostBreakdown(**d["breakdown"]),
    )


def saa_report_to_dict(report: SaaReport) -> dict:
    return {
        "replication_objectives": list(report.replication_objectives),
        "candidate_designs": [dict(sorted(d.open.items())) for d in report.candidate_designs],
        "incumbent": dict(sorted(report.incumbent.open.items())),
        "lower_bound": report.lower_bound,
        "upper_bound": report.upper_bound,
        "gap": report.gap,
        "eval_objective": report.eval_objective,
        "eval_std_error": report.eval_std_error,
        "evaluation": evaluation_to_dict(report.evaluation),
        "passes": report.passes,
        "gap_unresolved": report.gap_unresolved,
        "overrides_differ": report.overrides_differ,
    }


def saa_report_from_dict(d: dict) -> SaaReport:
    return SaaReport(
        replication_objectives=list(d["replication_objectives"]),
        candidate_designs=[Design(open=dict(o)) for o in d["candidate_designs"]],
        incumbent=Design(open=dict(d["incumbent"])),
        lower_bound=d["lower_bound"],
        upper_bound=d["upper_bound"],
        gap=d["gap"],
        eval_objective=d["eval_objective"],
        eval_std_error=d["eval_std_error"],
        evaluation=evaluation_from_dict(d["evaluation"]),
        passes=d["passes"],
        gap_unresolved=d["gap_unresolved"],
        overrides_differ=d["overrides_differ"],
    )


def build_artifact(
    instance: Instance,
    report: SaaReport,
    config_echo: dict,
    timings: dict | None = None,
) -> RunArtifact:
    ev = report.evaluation
    total = ev.breakdown.total()
    if abs(total - ev.mean_objective) > BREAKDOWN_REL_TOL * max(1.0, abs(ev.mean_objective)):
        raise ValidationError(
            f"cost breakdown total {total!r} disagrees with objective {ev.mean_objective!r}"
        )
    ally = set(instance.ally_group) - {instance.interest_country}
    per_country = []
    for k in instance.countries:
        dem = ev.expected_demand[k]
        short = ev.expected_shortage[k]
        per_country.append(
            {
                "country": k,
                "income_level": instance.income_level[k],
                "ally": k in ally,
                "plant_open": bool(report.incumbent.open.get(k, 0)),
                "expected_demand": dem,
                "expected_shortage": short,
                "shortage_fraction": short / dem if dem > 0 else 0.0,
            }
        )
    flows = [
        {"kind": "raw", "origin": i, "destination": j, "expected_flow": v}
        for (i, j), v in sorted(ev.expected_raw_flow.items())
    ] + [
        {"kind": "drug", "origin": j, "destination": k, "expected_flow": v}
        for (j, k), v in sorted(ev.expected_drug_flow.items())
    ]
    return RunArtifact(
        config_echo=config_echo,
        saa=report,
        per_country=per_country,
        flows=flows,
        timings=dict(timings or {}),
    )


def artifact_to_dict(artifact: RunArtifact) -> dict:
    return {
        "config": artifact.config_echo,
        "saa": saa_report_to_dict(artifact.saa),
        "per_country": artifact.per_country,
        "flows": artifact.flows,
    }


def artifact_from_dict(d: dict) -> RunArtifact:
    return RunArtifact(
        config_echo=d["config"],
        saa=saa_report_from_dict(d["saa"]),
        per_country=d["per_country"],
        flows=d["flows"],
        timings={},
    )


def load_artifact(path) -> RunArtifact:
    with Path(path).open(encoding="utf-8") as fh:
        return artifact_from_dict(json.load(fh))


def _assert_finite(node, where: str) -> None:
    if isinstance(node, float):
        if not math.isfinite(node):
            raise ValidationError(f"non-finite number in {where}")
    elif isinstance(node, dict):
        for key, v in node.items():
            _assert_finite(v, f"{where}.{key}")
    elif isinstance(node, (list, tuple)):
        for n, v in enumerate(node):
            _assert_finite(v, f"{where}[{n}]")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list, rows: list) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_report(artifact: RunArtifact, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = artifact_to_dict(artifact)
    _assert_finite(payload, "report")
    try:
        (out / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

        _write_csv(
            out / "shortage_by_country.csv",
            [
                "country",
                "income_level",
                "ally",
                "plant_open",
                "expected_demand",
                "expected_shortage",
                "shortage_fraction",
            ],
            [
                [
                    row["country"],
                    row["income_level"],
                    row["ally"],
                    row["plant_open"],
                    row["expected_demand"],
                    row["expected_shortage"],
                    row["shortage_fraction"],
                ]
                for row in artifact.per_country
            ],
        )

        by_income = {}
        for row in artifact.per_country:
            by_income.setdefault(row["income_level"], []).append(row)
        income_rows = []
        for level in INCOME_LEVELS:
            rows = by_income.get(level)
            if not rows:
                continue
            dem = sum(r["expected_demand"] for r in rows)
            short = sum(r["expected_shortage"] for r in rows)
            fracs = [r["shortage_fraction"] for r in rows if r["expected_demand"] > 0]
            income_rows.append(
                [
                    level,
                    len(rows),
                    dem,
                    short,
                    short / dem if dem > 0 else 0.0,
                    sum(fracs) / len(fracs) if fracs else 0.0,
                ]
            )
        _write_csv(
            out / "shortage_by_income.csv",
            [
                "income_level",
                "countries",
                "expected_demand",
                "expected_shortage",
                "shortage_fraction_demand_weighted",
                "shortage_fraction_country_mean",
            ],
            income_rows,
        )

        _write_csv(
            out / "flows.csv",
            ["kind", "origin", "destination", "expected_flow"],
            [[r["kind"], r["origin"], r["destination"], r["expected_flow"]] for r in artifact.flows],
        )

        bounds_rows = [
            ["z_N", m, z] for m, z in enumerate(artifact.saa.replication_objectives)
        ]
        bounds_rows += [
            ["L", "", artifact.saa.lower_bound],
            ["U", "", artifact.saa.upper_bound],
            ["gap", "", artifact.saa.gap],
        ]
        _write_csv(out / "bounds.csv", ["metric", "replication", "value"], bounds_rows)

        if artifact.timings:
            (out / "timings.json").write_text(
                json.dumps(artifact.timings, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
    except OSError as exc:
        raise ValidationError(f"cannot write report under {out}: {exc}") from exc
