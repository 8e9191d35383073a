"""Command-line front end.

Subcommands: gen (synthetic instance), solve (one SAA run), evaluate (a
fixed design on evaluation scenarios), study (policy experiments), verify
(re-solve a finished run's incumbent and check duals plus structural
properties). Flag > config file > default precedence; STRAINCHAIN_THREADS
is the fallback for --threads. Exit codes: 0  updated artifacts, 1 usage or
validation problems, 2 solver failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from .generator import RISK_PROFILES, generate_synthetic_instance
from .instance import (
    Design,
    Instance,
    ValidationError,
    load_instance,
    validate_design,
    write_instance,
)
from .lshaped import IterationLimitError
from .policy import StudySpec, run_study
from .recourse import RecourseError, RecourseSolver, check_structural_theorems
from .report import (
    build_artifact,
    evaluation_to_dict,
    load_artifact,
    write_report,
)
from .saa import ROLE_EVALUATE, SaaConfig, evaluate_design, run_saa
from .scenarios import RiskOverrides, dump_scenarios, sample_batch
from .simplex import SimplexError

SOLVER_ERRORS = (RecourseError, SimplexError, IterationLimitError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _overrides_from_dict(d: dict | None) -> RiskOverrides:
    d = d or {}
    known = {"force_export_prob_one", "export_prob_scale", "ban_threshold", "alliances_off"}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ValidationError(f"unknown override fields: {unknown}")
    return RiskOverrides(**d)


def saa_config_from_dict(d: dict | None) -> SaaConfig:
    d = dict(d or {})
    for key in ("optimize_overrides", "evaluate_overrides"):
        if key in d:
            d[key] = _overrides_from_dict(d[key])
    try:
        cfg = SaaConfig(**d)
    except TypeError as exc:
        raise ValidationError(f"bad saa config: {exc}") from exc
    return cfg.validated()


def saa_config_to_dict(cfg: SaaConfig) -> dict:
    d = asdict(cfg)
    d["optimize_overrides"] = cfg.optimize_overrides.describe()
    d["evaluate_overrides"] = cfg.evaluate_overrides.describe()
    return d


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"config parse error in {p} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"{p}: config top level must be a JSON object")
    return raw


def _resolve_threads(args, config: dict) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("STRAINCHAIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValidationError(f"STRAINCHAIN_THREADS is not an integer: {env!r}") from exc
    try:
        return max(1, int(config.get("threads", 1)))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config threads field is not an integer: {exc}") from exc


def _resolve_saa(args, config: dict) -> SaaConfig:
    cfg = saa_config_from_dict(config.get("saa"))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, base_seed=args.seed)
    return cfg


def _echo(instance_path: Path, cfg: SaaConfig) -> dict:
    # threads are deliberately absent: they must not change any artifact byte
    return {
        "instance": str(instance_path.resolve()),
        "saa": saa_config_to_dict(cfg),
    }


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = generate_synthetic_instance(
        num_suppliers=args.suppliers,
        num_plants=args.plants,
        num_countries=args.countries,
        seed=args.seed if args.seed is not None else 0,
        risk_profile=args.risk_profile,
    )
    path = out / "instance.json"
    write_instance(inst, path)
    print(f"wrote {path}")
    return 0


def _cmd_solve(args) -> int:
    config = _load_config_file(args.config)
    cfg = _resolve_saa(args, config)
    threads = _resolve_threads(args, config)
    instance_path = Path(args.instance)
    inst = load_instance(instance_path)

    t0 = time.perf_counter()
    report = run_saa(inst, cfg, threads=threads)
    elapsed = time.perf_counter() - t0

    artifact = build_artifact(
        inst, report, _echo(instance_path, cfg), timings={"solve_seconds": elapsed}
    )
    write_report(artifact, args.out)
    if args.dump_scenarios:
        batch = sample_batch(
            inst,
            (cfg.base_seed, report.passes - 1, ROLE_EVALUATE),
            cfg.evaluation_scenarios,
            cfg.evaluate_overrides,
        )
        dump_scenarios(inst, batch, args.dump_scenarios)
    print(
        f"L={report.lower_bound:.6g} U={report.upper_bound:.6g} gap={report.gap:.4%} "
        f"plants={list(report.incumbent.open_plants())} -> {args.out}"
    )
    if report.gap_unresolved:
        print("warning: statistical gap above tolerance after the pass cap", file=sys.stderr)
    return 0


def _parse_design(raw: str, instance: Instance) -> Design:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--design is not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ValidationError("--design must be a JSON object of plant -> 0/1")
    open_map = {j: 0 for j in instance.plant_candidates}
    for j, v in data.items():
        open_map[j] = int(v)
    design = Design(open=open_map)
    validate_design(instance, design)
    return design


def _cmd_evaluate(args) -> int:
    config = _load_config_file(args.config)
    cfg = _resolve_saa(args, config)
    instance_path = Path(args.instance)
    inst = load_instance(instance_path)
    design = _parse_design(args.design, inst)

    batch = sample_batch(
        inst, (cfg.base_seed, 0, ROLE_EVALUATE), cfg.evaluation_scenarios, cfg.evaluate_overrides
    )
    evaluation = evaluate_design(inst, design, batch)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": _echo(instance_path, cfg),
        "design": dict(sorted(design.open.items())),
        "evaluation": evaluation_to_dict(evaluation),
    }
    (out / "evaluation.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_country_csv(out, inst, design, evaluation)
    if args.dump_scenarios:
        dump_scenarios(inst, batch, args.dump_scenarios)
    print(f"mean objective {evaluation.mean_objective:.6g} -> {out}")
    return 0


def _write_country_csv(out: Path, inst: Instance, design: Design, evaluation) -> None:
    ally = set(inst.ally_group) - {inst.interest_country}
    with (out / "shortage_by_country.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "country",
                "income_level",
                "ally",
                "plant_open",
                "expected_demand",
                "expected_shortage",
                "shortage_fraction",
            ]
        )
        for k in inst.countries:
            dem = evaluation.expected_demand[k]
            short = evaluation.expected_shortage[k]
            writer.writerow(
                [
                    k,
                    inst.income_level[k],
                    "true" if k in ally else "false",
                    "true" if design.open.get(k, 0) else "false",
                    repr(dem),
                    repr(short),
                    repr(short / dem if dem > 0 else 0.0),
                ]
            )


def _cmd_study(args) -> int:
    config = _load_config_file(args.config)
    cfg = _resolve_saa(args, config)
    threads = _resolve_threads(args, config)
    instance_path = Path(args.instance)
    inst = load_instance(instance_path)

    studies = config.get("studies")
    if not studies:
        raise ValidationError("config has no 'studies' section")
    out = Path(args.out)
    for n, raw in enumerate(studies):
        spec = StudySpec(
            kind=raw.get("kind", ""),
            scheme=raw.get("scheme"),
            quality=raw.get("quality", "base"),
            variant=raw.get("variant"),
            pairs=tuple(tuple(p) for p in raw.get("pairs", [])),
        )
        result = run_study(inst, spec, cfg, threads=threads)
        label = raw.get("label") or f"{n:02d}_{result.kind}"
        study_dir = out / label
        study_dir.mkdir(parents=True, exist_ok=True)
        for arm in result.arms:
            # each arm ships its own (possibly perturbed) instance so that
            # `verify` re-checks exactly what the arm solved
            arm_dir = study_dir / arm.name
            arm_dir.mkdir(parents=True, exist_ok=True)
            arm_instance_path = arm_dir / "instance.json"
            write_instance(arm.instance, arm_instance_path)
            artifact = build_artifact(
                arm.instance, arm.report, _echo(arm_instance_path, arm.config)
            )
            write_report(artifact, arm_dir)
        (study_dir / "study.json").write_text(
            json.dumps(
                {
                    "kind": result.kind,
                    "arms": [
                        {
                            "name": a.name,
                            "changes": a.changes,
                            "eval_objective": a.report.eval_objective,
                            "open_plants": list(a.report.incumbent.open_plants()),
                            "shortage_by_income": a.shortage_by_income,
                        }
                        for a in result.arms
                    ],
                    "comparison": result.comparison,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        print(f"study {label}: {len(result.arms)} arms -> {study_dir}")
    return 0


def _cmd_verify(args) -> int:
    run_dir = Path(args.run)
    artifact = load_artifact(run_dir / "report.json")
    instance_path = args.instance or artifact.config_echo.get("instance")
    if not instance_path:
        raise ValidationError("run config does not record the instance path; pass --instance")
    inst = load_instance(instance_path)
    cfg = saa_config_from_dict(artifact.config_echo.get("saa", {}))
    design = Design(open=dict(artifact.saa.incumbent.open))
    validate_design(inst, design)

    batch = sample_batch(
        inst,
        (cfg.base_seed, artifact.saa.passes - 1, ROLE_EVALUATE),
        cfg.evaluation_scenarios,
        cfg.evaluate_overrides,
    )
    solver = RecourseSolver(inst)
    violations = []
    for w, scen in enumerate(batch):
        solution = solver.solve(design, scen)  # raises on any duality violation
        for message in check_structural_theorems(inst, design, scen, solution):
            violations.append({"scenario": w, "message": message})
    payload = {"scenarios_checked": len(batch), "violations": violations}
    (run_dir / "verify.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"checked {len(batch)} scenarios: {len(violations)} violations")
    return 0 if not violations else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="strainchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic instance")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--countries", type=int, default=8)
    gen.add_argument("--suppliers", type=int, default=3)
    gen.add_argument("--plants", type=int, default=4)
    gen.add_argument("--risk-profile", choices=RISK_PROFILES, default="low")
    gen.set_defaults(func=_cmd_gen)

    def common(p, with_design=False):
        p.add_argument("--instance", required=True)
        p.add_argument("--config", default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--dump-scenarios", default=None)
        if with_design:
            p.add_argument("--design", required=True)

    solve = sub.add_parser("solve", help="one full sampled optimization run")
    common(solve)
    solve.set_defaults(func=_cmd_solve)

    ev = sub.add_parser("evaluate", help="evaluate a fixed design on fresh scenarios")
    common(ev, with_design=True)
    ev.set_defaults(func=_cmd_evaluate)

    study = sub.add_parser("study", help="run the policy experiments from the config")
    common(study)
    study.set_defaults(func=_cmd_study)

    verify = sub.add_parser("verify", help="re-check a finished run's solution")
    verify.add_argument("--run", required=True)
    verify.add_argument("--instance", default=None)
    verify.set_defaults(func=_cmd_verify)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
