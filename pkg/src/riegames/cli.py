"""Batch experiment runner.

Verbs: ``run <config.json>``, ``scenarios [--json]``, and
``estimate <scenario> [--pairs N] [--seed S]``. The environment variable
``RG_OUTPUT_DIR`` overrides the configured output directory. Exit codes:
0 success, 2 config error, 3 numerical failure, 4 descent-audit violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .errors import ConfigError, NumericalFailure, RieGamesError
from .games import StochasticOracle, gap_bound, total_gap_bound
from .scenarios import (
    SCENARIO_NAMES,
    PreparedScenario,
    ScenarioConfig,
    _resolve_constants,
    build_scenario,
    compute_prerun_reference,
    scenario_defaults,
)
from .solvers import (
    RunTrace,
    SolverConfig,
    mixed_distance,
    mixed_vi_schedule,
    run_mixed_vi,
    run_reg,
    run_rgd,
    stochastic_batches,
    theorem_schedule,
)
from .verify import (
    InsufficientData,
    audit_descent,
    audit_mixed_descent,
    fit_contraction,
)
from .manifolds import dist

CSV_HEADER = "k,grad_norm,residual,dist_to_ref,step_size,batch_size,cum_queries,wall_nanos"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def write_trace_csv(trace: RunTrace, path: Path) -> None:
    """Trace CSV with a stable byte layout.

    The wall_nanos column is pinned to 0 so that identical configs and seeds
    reproduce byte-identical files; real timings stay on the in-memory records
    and in the summary.
    """
    lines = [CSV_HEADER]
    for r in trace.records:
        lines.append(
            ",".join(
                [
                    str(r.k),
                    _fmt(r.grad_norm),
                    _fmt(r.residual),
                    _fmt(r.dist_to_reference),
                    _fmt(r.step_size),
                    str(r.batch_size),
                    str(r.cumulative_queries),
                    "0",
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _trace_summary(trace: RunTrace, seed: int, csv_name: str) -> dict:
    last = trace.terminal_record
    try:
        slope = fit_contraction(trace)
    except InsufficientData:
        slope = None
    return {
        "seed": seed,
        "terminated_by": trace.terminated_by,
        "iterations": last.k,
        "terminal_grad_norm": last.grad_norm,
        "terminal_residual": last.residual,
        "total_queries": last.cumulative_queries,
        "contraction_slope": slope,
        "wall_nanos_total": last.wall_nanos,
        "trace_csv": csv_name,
    }


def _run_prepared(prepared: PreparedScenario, cfg: ScenarioConfig, out_dir: Path) -> tuple[int, dict]:
    summary: dict = {"scenario": cfg.scenario, "solver": prepared.kind}
    traces: list[RunTrace] = []
    per_seed = []

    if prepared.kind in ("rgd", "reg"):
        game = prepared.game
        mu, lipschitz, source = _resolve_constants(cfg, game)
        if prepared.reference is None and prepared.reference_source == "prerun":
            prepared.reference = compute_prerun_reference(
                game, prepared.start, budget=10 * (cfg.max_iterations or 400)
            )
        reference = prepared.reference
        d0 = dist(prepared.start, reference) if reference is not None else None
        summary["constants"] = {"mu": mu, "lipschitz": lipschitz, "kappa": mu / lipschitz, "source": source}
        summary["reference"] = {"source": prepared.reference_source, "d0": d0}

        if prepared.kind == "rgd":
            if d0 is not None and d0 > 0.0:
                bound = cfg.bound if cfg.bound is not None else 2.0 * d0
                distance = d0 if cfg.sigma2 == 0.0 else bound
            else:
                distance = cfg.bound if cfg.bound is not None else 1.0
            eta = mu / lipschitz**2
            if cfg.epsilon > 0.0:
                sched = theorem_schedule(mu, lipschitz, cfg.sigma2, distance, cfg.epsilon)
                k_max = cfg.max_iterations or sched.k_star
                k_star, budget = sched.k_star, sched.query_budget
            elif cfg.max_iterations is None:
                raise ConfigError("epsilon = 0 needs an explicit max_iterations")
            else:
                k_max = k_star = cfg.max_iterations
                budget = None
            if cfg.sigma2 > 0.0:
                batches = stochastic_batches(mu, lipschitz, cfg.sigma2, distance, k_max)
            else:
                batches = 1
            solver_cfg_base = dict(
                max_iterations=k_max,
                step_sizes=eta,
                epsilon=cfg.epsilon,
                record_every=cfg.record_every,
            )
            summary["schedule"] = {
                "eta": eta,
                "k_star": k_star,
                "query_budget": budget,
                "stochastic": cfg.sigma2 > 0.0,
            }
            for seed in cfg.seeds:
                config = SolverConfig(seed=seed, batch_sizes=batches, **solver_cfg_base)
                oracle = (
                    StochasticOracle(game, cfg.sigma2, seed) if cfg.sigma2 > 0.0 else None
                )
                trace = run_rgd(game, prepared.start, config, oracle=oracle, reference=reference)
                traces.append(trace)
                name = f"{cfg.scenario}_seed{seed}.csv"
                write_trace_csv(trace, out_dir / name)
                per_seed.append(_trace_summary(trace, seed, name))
        else:
            eta = cfg.step_size if cfg.step_size is not None else 1.0 / (2.0 * lipschitz)
            k_max = cfg.max_iterations or 200
            summary["schedule"] = {"eta": eta, "k_star": k_max, "query_budget": None, "stochastic": False}
            for seed in cfg.seeds:
                trace = run_reg(
                    game,
                    prepared.start,
                    eta,
                    k_max,
                    record_every=cfg.record_every,
                    reference=reference,
                    epsilon=cfg.epsilon,
                )
                traces.append(trace)
                name = f"{cfg.scenario}_seed{seed}.csv"
                write_trace_csv(trace, out_dir / name)
                per_seed.append(_trace_summary(trace, seed, name))

        terminal_gaps = []
        for trace in traces:
            y = trace.terminal_point
            terminal_gaps.append(
                {
                    "gap_bound": gap_bound(game, y, cfg.gap_radius),
                    "total_gap_bound": total_gap_bound(game, y, cfg.gap_radius),
                }
            )
        summary["gap_bounds"] = {"radius": cfg.gap_radius, "terminal": terminal_gaps}

        if prepared.kind == "rgd":
            if cfg.sigma2 == 0.0:
                reports = [audit_descent(t, mu, lipschitz) for t in traces]
                audit = {
                    "mode": "deterministic",
                    "ok": all(r.ok for r in reports),
                    "violations": sorted({k for r in reports for k in r.violations}),
                    "worst_slack": max(r.worst_slack for r in reports),
                }
            elif len(traces) >= 20 and cfg.record_every == 1:
                report = audit_descent(traces, mu, lipschitz, sigma2=cfg.sigma2)
                audit = {
                    "mode": "stochastic",
                    "ok": report.ok,
                    "violations": list(report.violations),
                    "worst_slack": report.worst_slack,
                }
            else:
                audit = {"mode": "skipped", "ok": True, "violations": []}
        else:
            audit = {"mode": "skipped", "ok": True, "violations": []}
        summary["audit"] = audit

    else:  # mixed
        problem = prepared.problem
        mu, lipschitz = problem.mu, problem.lipschitz
        summary["constants"] = {
            "mu": mu,
            "lipschitz": lipschitz,
            "kappa": mu / lipschitz,
            "source": "analytic",
        }
        reference = prepared.reference
        d0 = mixed_distance(problem, prepared.start, reference) if reference is not None else None
        summary["reference"] = {"source": prepared.reference_source, "d0": d0}
        kappa = mu / lipschitz
        if cfg.max_iterations:
            k_max = cfg.max_iterations
        elif cfg.epsilon > 0.0 and d0:
            envelope = 66.0 * lipschitz**2 * d0**2 / cfg.epsilon**2
            k_max = 1 + max(1, math.ceil(2.0 / kappa**2 * math.log(max(envelope, 2.0))))
        else:
            k_max = 200
        problem.sigma2 = cfg.sigma2
        sched = mixed_vi_schedule(mu, lipschitz, cfg.sigma2, cfg.bound or (2.0 * d0 if d0 else 1.0), k_max)
        summary["schedule"] = {
            "eta": list(sched.step_sizes[:2]),
            "k_star": k_max,
            "query_budget": None,
            "stochastic": cfg.sigma2 > 0.0,
        }
        for seed in cfg.seeds:
            config = SolverConfig(
                max_iterations=k_max,
                step_sizes=sched.step_sizes,
                batch_sizes=sched.batch_sizes,
                epsilon=cfg.epsilon,
                seed=seed,
                record_every=cfg.record_every,
            )
            trace = run_mixed_vi(problem, prepared.start, config, reference=reference)
            traces.append(trace)
            name = f"{cfg.scenario}_seed{seed}.csv"
            write_trace_csv(trace, out_dir / name)
            per_seed.append(_trace_summary(trace, seed, name))
        if cfg.sigma2 == 0.0:
            reports = [audit_mixed_descent(t, mu, lipschitz) for t in traces]
            audit = {
                "mode": "deterministic",
                "ok": all(r.ok for r in reports),
                "violations": sorted({k for r in reports for k in r.violations}),
                "worst_slack": max(r.worst_slack for r in reports),
            }
        else:
            audit = {"mode": "skipped", "ok": True, "violations": []}
        summary["audit"] = audit

    for trace in traces:
        trace.metadata["reference_source"] = prepared.reference_source
    summary["seeds"] = per_seed
    summary["total_queries"] = sum(s["total_queries"] for s in per_seed)
    exit_code = 0 if summary["audit"]["ok"] else 4
    return exit_code, summary


def run_experiment(config_path: str | Path) -> int:
    """Run one scenario config end to end; returns the process exit code."""
    path = Path(config_path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        cfg = ScenarioConfig.from_dict(raw)
        prepared = build_scenario(cfg)
    except RieGamesError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out_dir = Path(os.environ.get("RG_OUTPUT_DIR", cfg.output_dir))
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        code, summary = _run_prepared(prepared, cfg, out_dir)
    except NumericalFailure as e:
        if e.trace is not None and e.trace.records:
            write_trace_csv(e.trace, out_dir / f"{cfg.scenario}_partial.csv")
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    (out_dir / f"{cfg.scenario}_summary.json").write_text(
        json.dumps(summary, indent=2, default=float) + "\n", encoding="utf-8"
    )
    status = "ok" if code == 0 else "audit violation"
    print(f"{cfg.scenario}: {status}; outputs in {out_dir}")
    return code


def estimate_constants(scenario: str, n_pairs: int = 200, seed: int = 0) -> tuple[float, float]:
    """Print and return (mu_est, L_est) for a named scenario."""
    from .games import check_monotonicity

    cfg = ScenarioConfig(scenario=scenario)
    prepared = build_scenario(cfg)
    if prepared.game is None:
        raise ConfigError(f"scenario {scenario} has no sampled game to estimate")
    report = check_monotonicity(prepared.game, n_pairs, seed)
    mu_est = 0.95 * report.min_ratio
    lip_est = 1.05 * report.max_lipschitz_ratio
    print(json.dumps({"scenario": scenario, "mu": mu_est, "lipschitz": lip_est}))
    return mu_est, lip_est


def list_scenarios(as_json: bool = False) -> None:
    rows = [scenario_defaults(name) for name in SCENARIO_NAMES]
    if as_json:
        print(json.dumps(rows, indent=2))
        return
    header = f"{'scenario':<22} {'solver':<6} {'dim':<4} {'players':<8} parameters"
    print(header)
    print("-" * len(header))
    for row in rows:
        params = []
        if row["gamma"] is not None:
            params.append(f"gamma={row['gamma']}")
        if row["coupling"] is not None:
            params.append(f"coupling={row['coupling']}")
        params.append(f"mu={row['mu']}")
        params.append(f"epsilon={row['epsilon']}")
        print(
            f"{row['scenario']:<22} {row['solver']:<6} {row['dim']:<4} "
            f"{row['players']:<8} {', '.join(params)}"
        )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="riegames", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a JSON config")
    p_run.add_argument("config", help="path to the config JSON")

    p_list = sub.add_parser("scenarios", help="list available scenarios")
    p_list.add_argument("--json", action="store_true", dest="as_json")

    p_est = sub.add_parser("estimate", help="estimate (mu, L) for a scenario by sampling")
    p_est.add_argument("scenario", choices=SCENARIO_NAMES)
    p_est.add_argument("--pairs", type=int, default=200)
    p_est.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_experiment(args.config)
    if args.command == "scenarios":
        list_scenarios(as_json=args.as_json)
        return 0
    if args.command == "estimate":
        try:
            estimate_constants(args.scenario, args.pairs, args.seed)
        except RieGamesError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
