"""Command-line front end.

Two subcommands:

  run    simulate one horizon, print the key-value report, optionally
         write trace CSVs, a JSON report, figures, and a benchmark
         comparison
  sweep  rerun the controller across a parameter grid and tabulate the
         headline metrics

Slots in every file are 1-based.  Floats are written with repr so a
rewritten file parses back bit-identically; two runs with the same
inputs produce byte-identical traces.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import benchmarks as bm
from .carbon import ConfigurationError, QuotaViolation
from .engine import RunResult, run
from .figures import render_figures
from .report import evaluate, render_json, render_text
from .scenario import (
    Scenario,
    TimeGrid,
    load_scenario,
    sample_fleet,
    synth_prices,
    with_overrides,
)

BENCHMARKS = ("proposed", "b1", "b2", "b3", "b3mod", "b4")
SWEEP_PARAMS = ("v1", "v2", "alpha", "dtc")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _band_rows(result: RunResult, effective: bool):
    groups = result.setup.groups
    if effective:
        x_check, x_hat = result.profiles.x_check_eff, result.profiles.x_hat_eff
        p_check, p_hat, f = result.p_check, result.p_hat, result.f_value
    else:
        x_check, x_hat = result.x_check, result.x_hat
        p_check, p_hat, f = result.p_check_queue, result.p_hat_queue, result.f_queue
    for t in range(result.scenario.grid.n_slots):
        for gi, group in enumerate(groups):
            yield (
                t + 1, group.g, x_check[gi, t], x_hat[gi, t],
                p_check[t], p_hat[t], f[t],
            )


def _stage2_rows(result: RunResult):
    for t in range(result.scenario.grid.n_slots):
        yield (
            t + 1, result.p_d[t], result.p_g[t], result.p_r[t], result.m_b[t],
            result.c[t + 1], result.h[t], result.phi[t], result.cost[t],
        )


def _perev_rows(result: RunResult):
    ids = sorted(task.id for task in result.scenario.fleet)
    for t in range(result.scenario.grid.n_slots):
        for vid in ids:
            yield (t + 1, vid, result.p_ev[vid, t], result.e_ev[vid, t + 1])


def write_traces(result: RunResult, out_dir: Path, per_ev: bool) -> None:
    band_header = ["t", "g", "x_check", "x_hat", "p_check", "p_hat", "F_t"]
    _write_csv(out_dir / "band.csv", band_header, _band_rows(result, effective=True))
    _write_csv(out_dir / "band_queue.csv", band_header, _band_rows(result, effective=False))
    _write_csv(
        out_dir / "stage2.csv",
        ["t", "p_d", "p_g", "p_r", "m_b", "c", "H", "phi", "cost"],
        _stage2_rows(result),
    )
    if per_ev:
        _write_csv(
            out_dir / "perev.csv", ["t", "ev_id", "p_c", "e"], _perev_rows(result)
        )


def _build_scenario(args) -> Scenario:
    if args.config:
        if any(v is not None for v in (args.evs, args.slots, args.seed)):
            raise ConfigurationError(
                "--evs/--slots/--seed resample a synthetic scenario and "
                "conflict with --config; edit the config files instead"
            )
        sc = load_scenario(args.config)
    else:
        seed = 1 if args.seed is None else args.seed
        slots = 144 if args.slots is None else args.slots
        evs = 100 if args.evs is None else args.evs
        dtc = 6 if args.dtc is None else args.dtc
        grid = TimeGrid(n_slots=slots, dt_hours=24.0 / slots, carbon_every=dtc)
        sc = Scenario(
            grid=grid,
            prices=synth_prices(grid, seed=seed),
            fleet=sample_fleet(evs, grid, seed=seed),
            seed=seed,
        )
    overrides = {}
    if args.v1 is not None:
        overrides["v1"] = args.v1
    if args.v2 is not None:
        overrides["v2"] = args.v2
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.h_update is not None:
        overrides["h_update"] = args.h_update
    if args.config and args.dtc is not None:
        overrides["carbon_every"] = args.dtc
    if overrides:
        sc = with_overrides(sc, **overrides)
    sc.validate()
    return sc


def _run_benchmark(name: str, scenario: Scenario, baseline: RunResult):
    if name == "b1":
        return bm.b1_charge_first(scenario)
    if name == "b2":
        return bm.b2_offline_flex(scenario)
    if name == "b3":
        return bm.b3_myopic(scenario)
    if name == "b3mod":
        return bm.b3_modified(scenario)
    if name == "b4":
        return bm.b4_offline_cost(scenario, baseline.p_check, baseline.p_hat)
    raise ValueError(f"unknown benchmark {name!r}")


def _benchmark_extra(bench) -> tuple[dict[str, str], dict]:
    text = {
        "benchmark.name": bench.name,
        "benchmark.feasible": str(bench.feasible),
    }
    machine: dict = {"name": bench.name, "feasible": bench.feasible}
    if bench.value is not None:
        text["benchmark.value_total"] = repr(float(bench.value))
        machine["value_total"] = float(bench.value)
    if bench.cost is not None:
        text["benchmark.cost_total"] = repr(float(bench.cost))
        machine["cost_total"] = float(bench.cost)
    if bench.detail:
        text["benchmark.detail"] = bench.detail
        machine["detail"] = bench.detail
    return text, machine


def _write_benchmark_traces(bench, out_dir: Path) -> None:
    if bench.run is not None:
        _write_csv(
            out_dir / f"benchmark_{bench.name}_stage2.csv",
            ["t", "p_d", "p_g", "p_r", "m_b", "c", "H", "phi", "cost"],
            _stage2_rows(bench.run),
        )
    elif "p_check" in bench.traces:
        lo, hi = bench.traces["p_check"], bench.traces["p_hat"]
        f = bench.traces["f_value"]
        _write_csv(
            out_dir / f"benchmark_{bench.name}_band.csv",
            ["t", "p_check", "p_hat", "F_t"],
            ((t + 1, lo[t], hi[t], f[t]) for t in range(len(lo))),
        )
    elif "p_d" in bench.traces:
        tr = bench.traces
        _write_csv(
            out_dir / f"benchmark_{bench.name}_dispatch.csv",
            ["t", "p_d", "p_g", "p_r", "m_b", "c"],
            (
                (t + 1, tr["p_d"][t], tr["p_g"][t], tr["p_r"][t], tr["m_b"][t], tr["c"][t + 1])
                for t in range(len(tr["p_d"]))
            ),
        )


def cmd_run(args) -> int:
    scenario = _build_scenario(args)
    result = run(scenario, policy="proposed")
    rep = evaluate(result)

    extra_text = extra_json = None
    bench = None
    if args.benchmark != "proposed":
        bench = _run_benchmark(args.benchmark, scenario, result)
        extra_text, extra_json = _benchmark_extra(bench)

    sys.stdout.write(render_text(rep, extra_text))

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_traces(result, out_dir, per_ev=args.per_ev_trace)
        (out_dir / "report.txt").write_text(render_text(rep, extra_text))
        (out_dir / "report.json").write_text(render_json(rep, extra_json))
        if bench is not None:
            _write_benchmark_traces(bench, out_dir)
        if args.figures:
            render_figures(result, out_dir)

    return 0 if rep.all_passed else 1


def cmd_sweep(args) -> int:
    scenario = _build_scenario(args)
    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        raise ConfigurationError("--values must list at least one number")

    header = [
        "param", "value", "value_avg", "cost_avg", "c_max", "trade_count",
        "min_target_margin", "unserved_total", "dispatch_kwh",
    ]
    rows = []
    for val in values:
        if args.param == "dtc":
            sc = with_overrides(scenario, carbon_every=int(val))
            policy = "proposed"
        elif args.param == "alpha":
            sc = with_overrides(scenario, alpha=val)
            policy = "alpha"
        else:
            sc = with_overrides(scenario, **{args.param: val})
            policy = "proposed"
        res = run(sc, policy=policy)
        rows.append(
            (
                args.param, val, res.value_avg, res.cost_avg, res.c_max,
                res.trade_count, res.min_target_margin, res.unserved_total,
                float(res.p_d.sum() * sc.grid.dt_hours),
            )
        )

    widths = [max(len(h), 12) for h in header]
    out = [" ".join(h.rjust(w) for h, w in zip(header, widths))]
    for row in rows:
        out.append(
            " ".join(
                (f"{x:.6g}" if isinstance(x, float) else str(x)).rjust(w)
                for x, w in zip(row, widths)
            )
        )
    sys.stdout.write("\n".join(out) + "\n")

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "sweep.csv", header, rows)
    return 0


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario config file written by save_scenario")
    p.add_argument("--seed", type=int, help="RNG seed for the synthetic scenario (default 1)")
    p.add_argument("--evs", type=int, help="fleet size for the synthetic scenario (default 100)")
    p.add_argument("--slots", type=int, help="slots in the daily horizon (default 144)")
    p.add_argument("--v1", type=float, help="flexibility-value weight")
    p.add_argument("--v2", type=float, help="cost weight; 0 disables cost tracking, omit for auto")
    p.add_argument("--alpha", type=float, help="fixed dispatch ratio in [0, 1]")
    p.add_argument("--dtc", type=int, help="slots between allowance trading opportunities (default 6)")
    p.add_argument(
        "--h-update", choices=("anchored", "recursive"), dest="h_update",
        help="virtual queue update rule (default anchored)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evflex",
        description="flexibility bands and carbon-aware procurement for an EV charging station",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one horizon and report")
    _add_scenario_flags(p_run)
    p_run.add_argument("--benchmark", choices=BENCHMARKS, default="proposed")
    p_run.add_argument("--out", help="directory for trace CSVs and reports")
    p_run.add_argument("--per-ev-trace", action="store_true", dest="per_ev_trace")
    p_run.add_argument("--figures", action="store_true", help="render PNG figures into --out")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="rerun across a parameter grid")
    _add_scenario_flags(p_sweep)
    p_sweep.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", help="directory for sweep.csv")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QuotaViolation as exc:
        print(f"guarantee violated: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
