"""Command-line harness: validate configs, train cases, run parameter sweeps.

Subcommands
    validate CONFIG
    run CONFIG --case CASE --out DIR [--runs N --episodes N --seed N]
    sweep CONFIG --out DIR [--cases ...] [--peaks ...] [--elements ...]
                 [--psr ...] [--runs N --episodes N --seed N]

Pure batch tool: every output is a CSV table or a JSON manifest. Worker
parallelism is capped by the RIS_SIM_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import os
import sys
import tempfile

import numpy as np

from . import hrl, metrics
from .scenario import InvalidScenarioError, Scenario, load_config

# case -> (agent kind, ris_enabled, sleep_enabled)
CASES = {
    "typical": (hrl.FLAT_Q, False, False),
    "sleep_only": (hrl.FLAT_Q, False, True),
    "ris_only": (hrl.FLAT_Q, True, False),
    "ris_sleep": (hrl.HRL, True, True),
}

SMOOTH_WINDOW = 50


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path, doc) -> None:
    """Atomic write: no partial files on failure."""
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def train_case(scenario: Scenario, case: str, runs: int,
               episodes: int | None = None,
               eval_episodes: int | None = None) -> list:
    """Train `runs` seeded runs of one case (seed_base + run index)."""
    if case not in CASES:
        raise ValueError(f"unknown case: {case!r}")
    tasks = [(scenario, case, i, episodes, eval_episodes)
             for i in range(runs)]
    workers = min(_worker_count(), len(tasks))
    if workers > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            return pool.map(_train_one, tasks)
    return [_train_one(t) for t in tasks]


def _train_one(task):
    scenario, case, run_index, episodes, eval_episodes = task
    agent_kind, ris_enabled, sleep_enabled = CASES[case]
    seeded = dataclasses.replace(scenario, seed=scenario.seed + run_index)
    _, run = hrl.train(seeded, agent_kind, ris_enabled=ris_enabled,
                       sleep_enabled=sleep_enabled, run_index=run_index,
                       episodes=episodes, eval_episodes=eval_episodes,
                       case=case)
    return run


def _worker_count() -> int:
    env = os.environ.get("RIS_SIM_WORKERS", "")
    if env:
        return max(1, int(env))
    return 1


def _run_rows(runs):
    rows = []
    for run in runs:
        i = run.extra["run_index"]
        for ep in range(run.train.episodes):
            rows.append((
                i, ep,
                run.train.episode_mean("r_ex")[ep],
                run.train.episode_mean("ee")[ep],
                run.train.episode_mean("total_power")[ep],
                run.train.episode_mean("mean_throughput")[ep],
                run.train.episode_mean("n_od")[ep],
            ))
    return rows


def cmd_run(args) -> int:
    scenario = load_config(args.config)
    scenario = _apply_overrides(scenario, args)
    os.makedirs(args.out, exist_ok=True)
    runs = train_case(scenario, args.case, args.runs, args.episodes)
    write_csv(os.path.join(args.out, "runs.csv"),
              ("run", "episode", "r_ex", "ee", "total_power",
               "mean_throughput", "n_od"),
              _run_rows(runs))
    window = metrics.default_window(runs[0].train.episodes)
    doc = {
        "case": args.case,
        "runs": args.runs,
        "seed_base": scenario.seed,
        "episodes": runs[0].train.episodes,
        "window": window,
        "aggregate": metrics.aggregate(runs, window) if args.runs >= 2 else None,
    }
    _write_json(os.path.join(args.out, "aggregate.json"), doc)
    return 0


def _peak_hour(scenario: Scenario) -> int:
    return int(np.argmax(scenario.traffic.hourly_multiplier))


def cmd_sweep(args) -> int:
    scenario = load_config(args.config)
    scenario = _apply_overrides(scenario, args)
    cases = args.cases
    if not cases:
        raise InvalidScenarioError(["sweep: empty case list"])
    for c in cases:
        if c not in CASES:
            raise InvalidScenarioError([f"sweep: unknown case {c!r}"])
    os.makedirs(args.out, exist_ok=True)
    peak_hour = _peak_hour(scenario)
    manifest = {"cases": cases, "peaks_mbps": args.peaks,
                "elements": args.elements, "psr_bits": args.psr,
                "runs": args.runs, "seed_base": scenario.seed, "files": {}}

    fig_metrics = (("fig3", "total_power"), ("fig4", "mean_throughput"),
                   ("fig5", "ee"))
    for case in cases:
        per_peak = {}
        for peak in args.peaks:
            sc = dataclasses.replace(
                scenario,
                traffic=dataclasses.replace(scenario.traffic,
                                            peak_demand=peak * 1e6))
            per_peak[peak] = train_case(sc, case, args.runs, args.episodes)
        summaries = {peak: metrics.eval_summary(runs, peak_hour)
                     for peak, runs in per_peak.items()}
        for fig, metric in fig_metrics:
            path = os.path.join(args.out, f"{fig}_{case}.csv")
            write_csv(path,
                      ("peak_mbps", "day_mean", "day_ci95",
                       "peak_hour_mean", "peak_hour_ci95"),
                      [(peak, s[metric]["day_mean"], s[metric]["day_ci95"],
                        s[metric]["peak_mean"], s[metric]["peak_ci95"])
                       for peak, s in summaries.items()])
            manifest["files"][f"{fig}_{case}"] = os.path.basename(path)

        top_runs = per_peak[max(args.peaks)]
        n_sbs = top_runs[0].eval.sbs_on.shape[2]
        path = os.path.join(args.out, f"fig6_{case}.csv")
        write_csv(path,
                  ("hour",) + tuple(f"sbs{j}_on_prob" for j in range(n_sbs))
                  + ("mean_on_prob",),
                  [(h, *metrics.sbs_on_probability(top_runs, h),
                    float(metrics.sbs_on_probability(top_runs, h).mean()))
                   for h in range(24)])
        manifest["files"][f"fig6_{case}"] = os.path.basename(path)

        series = np.stack([r.train.episode_mean("r_ex") for r in top_runs])
        mean = series.mean(axis=0)
        smooth = _moving_average(mean, SMOOTH_WINDOW)
        path = os.path.join(args.out, f"fig8_{case}.csv")
        write_csv(path, ("episode", "r_ex_mean", "r_ex_smoothed"),
                  [(ep, mean[ep], smooth[ep]) for ep in range(len(mean))])
        manifest["files"][f"fig8_{case}"] = os.path.basename(path)

    if args.elements and args.psr:
        table = metrics.sinr_vs_elements(scenario, args.elements, args.psr,
                                         args.realizations)
        path = os.path.join(args.out, "fig7.csv")
        write_csv(path, ("num_elements", "psr_bits", "mean_sinr"), table.rows)
        manifest["files"]["fig7"] = os.path.basename(path)

    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def _moving_average(x: np.ndarray, window: int) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    for i in range(len(x)):
        lo = max(0, i - window + 1)
        out[i] = x[lo:i + 1].mean()
    return out


def cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: valid")
    return 0


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if getattr(args, "seed", None) is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    return scenario


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="risran",
        description="RIS-assisted RAN energy-efficiency simulator")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario config")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="train one comparison case")
    r.add_argument("config")
    r.add_argument("--case", choices=sorted(CASES), default="ris_sleep")
    r.add_argument("--out", required=True)
    r.add_argument("--runs", type=int, default=10)
    r.add_argument("--episodes", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run the figure-series sweeps")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--cases", nargs="*", default=sorted(CASES))
    s.add_argument("--peaks", nargs="*", type=float,
                   default=[2.0, 4.0, 6.0, 8.0], help="peak loads in Mbps")
    s.add_argument("--elements", nargs="*", type=int, default=[])
    s.add_argument("--psr", nargs="*", type=int, default=[])
    s.add_argument("--realizations", type=int, default=1000)
    s.add_argument("--runs", type=int, default=10)
    s.add_argument("--episodes", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
