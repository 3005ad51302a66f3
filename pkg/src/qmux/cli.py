"""Command-line front end.

Subcommands mirror the pipeline stages: generate a workload, place one
batch, devirtualize it, simulate a whole run, sweep the policy grid, or
summarize a finished run's metrics.  Options resolve as flags over
config-file values over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .batching import admit, form_batch, prioritize
from .devirtualize import schedule_with_recovery, verify_isolation
from .harness import POLICY_GRID, RunConfig, ablation_sweep, run, sweep_csv
from .metrics import helper_cost_ratio, share_ratio, space_utilization
from .placement.annealer import AnnealParams, place_batch
from .placement.layout import CostWeights, carve_private_pools
from .topology import load_topology
from .workload import (
    WorkloadSpec,
    generate_workload,
    load_workload,
    write_workload,
)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _resolve(args: argparse.Namespace, cfg: dict, key: str, default):
    """Flag > config file > default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def _anneal_params(args, cfg) -> AnnealParams:
    return AnnealParams(
        iterations=_resolve(args, cfg, "iterations", 30),
        moves_per_iteration=_resolve(args, cfg, "moves_per_iteration", None),
        cooling=_resolve(args, cfg, "cooling", 0.95),
        seed=_resolve(args, cfg, "seed", 0),
        restarts=_resolve(args, cfg, "restarts", 1),
    )


def _run_config(args, cfg) -> RunConfig:
    return RunConfig(
        occupancy_ratio=_resolve(args, cfg, "occupancy_ratio", 0.6),
        max_shots=_resolve(args, cfg, "max_shots", 8192),
        wait_bound=_resolve(args, cfg, "wait_bound", 30.0),
        sharing=not _resolve(args, cfg, "no_sharing", False),
        shot_aware=not _resolve(args, cfg, "fifo", False),
        depth_time=_resolve(args, cfg, "depth_time", 0.001),
        anneal=_anneal_params(args, cfg),
        backend=_resolve(args, cfg, "backend", None),
    )


def _spec(args, cfg) -> WorkloadSpec:
    return WorkloadSpec(
        arrival_rate=_resolve(args, cfg, "rate", 0.6),
        duration=_resolve(args, cfg, "duration", 40.0),
        seed=_resolve(args, cfg, "seed", 0),
        shot_range=(
            _resolve(args, cfg, "shot_min", 500),
            _resolve(args, cfg, "shot_max", 8000),
        ),
        size_range=(
            _resolve(args, cfg, "size_min", 3),
            _resolve(args, cfg, "size_max", 8),
        ),
    )


def _pick_processes(args) -> list:
    processes = load_workload(args.workload)
    if args.ids:
        wanted = [s for chunk in args.ids for s in chunk.split(",") if s]
        by_id = {p.id: p for p in processes}
        missing = [w for w in wanted if w not in by_id]
        if missing:
            raise SystemExit(f"error: unknown process ids: {', '.join(missing)}")
        processes = [by_id[w] for w in wanted]
    return processes


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_gen(args) -> int:
    cfg = _load_config_file(args.config)
    spec = _spec(args, cfg)
    jobs = generate_workload(spec)
    out = write_workload(jobs, args.out)
    _write_json(str(out / "spec.json"), spec.to_json())
    print(f"wrote {len(jobs)} jobs to {out}")
    return 0


def _form_one_batch(processes, graph, rcfg: RunConfig):
    scfg = rcfg.scheduler_config(graph.num_qubits)
    entries = [admit(p, scfg, 0.0) for p in processes]
    # evaluate at the wait bound so the batch forms even below the
    # occupancy threshold; these commands schedule exactly one batch
    batch = form_batch(prioritize(entries), scfg, now=scfg.wait_bound)
    if batch is None:
        raise SystemExit("error: no batch could be formed from these processes")
    return batch


def _cmd_place(args) -> int:
    cfg = _load_config_file(args.config)
    rcfg = _run_config(args, cfg)
    graph = load_topology(args.topology)
    batch = _form_one_batch(_pick_processes(args), graph, rcfg)
    members = list(batch.processes)
    result = place_batch(graph, members, CostWeights(), rcfg.anneal, rcfg.backend)
    payload = {
        "schema": 1,
        "kind": "placement",
        "topology": graph.name,
        "members": list(batch.member_ids),
        "backend": result.backend,
        "start_cost": result.start_cost,
        "breakdown": result.breakdown.to_json(),
        "layout": result.layout.to_json(),
    }
    _write_json(args.out, payload)
    if args.out not in (None, "-"):
        print(
            f"placed {len(members)} processes on {graph.name}: "
            f"cost {result.breakdown.total:.4f} ({result.backend})"
        )
    return 0


def _cmd_schedule(args) -> int:
    cfg = _load_config_file(args.config)
    rcfg = _run_config(args, cfg)
    graph = load_topology(args.topology)
    batch = _form_one_batch(_pick_processes(args), graph, rcfg)
    members = list(batch.processes)
    placed = place_batch(graph, members, CostWeights(), rcfg.anneal, rcfg.backend)
    pools = (
        None
        if rcfg.sharing
        else carve_private_pools(placed.layout, graph, members)
    )
    program, evicted = schedule_with_recovery(members, placed.layout, graph, pools)
    if program is None:
        raise SystemExit("error: nothing could be scheduled on this device")
    report = verify_isolation(program)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "stream.txt"), "w", encoding="utf-8") as fh:
        fh.write(program.to_text())
    _write_json(os.path.join(args.out, "program.json"), program.to_json())
    print(
        f"scheduled {len(program.member_ids)} processes, "
        f"{len(program.instructions)} instructions, "
        f"{len(program.episodes)} helper episodes"
    )
    if evicted:
        print(f"evicted: {', '.join(evicted)}")
    print(f"isolation: {'ok' if report.ok else 'FAILED'}")
    if not report.ok:
        for f in report.failures[:10]:
            print(f"  {f}", file=sys.stderr)
        return 1
    print(
        f"space utilization {space_utilization(program, graph.num_qubits):.3f}, "
        f"share ratio {share_ratio(program):.3f}"
    )
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config_file(args.config)
    rcfg = _run_config(args, cfg)
    graph = load_topology(args.topology)
    jobs = _pick_processes(args)
    res = run(jobs, graph, rcfg, out_dir=args.out)
    rep = res.report
    print(f"{len(rep.batches)} batches, {rep.completed} jobs completed, "
          f"{len(rep.dropped)} dropped, simulated {rep.total_time:.2f}s")
    if rep.batches:
        print(
            f"processes/batch {rep.processes_per_batch:.2f}, "
            f"space-time utility {rep.space_time_utility:.4f}, "
            f"mean utilization {rep.mean_space_utilization:.4f}, "
            f"mean share ratio {rep.mean_share_ratio:.4f}"
        )
    if args.out:
        print(f"artifacts in {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config_file(args.config)
    rcfg = _run_config(args, cfg)
    graph = load_topology(args.topology)
    jobs = generate_workload(_spec(args, cfg))
    res = run(jobs, graph, rcfg, out_dir=args.out)
    rep = res.report
    print(f"{len(jobs)} jobs -> {len(rep.batches)} batches, "
          f"{rep.completed} completed, {len(rep.dropped)} dropped")
    if rep.batches:
        print(
            f"processes/batch {rep.processes_per_batch:.2f}, "
            f"space-time utility {rep.space_time_utility:.4f}"
        )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config_file(args.config)
    rcfg = _run_config(args, cfg)
    graph = load_topology(args.topology)
    spec = _spec(args, cfg)
    lambdas = tuple(float(r) for r in args.lambdas.split(","))
    policies = POLICY_GRID
    if args.policies:
        wanted = set(args.policies.split(","))
        unknown = wanted - {label for label, _, _ in POLICY_GRID}
        if unknown:
            raise SystemExit(f"error: unknown policies: {', '.join(sorted(unknown))}")
        policies = tuple(p for p in POLICY_GRID if p[0] in wanted)
    rows = ablation_sweep(spec, graph, lambdas=lambdas, policies=policies, config=rcfg)
    text = sweep_csv(rows)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    path = os.path.join(args.run_dir, "report.json")
    with open(path, encoding="utf-8") as fh:
        rep = json.load(fh)
    print(f"batches:              {rep['num_batches']}")
    print(f"jobs completed:       {rep['completed']}")
    print(f"jobs dropped:         {len(rep['dropped'])}")
    print(f"simulated time:       {rep['total_time']:.2f}s")
    for key in (
        "processes_per_batch",
        "space_time_utility",
        "mean_space_utilization",
        "mean_share_ratio",
        "mean_helper_cost_ratio",
    ):
        val = rep.get(key)
        label = key.replace("_", " ") + ":"
        print(f"{label:<22}{'n/a' if val is None else f'{val:.4f}'}")
    if args.csv:
        with open(os.path.join(args.run_dir, "metrics.csv"), encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    return 0


def _add_common(p: argparse.ArgumentParser, *, topology=False, workload=False):
    p.add_argument("--config", help="TOML file with option defaults")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    if topology:
        p.add_argument(
            "--topology",
            default="heavyhex(4,28)",
            help="descriptor like line(16), grid(4,5), heavyhex(4,28), "
            "or a path to an edge-list file (default: heavyhex(4,28))",
        )
    if workload:
        p.add_argument("--workload", required=True, help="workload directory")
        p.add_argument(
            "--ids",
            action="append",
            default=None,
            help="comma-separated process ids to use (default: all)",
        )


def _add_run_options(p: argparse.ArgumentParser):
    p.add_argument(
        "--lambda",
        "--occupancy-ratio",
        dest="occupancy_ratio",
        type=float,
        help="batch fill threshold as a fraction of the device (default 0.6)",
    )
    p.add_argument(
        "--smax",
        "--max-shots",
        dest="max_shots",
        type=int,
        help="shot cap per batch (default 8192)",
    )
    p.add_argument("--wait-bound", dest="wait_bound", type=float)
    p.add_argument("--depth-time", dest="depth_time", type=float)
    p.add_argument(
        "--no-sharing",
        dest="no_sharing",
        action="store_const",
        const=True,
        help="give each job a private helper pool instead of the shared zone",
    )
    p.add_argument(
        "--fifo",
        dest="fifo",
        action="store_const",
        const=True,
        help="batch in arrival order instead of cheapest-first",
    )
    _add_anneal_options(p)


def _add_anneal_options(p: argparse.ArgumentParser):
    p.add_argument("--iterations", type=int, help="annealing iterations (default 30)")
    p.add_argument("--moves-per-iteration", dest="moves_per_iteration", type=int)
    p.add_argument("--cooling", type=float)
    p.add_argument("--restarts", type=int)
    p.add_argument(
        "--backend",
        choices=("python", "compiled"),
        help="placement kernel (default: compiled when built)",
    )


def _add_spec_options(p: argparse.ArgumentParser):
    p.add_argument("--rate", type=float, help="mean job arrivals per second")
    p.add_argument("--duration", type=float, help="arrival window in seconds")
    p.add_argument("--shot-min", dest="shot_min", type=int)
    p.add_argument("--shot-max", dest="shot_max", type=int)
    p.add_argument("--size-min", dest="size_min", type=int)
    p.add_argument("--size-max", dest="size_max", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmux",
        description="Multi-tenant scheduling and placement for shared quantum devices",
    )
    parser.add_argument("--version", action="version", version=f"qmux {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a workload directory")
    _add_common(p)
    _add_spec_options(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("place", help="anneal a layout for one batch")
    _add_common(p, topology=True, workload=True)
    _add_anneal_options(p)
    p.add_argument("--out", help="layout JSON path (default: stdout)")
    p.set_defaults(func=_cmd_place)

    p = sub.add_parser("schedule", help="place and devirtualize one batch")
    _add_common(p, topology=True, workload=True)
    _add_run_options(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("run", help="simulate a stored workload end to end")
    _add_common(p, topology=True, workload=True)
    _add_run_options(p)
    p.add_argument("--out", help="artifact directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("simulate", help="generate a workload and simulate it")
    _add_common(p, topology=True)
    _add_spec_options(p)
    _add_run_options(p)
    p.add_argument("--out", help="artifact directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="cross occupancy thresholds with policies")
    _add_common(p, topology=True)
    _add_spec_options(p)
    _add_run_options(p)
    p.add_argument(
        "--lambdas",
        default="0.2,0.4,0.6",
        help="comma-separated occupancy thresholds to sweep",
    )
    p.add_argument(
        "--policies",
        help="comma-separated subset of: "
        + ",".join(label for label, _, _ in POLICY_GRID),
    )
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("metrics", help="summarize a finished run directory")
    p.add_argument("run_dir", help="directory produced by qmux run")
    p.add_argument("--csv", action="store_true", help="also print per-batch rows")
    p.set_defaults(func=_cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
