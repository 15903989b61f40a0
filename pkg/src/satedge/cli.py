"""Command-line entry point for the experiment families.

Subcommands: generate a scenario file, solve one scenario by any
method, train an agent over the bandwidth grid, sweep a scenario axis,
and report the duality gap of a splitting run.  Every output is a CSV
with a ``# key: value`` metadata block or a JSON result document;
wall-clock timing appears only behind the excluded mark, so reruns
with the same scenario, seed, and --threads 1 are byte-comparable
through report.reproducible_lines.

Exit codes: 0 success, 2 usage or malformed scenario, 3 infeasible,
4 solver failure.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, report
from .admm import AdmmSettings, DivergenceError, IterateLog, IterateRow, \
    run, result_document
from .bandwidth import InfeasibleError
from .baselines import equal_bandwidth, equal_bandwidth_plan, \
    exhaustive_search
from .cost import augmented_lagrangian, total_energy
from .duality import AscentSchedule, DualState, ExhaustiveMinimizer, \
    ascend, duality_gap
from .scenario import ConfigError, generate_scenario, load_scenario, \
    save_scenario, scenario_to_dict

METHODS = ("admm-hybrid", "admm-classical", "admm-exhaustive",
           "exhaustive", "equal-bandwidth")
AGENT_KINDS = ("hybrid", "classical")
SWEEP_AXES = {
    "task-bits": ("topology", "task_bits"),
    "b-access-total": ("radio", "b_access_total"),
    "b-s-total": ("radio", "b_s_total"),
}
# Bandwidth pairs of the four training panels, Hz.
TRAIN_GRID = [(50e6, 100e6), (50e6, 110e6), (60e6, 100e6), (60e6, 110e6)]
OUT_ENV = "SATEDGE_OUT"
GAP_ASCENT_ITERS = 2000

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


def _out_dir(args) -> str:
    # Only the output directory honors an environment override.
    out = args.out or os.environ.get(OUT_ENV) or "runs"
    os.makedirs(out, exist_ok=True)
    return out


def _load(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return generate_scenario(seed=args.seed)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _metadata(args, extra=None) -> dict:
    md = {"tool_version": __version__, "seed": args.seed}
    md.update(extra or {})
    md["settings_hash"] = report.settings_hash(md)
    return md


def _variant(base, assignments: dict):
    """Rebuild a scenario with a few fields replaced, keeping the rest,
    the UE placement included."""
    tree = scenario_to_dict(base)
    tree.pop("schema_version")
    tree.pop("seed")
    for (section, key), value in assignments.items():
        tree[section][key] = value
    return generate_scenario(seed=base.seed, overrides=tree)


def _solve_one(method: str, s, seed: int, threads: int):
    """Dispatch one method; returns (assignment, plan, energy, log)."""
    if method == "exhaustive":
        a, plan, energy = exhaustive_search(s, threads=threads)
        return a, plan, energy, None
    if method == "equal-bandwidth":
        a, energy = equal_bandwidth(s)
        return a, equal_bandwidth_plan(a, s), energy, None
    settings = AdmmSettings(x_solver=method.removeprefix("admm-"))
    x, plan, log = run(s, settings, seed=seed)
    return x, plan, log.rows[-1].energy, log


def _one_shot_log(a, plan, s) -> IterateLog:
    """Single-row iterate history for the non-iterative baselines."""
    e = total_energy(a.matrix, plan, s)
    log = IterateLog(converged=True)
    log.append(IterateRow(
        iteration=0, accepted=True,
        lagrangian=augmented_lagrangian(a.matrix, plan, s,
                                        AdmmSettings().rho),
        energy=e, dual_value=float("nan"),
        consensus=float(np.linalg.norm(plan.b_flat - plan.xi)),
        xi_change=0.0, servers=a.servers))
    return log


def cmd_generate(args) -> int:
    out = _out_dir(args)
    s = generate_scenario(seed=args.seed)
    path = os.path.join(out, f"scenario-{args.seed}.yaml")
    save_scenario(s, path)
    print(path)
    return EXIT_OK


def cmd_solve(args) -> int:
    out = _out_dir(args)
    s = _load(args)
    started = time.perf_counter()
    a, plan, energy, log = _solve_one(args.method, s, args.seed,
                                      _threads(args))
    elapsed = time.perf_counter() - started
    if log is None:
        log = _one_shot_log(a, plan, s)

    settings = AdmmSettings(x_solver=args.method.removeprefix("admm-")) \
        if args.method.startswith("admm-") else AdmmSettings()
    md = _metadata(args, {"method": args.method,
                          "scenario_seed": s.seed})
    csv_path = os.path.join(out, f"iterates-{args.method}.csv")
    log.write_csv(csv_path, metadata=md)

    doc = result_document(a, plan, s, settings, log,
                          extras={"method": args.method,
                                  "settings_hash": md["settings_hash"]},
                          elapsed_seconds=elapsed)
    doc_path = os.path.join(out, f"result-{args.method}.json")
    report.write_document(doc_path, doc)
    print(f"{args.method}: E={energy:.12g} servers="
          + "-".join(str(v) for v in a.servers))
    print(doc_path)
    return EXIT_OK


def cmd_train(args) -> int:
    from .agent import EpisodeEnv, HybridAgent, state_dim, train
    from .admm import initial_plan
    from .vqc import CircuitSpec

    out = _out_dir(args)
    base = _load(args)
    columns = ("episode", "epsilon", "greedy_reward", "loss")
    for b_access, b_s in TRAIN_GRID:
        s = _variant(base, {("radio", "b_access_total"): b_access,
                            ("radio", "b_s_total"): b_s})
        dim, acts = state_dim(s), s.n_servers
        if args.method == "classical":
            agent = HybridAgent.classical(dim, acts, seed=args.seed)
        else:
            agent = HybridAgent.hybrid(
                dim, acts, circuit=CircuitSpec(n_qubits=8, n_layers=2,
                                               n_readout=acts),
                seed=args.seed)
        plan = initial_plan(s)
        dual = DualState.zeros(s)
        agent, records = train(
            agent, lambda: EpisodeEnv(s, plan, dual), args.episodes,
            seed=args.seed)

        tag = f"{args.method}-{b_access / 1e6:g}-{b_s / 1e6:g}"
        md = _metadata(args, {"agent": args.method,
                              "episodes": args.episodes,
                              "b_access_total": b_access,
                              "b_s_total": b_s,
                              "scenario_seed": s.seed})
        rows = [(r.episode, r.epsilon, r.greedy_reward, r.loss)
                for r in records]
        csv_path = os.path.join(out, f"train-{tag}.csv")
        report.write_csv(csv_path, columns, rows, metadata=md)
        agent.save(os.path.join(out, f"agent-{tag}.npz"))
        print(csv_path)
    return EXIT_OK


def _sweep_point(axis, value, methods, base, seed, threads):
    s = _variant(base, {SWEEP_AXES[axis]: value})
    rows = []
    for method in methods:
        try:
            a, _, energy, _ = _solve_one(method, s, seed, threads)
            rows.append((axis, value, method, energy, True,
                         "-".join(str(v) for v in a.servers)))
        except InfeasibleError:
            rows.append((axis, value, method, float("inf"), False, ""))
    return rows


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    base = _load(args)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of "
                              + ", ".join(METHODS))
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values or not methods:
        raise ConfigError("sweep needs at least one value and one method")

    threads = _threads(args)
    if threads > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_sweep_point, args.axis, v, methods,
                                   base, args.seed, 1)
                       for v in values]
            point_rows = [f.result() for f in futures]
    else:
        point_rows = [_sweep_point(args.axis, v, methods, base,
                                   args.seed, threads)
                      for v in values]

    md = _metadata(args, {"axis": args.axis,
                          "methods": ",".join(methods),
                          "scenario_seed": base.seed})
    columns = ("axis", "value", "method", "energy", "feasible", "servers")
    rows = [row for point in point_rows for row in point]
    csv_path = os.path.join(out, f"sweep-{args.axis}.csv")
    report.write_csv(csv_path, columns, rows, metadata=md)
    print(csv_path)
    return EXIT_OK


def cmd_duality_gap(args) -> int:
    out = _out_dir(args)
    s = _load(args)
    settings = AdmmSettings(x_solver=args.method.removeprefix("admm-"))
    x, plan, log = run(s, settings, seed=args.seed)

    # Fresh multipliers at the returned plan: the zero coordinates of
    # the adapted plan price every rival assignment out, so a converged
    # ascent closes the gap the iterate-level bounds leave open.
    primal = log.rows[-1].energy
    _, trace = ascend(DualState.zeros(s), AscentSchedule(0.1),
                      GAP_ASCENT_ITERS, ExhaustiveMinimizer(), plan, s)
    dual_final = trace[-1].best_value
    gap, rel = duality_gap(primal, dual_final)

    md = _metadata(args, {"method": args.method,
                          "scenario_seed": s.seed,
                          "final_primal": primal,
                          "final_dual": dual_final,
                          "final_gap": gap,
                          "final_rel_gap": rel})
    columns = ("iteration", "primal", "dual")
    rows = [(r.iteration, r.energy, r.dual_value) for r in log.rows]
    csv_path = os.path.join(out, "duality-gap.csv")
    report.write_csv(csv_path, columns, rows, metadata=md)
    print(f"final relative gap {rel:.6f}")
    print(csv_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satedge",
        description="Joint task-offloading and bandwidth optimizer for "
                    "satellite-terrestrial edge networks.")
    parser.add_argument("--version", action="version",
                        version=f"satedge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario YAML; omitted means "
                                          "the default scenario for --seed")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help=f"output directory (default 'runs', "
                                     f"or ${OUT_ENV} when set)")
        p.add_argument("--threads", type=int,
                       help="worker threads; 1 forces bit-reproducibility")

    p = sub.add_parser("generate", help="write a scenario file")
    common(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("solve", help="solve one scenario")
    common(p)
    p.add_argument("--method", choices=METHODS, default="admm-hybrid")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("train", help="train an agent on the four "
                                     "bandwidth-pair panels")
    common(p)
    p.add_argument("--method", choices=AGENT_KINDS, default="hybrid",
                   help="agent kind")
    p.add_argument("--episodes", type=int, default=2000)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sweep", help="energy along one scenario axis")
    common(p)
    p.add_argument("--axis", choices=sorted(SWEEP_AXES), required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated axis values in base units")
    p.add_argument("--method", default="exhaustive,equal-bandwidth",
                   help="comma-separated methods")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("duality-gap", help="primal and dual value per "
                                           "sweep plus the final gap")
    common(p)
    p.add_argument("--method",
                   choices=[m for m in METHODS if m.startswith("admm-")],
                   default="admm-exhaustive")
    p.set_defaults(fn=cmd_duality_gap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DivergenceError, FloatingPointError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
