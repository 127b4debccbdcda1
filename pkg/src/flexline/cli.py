"""Command line interface for line configuration work.

Subcommands mirror the library pipeline: ``init`` and ``pareto`` for greenfield
planning, ``monitor`` for disturbance detection on sample logs, ``reconfigure``
for scoped reassignment after a trigger, ``simulate`` for discrete-event
evaluation, and ``run-scenario`` for the whole loop driven by one bundle file.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

from .capability_graph import (
    CapabilityGraph,
    load_graph,
    operation_time,
    save_graph,
    update_time_model,
)
from .errors import (
    FlexlineError,
    HitNodeLimit,
    Infeasible,
    InsufficientSamples,
    NoFeasibleCandidate,
    NumericalFailure,
    ParseError,
)
from .line_model import (
    DisturbanceScenario,
    LineConfiguration,
    bottleneck_time,
    derive_stations,
    load_config,
    save_config,
)
from .monitor import (
    DisturbanceEvent,
    agent_triggers,
    build_monitor,
    estimated_multiplier,
    read_sample_log,
    replay_samples,
    update_time_model_from_stream,
)
from .optimizer import (
    Solution,
    Weights,
    build_init_problem,
    build_reconfig_problem,
    solve_init,
    solve_reconfig,
    sweep_pareto,
)
from .selector import SelectionPolicy, select
from .simulator import build_sim, compare_reports, replicate, report_to_dict, run

_EXIT_OK = 0
_EXIT_INPUT = 2
_EXIT_INFEASIBLE = 3
_EXIT_INTERNAL = 4

# Buffer sizing for derived configurations: modest everywhere, deeper around
# stations involved in a shared operation so routing variation does not starve
# or block the neighbours.
_BUFFER_DEFAULT = 2
_BUFFER_NEAR_SHARED = 8
_BUFFER_RADIUS = 1


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


def _write_json(path: str, data: dict) -> None:
    _ensure_parent(path)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def _read_json(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a JSON object at top level")
    return data


def _parse_weights(text: str, count: int) -> Tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != count:
        raise ValueError(f"expected {count} comma-separated weights, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValueError(f"weights must be numeric, got {text!r}") from None


def _parse_grid(text: str) -> List[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"grid bounds must be numeric, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ValueError("grid requires step > 0 and stop >= start")
    n = int(round((stop - start) / step))
    points = [round(start + i * step, 10) for i in range(n + 1)]
    return [p for p in points if p <= stop + 1e-9]


def _parse_disturbance(text: str) -> DisturbanceScenario:
    parts = text.rsplit(":", 2)
    if len(parts) != 3:
        raise ValueError(f"disturbance must be agent:multiplier:onset_s, got {text!r}")
    agent, mult_s, onset_s = parts
    try:
        return DisturbanceScenario(agent, float(mult_s), float(onset_s))
    except ValueError:
        raise ValueError(f"disturbance numbers malformed in {text!r}") from None


def _stats_path(out: str) -> str:
    stem, ext = os.path.splitext(out)
    return (stem if ext == ".json" else out) + ".stats.json"


def _solution_stats(sol: Solution, weights: Weights) -> dict:
    data = {
        "objective": round(sol.objective, 9),
        "bottleneck_s": round(sol.bottleneck, 9),
        "agents": sol.agents_used,
        "total_usages": sol.total_usages(),
        "adjustment": round(sol.adjustment, 9),
        "weights": {"c_t": weights.c_t, "c_z": weights.c_z, "c_x": weights.c_x},
        "nodes": sol.stats.nodes,
        "seconds": round(sol.stats.seconds, 6),
        "method": sol.stats.method,
    }
    if sol.mode is not None:
        data["mode"] = sol.mode
    return data


def _uniform_buffers(c: LineConfiguration, cap: int) -> LineConfiguration:
    n = len(derive_stations(c).stations)
    return replace(c, buffers=tuple((i, cap) for i in range(1, n)))


def _apply_buffer_policy(
    c: LineConfiguration,
    default_cap: int = _BUFFER_DEFAULT,
    near_shared_cap: int = _BUFFER_NEAR_SHARED,
) -> LineConfiguration:
    """Size buffer slots for a derived configuration.

    Every inter-station slot gets `default_cap`; slots within one position of a
    station that hosts a shared operation, or of the visiting agent's own
    station, get `near_shared_cap`.
    """
    view = derive_stations(c)
    n = len(view.stations)
    home = {st.agent: st.index for st in view.stations}
    touched = set()
    for st in view.stations:
        if st.routes:
            touched.add(st.index)
        for route in st.routes:
            if route.recipient in home:
                touched.add(home[route.recipient])
    caps = {i: default_cap for i in range(1, n)}
    for i in touched:
        for slot in range(i - _BUFFER_RADIUS, i + _BUFFER_RADIUS):
            if 1 <= slot <= n - 1:
                caps[slot] = near_shared_cap
    return replace(c, buffers=tuple(sorted(caps.items())))


def _trigger_dict(ev: DisturbanceEvent) -> dict:
    return {
        "agent": ev.agent,
        "ops": list(ev.ops),
        "multiplier": round(ev.multiplier, 9),
        "onset": ev.onset,
        "line_impacting": ev.line_impacting,
    }


def _scale_graph(
    g: CapabilityGraph, agent: str, ops: Sequence[str], multiplier: float
) -> CapabilityGraph:
    for op in ops:
        model = operation_time(g, agent, op).scaled(multiplier)
        g = update_time_model(g, agent, op, model)
    return g


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


# ---------------------------------------------------------------- subcommands


def _cmd_init(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    c_t, c_z = _parse_weights(args.weights, 2)
    weights = Weights(c_t, c_z)
    sol = solve_init(build_init_problem(g, weights))
    _ensure_parent(args.out)
    save_config(sol.to_configuration(), args.out)
    _write_json(_stats_path(args.out), _solution_stats(sol, weights))
    print(
        f"objective {sol.objective:.6f}  bottleneck {sol.bottleneck:.4f} s  "
        f"agents {sol.agents_used}  -> {args.out}"
    )
    return _EXIT_OK


def _cmd_pareto(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    grid = _parse_grid(args.grid)
    p = build_init_problem(g, Weights(0.5, 0.5))
    points = sweep_pareto(p, grid, dedup=False)
    _ensure_parent(args.out)
    with open(args.out, "w") as fh:
        fh.write("c_t,bottleneck_s,agents\n")
        for pt in points:
            fh.write(f"{pt.c_t:.10g},{pt.bottleneck:.6f},{pt.agents_used}\n")
    print(f"{len(points)} grid points -> {args.out}")
    return _EXIT_OK


def _cmd_monitor(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    cfg = load_config(args.config)
    rows = read_sample_log(args.samples)
    state = build_monitor(g, cfg, k=args.threshold, window=args.window)
    replay_samples(state, rows)
    triggers = agent_triggers(state)

    os.makedirs(args.out, exist_ok=True)
    written = []
    for i, ev in enumerate(triggers, start=1):
        path = os.path.join(args.out, f"trigger_{i:02d}_{_safe_name(ev.agent)}.json")
        _write_json(path, _trigger_dict(ev))
        written.append(path)

    # Refresh the time models we can estimate; pairs with too few post-onset
    # samples keep their baseline.
    updated = g
    for ev in triggers:
        for op in ev.ops:
            try:
                model = update_time_model_from_stream(state, ev.agent, op)
            except InsufficientSamples:
                continue
            updated = update_time_model(updated, ev.agent, op, model)
    graph_path = os.path.join(args.out, "graph.updated.json")
    save_graph(updated, graph_path)

    impacting = sum(1 for ev in triggers if ev.line_impacting)
    print(
        f"{len(rows)} samples, {len(triggers)} trigger(s) "
        f"({impacting} line-impacting) -> {args.out}"
    )
    for path in written:
        print(f"  {path}")
    return _EXIT_OK


def _cmd_reconfigure(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    cfg = load_config(args.config)
    trig = _read_json(args.trigger)
    try:
        agent = str(trig["agent"])
        multiplier = float(trig["multiplier"])
    except KeyError as e:
        raise ParseError(f"trigger file is missing field {e}") from None
    ops = [str(op) for op in trig.get("ops", [])]

    disturbed = _scale_graph(g, agent, ops, multiplier) if multiplier != 1.0 else g

    os.makedirs(args.out_dir, exist_ok=True)
    by_mode: Dict[str, Tuple[Solution, Weights, List[str]]] = {}
    for text in args.weights:
        c_t, c_z, c_x = _parse_weights(text, 3)
        weights = Weights(c_t, c_z, c_x)
        problem = build_reconfig_problem(
            disturbed, cfg, agent, weights, allow_sharing=not args.no_sharing
        )
        sol = solve_reconfig(problem)
        scoped = [problem.operations[j] for j in sorted(problem.scoped_ops)]
        by_mode.setdefault(sol.mode or "plan", (sol, weights, scoped))

    for mode, (sol, weights, scoped) in sorted(by_mode.items()):
        path = os.path.join(args.out_dir, f"reconfig_{mode}.json")
        if sol.adjustment <= 1e-9:
            save_config(cfg, path)  # unchanged plan: echo the input configuration
        else:
            candidate = _apply_buffer_policy(sol.to_configuration(scoped=scoped))
            save_config(candidate, path)
        _write_json(_stats_path(path), _solution_stats(sol, weights))
        print(
            f"{mode}: objective {sol.objective:.6f}  bottleneck {sol.bottleneck:.4f} s"
            f"  agents {sol.agents_used}  -> {path}"
        )
    return _EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    cfg = load_config(args.config)
    scenarios = tuple(_parse_disturbance(text) for text in args.disturb)
    horizon = args.hours * 3600.0
    model = build_sim(cfg, g, scenarios, horizon, args.seed)
    reports, aggregate = replicate(model, args.reps)
    _write_json(
        args.out,
        {
            "horizon_s": horizon,
            "seed": args.seed,
            "replications": args.reps,
            "aggregate": {
                name: {"mean": round(mean, 6), "sd": round(sd, 6)}
                for name, (mean, sd) in sorted(aggregate.items())
            },
            "reports": [report_to_dict(r) for r in reports],
        },
    )
    if args.trace:
        traced = run(model, collect_events=True)  # same seed as replication 0
        stem, ext = os.path.splitext(args.out)
        trace_path = (stem if ext == ".json" else args.out) + ".trace.csv"
        with open(trace_path, "w") as fh:
            fh.write("time_s,kind,station,part,agent\n")
            for ev in traced.events or ():
                fh.write(f"{ev.time:.9f},{ev.kind},{ev.station},{ev.part},{ev.agent}\n")
        print(f"trace -> {trace_path}")
    mean_tp = aggregate["throughput"][0]
    print(
        f"{args.reps} replication(s), mean throughput {mean_tp:.1f} parts"
        f"  -> {args.out}"
    )
    return _EXIT_OK


def _scenario_paths(data: dict, base_dir: str, key: str) -> str:
    try:
        rel = data[key]
    except KeyError:
        raise ParseError(f"scenario file is missing field {key!r}") from None
    path = str(rel)
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def _cmd_run_scenario(args: argparse.Namespace) -> int:
    stage = "load-scenario"
    try:
        data = _read_json(args.scenario)
        base_dir = os.path.dirname(os.path.abspath(args.scenario))
        graph = load_graph(_scenario_paths(data, base_dir, "graph"))
        weight_sets = [tuple(float(v) for v in w) for w in data.get("weight_sets", [])]
        if not weight_sets:
            raise ParseError("scenario file needs at least one weight set")
        if any(len(w) != 2 for w in weight_sets):
            raise ParseError("weight sets must be [c_t, c_z] pairs")
        policy_data = data.get("policy") or {}
        policy = SelectionPolicy(
            min_throughput=policy_data.get("min_throughput"),
            max_agents=policy_data.get("max_agents"),
        )
        buffers = data.get("buffers") or {}
        default_cap = int(buffers.get("default", _BUFFER_DEFAULT))
        shared_cap = int(buffers.get("near_shared", _BUFFER_NEAR_SHARED))
        horizon = float(data.get("horizon_s", 57600.0))
        seed = int(data.get("seed", 0))
        reps = int(data.get("replications", 1))
        os.makedirs(args.out_dir, exist_ok=True)

        stage = "init"
        if data.get("config"):
            cfg = load_config(_scenario_paths(data, base_dir, "config"))
        else:
            sol0 = solve_init(build_init_problem(graph, Weights(*weight_sets[0])))
            cfg = _uniform_buffers(sol0.to_configuration(), default_cap)

        stage = "monitor"
        rows = read_sample_log(_scenario_paths(data, base_dir, "samples"))
        state = build_monitor(graph, cfg)
        replay_samples(state, rows)
        triggers = [ev for ev in agent_triggers(state) if ev.line_impacting]

        summary: List[Tuple[str, int, float, float]] = []
        base_agents = len(cfg.agents_used())

        stage = "simulate"
        _, agg0 = replicate(build_sim(cfg, graph, (), horizon, seed), reps)
        summary.append(("original", base_agents, bottleneck_time(cfg, graph), agg0["throughput"][0]))

        if not triggers:
            decision = {
                "chosen": "original",
                "reason": "no line-impacting disturbance detected",
                "triggers": [],
                "candidates": [],
            }
            _finish_scenario(args.out_dir, decision, summary)
            print("no line-impacting disturbance; keeping the original configuration")
            return _EXIT_OK

        trig = min(triggers, key=lambda ev: (ev.onset, ev.agent))

        stage = "reconfigure"
        estimates: Dict[str, float] = {}
        disturbed_view = graph
        for op in trig.ops:
            try:
                model = update_time_model_from_stream(state, trig.agent, op)
                estimates[op] = round(estimated_multiplier(state, trig.agent, op), 9)
            except InsufficientSamples:
                model = operation_time(graph, trig.agent, op).scaled(trig.multiplier)
                estimates[op] = round(trig.multiplier, 9)
            disturbed_view = update_time_model(disturbed_view, trig.agent, op, model)

        candidates: List[Tuple[str, Solution, LineConfiguration, Tuple[float, float]]] = []
        for c_t, c_z in weight_sets:
            problem = build_reconfig_problem(disturbed_view, cfg, trig.agent, Weights(c_t, c_z))
            sol = solve_reconfig(problem)
            mode = sol.mode or "plan"
            if any(label == f"{mode}_switch" for label, *_ in candidates):
                continue
            scoped = [problem.operations[j] for j in sorted(problem.scoped_ops)]
            candidate = _apply_buffer_policy(
                sol.to_configuration(scoped=scoped), default_cap, shared_cap
            )
            candidates.append((f"{mode}_switch", sol, candidate, (c_t, c_z)))

        stage = "simulate"
        disturbances = tuple(
            DisturbanceScenario(trig.agent, estimates[op], 0.0, frozenset({op}))
            for op in sorted(estimates)
        )
        nr_reports, agg_nr = replicate(build_sim(cfg, graph, disturbances, horizon, seed), reps)
        summary.append(
            ("no_reconfiguration", base_agents, bottleneck_time(cfg, disturbed_view), agg_nr["throughput"][0])
        )

        sim_results = []
        for label, sol, candidate, weights in candidates:
            reports, agg = replicate(build_sim(candidate, graph, disturbances, horizon, seed), reps)
            sim_results.append((label, sol, candidate, weights, reports, agg))
            summary.append((label, sol.agents_used, sol.bottleneck, agg["throughput"][0]))

        stage = "select"
        pool = [(sol, results[0]) for _, sol, _, _, results, _ in sim_results]
        spread = [
            (agg["throughput"][0], agg["throughput"][1] / max(reps, 1) ** 0.5)
            for *_, agg in sim_results
        ]
        result = select(pool, policy, spread)
        chosen_label = sim_results[result.chosen][0]

        stage = "report"
        candidate_blocks = []
        for i, (label, sol, candidate, weights, reports, agg) in enumerate(sim_results):
            path = os.path.join(args.out_dir, f"candidate_{label}.json")
            save_config(candidate, path)
            welch = compare_reports(nr_reports[0], reports[0])
            candidate_blocks.append(
                {
                    "label": label,
                    "mode": sol.mode,
                    "weights": list(weights),
                    "config": os.path.basename(path),
                    "agents": sol.agents_used,
                    "bottleneck_s": round(sol.bottleneck, 6),
                    "objective": round(sol.objective, 9),
                    "throughput_mean": round(agg["throughput"][0], 3),
                    "throughput_sd": round(agg["throughput"][1], 3),
                    "welch_p_vs_no_reconfiguration": welch.p_value,
                }
            )
        decision = {
            "chosen": chosen_label,
            "trigger": _trigger_dict(trig),
            "estimated_multipliers": estimates,
            "candidates": candidate_blocks,
            "selection": result.to_dict(),
        }
        _finish_scenario(args.out_dir, decision, summary)
        print(
            f"trigger on {trig.agent} (x{trig.multiplier:.3f}); "
            f"{len(sim_results)} candidate(s); chosen {chosen_label}"
        )
        return _EXIT_OK
    except FlexlineError as e:
        raise type(e)(f"stage {stage}: {e}") from None
    except (OSError, ValueError, KeyError) as e:
        raise ParseError(f"stage {stage}: {e}") from None


def _finish_scenario(
    out_dir: str, decision: dict, summary: List[Tuple[str, int, float, float]]
) -> None:
    _write_json(os.path.join(out_dir, "decision.json"), decision)
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write("config,agents,bottleneck_s,throughput\n")
        for label, agents, bottleneck, throughput in summary:
            fh.write(f"{label},{agents},{bottleneck:.4f},{throughput:.1f}\n")


# -------------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexline",
        description="Plan, monitor, reconfigure, and simulate manufacturing lines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="solve the full assignment problem")
    p.add_argument("--graph", required=True, help="capability graph JSON")
    p.add_argument("--weights", required=True, help="c_t,c_z")
    p.add_argument("--out", required=True, help="configuration file to write")
    p.set_defaults(func=_cmd_init)

    p = sub.add_parser("pareto", help="sweep the time/agent-count trade-off")
    p.add_argument("--graph", required=True)
    p.add_argument("--grid", default="0:1:0.05", help="c_t grid start:stop:step")
    p.add_argument("--out", required=True, help="CSV file to write")
    p.set_defaults(func=_cmd_pareto)

    p = sub.add_parser("monitor", help="replay a sample log and detect disturbances")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--samples", required=True, help="timestamp_s,agent,op,duration_s CSV")
    p.add_argument("--out", required=True, help="directory for triggers and updated graph")
    p.add_argument("--threshold", type=float, default=3.0, help="sigma threshold k")
    p.add_argument("--window", type=int, default=10, help="rolling window size")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("reconfigure", help="re-optimize around a triggered agent")
    p.add_argument("--graph", required=True, help="graph with baseline times")
    p.add_argument("--config", required=True, help="running configuration")
    p.add_argument("--trigger", required=True, help="trigger JSON from monitor")
    p.add_argument(
        "--weights",
        action="append",
        required=True,
        help="c_t,c_z,c_x (repeat to explore several weightings)",
    )
    p.add_argument("--no-sharing", action="store_true", help="forbid fractional splits")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_reconfigure)

    p = sub.add_parser("simulate", help="discrete-event evaluation of a configuration")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True)
    p.add_argument(
        "--disturb",
        action="append",
        default=[],
        help="agent:multiplier:onset_s (repeatable)",
    )
    p.add_argument("--hours", type=float, default=16.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out", required=True, help="report JSON to write")
    p.add_argument("--trace", action="store_true", help="also write an event trace CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("run-scenario", help="monitor, reconfigure, simulate, select")
    p.add_argument("--scenario", required=True, help="scenario bundle JSON")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run_scenario)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (Infeasible, NoFeasibleCandidate) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return _EXIT_INFEASIBLE
    except (NumericalFailure, HitNodeLimit) as e:
        print(f"internal: {e}", file=sys.stderr)
        return _EXIT_INTERNAL
    except FlexlineError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_INPUT
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_INPUT
    except Exception as e:  # noqa: BLE001  anything else is an invariant breach
        print(f"internal: {type(e).__name__}: {e}", file=sys.stderr)
        return _EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
