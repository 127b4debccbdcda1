"""Acceptance gate: one test per shipped guarantee, one printed verdict each.

Run with -s (or read captured stdout) to see the ACCEPTANCE lines.
"""

from __future__ import annotations

import json
import random
import time

import numpy as np
import pytest

from flexline.capability_graph import operation_time
from flexline.cli import main as cli_main
from flexline.datasets import write_scenario_bundle
from flexline.errors import Infeasible, NoFeasibleCandidate
from flexline.line_model import LineConfiguration
from flexline.monitor import build_monitor, estimated_multiplier, ingest_sample
from flexline.optimizer import (
    Weights,
    brute_force_oracle,
    build_init_problem,
    solve_init,
    solve_reconfig,
    sweep_pareto,
)
from flexline.selector import SelectionPolicy, select
from flexline.simulator import build_sim, run

from .conftest import make_graph
from .support.checkers import run_count
from .support.generators import random_init_problem, random_reconfig_problem
from .test_optimizer_reconfig import battery_problem
from .test_selector import report as fake_report
from .test_selector import sol as fake_sol


def verdict(number: int, name: str, ok: bool) -> None:
    print(f"ACCEPTANCE {number} {name}: {'PASS' if ok else 'FAIL'}")


def test_criterion_1_oracle_exactness():
    t0 = time.perf_counter()
    rng = random.Random(20240817)
    worst_init = 0.0
    for _ in range(200):
        p = random_init_problem(rng, t_lo=1.0, t_hi=50.0)
        try:
            mine = solve_init(p)
        except Infeasible:
            with pytest.raises(Infeasible):
                brute_force_oracle(p)
            continue
        ref = brute_force_oracle(p)
        worst_init = max(worst_init, abs(mine.objective - ref.objective))

    lo = hi = 0.0
    done = 0
    while done < 100:
        p = random_reconfig_problem(rng, t_lo=1.0, t_hi=50.0)
        if p is None:
            continue
        done += 1
        try:
            mine = solve_reconfig(p)
        except Infeasible:
            with pytest.raises(Infeasible):
                brute_force_oracle(p)
            continue
        ref = brute_force_oracle(p)
        diff = mine.objective - ref.objective
        lo = min(lo, diff)
        hi = max(hi, diff)
    elapsed = time.perf_counter() - t0

    ok = worst_init <= 1e-6 and lo >= -1e-6 and hi <= 1e-4 and elapsed <= 60.0
    verdict(1, "oracle exactness", ok)
    assert worst_init <= 1e-6, f"init optimum off by {worst_init}"
    assert lo >= -1e-6 and hi <= 1e-4, f"reconfig diff range [{lo}, {hi}]"
    assert elapsed <= 60.0, f"took {elapsed:.1f} s"


def test_criterion_2_pareto_plateau(battery_graph):
    p = build_init_problem(battery_graph, Weights(0.5, 0.5))
    grid = [round(0.05 * i, 10) for i in range(21)]
    points = sweep_pareto(p, grid, dedup=False)
    plateau = [pt for pt in points if 0.4 - 1e-9 <= pt.c_t <= 0.85 + 1e-9]
    ok = len(plateau) == 10 and all(
        abs(pt.bottleneck - 43.9) <= 0.01 and pt.agents_used == 20 for pt in plateau
    )
    verdict(2, "pareto plateau 43.9 s / 20 agents on c_t 0.4-0.85", ok)
    assert ok, [(pt.c_t, pt.bottleneck, pt.agents_used) for pt in plateau]


def _scenario_rows(tmp_path, scenario: int):
    bundle = tmp_path / f"bundle{scenario}"
    scenario_path = write_scenario_bundle(str(bundle), scenario)
    out_dir = tmp_path / f"out{scenario}"
    rc = cli_main(["run-scenario", "--scenario", scenario_path, "--out-dir", str(out_dir)])
    assert rc == 0
    rows = {}
    lines = (out_dir / "summary.csv").read_text().strip().splitlines()
    assert lines[0] == "config,agents,bottleneck_s,throughput"
    for line in lines[1:]:
        label, agents, bottleneck, throughput = line.split(",")
        rows[label] = (int(agents), float(bottleneck), float(throughput))
    decision = json.loads((out_dir / "decision.json").read_text())
    return rows, decision


def test_criterion_3_scenario_table(tmp_path, battery_graph):
    rows1, dec1 = _scenario_rows(tmp_path, 1)
    rows2, dec2 = _scenario_rows(tmp_path, 2)

    checks = []

    def band(value, center, rel):
        checks.append(abs(value - center) <= rel * center)
        return checks[-1]

    # undisturbed original and the degraded do-nothing rows
    band(rows1["original"][2], 1295.0, 0.02)
    band(rows1["no_reconfiguration"][2], 962.0, 0.03)
    band(rows2["no_reconfiguration"][2], 480.0, 0.03)

    # +50%: rebalance within the running agent set
    agents, bneck, tp = rows1["plan_switch"]
    checks += [agents == 20, abs(bneck - 43.9) <= 0.5]
    band(tp, 1292.0, 0.02)

    # +200%: both reconfiguration modes materialize
    agents, bneck, tp = rows2["plan_switch"]
    checks += [agents == 20, abs(bneck - 48.8) <= 1.5]
    band(tp, 1161.0, 0.03)
    agents, bneck, tp = rows2["config_switch"]
    checks += [agents == 21, abs(bneck - 43.9) <= 0.5]
    band(tp, 1275.0, 0.02)

    p_values = [
        c["welch_p_vs_no_reconfiguration"] for c in dec1["candidates"] + dec2["candidates"]
    ]
    checks.append(bool(p_values) and all(p < 0.001 for p in p_values))

    ok = all(checks)
    verdict(3, "disturbance scenario table within bands", ok)
    assert ok, {"scenario1": rows1, "scenario2": rows2, "welch": p_values}


def test_criterion_4_solve_speed(battery_graph, battery_config):
    init_sol = solve_init(build_init_problem(battery_graph, Weights(0.6, 0.4)))
    reconfigs = [
        solve_reconfig(battery_problem(battery_graph, battery_config, 1.5, 0.6, 0.4)),
        solve_reconfig(battery_problem(battery_graph, battery_config, 3.0, 0.1, 0.9)),
        solve_reconfig(battery_problem(battery_graph, battery_config, 3.0, 0.7, 0.3)),
    ]
    worst = max(s.stats.seconds for s in reconfigs)
    ok = init_sol.stats.seconds <= 30.0 and worst <= 1.0
    verdict(4, "solve speed (init <= 30 s, reconfig <= 1 s)", ok)
    assert init_sol.stats.seconds <= 30.0, init_sol.stats
    assert worst <= 1.0, [s.stats for s in reconfigs]


def test_criterion_5_simulation_speed_and_determinism(battery_graph, battery_config):
    m = build_sim(battery_config, battery_graph, horizon=57600.0, seed=0)
    t0 = time.perf_counter()
    first = run(m)
    elapsed = time.perf_counter() - t0
    second = run(m)
    from flexline.simulator import report_to_dict

    identical = first == second and json.dumps(report_to_dict(first)) == json.dumps(
        report_to_dict(second)
    )
    ok = elapsed <= 144.0 and identical
    verdict(5, "16 h simulated <= 144 s wall, byte-identical reruns", ok)
    assert elapsed <= 144.0, f"16 h took {elapsed:.1f} s"
    assert identical


def test_criterion_6_deterministic_line_law(three_station_graph):
    config = LineConfiguration(
        operations=("OpA", "OpB", "OpC"),
        assignment={("A1", "OpA"): 1.0, ("A2", "OpB"): 1.0, ("A3", "OpC"): 1.0},
        buffers=((1, 100), (2, 100)),
    )
    r = run(build_sim(config, three_station_graph, horizon=10000.0, seed=0))
    expected = (10000 - 45) // 20
    ok = r.throughput == expected == 497
    verdict(6, "constant line throughput exactly 497", ok)
    assert ok, (r.throughput, expected)


def test_criterion_7_monitor_suite(battery_graph):
    base_model = operation_time(battery_graph, "Worker2", "Op19")

    # a noise-free stream at the published means must never trip the latch
    s = build_monitor(battery_graph, k=3.0)
    false_triggers = 0
    for i in range(10_000):
        _, ev = ingest_sample(s, "Worker2", "Op19", base_model.expected())
        if ev is not None:
            false_triggers += 1

    detected = quantified = 0
    for trial in range(100):
        rng = np.random.default_rng(1000 + trial)
        st = build_monitor(battery_graph, k=3.0)
        for _ in range(60):
            ingest_sample(st, "Worker2", "Op19", base_model.sample(rng))
        hit_at = None
        for i in range(1, 21):
            _, ev = ingest_sample(st, "Worker2", "Op19", 1.5 * base_model.sample(rng))
            if ev is not None:
                hit_at = i
                break
        if hit_at is None:
            continue
        detected += 1
        for _ in range(st.window):
            ingest_sample(st, "Worker2", "Op19", 1.5 * base_model.sample(rng))
        est = estimated_multiplier(st, "Worker2", "Op19")
        if abs(est - 1.5) <= 0.05 * 1.5:
            quantified += 1

    ok = false_triggers == 0 and detected >= 99 and quantified >= 90
    verdict(7, "monitor: 0 false triggers, detection 99/100, estimate 90/100", ok)
    assert false_triggers == 0
    assert detected >= 99, f"detected {detected}/100"
    assert quantified >= 90, f"quantified {quantified}/100"


def test_criterion_8_property_suites():
    counts = {}

    # column sums: every operation's assignment fractions total exactly one
    rng = random.Random(801)
    n = 0
    for _ in range(220):
        p = random_init_problem(rng)
        try:
            sol = solve_init(p)
        except Infeasible:
            continue
        n += 1
        per_op = [0.0] * len(p.operations)
        for (_, j), v in sol.assignment.items():
            per_op[j] += v
        assert all(abs(x - 1.0) <= 1e-6 for x in per_op), per_op
    counts["column sums"] = n

    # contiguity: each used agent covers one unbroken run in initialization
    rng = random.Random(802)
    n = 0
    for _ in range(220):
        p = random_init_problem(rng)
        try:
            sol = solve_init(p)
        except Infeasible:
            continue
        n += 1
        for agent in {a for (a, _), v in sol.assignment.items() if v > 1e-9}:
            pattern = [
                sol.assignment.get((agent, j), 0.0) > 1e-9
                for j in range(len(p.operations))
            ]
            assert run_count(pattern) == 1, (agent, pattern)
    counts["contiguity"] = n

    # scope locality: nothing outside the disturbance scope moves
    rng = random.Random(803)
    n = 0
    while n < 120:
        p = random_reconfig_problem(rng)
        if p is None:
            continue
        try:
            sol = solve_reconfig(p)
        except Infeasible:
            continue
        n += 1
        scoped = set(p.scoped_ops)
        for (agent, j), x0 in p.baseline.items():
            if j not in scoped:
                assert abs(sol.assignment.get((agent, j), 0.0) - x0) <= 1e-9
    counts["scope locality"] = n

    # part conservation on randomized stochastic lines
    ops = ("OpA", "OpB", "OpC")
    agents = {"A1": ["OpA"], "A2": ["OpB"], "A3": ["OpC"]}
    times = {
        ("A1", "OpA"): ("TruncNormal", 10.0, 2.0),
        ("A2", "OpB"): ("TruncNormal", 20.0, 4.0),
        ("A3", "OpC"): ("TruncNormal", 15.0, 3.0),
    }
    g = make_graph(ops, agents, times)
    c = LineConfiguration(
        operations=ops,
        assignment={("A1", "OpA"): 1.0, ("A2", "OpB"): 1.0, ("A3", "OpC"): 1.0},
    )
    rng = random.Random(804)
    for i in range(220):
        r = run(build_sim(c, g, horizon=rng.uniform(100.0, 800.0), seed=10_000 + i))
        assert r.parts_entered >= r.parts_departed >= 0
        assert r.wip == r.parts_entered - r.parts_departed
        assert r.throughput == max(0, r.parts_departed - 1)
    counts["part conservation"] = 220

    # selector permutation invariance
    rng = random.Random(805)
    policy = SelectionPolicy(min_throughput=60.0)
    for _ in range(250):
        k = rng.randint(2, 8)
        base = [
            (fake_sol(rng.randint(1, 9), rng.choice([0.0, 1.5, 4.0])), fake_report(rng.randint(50, 150)))
            for _ in range(k)
        ]
        order = list(range(k))
        rng.shuffle(order)
        shuffled = [base[i] for i in order]

        def outcome(cands):
            try:
                res = select(cands, policy)
                chosen = cands[res.chosen]
                return (chosen[0].agents_used, chosen[0].adjustment, chosen[1].throughput)
            except NoFeasibleCandidate:
                return None

        assert outcome(base) == outcome(shuffled)
    counts["selector permutation"] = 250

    total = sum(counts.values())
    ok = total >= 1000 and all(v > 0 for v in counts.values())
    verdict(8, f"property suites ({total} cases)", ok)
    assert ok, counts
