"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Tolerances are pinned here and nowhere else; runtime budgets are asserted
alongside the numerical checks.
"""
import time

import numpy as np
import pytest

from railtrace import autodiff as ad
from railtrace import evalharness as ev
from railtrace.explain import LMClient, StubTransport, stub_completion
from railtrace.optimize import (
    OptimizerConfig,
    free_loss_fn,
    run_optimization,
)
from railtrace.scenario import (
    PhysicsParams,
    decode_scenario,
    encode_scenario,
    generate_scenario,
)
from railtrace.simulator import load_fixture, simulate
from railtrace.trace import (
    BIN_LABELS,
    COMPASS_NAMES,
    Bin,
    InfluenceEvent,
    bin_magnitude,
    compass16,
    extract_events,
    format_change_at,
    format_reward_line,
    format_update_line,
    render_trace,
    trace_to_jsonl,
)

from test_evalharness import dominant_scenario


def report(name: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


PHYS = PhysicsParams()  # a_base 5.0, mu_fric 0.2, mu_air 0.5, v0 1.0


class TestReferenceTable:
    def test_acceleration_law(self):
        t0 = time.time()
        fx = load_fixture()
        v_prev = PHYS.v0
        ok = True
        worst = 0.0
        for i in range(25):
            law = PHYS.a_base * np.exp(-PHYS.kappa_gain * fx["curvature"][i]) - PHYS.mu_fric - PHYS.mu_air * v_prev**2
            if i < 7:
                worst = max(worst, abs(law - fx["acceleration"][i]))
                ok &= abs(law - fx["acceleration"][i]) < 2e-3
            else:
                ok &= law >= fx["acceleration"][i] - 2e-3
            v_prev = fx["velocity"][i]
        elapsed = time.time() - t0
        report(
            "Reference step-table acceleration law (rows 1-7 within 2e-3; 8-25 one-sided)",
            ok and elapsed < 1.0,
            f"max |err| rows 1-7 = {worst:.2e}, runtime {elapsed:.3f}s",
        )

    def test_drag_law(self):
        fx = load_fixture()
        v_prev = PHYS.v0
        worst = 0.0
        for i in range(25):
            worst = max(worst, abs(PHYS.mu_air * v_prev**2 - fx["air_resistance"][i]))
            v_prev = fx["velocity"][i]
        report("Reference step-table drag law (mu_air * v^2 within 1e-3, 25 rows)", worst < 1e-3, f"max |err| = {worst:.2e}")

    def test_velocity_recurrence(self):
        fx = load_fixture()
        v_prev, t_prev = PHYS.v0, 0.0
        worst = 0.0
        for i in range(25):
            v_pred = v_prev + fx["acceleration"][i] * (fx["time"][i] - t_prev)
            worst = max(worst, abs(v_pred - fx["velocity"][i]))
            v_prev, t_prev = fx["velocity"][i], fx["time"][i]
        report("Reference step-table velocity recurrence (within 5e-3, 25 rows)", worst < 5e-3, f"max |err| = {worst:.2e}")


class TestGradientFidelity:
    def test_ten_obstacle_free_cubics(self):
        t0 = time.time()
        worst = 0.0
        for seed in range(10):
            scenario = generate_scenario(seed, 0, 4)  # cubic, N=100, no obstacles
            f = free_loss_fn(scenario, OptimizerConfig(exponent=1))
            free = scenario.ctrl_points[1:-1].reshape(-1)
            rep = ad.check_gradient(f, free, h=1e-5)
            worst = max(worst, rep.max_rel_error)
        elapsed = time.time() - t0
        report(
            "Gradient fidelity (10 seeds, componentwise rel err < 1e-4)",
            worst < 1e-4 and elapsed < 30.0,
            f"worst rel err = {worst:.2e}, runtime {elapsed:.1f}s",
        )


class TestOptimizationProgress:
    def test_twenty_seeds_reference_settings(self):
        t0 = time.time()
        cfg = OptimizerConfig(kind="adam", lr0=5e-3, steps=250, schedule="cosine", exponent=1)
        improved = 0
        time_savings, cost_savings = [], []
        for seed in range(20):
            run = run_optimization(generate_scenario(seed, 20, 16), cfg)
            first, last = run.signals.rewards[0], run.signals.rewards[-1]
            improved += last.total < first.total
            time_savings.append((first.time - last.time) / first.time)
            cost_savings.append((first.cost - last.cost) / first.cost)
        elapsed = time.time() - t0
        ok = improved >= 18 and np.mean(time_savings) > 0 and np.mean(cost_savings) > 0 and elapsed < 600
        report(
            "Optimization progress (>=90% of 20 seeds improve; mean savings > 0)",
            ok,
            f"improved {improved}/20, mean time {np.mean(time_savings):+.3f}, "
            f"mean cost {np.mean(cost_savings):+.3f}, runtime {elapsed:.0f}s",
        )


class TestTraceDeterminismAndShape:
    def test_byte_identity_and_block_counts(self):
        cfg = OptimizerConfig(steps=250, event_rate=10, update_rate=5)
        scenario = generate_scenario(7, 20, 16)
        doc1 = render_trace(run_optimization(scenario, cfg))
        doc2 = render_trace(run_optimization(scenario, cfg))
        identical = trace_to_jsonl(doc1) == trace_to_jsonl(doc2)

        blocks_per_iter = {}
        for rec in doc1:
            if rec.kind == "event" and "block" in rec.line.payload:
                blocks_per_iter.setdefault(rec.iter, set()).add(rec.line.payload["block"])
        ten_blocks = set(len(v) for v in blocks_per_iter.values()) == {10}
        covers_all = len(blocks_per_iter) == 251
        update_iters = {rec.iter for rec in doc1 if rec.kind == "update"}
        fifty_updates = len(update_iters) == 50

        report(
            "Trace determinism and shape (byte-identical; 10 event blocks/iter; 50 update blocks)",
            identical and ten_blocks and covers_all and fifty_updates,
            f"identical={identical}, blocks/iter ok={ten_blocks}, update blocks={len(update_iters)}",
        )


class TestPhiFormatting:
    def test_golden_lines_byte_exact(self):
        event = format_change_at("acceleration", Bin("small", "positive"), (10, 20))
        reward = format_reward_line("time", Bin("very large", "negative"))
        update = format_update_line(1, Bin("very small", "positive"), "ESE", "ctx", "ctx")
        ok = (
            event == "Change in acceleration: small (positive), at grid position (10, 20)"
            and reward == "Change in time: very large (negative)"
            and "Magnitude: very small (ESE)" in update
        )
        report("Phi formatting conformance (three golden strings byte-exact)", ok)


class TestDiscriminationHarness:
    def test_oracle_and_random_stub(self):
        t0 = time.time()
        ok_grid = ev.SIGMA_GRID == (0.02, 0.06, 0.1, 0.15, 0.2)
        cfg = OptimizerConfig(steps=60)
        all_tasks = []
        for i in range(10):
            scenario = generate_scenario(3000 + i, 12, 12)
            run = run_optimization(scenario, cfg)
            all_tasks.extend(
                ev.discrimination_suite(
                    scenario, run.theta_history[-1], sigmas=ev.SIGMA_GRID,
                    distractor_seeds=(0, 1), order_seeds=(0, 1),
                    mode="numerical", instance_id=f"acc{i}",
                )
            )
        high_noise = [t for t in all_tasks if t.sigma >= 0.06]
        oracle_report = ev.run_discrimination(high_noise, chooser=ev.numerical_oracle)
        random_report = ev.run_discrimination(all_tasks, chooser=ev.random_chooser(seed=11))
        elapsed = time.time() - t0
        ok = (
            ok_grid
            and oracle_report.accuracy == 1.0
            and len(random_report.scored) >= 200
            and abs(random_report.accuracy - 0.5) <= 0.1
            and elapsed < 300
        )
        report(
            "Discrimination harness (oracle 1.0 for sigma>=0.06; random 0.5 +/- 0.1 over >=200)",
            ok,
            f"oracle {oracle_report.accuracy:.3f} on {len(high_noise)}, "
            f"random {random_report.accuracy:.3f} on {len(random_report.scored)}, runtime {elapsed:.0f}s",
        )


class TestQaHarness:
    def test_dominant_truth_and_stub_accuracies(self):
        fast = OptimizerConfig(steps=8, update_rate=2)
        s = dominant_scenario()
        dominant_ok = all(
            ev.qa_ground_truth(s, (phase, metric), fast) == "big wall"
            for phase in ("initial", "optimized")
            for metric in ("time", "cost")
        )

        # echo stub on the dominant scenario: accuracy 1.0
        options = [o.nickname for o in s.obstacles]
        echo_tasks = [
            ev.QATask(
                scenario=s, question_kind=(phase, metric), options=options,
                ground_truth="big wall", description_type="full",
                description_text="(desc)", initial_events_text="(events)",
                task_id=f"dom-{phase}-{metric}",
            )
            for phase in ("initial", "optimized")
            for metric in ("time", "cost")
        ]
        echo = LMClient(
            StubTransport(fn=lambda m: stub_completion(reasoning="r", answer="big wall")),
            max_concurrency=1,
        )
        echo_report = ev.run_qa(echo_tasks, echo)

        # uniform stub over 12 options: accuracy within binomial 3 sigma of 1/12
        uniform_tasks = []
        for i in range(10):
            scn = generate_scenario(4000 + i, 12, 8)
            opts = [o.nickname for o in scn.obstacles]
            for metric in ("time", "cost"):
                truth = ev.qa_ground_truth(scn, ("initial", metric))
                uniform_tasks.append(
                    ev.QATask(
                        scenario=scn, question_kind=("initial", metric), options=opts,
                        ground_truth=truth, description_type="full",
                        description_text="(desc)", initial_events_text="(events)",
                        task_id=f"u{i}-{metric}",
                    )
                )
        uniform_tasks = uniform_tasks * 10  # 200 draws
        rng = np.random.default_rng(5)
        answers = iter([str(rng.choice(t.options)) for t in uniform_tasks])
        uniform = LMClient(
            StubTransport(fn=lambda m: stub_completion(reasoning="r", answer=next(answers))),
            max_concurrency=1,
        )
        uniform_report = ev.run_qa(uniform_tasks, uniform)
        n = len(uniform_tasks)
        p = 1 / 12
        three_sigma = 3 * np.sqrt(p * (1 - p) / n)
        ok = (
            dominant_ok
            and echo_report.accuracy == 1.0
            and abs(uniform_report.accuracy - p) <= three_sigma
        )
        report(
            "QA harness (dominant truth all kinds; echo 1.0; uniform 1/12 +/- 3 sigma)",
            ok,
            f"echo {echo_report.accuracy:.2f}, uniform {uniform_report.accuracy:.3f} "
            f"(chance {p:.3f} +/- {three_sigma:.3f}, n={n})",
        )


class TestPropertySuites:
    def test_bin_properties_thousand_cases(self):
        rng = np.random.default_rng(17)
        ok = True
        for _ in range(1000):
            delta = rng.normal() * rng.uniform(0.01, 5)
            avg = abs(rng.normal()) + 1e-3
            c = rng.uniform(1e-3, 1e3)
            b = bin_magnitude(delta, avg)
            ok &= b.label == bin_magnitude(c * delta, c * avg).label
            smaller = bin_magnitude(delta * rng.uniform(0, 1), avg)
            ok &= BIN_LABELS.index(smaller.label) <= BIN_LABELS.index(b.label)
        report("Property: bin monotonicity and scale invariance (1000 cases)", ok)

    def test_compass_rotation_property(self):
        rng = np.random.default_rng(23)
        ok = True
        for _ in range(500):
            sector = rng.integers(0, 16)
            frac = rng.uniform(0.02, 0.98)
            deg = sector * 22.5 - 11.25 + frac * 22.5
            v = (np.cos(np.radians(deg)), np.sin(np.radians(deg)))
            r = np.radians(22.5)
            rot = (v[0] * np.cos(r) - v[1] * np.sin(r), v[0] * np.sin(r) + v[1] * np.cos(r))
            ok &= COMPASS_NAMES.index(compass16(rot)) == (COMPASS_NAMES.index(compass16(v)) + 1) % 16
        report("Property: compass 16-sector rotation", ok)

    def test_codec_round_trip_hundred(self):
        ok = True
        for seed in range(100):
            s = generate_scenario(seed, seed % 21, 2 + seed % 15)
            data = encode_scenario(s)
            ok &= encode_scenario(decode_scenario(data)) == data
        report("Property: codec round-trip (100 random scenarios)", ok)

    def test_influence_balance_fifty(self):
        ok = True
        for seed in range(50):
            s = generate_scenario(seed, 10, 8)
            raw = extract_events(simulate(s.ctrl_points, s).detach(), 10)
            per: dict[str, list[bool]] = {}
            for e in raw:
                if isinstance(e, InfluenceEvent):
                    per.setdefault(e.nickname, []).append(e.entered)
            for seq in per.values():
                ok &= len(seq) % 2 == 0
                ok &= all(seq[i] == (i % 2 == 0) for i in range(len(seq)))
        report("Property: influence entry/exit alternate and balance (50 simulations)", ok)
