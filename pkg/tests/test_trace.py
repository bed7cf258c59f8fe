import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railtrace.optimize import OptimizerConfig, run_optimization
from railtrace.scenario import generate_scenario
from railtrace.simulator import simulate
from railtrace.trace import (
    BIN_LABELS,
    Bin,
    InfluenceEvent,
    bin_magnitude,
    compass16,
    extract_events,
    format_change_at,
    phi_e,
    phi_r,
    phi_u,
    render_line_from_payload,
    render_trace,
    reward_run_avgs,
    RewardTuple,
    trace_from_jsonl,
    trace_plain_text,
    trace_to_jsonl,
)

from conftest import make_scenario, obstacle, straight_scenario


class TestBins:
    def test_zero_delta(self):
        assert bin_magnitude(0.0, 1.0) == Bin("no change", "none")

    def test_edges(self):
        assert bin_magnitude(2.0, 1.0) == Bin("large", "positive")
        assert bin_magnitude(-0.1, 1.0) == Bin("very small", "negative")
        assert bin_magnitude(0.5, 1.0) == Bin("small", "positive")
        assert bin_magnitude(1.0, 1.0) == Bin("medium", "positive")
        assert bin_magnitude(5.0, 1.0) == Bin("very large", "positive")

    def test_sign_invariant(self):
        with pytest.raises(ValueError):
            Bin("no change", "positive")
        with pytest.raises(ValueError):
            Bin("small", "none")

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.01, 10))
    @settings(max_examples=200)
    def test_monotone_in_magnitude(self, d1, d2, avg):
        if abs(d1) > abs(d2):
            d1, d2 = d2, d1
        i1 = BIN_LABELS.index(bin_magnitude(d1, avg).label)
        i2 = BIN_LABELS.index(bin_magnitude(d2, avg).label)
        assert i1 <= i2

    @given(st.floats(-10, 10), st.floats(0.01, 10), st.floats(0.001, 100))
    @settings(max_examples=200)
    def test_scale_invariance(self, delta, avg, c):
        assert bin_magnitude(delta, avg).label == bin_magnitude(c * delta, c * avg).label

    def test_thousand_random_cases_for_both_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            delta = rng.normal() * 3
            avg = abs(rng.normal()) + 0.01
            c = rng.uniform(0.01, 50)
            b = bin_magnitude(delta, avg)
            assert b.label == bin_magnitude(c * delta, c * avg).label
            smaller = bin_magnitude(delta * 0.5, avg)
            assert BIN_LABELS.index(smaller.label) <= BIN_LABELS.index(b.label)


class TestCompass:
    def test_cardinals(self):
        assert compass16((1, 0)) == "E"
        assert compass16((0, 1)) == "N"
        assert compass16((-1, 0)) == "W"
        assert compass16((0, -1)) == "S"

    def test_ese_sector(self):
        assert compass16((0.9, -0.35)) == "ESE"

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            compass16((0.0, 0.0))

    @given(st.integers(0, 15), st.floats(0.01, 0.95))
    @settings(max_examples=200)
    def test_rotation_advances_one_name(self, sector, frac):
        from railtrace.trace import COMPASS_NAMES

        # angle strictly inside a sector, then rotate by exactly 22.5 degrees
        deg = sector * 22.5 - 11.25 + frac * 22.5
        v = (math.cos(math.radians(deg)), math.sin(math.radians(deg)))
        r = math.radians(22.5)
        rotated = (
            v[0] * math.cos(r) - v[1] * math.sin(r),
            v[0] * math.sin(r) + v[1] * math.cos(r),
        )
        i = COMPASS_NAMES.index(compass16(v))
        j = COMPASS_NAMES.index(compass16(rotated))
        assert j == (i + 1) % 16


class TestPhiE:
    def test_block_counts_default_rates(self):
        s = generate_scenario(5, 8, 8)
        result = simulate(s.ctrl_points, s).detach()
        lines = phi_e(result, 10)
        blocks = {l.payload["block"] for l in lines if "block" in l.payload}
        assert len(blocks) == 10
        channel_lines = [l for l in lines if "block" in l.payload]
        assert len(channel_lines) == 50  # 10 blocks x 5 channels

    def test_block_text_shape(self):
        s = generate_scenario(5, 8, 8)
        result = simulate(s.ctrl_points, s).detach()
        line = phi_e(result, 10)[0]
        b = line.payload
        gx, gy = b["start_grid"]
        assert line.text.startswith(f"({gx},{gy}) → ")
        assert "Change in speed: " in line.text

    def test_golden_event_format(self):
        got = format_change_at("acceleration", Bin("small", "positive"), (10, 20))
        assert got == "Change in acceleration: small (positive), at grid position (10, 20)"

    def test_constant_motion_all_no_change(self, flat_cost_field):
        # zero curvature and flat cost, with force balance at the initial speed:
        # a_base*exp(0) = mu_fric + mu_air v^2 -> all channels stay constant
        from railtrace.scenario import PhysicsParams

        phys = PhysicsParams(a_base=0.7, mu_fric=0.2, mu_air=0.5, v0=1.0)
        s = straight_scenario(cost_field=flat_cost_field, physics=phys)
        result = simulate(s.ctrl_points, s).detach()
        lines = phi_e(result, 10)
        for line in lines:
            assert "no change" in line.text, line.text

    def test_influence_entry_exit_balance(self):
        o = obstacle(center=(0.5, 0.5), radius=0.06)
        s = make_scenario([[0.05, 0.05], [0.95, 0.95]], obstacles=[o])
        raw = extract_events(simulate(s.ctrl_points, s).detach(), 10)
        influences = [e for e in raw if isinstance(e, InfluenceEvent)]
        assert influences
        entries = [e for e in influences if e.entered]
        exits = [e for e in influences if not e.entered]
        assert len(entries) == len(exits) == 1
        assert entries[0].step < exits[0].step

    def test_balance_over_random_simulations(self):
        for seed in range(50):
            s = generate_scenario(seed, 8, 8)
            raw = extract_events(simulate(s.ctrl_points, s).detach(), 10)
            per_obstacle: dict[str, list[bool]] = {}
            for e in raw:
                if isinstance(e, InfluenceEvent):
                    per_obstacle.setdefault(e.nickname, []).append(e.entered)
            for nickname, seq in per_obstacle.items():
                assert len(seq) % 2 == 0, (seed, nickname)
                assert all(seq[i] == (i % 2 == 0) for i in range(len(seq))), (seed, nickname)


class TestPhiR:
    AVGS = {"time": 0.01, "cost": 0.01, "total": 0.02, "length": 0.005}

    def test_golden_reward_format(self):
        r_prev = RewardTuple(1.0, 1.0, 2.0, 1.4)
        r_k = RewardTuple(0.9, 0.95, 1.85, 1.38)
        lines = phi_r(r_k, r_prev, self.AVGS)
        assert lines[0].text == "Change in time: very large (negative)"
        assert [l.payload["metric"] for l in lines] == ["time", "cost", "total", "length"]

    def test_no_change(self):
        r = RewardTuple(1.0, 1.0, 2.0, 1.4)
        for line in phi_r(r, r, self.AVGS):
            assert line.text.endswith(": no change")

    def test_total_sign_matches_sum_for_p1(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            t0, c0 = rng.uniform(0.5, 2, 2)
            dt, dc = rng.normal(0, 0.05, 2)
            prev = RewardTuple(t0, c0, t0 + c0, 1.0)
            cur = RewardTuple(t0 + dt, c0 + dc, t0 + dt + c0 + dc, 1.0)
            lines = phi_r(cur, prev, self.AVGS)
            total_sign = lines[2].payload["sign"]
            expected = "positive" if dt + dc > 0 else "negative"
            if dt + dc != 0:
                assert total_sign == expected


class TestPhiU:
    def test_golden_magnitude_format(self):
        obstacles = [obstacle("small sandbox", center=(0.31, 0.3), radius=0.05)]
        theta_prev = np.array([[0.05, 0.05], [0.3, 0.3], [0.95, 0.95]])
        theta_k = theta_prev.copy()
        theta_k[1] += np.array([0.9e-4, -0.35e-4])  # ESE, tiny vs avg
        lines = phi_u(theta_k, theta_prev, obstacles, run_avg=1e-3)
        assert len(lines) == 1
        assert "Magnitude: very small (ESE)" in lines[0].text
        assert lines[0].text.startswith("Control point 1: Magnitude: very small (ESE).")
        assert "Previous position: small sandbox is close by." in lines[0].text
        assert "New position: small sandbox is close by." in lines[0].text

    def test_no_objects_nearest(self):
        obstacles = [obstacle("big pond", center=(0.9, 0.1), radius=0.02)]
        theta_prev = np.array([[0.05, 0.05], [0.3, 0.3], [0.95, 0.95]])
        theta_k = theta_prev.copy()
        theta_k[1] += 1e-3
        lines = phi_u(theta_k, theta_prev, obstacles, run_avg=1e-3)
        assert "No objects are close by, nearest is big pond" in lines[0].text

    def test_zero_delta_omits_direction(self):
        theta = np.array([[0.05, 0.05], [0.3, 0.3], [0.95, 0.95]])
        lines = phi_u(theta, theta, [], run_avg=1e-3)
        assert "Magnitude: no change." in lines[0].text
        assert "(" not in lines[0].text.split("Previous position")[0].replace("point 1", "")

    def test_one_line_per_free_point(self):
        theta = np.array([[0.0, 0.0], [0.2, 0.2], [0.4, 0.4], [0.6, 0.6], [1.0, 1.0]])
        lines = phi_u(theta, theta, [], run_avg=1.0)
        assert [l.payload["point"] for l in lines] == [1, 2, 3]


class TestRenderTrace:
    def make_run(self, steps=6, update_rate=2):
        cfg = OptimizerConfig(steps=steps, event_rate=10, update_rate=update_rate)
        return run_optimization(generate_scenario(4, 6, 6), cfg), cfg

    def test_byte_determinism(self):
        run1, _ = self.make_run()
        run2, _ = self.make_run()
        assert trace_to_jsonl(render_trace(run1)) == trace_to_jsonl(render_trace(run2))

    def test_update_blocks_every_rate(self):
        run, cfg = self.make_run(steps=6, update_rate=2)
        doc = render_trace(run)
        update_iters = sorted({r.iter for r in doc if r.kind == "update"})
        assert update_iters == [2, 4, 6]

    def test_iteration_zero_has_events_but_no_update(self):
        run, _ = self.make_run()
        doc = render_trace(run)
        kinds_at_zero = {r.kind for r in doc if r.iter == 0}
        assert kinds_at_zero == {"event"}

    def test_rerender_with_other_event_rate_rejected(self):
        run, _ = self.make_run()
        with pytest.raises(ValueError, match="recorded at rate"):
            render_trace(run, event_rate=5)

    def test_jsonl_round_trip_and_payload_regeneration(self):
        run, _ = self.make_run()
        doc = render_trace(run)
        data = trace_to_jsonl(doc)
        back = trace_from_jsonl(data)
        assert len(back) == len(doc)
        for rec in back:
            assert render_line_from_payload(rec.kind, rec.line.payload) == rec.line.text

    def test_plain_text_concatenates_in_order(self):
        run, _ = self.make_run()
        doc = render_trace(run)
        text = trace_plain_text(doc)
        assert text.splitlines()[0] == doc[0].line.text
        assert len(text.splitlines()) == len(doc)

    def test_reward_avgs_over_run(self):
        rewards = [RewardTuple(1, 1, 2, 1), RewardTuple(0.8, 1.1, 1.9, 1), RewardTuple(0.9, 1.0, 1.9, 1)]
        avgs = reward_run_avgs(rewards)
        assert avgs["time"] == pytest.approx((0.2 + 0.1) / 2)
        assert avgs["total"] == pytest.approx(0.05)
