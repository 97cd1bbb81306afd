import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from danmakugen import metrics, simulation
from danmakugen.codec import ShotEvent
from danmakugen.simulation import SimConfig, SimTrace


def make_trace(l_emitted=64, t_shoot=1, t_total=1, momentum=None, covered=None,
               config=simulation.DEFAULT_CONFIG):
    if momentum is None:
        momentum = np.zeros(t_total)
    if covered is None:
        covered = np.zeros((config.grid_rows, config.grid_cols), dtype=bool)
    return SimTrace(l_emitted, t_shoot, t_total, np.asarray(momentum, dtype=float),
                    covered, config)


class TestShootingFrequency:
    def test_unit_gaps_give_sixty_four_over_sixty_three(self):
        events = [ShotEvent(0, 0, 0, math.pi / 2, 6.0, 0, 0, 4.0)]
        events += [ShotEvent(1, 0, 0, math.pi / 2, 6.0, 0, 0, 4.0) for _ in range(63)]
        trace = simulation.run_events(events)
        assert trace.t_shoot == 63
        assert metrics.shooting_frequency(trace) == pytest.approx(64 / 63)

    def test_all_simultaneous_shots_give_sixty_four(self):
        events = [ShotEvent(0, 0, 0, math.pi / 2, 6.0, 0, 0, 4.0) for _ in range(64)]
        trace = simulation.run_events(events)
        assert trace.t_shoot == 1
        assert metrics.shooting_frequency(trace) == 64.0

    def test_single_gap_of_sixty_four(self):
        trace = make_trace(l_emitted=64, t_shoot=64)
        assert metrics.shooting_frequency(trace) == 1.0


class TestMeanMomentum:
    def test_constant_single_bullet(self):
        trace = make_trace(t_total=50, momentum=np.full(50, 2.0))
        assert metrics.mean_momentum(trace) == pytest.approx(2.0)

    def test_no_bullets_is_zero(self):
        trace = make_trace(t_total=30)
        assert metrics.mean_momentum(trace) == 0.0

    def test_two_bullets_half_the_time_each(self):
        # (w=1,s=2) alive the first half, (w=2,s=1) the second: mean stays 2.0
        t = 40
        momentum = np.concatenate([np.full(t // 2, 1.0 * 2.0), np.full(t // 2, 2.0 * 1.0)])
        trace = make_trace(t_total=t, momentum=momentum)
        assert metrics.mean_momentum(trace) == pytest.approx((t / 2 * 2.0 + t / 2 * 2.0) / t)


class TestCoverage:
    def test_no_bullets_is_zero(self):
        assert metrics.coverage(make_trace()) == 0.0

    def test_small_disc_inside_one_cell(self):
        # radius-2 bullet parked at a cell center touches exactly that cell
        config = SimConfig(t_max=5)
        event = ShotEvent(0, 4.0, 4.0, 0.0, 0.0, 0.0, 0.0, 2.0)  # center (196, 124)
        trace = simulation.run_events([event], config)
        assert trace.covered_count() == 1
        assert metrics.coverage(trace) == pytest.approx(1 / 2688)
        # disc-rectangle oracle: distance from (196,124) to any other cell > 2
        cx, cy, r = 196.0, 124.0, 2.0
        touched = []
        for i in range(config.grid_rows):
            for j in range(config.grid_cols):
                nx = min(max(cx, j * 8), j * 8 + 8)
                ny = min(max(cy, i * 8), i * 8 + 8)
                if (nx - cx) ** 2 + (ny - cy) ** 2 <= r * r:
                    touched.append((i, j))
        assert touched == [(15, 24)]

    def test_full_screen_sweep_reaches_one(self):
        config = SimConfig(screen_w=16, screen_h=16, emitter=(8.0, 8.0), t_max=5)
        event = ShotEvent(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 16.0)
        trace = simulation.run_events([event], config)
        assert metrics.coverage(trace) == 1.0


class TestJsDivergence:
    def test_identical_samples_zero(self):
        values = [0.1, 0.4, 0.4, 0.9, 2.0]
        assert metrics.js_divergence(values, list(values)) == 0.0

    def test_disjoint_supports_close_to_ln2(self):
        a = list(np.linspace(0.0, 1.0, 30))
        b = list(np.linspace(5.0, 6.0, 30))
        js = metrics.js_divergence(a, b)
        assert math.log(2) - 1e-3 <= js <= math.log(2)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(5)
        a = rng.normal(0, 1, 30)
        b = rng.normal(1, 2, 30)
        assert metrics.js_divergence(a, b) == metrics.js_divergence(b, a)

    def test_degenerate_pooled_range_returns_zero(self):
        assert metrics.js_divergence([3.0, 3.0], [3.0, 3.0, 3.0]) == 0.0

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            metrics.js_divergence([], [1.0])

    @given(
        st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40),
        st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounded_by_ln2(self, a, b):
        js = metrics.js_divergence(a, b)
        assert 0.0 <= js <= math.log(2) + 1e-12


class TestReport:
    def test_report_is_pure_function_of_trace(self):
        rng = np.random.default_rng(17)
        seq = rng.uniform(0, 1, (64, 8))
        seq[0, 0] = 0.0
        t1 = simulation.run(seq)
        t2 = simulation.run(seq)
        assert metrics.report(t1) == metrics.report(t2)

    def test_report_dict_keys(self):
        rep = metrics.report(make_trace(t_total=10, momentum=np.ones(10)))
        assert set(rep.as_dict()) == {"sf", "mm", "cov"}


class TestComparePopulations:
    def test_rows_per_metric(self):
        real = {"sf": [1.0, 2.0], "mm": [3.0, 4.0], "cov": [0.1, 0.2]}
        gen = {"sf": [1.5], "mm": [3.5], "cov": [0.15]}
        rows = metrics.compare_populations(real, gen)
        assert [r["metric"] for r in rows] == ["sf", "mm", "cov"]
        assert all(r["n_a"] == 2 and r["n_b"] == 1 for r in rows)


class TestMetricSample:
    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            metrics.MetricSample("sf", [], "real")

    def test_fields(self):
        s = metrics.MetricSample("sf", [1.0, 2.0], "iteration-40")
        assert s.name == "sf" and s.label == "iteration-40" and len(s.values) == 2
