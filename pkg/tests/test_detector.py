import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphcusum.detector import (
    CalibrationError,
    CusumState,
    DegenerateBlockWarning,
    DetectorConfig,
    _advance,
    block_end_time,
    calibrate_c,
    cusum_step,
    cusum_trace,
    drift_statistic,
    first_alarm,
    iter_blocks,
    measure_run_lengths,
    renewal_run_lengths,
    run_detector,
)
from graphcusum.filtering import StreamConfig, dominant_subspace_of, synthesize_stream
from graphcusum.graphs import barabasi_albert, er_density, erdos_renyi, shift_operator
from graphcusum.subspace import SignalBlock, Subspace, SubspaceFamily, one_hot, sin_theta_distance

drift_lists = st.lists(st.floats(-1.0, 2.0, allow_nan=False), min_size=1, max_size=200)


def line_at(delta, n=2):
    """Unit vector whose sin-distance to e_0 is ``delta``."""
    v = np.zeros(n)
    v[0], v[1] = math.sqrt(1 - delta**2), delta
    return v


def constant_blocks(v, count, scale=1.0):
    return [SignalBlock(scale * v[None, :], i + 1) for i in range(count)]


@pytest.fixture(scope="module")
def er_ba_setting():
    n = 100
    S0 = shift_operator(erdos_renyi(n, er_density(n), seed=1))
    S1 = shift_operator(barabasi_albert(n, 1, seed=2))
    u0 = dominant_subspace_of((0, 0, 1), S0, 1)
    return S0, S1, u0


class TestConfig:
    def test_spike_needs_k1(self):
        with pytest.raises(ValueError):
            DetectorConfig(Subspace(np.eye(3)[:, :2]), SubspaceFamily.delta_spike())

    @pytest.mark.parametrize("kw", [{"eta": -1.0}, {"b": 0}, {"windowing": "hop"}, {"c": math.nan}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            DetectorConfig(one_hot(3, 0), SubspaceFamily.blind(), **kw)

    def test_echo(self):
        cfg = DetectorConfig(one_hot(4, 0), SubspaceFamily.delta_spike(), c=0.4, eta=3.0, b=1)
        assert cfg.echo() == {"family": "spike", "c": 0.4, "eta": 3.0, "k": 1, "b": 1, "windowing": "disjoint", "n": 4}
        assert DetectorConfig(one_hot(4, 0), SubspaceFamily.blind()).echo()["eta"] is None


class TestDrift:
    def test_blind_self_is_zero(self):
        u0 = Subspace.from_vector([1.0, 2.0, 3.0])
        assert drift_statistic(DetectorConfig(u0, SubspaceFamily.blind()), u0) == 0.0

    def test_catalog_member_exact(self):
        rng = np.random.default_rng(0)
        u0 = Subspace.from_columns(rng.standard_normal((10, 2)))
        members = [Subspace.from_columns(rng.standard_normal((10, 2))) for _ in range(4)]
        cfg = DetectorConfig(u0, SubspaceFamily.catalog(members))
        assert drift_statistic(cfg, members[2]) == pytest.approx(sin_theta_distance(u0, members[2]), abs=1e-12)

    def test_spike_flat_composite(self):
        u0 = Subspace.from_vector(np.ones(100))
        v = np.zeros(100)
        v[:2] = [0.6, 0.8]
        d = drift_statistic(DetectorConfig(u0, SubspaceFamily.delta_spike()), Subspace.from_vector(v))
        assert d == pytest.approx(math.sqrt(0.99) - 0.6, abs=1e-12)
        assert d == pytest.approx(0.39499, abs=1e-5)


class TestCusumStep:
    @pytest.mark.parametrize(
        "s, drift, c, eta, expected, alarm",
        [(0.0, 0.2, 0.5, math.inf, 0.0, None), (0.5, 0.7, 0.5, math.inf, 0.7, None), (0.9, 0.7, 0.5, 1.0, 1.1, 4)],
    )
    def test_examples(self, s, drift, c, eta, expected, alarm):
        out = _advance(CusumState(s, 3), drift, c, eta)
        assert out.s == pytest.approx(expected, abs=1e-15)
        assert out.ell == 4 and out.alarm_at == alarm

    def test_alarm_sticks(self):
        st = _advance(CusumState(0.0, 0), 2.0, 0.0, 1.0)
        st = _advance(st, -5.0, 0.0, 1.0)
        assert st.alarm_at == 1 and st.s == 0.0

    def test_cusum_step_uses_family(self):
        u0 = one_hot(2, 0)
        cfg = DetectorConfig(u0, SubspaceFamily.blind(), c=0.1, eta=10.0)
        st = cusum_step(CusumState(), cfg, Subspace.from_vector(line_at(0.6)))
        assert st.s == pytest.approx(0.5, abs=1e-12)


class TestRecursionProperties:
    @settings(max_examples=200, deadline=None)
    @given(drift_lists, st.floats(-0.5, 1.5))
    def test_nonnegative(self, drifts, c):
        assert np.all(cusum_trace(drifts, c) >= 0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1.0, 0.0), min_size=1, max_size=50), st.floats(0.0, 1.0))
    def test_all_negative_increments_stay_zero(self, drifts, c):
        assert np.all(cusum_trace(drifts, c) == 0)

    @settings(max_examples=200, deadline=None)
    @given(drift_lists, st.floats(-0.5, 1.0), st.floats(0.0, 1.0))
    def test_monotone_in_c(self, drifts, c, dc):
        assert np.all(cusum_trace(drifts, c + dc) <= cusum_trace(drifts, c))

    @settings(max_examples=200, deadline=None)
    @given(drift_lists, st.floats(-0.5, 1.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_alarm_monotone_in_eta(self, drifts, c, e1, e2):
        lo, hi = sorted((e1, e2))
        S = cusum_trace(drifts, c)
        a_lo, a_hi = first_alarm(S, lo), first_alarm(S, hi)
        never = len(drifts) + 1
        assert (a_lo or never) <= (a_hi or never)

    def test_renewal_runs(self):
        runs, tail = renewal_run_lengths([1.0] * 7, 0.0, 2.0)
        assert runs == [2, 2, 2] and tail == 1


class TestBlocks:
    def test_disjoint_drops_partial(self):
        blocks = list(iter_blocks(np.arange(14.0).reshape(7, 2), 3))
        assert [b.block_index for b in blocks] == [1, 2]
        np.testing.assert_array_equal(blocks[1].samples, [[6, 7], [8, 9], [10, 11]])

    def test_sliding_stride_one(self):
        blocks = list(iter_blocks(np.arange(10.0).reshape(5, 2), 3, "sliding"))
        assert len(blocks) == 3
        np.testing.assert_array_equal(blocks[2].samples[:, 0], [4, 6, 8])

    def test_end_times(self):
        assert block_end_time(2, 3) == 6
        assert block_end_time(2, 3, "sliding") == 4


class TestRunDetector:
    def test_catalog_member_signals_alarm_first_block(self):
        rng = np.random.default_rng(1)
        u0 = Subspace.from_vector(rng.standard_normal(6))
        members = [Subspace.from_vector(rng.standard_normal(6)) for _ in range(3)]
        target = members[1]
        eta = 0.9 * sin_theta_distance(u0, target)
        cfg = DetectorConfig(u0, SubspaceFamily.catalog(members), c=0.0, eta=eta)
        stream = [3.7 * target.basis[:, 0]] * 5
        res = run_detector(cfg, stream)
        assert res.alarm_block == 1 and res.gammas[0] == 1

    def test_stops_at_alarm_unless_full_trace(self):
        cfg = DetectorConfig(one_hot(2, 0), SubspaceFamily.blind(), c=0.0, eta=1.0)
        stream = [line_at(0.6)] * 10
        assert run_detector(cfg, stream).blocks_consumed == 2
        full = run_detector(cfg, stream, full_trace=True)
        assert full.blocks_consumed == 10 and full.alarm_block == 2

    def test_zero_block_skipped(self):
        cfg = DetectorConfig(one_hot(2, 0), SubspaceFamily.blind(), c=0.0)
        stream = [line_at(0.6), np.zeros(2), line_at(0.6)]
        with pytest.warns(DegenerateBlockWarning):
            res = run_detector(cfg, stream, full_trace=True)
        assert res.skipped == 1
        assert [ell for ell, _ in res.trace] == [1, 2]
        assert res.end_times == [1, 3]
        assert res.statistic[-1] == pytest.approx(1.2, abs=1e-12)

    def test_blind_increments_exact(self, er_ba_setting):
        S0, S1, u0 = er_ba_setting
        c = 0.5
        cfg = DetectorConfig(u0, SubspaceFamily.blind(), c=c)
        stream = list(synthesize_stream(StreamConfig(S0, S1, (0, 0, 1), (0, 0, 1), 30, 60, 4)))
        res = run_detector(cfg, stream, full_trace=True)
        s = 0.0
        for (_, S), drift, sig in zip(res.trace, res.drifts, stream):
            increment = sin_theta_distance(u0, Subspace.from_vector(sig.values)) - c
            assert drift - c == increment
            s = max(0.0, s + increment)
            assert S == s

    def test_nominal_no_alarm(self, er_ba_setting):
        S0, S1, u0 = er_ba_setting
        cfg = DetectorConfig(u0, SubspaceFamily.delta_spike())
        cal = synthesize_stream(StreamConfig(S0, S0, (0, 0, 1), (0, 0, 1), 501, 500, 10))
        c, _ = calibrate_c(cfg, iter_blocks(cal, 1))
        stream = synthesize_stream(StreamConfig(S0, S1, (0, 0, 1), (0, 0, 1), 1001, 1000, 11))
        res = run_detector(cfg.with_c(c), stream, full_trace=True)
        assert res.alarm_block is None
        assert res.statistic[-1] < 0.5

    def test_trace_reproducible(self, er_ba_setting):
        S0, S1, u0 = er_ba_setting
        cfg = DetectorConfig(u0, SubspaceFamily.delta_spike(), c=0.05)
        mk = lambda: synthesize_stream(StreamConfig(S0, S1, (0, 0, 1), (0, 0, 1), 100, 200, 12))
        a = run_detector(cfg, mk(), full_trace=True).statistic
        b = run_detector(cfg, mk(), full_trace=True).statistic
        assert a.tobytes() == b.tobytes()

    def test_spike_trace_rises_after_change(self, er_ba_setting):
        S0, S1, u0 = er_ba_setting
        cfg = DetectorConfig(u0, SubspaceFamily.delta_spike(), c=0.1)
        stream = synthesize_stream(StreamConfig(S0, S1, (0, 0, 1), (0, 0, 1), 600, 1000, 13))
        S = run_detector(cfg, stream, full_trace=True).statistic
        assert S[598] < 1.0
        assert S[-1] > 10 * max(S[598], 0.1)


class TestCalibration:
    def _cfg(self):
        return DetectorConfig(one_hot(2, 0), SubspaceFamily.blind())

    def test_midpoint(self):
        c, est = calibrate_c(self._cfg(), constant_blocks(line_at(0.2), 40), constant_blocks(line_at(0.8), 40))
        assert c == pytest.approx(0.5, abs=1e-12)
        assert est.mean_nominal == pytest.approx(0.2, abs=1e-12)
        assert est.mean_post == pytest.approx(0.8, abs=1e-12)

    def test_post_below_nominal_fails(self):
        with pytest.raises(CalibrationError):
            calibrate_c(self._cfg(), constant_blocks(line_at(0.8), 40), constant_blocks(line_at(0.2), 40))

    def test_nominal_only_rule(self):
        rng = np.random.default_rng(0)
        deltas = rng.uniform(0.1, 0.3, 50)
        blocks = [SignalBlock(line_at(d)[None, :]) for d in deltas]
        c, est = calibrate_c(self._cfg(), blocks)
        assert c == pytest.approx(deltas.mean() + 2 * deltas.std(ddof=1), abs=1e-12)
        assert est.mean_post is None

    def test_needs_enough_blocks(self):
        with pytest.raises(ValueError):
            calibrate_c(self._cfg(), constant_blocks(line_at(0.2), 5))


class TestRunLengths:
    def _factory(self, delta):
        return lambda trial, mode: [line_at(delta)] * 50

    def test_eta_zero(self):
        cfg = DetectorConfig(one_hot(2, 0), SubspaceFamily.blind(), c=0.0, eta=0.0)
        est = measure_run_lengths(cfg, self._factory(0.3), 5, "post")
        assert est.mean == 1.0 and est.censored_frac == 0.0

    @pytest.mark.parametrize("delta, c, E", [(0.6, 0.1, 1.2), (0.9, 0.2, 3.0), (0.5, 0.45, 0.33)])
    def test_constant_drift_oracle(self, delta, c, E):
        cfg = DetectorConfig(one_hot(2, 0), SubspaceFamily.blind(), c=c, eta=E)
        est = measure_run_lengths(cfg, self._factory(delta), 3, "post")
        assert est.mean == math.ceil(E / (delta - c))
        assert est.stderr == 0.0

    def test_censoring(self):
        cfg = DetectorConfig(one_hot(2, 0), SubspaceFamily.blind(), c=1.0, eta=1.0)
        est = measure_run_lengths(cfg, self._factory(0.3), 4, "nominal", max_blocks=20)
        assert est.mean == 20 and est.censored_frac == 1.0
