import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventproc.ctlstm import (GATES, CTLSTMParams, CellState, decay, init_state, intensity, neural_upper_bound,
                              param_count, update)
from eventproc.events import EventStream
from eventproc.likelihood import draw_samples, evaluate

from conftest import random_ctlstm, random_stream


def reference_loglik(p, times, types, samples, horizon):
    """Scalar-loop CT-LSTM written out gate by gate; independent of the package internals."""
    D = p.hidden
    sig = lambda x: 1.0 / (1.0 + math.exp(-x))
    sp = lambda x, s: s * math.log1p(math.exp(-abs(x / s))) + max(x, 0.0)

    def step(x, h, c, cbar):
        g = {}
        for j, name in enumerate(GATES):
            g[name] = [sum(p.W[j][r][q] * x[q] + p.U[j][r][q] * h[q] for q in range(D)) + p.b[j][r]
                       for r in range(D)]
        out = []
        for r in range(D):
            i, f, o = sig(g["i"][r]), sig(g["f"][r]), sig(g["o"][r])
            ib, fb = sig(g["ibar"][r]), sig(g["fbar"][r])
            z = 2.0 * sig(g["z"][r]) - 1.0
            out.append((f * c[r] + i * z, fb * cbar[r] + ib * z, sp(g["d"][r], 1.0), o))
        return out

    def at(cells, dt):
        h = []
        c = []
        for c0, cb, d, o in cells:
            cc = cb + (c0 - cb) * math.exp(-d * dt)
            c.append(cc)
            h.append(o * math.tanh(cc))
        return c, h

    def lam(h):
        return [sp(sum(p.w[k][r] * h[r] for r in range(D)), p.s[k]) for k in range(p.num_types)]

    zero = [0.0] * D
    cells = step(list(p.embed[0]), zero, zero, zero)
    anchor = 0.0
    event_term = 0.0
    integral = 0.0
    bounds = list(times) + [horizon]
    si = 0
    for i, t_next in enumerate(bounds):
        while si < len(samples) and samples[si] <= t_next:
            _, h = at(cells, samples[si] - anchor)
            integral += sum(lam(h))
            si += 1
        if i == len(times):
            break
        c, h = at(cells, t_next - anchor)
        event_term += math.log(lam(h)[types[i] - 1])
        cells = step(list(p.embed[types[i]]), h, c, [cb for _, cb, _, _ in cells])
        anchor = t_next
    return event_term, integral * horizon / len(samples)


class TestParamCount:
    @pytest.mark.parametrize("K, D, expected", [
        (3, 256, 921091), (5000, 64, 702856),
        (3, 1, 31), (3, 2, 87), (3, 4, 283), (3, 8, 1011), (3, 16, 3811), (3, 32, 14787),
    ])
    def test_goldens(self, K, D, expected):
        assert param_count(K, D) == expected

    def test_matches_packed_length(self, rng):
        p = random_ctlstm(rng, 3, 5)
        assert p.pack().size == param_count(3, 5)


class TestState:
    def test_zero_params(self):
        p = CTLSTMParams.zeros(3, 4)
        st0 = init_state(p)
        assert np.all(st0.c_start == 0) and np.all(st0.c_target == 0)
        assert np.all(st0.out_gate == 0.5)
        assert np.allclose(intensity(p, decay(st0, 2.5)), p.s * math.log(2))

    def test_zero_params_update_matches_init(self):
        p = CTLSTMParams.zeros(2, 3)
        a, b = init_state(p), update(p, init_state(p), 2, 1.7)
        for name in ("c_start", "c_target", "decay", "out_gate"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert b.t_anchor == 1.7

    def test_init_deterministic_and_decay_positive(self, rng):
        p = random_ctlstm(rng, 3, 6, scale=3.0)
        a, b = init_state(p), init_state(p)
        assert np.array_equal(a.c_start, b.c_start) and np.all(a.decay > 0)

    def test_decay_endpoints(self, rng):
        p = random_ctlstm(rng, 2, 4)
        s = update(p, init_state(p), 1, 0.5)
        assert np.array_equal(decay(s, 0.5).c, s.c_start)
        far = 0.5 + 701.0 / s.decay.min()
        assert np.allclose(decay(s, far).c, s.c_target, atol=1e-12, rtol=0)

    def test_half_life(self):
        s = CellState(np.array([3.0]), np.array([-1.0]), np.array([2.0]), np.array([0.5]), 1.0)
        assert decay(s, 1.0 + math.log(2) / 2.0).c[0] == pytest.approx(1.0, rel=1e-12)

    def test_decay_before_anchor(self, rng):
        s = init_state(random_ctlstm(rng, 2, 3))
        with pytest.raises(ValueError):
            decay(s, -0.1)

    def test_update_requires_later_time(self, rng):
        p = random_ctlstm(rng, 2, 3)
        s = update(p, init_state(p), 1, 1.0)
        with pytest.raises(ValueError):
            update(p, s, 2, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 5), st.floats(0, 5), st.integers(0, 2**31))
    def test_semigroup(self, a, b, seed):
        rng = np.random.default_rng(seed)
        p = random_ctlstm(rng, 2, 4)
        s = update(p, init_state(p), 1, 0.3)
        mid = decay(s, 0.3 + a)
        restarted = CellState(mid.c, s.c_target, s.decay, s.out_gate, 0.3 + a)
        assert np.allclose(decay(restarted, 0.3 + a + b).c, decay(s, 0.3 + a + b).c, rtol=1e-12, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0, 100))
    def test_hidden_strictly_inside(self, seed, dt):
        rng = np.random.default_rng(seed)
        p = random_ctlstm(rng, 2, 4, scale=5.0)
        h = decay(update(p, init_state(p), 2, 0.1), 0.1 + dt).h
        assert np.all(np.abs(h) < 1)
        assert np.all(intensity(p, decay(update(p, init_state(p), 2, 0.1), 0.1 + dt)) > 0)


class TestRiggedGates:
    def rig(self, rng, gate_on, gate_off):
        p = random_ctlstm(rng, 2, 4)
        b = p.b.copy()
        b[GATES.index(gate_on)] = 37.0
        b[GATES.index(gate_off)] = -37.0
        W = p.W.copy()
        U = p.U.copy()
        for g in (gate_on, gate_off):
            W[GATES.index(g)] = 0.0
            U[GATES.index(g)] = 0.0
        return CTLSTMParams(p.embed, W, U, b, p.w, p.s)

    def test_no_jump(self, rng):
        p = self.rig(rng, "f", "i")
        s = update(p, init_state(p), 1, 0.4)
        before = decay(s, 1.1).c
        after = update(p, s, 2, 1.1).c_start
        assert np.allclose(after, before, atol=1e-9, rtol=0)

    def test_target_unchanged(self, rng):
        p = self.rig(rng, "fbar", "ibar")
        s = update(p, init_state(p), 1, 0.4)
        assert np.allclose(update(p, s, 2, 1.1).c_target, s.c_target, atol=1e-9, rtol=0)


class TestIntensity:
    def test_zero_hidden(self, rng):
        from eventproc.ctlstm import DecayedState
        p = random_ctlstm(rng, 3, 4)
        assert np.allclose(intensity(p, DecayedState(np.zeros(4), np.zeros(4))), p.s * math.log(2))

    def test_dead_projection_is_constant(self, rng):
        p = random_ctlstm(rng, 2, 4)
        w = p.w.copy()
        w[1] = 0.0
        p = CTLSTMParams(p.embed, p.W, p.U, p.b, w, p.s)
        s = update(p, init_state(p), 1, 0.2)
        vals = p.intensities(s, np.linspace(0.2, 5, 20))[:, 1]
        assert np.allclose(vals, p.s[1] * math.log(2))

    def test_scale_linear_at_origin(self, rng):
        from eventproc.ctlstm import DecayedState
        p = random_ctlstm(rng, 2, 3)
        q = CTLSTMParams(p.embed, p.W, p.U, p.b, p.w, 2 * p.s)
        zero = DecayedState(np.zeros(3), np.zeros(3))
        assert np.allclose(intensity(q, zero), 2 * intensity(p, zero))

    def test_base_rate_jump_limit(self, rng):
        p = random_ctlstm(rng, 3, 5)
        s = update(p, init_state(p), 2, 0.7)
        closed = p.s * np.log1p(np.exp((p.w @ (s.out_gate * (2 / (1 + np.exp(-2 * s.c_target)) - 1))) / p.s))
        far = 0.7 + 701.0 / s.decay.min()
        assert np.allclose(p.intensities(s, far), closed, rtol=1e-9)

    def test_vectorised_matches_scalar(self, rng):
        p = random_ctlstm(rng, 3, 4)
        s = update(p, init_state(p), 3, 0.2)
        ts = np.array([0.3, 1.0, 4.0])
        batch = p.intensities(s, ts)
        for j, t in enumerate(ts):
            assert np.allclose(batch[j], intensity(p, decay(s, t)), rtol=1e-14)


class TestUpperBound:
    def test_no_drift_equals_intensity(self, rng):
        p = random_ctlstm(rng, 3, 4)
        c = rng.normal(size=4)
        s = CellState(c, c.copy(), np.ones(4), np.full(4, 0.6), 0.0)
        assert np.allclose(neural_upper_bound(p, s), p.intensities(s, 1.0))

    def test_positive_weights_use_max_cell(self, rng):
        p = random_ctlstm(rng, 2, 4)
        p = CTLSTMParams(p.embed, p.W, p.U, p.b, np.abs(p.w), p.s)
        a, b = rng.normal(size=4), rng.normal(size=4)
        s = CellState(a, b, np.ones(4), np.full(4, 0.5), 0.0)
        expected = p.s * np.log1p(np.exp(p.w @ (0.5 * np.tanh(np.maximum(a, b))) / p.s))
        assert np.allclose(neural_upper_bound(p, s), expected)

    @pytest.mark.parametrize("seed", range(5))
    def test_probe_check(self, seed):
        rng = np.random.default_rng(seed)
        p = random_ctlstm(rng, 3, 6, scale=2.0)
        state = init_state(p)
        for k, t in zip(rng.integers(1, 4, 5), np.sort(rng.uniform(0, 3, 5))):
            state = update(p, state, int(k), float(t))
        probes = state.t_anchor + rng.exponential(1.0, 1000)
        assert np.all(p.intensities(state, probes) <= neural_upper_bound(p, state) * (1 + 1e-12))


class TestKernelAgainstReference:
    @pytest.mark.parametrize("seed", range(4))
    def test_forward(self, seed):
        rng = np.random.default_rng(seed)
        p = random_ctlstm(rng, 3, 3)
        s = random_stream(rng, 3, 6)
        samples = draw_samples(s.horizon, 15, rng)
        ev, integral, *_ = evaluate(p, s, samples)
        ref_ev, ref_int = reference_loglik(p, list(s.times), list(s.types), list(samples), s.horizon)
        assert ev == pytest.approx(ref_ev, rel=1e-12, abs=1e-12)
        assert integral == pytest.approx(ref_int, rel=1e-12)

    def test_protocol_matches_kernel(self, rng):
        p = random_ctlstm(rng, 2, 4)
        s = random_stream(rng, 2, 5)
        _, _, per_event, *_ = evaluate(p, s, draw_samples(s.horizon, 5, rng))
        state = init_state(p)
        logs = []
        for k, t in zip(s.types, s.times):
            logs.append(math.log(p.intensities(state, t)[k - 1]))
            state = update(p, state, int(k), float(t))
        assert np.allclose(per_event, logs, rtol=1e-12)


class TestSerialisation:
    def test_round_trip(self, rng):
        p = random_ctlstm(rng, 2, 3)
        q = CTLSTMParams.from_dict(p.to_dict())
        assert np.array_equal(p.pack(), q.pack()) and q.decay_scale == p.decay_scale

    def test_json_layout(self, rng):
        d = random_ctlstm(rng, 2, 3).to_dict()
        assert d["kind"] == "nsmmpp" and set(d["gates"]) == set(GATES)
        assert set(d["gates"]["i"]) == {"W", "U", "d"}
