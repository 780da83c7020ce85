import numpy as np
import pytest

from eventproc.classical import DSMPPParams, SEMPPParams
from eventproc.ctlstm import CTLSTMParams, param_count
from eventproc.events import EventStream


def random_sempp(rng, K):
    return SEMPPParams(rng.uniform(0.2, 1.0, K), rng.uniform(0.0, 1.0, (K, K)), rng.uniform(0.5, 3.0, (K, K)))


def random_dsmpp(rng, K):
    return DSMPPParams(rng.uniform(-1, 1, K), rng.uniform(-1, 1, (K, K)), rng.uniform(0.5, 3.0, (K, K)),
                       rng.uniform(0.5, 2.0, K))


def random_ctlstm(rng, K, D, scale=1.0):
    vec = rng.uniform(-scale, scale, param_count(K, D))
    vec[-K:] = rng.uniform(0.5, 2.0, K)
    return CTLSTMParams.from_vector(K, D, vec)


def random_model(kind, rng, K, D=4):
    if kind == "sempp":
        return random_sempp(rng, K)
    if kind == "dsmpp":
        return random_dsmpp(rng, K)
    return random_ctlstm(rng, K, D)


def random_stream(rng, K, n, horizon=None):
    horizon = float(rng.uniform(2, 10)) if horizon is None else horizon
    times = np.sort(rng.uniform(0, horizon, n))
    return EventStream(times, rng.integers(1, K + 1, n), horizon)


def constant_sempp(rates):
    rates = np.asarray(rates, dtype=float)
    K = rates.size
    return SEMPPParams(rates, np.zeros((K, K)), np.ones((K, K)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def midpoint_integral(model, stream, n_points=100_000):
    """Midpoint-rule integral of the total intensity, interval by interval.

    Grid points never touch event times, so the discontinuities at events
    cost nothing beyond the O(h^2) rule error.
    """
    edges = np.concatenate([[0.0], stream.times, [stream.horizon]])
    lengths = np.diff(edges)
    state = model.start()
    total = 0.0
    for i, length in enumerate(lengths):
        m = max(int(round(n_points * length / stream.horizon)), 1)
        if length > 0:
            grid = edges[i] + (np.arange(m) + 0.5) * (length / m)
            total += float(np.atleast_2d(model.intensities(state, grid)).sum()) * length / m
        if i < len(stream):
            state = model.advance(state, int(stream.types[i]), float(stream.times[i]))
    return total


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
