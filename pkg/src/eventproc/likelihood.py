"""Log-likelihood of a stream under any of the three models.

The event term is computed exactly; the integral of the total intensity is
a Monte-Carlo estimate ``T/N * sum_m lam(u_m)`` with ``u_m`` uniform on the
observation window, which keeps both the estimate and its gradient
unbiased.  Gradients are exact reverse-mode derivatives of the sampled
objective, so common random numbers make them checkable by finite
differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .classical import DSMPPParams, SEMPPParams
from .ctlstm import CTLSTMParams
from .events import EventStream

EVAL_SEED = 20170601


class NumericalError(ArithmeticError):
    """A model produced a zero or non-finite intensity where a finite log was needed."""


@dataclass(frozen=True)
class LogLikReport:
    total: float
    event_term: float
    integral_term: float
    per_event: np.ndarray
    type_term: float
    time_term: float
    num_events: int

    @property
    def per_event_total(self) -> float:
        return self.total / max(self.num_events, 1)


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def default_num_samples(stream: EventStream, factor: int = 1) -> int:
    """Sample-count rule: ``factor * I`` integral samples, at least one."""
    return max(factor * len(stream), 1)


def draw_samples(horizon: float, n: int, rng, stratified: bool = True) -> np.ndarray:
    """Sorted integration points on ``(0, horizon)``.

    Stratified mode draws one uniform point in each of ``n`` equal cells,
    which is still unbiased for the integral.
    """
    if n < 1:
        raise ValueError("need at least one integration sample")
    rng = as_rng(rng)
    u = rng.random(n)
    if stratified:
        pts = (np.arange(n) + u) * (horizon / n)
    else:
        pts = np.sort(u * horizon)
    return np.minimum(pts, np.nextafter(horizon, 0.0))


def integration_horizon(stream: EventStream, eos_type: int | None = None) -> float:
    """``T``, or the time of the first end-of-stream event when ``eos_type`` is set."""
    if eos_type is not None:
        hits = np.flatnonzero(stream.types == eos_type)
        if hits.size:
            return float(stream.times[hits[0]])
    return stream.horizon


def evaluate(params, stream: EventStream, samples: np.ndarray, horizon: float | None = None,
             want_grad: bool = False, event_weight: float = 1.0, vec: np.ndarray | None = None):
    """Run the compiled pass; returns ``(event_term, integral, per_event, lam_total, grad, err)``.

    ``vec`` overrides the packed parameters (used by finite differences).
    """
    horizon = stream.horizon if horizon is None else horizon
    weight = horizon / samples.size
    times, types = stream.times, stream.types
    if isinstance(params, CTLSTMParams):
        v = params.pack() if vec is None else np.ascontiguousarray(vec, dtype=np.float64)
        return _kernels.neural_pass(v, params.num_types, params.hidden, params.decay_scale, times, types,
                                    samples, weight, event_weight, want_grad)
    K = params.num_types
    v = params.pack() if vec is None else np.asarray(vec, dtype=np.float64)
    n = K * K
    mu = v[:K]
    alpha = v[K:K + n].reshape(K, K)
    delta = v[K + n:K + 2 * n].reshape(K, K)
    if isinstance(params, DSMPPParams):
        s, soft = v[K + 2 * n:], True
    elif isinstance(params, SEMPPParams):
        s, soft = np.ones(K), False
    else:
        raise TypeError(f"unsupported model {type(params).__name__}")
    return _kernels.classical_pass(np.ascontiguousarray(mu), np.ascontiguousarray(alpha),
                                   np.ascontiguousarray(delta), np.ascontiguousarray(s), soft, times, types,
                                   samples, weight, event_weight, want_grad)


def mc_integral(model, stream: EventStream, n_samples: int, rng, stratified: bool = True,
                eos_type: int | None = None) -> tuple[float, np.ndarray]:
    """Unbiased estimate of the integral of the total intensity and of its gradient."""
    horizon = integration_horizon(stream, eos_type)
    samples = draw_samples(horizon, n_samples, rng, stratified)
    _, integral, _, _, grad, _ = evaluate(model, stream, samples, horizon, want_grad=True, event_weight=0.0)
    return float(integral), -grad


def _report(stream, event_term, integral, per_event, lam_total, err) -> LogLikReport:
    if err >= 0:
        raise NumericalError(f"intensity of event {err} (type {stream.types[err]}, t={stream.times[err]}) "
                             "underflowed to zero")
    total = event_term - integral
    time_term = float(np.sum(np.log(lam_total))) - integral
    return LogLikReport(
        total=float(total),
        event_term=float(event_term),
        integral_term=float(integral),
        per_event=per_event,
        type_term=float(total - time_term),
        time_term=float(time_term),
        num_events=len(stream),
    )


def log_likelihood(model, stream: EventStream, n_samples: int | None = None, rng=EVAL_SEED,
                   stratified: bool = True, eos_type: int | None = None) -> LogLikReport:
    """Log-likelihood in nats.  ``n_samples`` defaults to ``10 * I``."""
    n = default_num_samples(stream, 10) if n_samples is None else n_samples
    horizon = integration_horizon(stream, eos_type)
    samples = draw_samples(horizon, n, rng, stratified)
    out = evaluate(model, stream, samples, horizon)
    return _report(stream, *out[:4], out[5])


def log_likelihood_and_gradient(model, stream: EventStream, n_samples: int | None = None, rng=EVAL_SEED,
                                stratified: bool = True, eos_type: int | None = None):
    n = default_num_samples(stream, 1) if n_samples is None else n_samples
    horizon = integration_horizon(stream, eos_type)
    samples = draw_samples(horizon, n, rng, stratified)
    event_term, integral, per_event, lam_total, grad, err = evaluate(model, stream, samples, horizon,
                                                                     want_grad=True)
    report = _report(stream, event_term, integral, per_event, lam_total, err)
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient")
    return report, grad


def gradient(model, stream: EventStream, n_samples: int | None = None, rng=EVAL_SEED,
             stratified: bool = True) -> np.ndarray:
    """Gradient of the sampled log-likelihood with respect to ``model.pack()``."""
    return log_likelihood_and_gradient(model, stream, n_samples, rng, stratified)[1]


def finite_diff_check(model, stream: EventStream, step: float = 1e-5, n_samples: int | None = None,
                      seed: int = 0) -> float:
    """Worst relative error between :func:`gradient` and central differences.

    Both sides use the same integration points.  Where the analytic
    derivative is below 1e-6 in magnitude the absolute error is used.
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-7, 1e-3]")
    n = default_num_samples(stream, 1) if n_samples is None else n_samples
    samples = draw_samples(stream.horizon, n, seed)
    base = model.pack()
    ev, integral, _, _, grad, err = evaluate(model, stream, samples, want_grad=True)
    if err >= 0:
        raise NumericalError("model assigns zero intensity to an observed event")
    worst = 0.0
    bumped = base.copy()
    for p in range(base.size):
        bumped[p] = base[p] + step
        up = evaluate(model, stream, samples, vec=bumped)
        bumped[p] = base[p] - step
        down = evaluate(model, stream, samples, vec=bumped)
        bumped[p] = base[p]
        fd = ((up[0] - up[1]) - (down[0] - down[1])) / (2 * step)
        diff = abs(fd - grad[p])
        rel = diff if abs(grad[p]) < 1e-6 else diff / abs(grad[p])
        worst = max(worst, rel)
    return worst
