"""Thinning sampler for any model exposing the process protocol.

A model ``m`` is sampled through ``m.start()``, ``m.advance(state, k, t)``,
``m.intensities(state, t)`` and ``m.upper_bound(state)``; the bound must
dominate each type's intensity on ``(state.anchor, inf)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .events import Dataset, EventStream
from .likelihood import as_rng

MAX_PROPOSALS = 10_000_000


class BoundViolation(RuntimeError):
    """The thinning bound was exceeded, or too many proposals were rejected."""


@dataclass
class ThinningAudit:
    """Running record of ``lam / lam_star`` over proposals (for bound checks)."""

    proposals: int = 0
    max_ratio: float = 0.0
    violations: int = 0

    def record(self, lam: float, bound: float) -> None:
        self.proposals += 1
        ratio = lam / bound if bound > 0 else (np.inf if lam > 0 else 0.0)
        self.max_ratio = max(self.max_ratio, ratio)
        if ratio > 1.0:
            self.violations += 1


@dataclass(frozen=True)
class SampleConfig:
    horizon: float | None = None
    max_events: int | None = None
    seed: int = 0
    variant: str = "aggregate"
    eos_type: int | None = None

    def __post_init__(self):
        if (self.horizon is None) == (self.max_events is None):
            raise ValueError("set exactly one of horizon and max_events")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.max_events is not None and self.max_events < 1:
            raise ValueError("max_events must be positive")
        if self.variant not in ("aggregate", "per_type"):
            raise ValueError(f"unknown variant {self.variant!r}")


def _next_aggregate(model, state, rng, audit):
    bound = np.asarray(model.upper_bound(state), dtype=np.float64)
    lam_star = float(bound.sum())
    if lam_star <= 0:
        return None
    t = state.anchor
    for _ in range(MAX_PROPOSALS):
        t += rng.exponential(1.0 / lam_star)
        lam = model.intensities(state, t)
        total = float(lam.sum())
        if audit is not None:
            audit.record(total, lam_star)
        if total > lam_star * (1 + 1e-12):
            raise BoundViolation(f"total intensity {total} exceeds bound {lam_star} at t={t}")
        # accept as type k with prob lam_k / lam_star, reject with 1 - lam / lam_star
        u = rng.random() * lam_star
        if u < total:
            k = int(np.searchsorted(np.cumsum(lam), u, side="right"))
            return min(k, len(lam) - 1) + 1, t
    raise BoundViolation(f"no acceptance after {MAX_PROPOSALS} proposals")


def _next_per_type(model, state, rng, audit):
    bound = np.asarray(model.upper_bound(state), dtype=np.float64)
    best_t, best_k = np.inf, None
    for k, lam_star in enumerate(bound):
        if lam_star <= 0:
            continue
        t = state.anchor
        for _ in range(MAX_PROPOSALS):
            t += rng.exponential(1.0 / lam_star)
            lam = float(model.intensities(state, t)[k])
            if audit is not None:
                audit.record(lam, lam_star)
            if lam > lam_star * (1 + 1e-12):
                raise BoundViolation(f"intensity {lam} of type {k + 1} exceeds bound {lam_star} at t={t}")
            if rng.random() * lam_star <= lam:
                break
        else:
            raise BoundViolation(f"no acceptance after {MAX_PROPOSALS} proposals")
        if t < best_t:
            best_t, best_k = t, k + 1
    if best_k is None:
        return None
    return best_k, best_t


def sample_next(model, state, rng, variant: str = "aggregate", audit: ThinningAudit | None = None):
    """Draw the next event ``(k, t)`` after ``state``; ``None`` if all intensities are zero forever."""
    rng = as_rng(rng)
    if variant == "aggregate":
        return _next_aggregate(model, state, rng, audit)
    if variant == "per_type":
        return _next_per_type(model, state, rng, audit)
    raise ValueError(f"unknown variant {variant!r}")


def sample_next_times(model, state, m: int, rng) -> np.ndarray:
    """``m`` independent next-event times from one state, thinned in parallel.

    Equivalent to calling the aggregate sampler ``m`` times but vectorised
    over the chains, since all of them share the same state and bound.
    """
    rng = as_rng(rng)
    lam_star = float(np.sum(model.upper_bound(state)))
    if lam_star <= 0:
        return np.full(m, np.inf)
    t = np.full(m, float(state.anchor))
    done = np.zeros(m, dtype=bool)
    rounds = 0
    while not done.all():
        idx = np.flatnonzero(~done)
        t[idx] += rng.exponential(1.0 / lam_star, idx.size)
        total = model.intensities(state, t[idx]).sum(axis=-1)
        if np.any(total > lam_star * (1 + 1e-12)):
            raise BoundViolation("total intensity exceeds the thinning bound")
        done[idx[rng.random(idx.size) * lam_star < total]] = True
        rounds += 1
        if rounds > MAX_PROPOSALS:
            raise BoundViolation(f"no acceptance after {MAX_PROPOSALS} proposals")
    return t


def sample_stream(model, config: SampleConfig, rng=None, audit: ThinningAudit | None = None) -> EventStream:
    """One stream from the beginning-of-stream state.

    With a horizon, the first event past ``T`` is discarded.  With
    ``max_events`` the stream stops after that many events and its horizon
    is the last event time.
    """
    rng = as_rng(config.seed if rng is None else rng)
    state = model.start()
    times: list[float] = []
    types: list[int] = []
    while config.max_events is None or len(times) < config.max_events:
        nxt = sample_next(model, state, rng, config.variant, audit)
        if nxt is None:
            break
        k, t = nxt
        if config.horizon is not None and t > config.horizon:
            break
        times.append(t)
        types.append(k)
        if config.eos_type is not None and k == config.eos_type:
            break
        state = model.advance(state, k, t)
    if config.horizon is not None:
        horizon = config.horizon
    else:
        horizon = times[-1] if times else 0.0
        if not times:
            raise BoundViolation("model has zero intensity everywhere; cannot length-cap an empty stream")
    return EventStream(np.array(times), np.array(types, dtype=np.int64), horizon)


def sample_dataset(model, n: int, config: SampleConfig, lengths=None) -> Dataset:
    """``n`` streams, stream ``j`` seeded from ``(config.seed, j)``.

    ``lengths`` optionally gives a per-stream ``max_events`` overriding the config.
    """
    streams = []
    for j in range(n):
        rng = np.random.default_rng([config.seed, j])
        cfg = config
        if lengths is not None:
            cfg = SampleConfig(max_events=int(lengths[j]), seed=config.seed, variant=config.variant,
                               eos_type=config.eos_type)
        streams.append(sample_stream(model, cfg, rng))
    return Dataset(streams, model.num_types)
