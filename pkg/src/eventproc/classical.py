"""Decomposable intensity models: the multivariate Hawkes process (SE-MPP)
and its self-modulating variant with inhibition and inertia (D-SM-MPP).

Both share the exponential-kernel sum

    lam_tilde_k(t) = mu_k + sum_{h: t_h < t} alpha[k_h, k] * exp(-delta[k_h, k] * (t - t_h))

with ``alpha``/``delta`` indexed ``[source, target]`` (0-based here, event
type ``k`` lives at index ``k - 1``).  SE-MPP uses ``lam_tilde`` directly;
D-SM-MPP passes it through the scaled softplus of :func:`softplus_scaled`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .events import EventStream


def softplus_scaled(x, s):
    """``s * log(1 + exp(x / s))``, evaluated without overflow for any ``x / s``."""
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    r = x / s
    out = s * np.log1p(np.exp(-np.abs(r))) + np.maximum(x, 0.0)
    return out if out.ndim else float(out)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(-np.logaddexp(0.0, -x))
    return out if out.ndim else float(out)


def inverse_softplus(y):
    """Inverse of the unit-scale softplus, for ``y > 0``."""
    y = np.asarray(y, dtype=np.float64)
    out = y + np.log(-np.expm1(-y))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class HistoryState:
    """Sampling/prediction state of a decomposable model: the history itself."""

    times: np.ndarray
    types: np.ndarray
    anchor: float


def _as_history(history) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(history, (EventStream, HistoryState)):
        return history.times, history.types
    times, types = history
    return np.asarray(times, dtype=np.float64), np.asarray(types, dtype=np.int64)


def _activation(mu, alpha, delta, times, types, t) -> np.ndarray:
    """``lam_tilde`` for every type; ``t`` scalar -> (K,), array (n,) -> (n, K)."""
    t = np.asarray(t, dtype=np.float64)
    if len(times) and np.any(t <= times[-1]):
        raise ValueError(f"query time must be after the last history event ({times[-1]})")
    src = types - 1
    lag = t[..., None] - times  # (..., H)
    # (..., H, K) summands
    terms = alpha[src] * np.exp(-delta[src] * lag[..., None])
    return mu + terms.sum(axis=-2)


class _Decomposable:
    kind: ClassVar[str]
    mu: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray

    @property
    def num_types(self) -> int:
        return len(self.mu)

    def activation(self, history, t) -> np.ndarray:
        times, types = _as_history(history)
        return _activation(self.mu, self.alpha, self.delta, times, types, t)

    # process protocol used by the sampler and the predictor
    def start(self) -> HistoryState:
        return HistoryState(np.empty(0), np.empty(0, dtype=np.int64), 0.0)

    def advance(self, state: HistoryState, k: int, t: float) -> HistoryState:
        if t <= state.anchor:
            raise ValueError(f"event time {t} must follow {state.anchor}")
        return HistoryState(np.append(state.times, t), np.append(state.types, k), float(t))

    def intensities(self, state: HistoryState, t) -> np.ndarray:
        return self.transfer(self.activation(state, t))

    def upper_bound(self, state: HistoryState) -> np.ndarray:
        return decomposable_upper_bound(self, state, state.anchor)

    def with_vector(self, vec: np.ndarray):
        return type(self).from_vector(self.num_types, vec)


@dataclass(frozen=True)
class SEMPPParams(_Decomposable):
    mu: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    kind: ClassVar[str] = "sempp"

    def __post_init__(self):
        _freeze(self, mu=self.mu, alpha=self.alpha, delta=self.delta)
        if np.any(self.mu < 0) or np.any(self.alpha < 0):
            raise ValueError("SE-MPP requires mu >= 0 and alpha >= 0")
        if np.any(self.delta <= 0):
            raise ValueError("decay rates must be strictly positive")

    @staticmethod
    def count(K: int) -> int:
        return K + 2 * K * K

    def transfer(self, x):
        return x

    def pack(self) -> np.ndarray:
        return np.concatenate([self.mu, self.alpha.ravel(), self.delta.ravel()])

    @classmethod
    def from_vector(cls, K: int, vec) -> "SEMPPParams":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[:K], vec[K:K + K * K].reshape(K, K), vec[K + K * K:K + 2 * K * K].reshape(K, K))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "K": self.num_types, "mu": self.mu.tolist(),
                "alpha": self.alpha.tolist(), "delta": self.delta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SEMPPParams":
        return cls(np.array(d["mu"], float), np.array(d["alpha"], float), np.array(d["delta"], float))


@dataclass(frozen=True)
class DSMPPParams(_Decomposable):
    mu: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    s: np.ndarray
    kind: ClassVar[str] = "dsmpp"

    def __post_init__(self):
        _freeze(self, mu=self.mu, alpha=self.alpha, delta=self.delta, s=self.s)
        if np.any(self.delta <= 0) or np.any(self.s <= 0):
            raise ValueError("D-SM-MPP requires delta > 0 and s > 0")

    @staticmethod
    def count(K: int) -> int:
        return 2 * K + 2 * K * K

    def transfer(self, x):
        return softplus_scaled(x, self.s)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.mu, self.alpha.ravel(), self.delta.ravel(), self.s])

    @classmethod
    def from_vector(cls, K: int, vec) -> "DSMPPParams":
        vec = np.asarray(vec, dtype=np.float64)
        n = K * K
        return cls(vec[:K], vec[K:K + n].reshape(K, K), vec[K + n:K + 2 * n].reshape(K, K), vec[K + 2 * n:2 * K + 2 * n])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "K": self.num_types, "mu": self.mu.tolist(), "alpha": self.alpha.tolist(),
                "delta": self.delta.tolist(), "s": self.s.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DSMPPParams":
        return cls(np.array(d["mu"], float), np.array(d["alpha"], float), np.array(d["delta"], float),
                   np.array(d["s"], float))


def _freeze(obj, **arrays):
    for name, value in arrays.items():
        arr = np.array(value, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(obj, name, arr)


def sempp_intensity(params: SEMPPParams, history, t: float, k: int) -> float:
    """Hawkes intensity of type ``k`` (1-based) at ``t`` given the events strictly before ``t``."""
    return float(params.activation(history, t)[k - 1])


def dsmpp_intensity(params: DSMPPParams, history, t: float, k: int) -> float:
    lam_tilde = params.activation(history, t)[k - 1]
    return softplus_scaled(lam_tilde, params.s[k - 1])


def decomposable_upper_bound(params, history, t_start: float) -> np.ndarray:
    """Per-type constant that dominates ``lam_k(t)`` for every ``t > t_start``.

    Inhibitory summands are dropped and excitatory ones are frozen at their
    value at ``t_start``, after which they only decay.  The transfer is
    monotone so the bound passes through it.
    """
    times, types = _as_history(history)
    if len(times) and t_start < times[-1]:
        raise ValueError("t_start must not precede the last history event")
    src = types - 1
    pos = np.maximum(params.alpha[src], 0.0) * np.exp(-params.delta[src] * (t_start - times)[:, None])
    return np.asarray(params.transfer(params.mu + pos.sum(axis=0)), dtype=np.float64)
