"""Continuous-time LSTM and the neural self-modulating intensity (N-SM-MPP).

Between events every memory cell relaxes exponentially from its start value
toward a target value at its own rate; an event performs a discrete LSTM-style
update that reads the *decayed* hidden state.  Intensities are a scaled
softplus of a linear projection of the hidden state.

Event types enter through a shared ``(K+1) x D`` embedding (row 0 is the
beginning-of-stream marker) followed by a ``D x D`` input matrix per gate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classical import sigmoid, softplus_scaled
from .events import BOS

GATES = ("i", "f", "z", "o", "ibar", "fbar", "d")
MAX_DECAY_EXPONENT = 700.0


def param_count(K: int, D: int) -> int:
    """Number of trainable parameters of a one-layer N-SM-MPP."""
    if K < 1 or D < 1:
        raise ValueError("K and D must be positive")
    return (K + 1) * D + 7 * (2 * D * D + D) + K * D + K


@dataclass(frozen=True, eq=False)
class CTLSTMParams:
    """``W``, ``U`` stack the seven gate blocks along axis 0 in :data:`GATES` order.

    ``decay_scale`` is the softplus scale of the decay-rate transfer.  It is
    a fixed hyperparameter (not in :meth:`pack`), which keeps the trainable
    count equal to :func:`param_count`.
    """

    embed: np.ndarray  # (K+1, D)
    W: np.ndarray  # (7, D, D)
    U: np.ndarray  # (7, D, D)
    b: np.ndarray  # (7, D)
    w: np.ndarray  # (K, D)
    s: np.ndarray  # (K,)
    decay_scale: float = 1.0
    kind = "nsmmpp"

    def __post_init__(self):
        for name in ("embed", "W", "U", "b", "w", "s"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        K, D = self.w.shape
        if self.embed.shape != (K + 1, D) or self.W.shape != (7, D, D) or self.U.shape != (7, D, D) \
                or self.b.shape != (7, D) or self.s.shape != (K,):
            raise ValueError("inconsistent CT-LSTM parameter shapes")
        if np.any(self.s <= 0) or not self.decay_scale > 0:
            raise ValueError("softplus scales must be strictly positive")

    @property
    def num_types(self) -> int:
        return self.w.shape[0]

    @property
    def hidden(self) -> int:
        return self.w.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = GATES.index(name)
        return self.W[g], self.U[g], self.b[g]

    def pack(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in (self.embed, self.W, self.U, self.b, self.w, self.s)])

    @staticmethod
    def count(K: int, D: int) -> int:
        return param_count(K, D)

    @classmethod
    def from_vector(cls, K: int, D: int, vec, decay_scale: float = 1.0) -> "CTLSTMParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != param_count(K, D):
            raise ValueError(f"expected {param_count(K, D)} values, got {vec.size}")
        sizes = [(K + 1) * D, 7 * D * D, 7 * D * D, 7 * D, K * D, K]
        parts = np.split(vec, np.cumsum(sizes)[:-1])
        return cls(parts[0].reshape(K + 1, D), parts[1].reshape(7, D, D), parts[2].reshape(7, D, D),
                   parts[3].reshape(7, D), parts[4].reshape(K, D), parts[5], decay_scale)

    def with_vector(self, vec) -> "CTLSTMParams":
        return CTLSTMParams.from_vector(self.num_types, self.hidden, vec, self.decay_scale)

    @classmethod
    def zeros(cls, K: int, D: int) -> "CTLSTMParams":
        return cls(np.zeros((K + 1, D)), np.zeros((7, D, D)), np.zeros((7, D, D)), np.zeros((7, D)),
                   np.zeros((K, D)), np.ones(K))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "K": self.num_types, "D": self.hidden,
            "embed": self.embed.tolist(),
            "gates": {g: {"W": self.W[j].tolist(), "U": self.U[j].tolist(), "d": self.b[j].tolist()}
                      for j, g in enumerate(GATES)},
            "w": self.w.tolist(), "s": self.s.tolist(), "decay_scale": self.decay_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CTLSTMParams":
        gates = d["gates"]
        return cls(np.array(d["embed"], float),
                   np.array([gates[g]["W"] for g in GATES], float),
                   np.array([gates[g]["U"] for g in GATES], float),
                   np.array([gates[g]["d"] for g in GATES], float),
                   np.array(d["w"], float), np.array(d["s"], float), float(d.get("decay_scale", 1.0)))

    # process protocol used by the sampler and the predictor
    def start(self) -> "CellState":
        return init_state(self)

    def advance(self, state: "CellState", k: int, t: float) -> "CellState":
        return update(self, state, k, t)

    def intensities(self, state: "CellState", t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < state.t_anchor):
            raise ValueError("cannot evaluate before the state's anchor time")
        arg = np.minimum(state.decay * (t[..., None] - state.t_anchor), MAX_DECAY_EXPONENT)
        c = state.c_target + (state.c_start - state.c_target) * np.exp(-arg)
        h = state.out_gate * np.tanh(c)
        return softplus_scaled(h @ self.w.T, self.s)

    def upper_bound(self, state: "CellState") -> np.ndarray:
        return neural_upper_bound(self, state)


@dataclass(frozen=True, eq=False)
class CellState:
    """Configuration on one inter-event interval: cells start at ``c_start``
    at time ``t_anchor`` and drift toward ``c_target`` at rates ``decay``."""

    c_start: np.ndarray
    c_target: np.ndarray
    decay: np.ndarray
    out_gate: np.ndarray
    t_anchor: float

    @property
    def anchor(self) -> float:
        return self.t_anchor


@dataclass(frozen=True, eq=False)
class DecayedState:
    c: np.ndarray
    h: np.ndarray


def decay(state: CellState, t: float) -> DecayedState:
    dt = t - state.t_anchor
    if dt < 0:
        raise ValueError(f"t={t} precedes the state's anchor {state.t_anchor}")
    e = np.exp(-np.minimum(state.decay * dt, MAX_DECAY_EXPONENT))
    c = state.c_target + (state.c_start - state.c_target) * e
    return DecayedState(c, state.out_gate * (2.0 * sigmoid(2.0 * c) - 1.0))


def _transition(params: CTLSTMParams, x: np.ndarray, h: np.ndarray, c: np.ndarray,
                c_target_prev: np.ndarray, t: float) -> CellState:
    pre = params.W @ x + params.U @ h + params.b  # (7, D)
    g_i, g_f, g_o, g_ib, g_fb = sigmoid(pre[[0, 1, 3, 4, 5]])
    z = 2.0 * sigmoid(pre[2]) - 1.0
    return CellState(
        c_start=g_f * c + g_i * z,
        c_target=g_fb * c_target_prev + g_ib * z,
        decay=softplus_scaled(pre[6], params.decay_scale),
        out_gate=g_o,
        t_anchor=float(t),
    )


def init_state(params: CTLSTMParams) -> CellState:
    """State after reading the beginning-of-stream marker at time 0 from all-zero cells."""
    zero = np.zeros(params.hidden)
    return _transition(params, params.embed[BOS], zero, zero, zero, 0.0)


def update(params: CTLSTMParams, state: CellState, k: int, t: float) -> CellState:
    """Read event ``(k, t)``: decay to ``t``, then apply the gated update."""
    if not t > state.t_anchor:
        raise ValueError(f"event time {t} must follow the anchor {state.t_anchor}")
    if not 0 <= k <= params.num_types:
        raise ValueError(f"event type {k} out of range")
    cur = decay(state, t)
    return _transition(params, params.embed[k], cur.h, cur.c, state.c_target, t)


def intensity(params: CTLSTMParams, decayed: DecayedState) -> np.ndarray:
    return softplus_scaled(params.w @ decayed.h, params.s)


def neural_upper_bound(params: CTLSTMParams, state: CellState) -> np.ndarray:
    """Per-type bound valid on ``(t_anchor, inf)``.

    Each cell moves monotonically between ``c_start`` and ``c_target``, and
    ``tanh`` is monotone, so every summand ``w_kd * h_d(t)`` is maximised at
    one of the two endpoints.
    """
    ends = np.stack([np.tanh(state.c_start), np.tanh(state.c_target)])  # (2, D)
    terms = params.w[None, :, :] * (state.out_gate * ends)[:, None, :]  # (2, K, D)
    return np.asarray(softplus_scaled(terms.max(axis=0).sum(axis=1), params.s))
