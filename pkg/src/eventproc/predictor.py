"""Minimum-Bayes-risk prediction of the next event.

The expectation over the next-event density is estimated with exact draws
from that density (thinning).  Type scores reuse the same draws for every
type, so the comparison between types is paired.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import Dataset
from .sampler import sample_next_times


@dataclass(frozen=True)
class PredictionMetrics:
    rmse: float
    error_rate: float
    n_predictions: int


@dataclass(frozen=True)
class Prediction:
    t_hat: float
    k_hat: int
    type_scores: np.ndarray


def predict_next(model, state, m_samples: int, rng) -> Prediction:
    """Posterior-mean time and posterior-mode type after ``state``.

    Ties between types go to the smallest id.
    """
    if m_samples < 1:
        raise ValueError("m_samples must be positive")
    t = sample_next_times(model, state, m_samples, rng)
    scores = type_scores(model, state, t)
    return Prediction(float(t.mean()), int(np.argmax(scores)) + 1, scores)


def type_scores(model, state, times: np.ndarray) -> np.ndarray:
    """Mean of ``lam_k(t) / lam(t)`` over ``times``, the same draws for every ``k``."""
    lam = np.atleast_2d(model.intensities(state, np.asarray(times, dtype=np.float64)))
    return (lam / lam.sum(axis=1, keepdims=True)).mean(axis=0)


def evaluate_predictions(model, dataset: Dataset, m_samples: int = 1000, seed: int = 0,
                         rows: list | None = None) -> PredictionMetrics:
    """Predict every event from its true history and score RMSE and error rate.

    If ``rows`` is a list, one ``(stream, index, t_true, t_hat, k_true, k_hat)``
    tuple per prediction is appended to it.
    """
    sq_err = 0.0
    mistakes = 0
    n = 0
    for j, stream in enumerate(dataset):
        state = model.start()
        for i, (k, t) in enumerate(zip(stream.types, stream.times)):
            rng = np.random.default_rng([seed, j, i])
            pred = predict_next(model, state, m_samples, rng)
            sq_err += (pred.t_hat - t) ** 2
            mistakes += int(pred.k_hat != k)
            n += 1
            if rows is not None:
                rows.append((j, i, float(t), pred.t_hat, int(k), pred.k_hat))
            state = model.advance(state, int(k), float(t))
    if n == 0:
        return PredictionMetrics(0.0, 0.0, 0)
    return PredictionMetrics(float(np.sqrt(sq_err / n)), mistakes / n, n)
