"""Stochastic maximum-likelihood training with Adam and early stopping.

Constrained parameters (SE-MPP rates and excitations, all decay rates, all
softplus scales) are optimised in an unconstrained space through
``softplus``, so every iterate is a valid model.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .classical import inverse_softplus, sigmoid, softplus_scaled
from .ctlstm import param_count
from .events import Dataset
from .likelihood import (EVAL_SEED, NumericalError, default_num_samples, draw_samples, evaluate,
                         log_likelihood)
from .models import KINDS, count_params, from_vector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str = "nsmmpp"
    D: int = 8
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    train_sample_factor: int = 1
    eval_sample_factor: int = 10
    batch_size: int = 1
    eval_seed: int = EVAL_SEED

    def __post_init__(self):
        if self.model_kind not in KINDS:
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        if self.patience < 1 or not self.learning_rate > 0 or self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("need patience >= 1, learning_rate > 0, max_epochs >= 1, batch_size >= 1")


@dataclass
class FitReport:
    best_params: object
    epoch_log: list = field(default_factory=list)  # (epoch, train ll/event, dev ll/event)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_dev: float = -np.inf


class Adam:
    """Adam on one flat parameter vector (minimisation)."""

    def __init__(self, size: int, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr, self.beta1, self.beta2, self.epsilon = lr, beta1, beta2, epsilon
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


def positive_mask(kind: str, K: int, D: int | None = None) -> np.ndarray:
    """Entries of the packed vector that are trained through softplus."""
    n = count_params(kind, K, D)
    mask = np.zeros(n, dtype=bool)
    if kind == "sempp":
        mask[:] = True
    elif kind == "dsmpp":
        mask[K + K * K:] = True  # delta and s
    else:
        mask[n - K:] = True  # s
    return mask


def to_natural(raw: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, softplus_scaled(raw, 1.0), raw)


def to_raw(natural: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = natural.astype(np.float64).copy()
    out[mask] = inverse_softplus(natural[mask])
    return out


def init_params(kind: str, K: int, D: int | None = None, rng=None):
    """Classical models start with every parameter at 1; the neural model
    draws weights from N(0, 0.01^2) with scales at 1."""
    if kind in ("sempp", "dsmpp"):
        return from_vector(kind, K, np.ones(count_params(kind, K)))
    rng = np.random.default_rng(rng)
    vec = rng.normal(0.0, 0.01, param_count(K, D))
    vec[-K:] = 1.0
    return from_vector(kind, K, vec, D)


def dataset_loglik(model, dataset: Dataset, factor: int = 10, seed: int = EVAL_SEED) -> tuple[float, np.ndarray]:
    """Total held-out log-likelihood per event, plus the per-stream totals.

    Stream ``j`` integrates with its own fixed sample set from ``(seed, j)``.
    """
    per_stream = np.array([
        log_likelihood(model, s, default_num_samples(s, factor), np.random.default_rng([seed, j])).total
        for j, s in enumerate(dataset)
    ])
    return float(per_stream.sum() / max(dataset.num_events, 1)), per_stream


def train(kind: str, train_set: Dataset, dev_set: Dataset, config: TrainConfig, init=None) -> FitReport:
    """Fit one model kind; returns the parameters with the best dev log-likelihood."""
    if train_set.num_types != dev_set.num_types:
        raise ValueError("train and dev sets disagree on K")
    K = train_set.num_types
    D = config.D if kind == "nsmmpp" else None
    rng = np.random.default_rng(config.seed)
    template = init if init is not None else init_params(kind, K, D, rng)
    mask = positive_mask(kind, K, D)
    raw = to_raw(template.pack(), mask)
    opt = Adam(raw.size, config.learning_rate, config.beta1, config.beta2, config.epsilon)

    best_dev, _ = dataset_loglik(template, dev_set, config.eval_sample_factor, config.eval_seed)
    report = FitReport(best_params=template, best_dev=best_dev)
    report.epoch_log.append((0, float("nan"), best_dev))
    stale = 0
    grad_acc = np.zeros_like(raw)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        ll_sum = 0.0
        in_batch = 0
        for pos, idx in enumerate(order):
            stream = train_set[idx]
            natural = to_natural(raw, mask)
            samples = draw_samples(stream.horizon, default_num_samples(stream, config.train_sample_factor), rng)
            ev, integral, _, _, grad, err = evaluate(template, stream, samples, want_grad=True, vec=natural)
            ll = ev - integral
            if err >= 0 or not np.isfinite(ll) or not np.all(np.isfinite(grad)):
                raise NumericalError(f"non-finite objective on training stream {idx} at epoch {epoch}")
            ll_sum += ll
            # chain rule through the reparameterisation, and ascend
            grad_acc -= np.where(mask, grad * sigmoid(raw), grad)
            in_batch += 1
            if in_batch == config.batch_size or pos == len(order) - 1:
                opt.step(raw, grad_acc / in_batch)
                grad_acc[:] = 0.0
                in_batch = 0
        current = from_vector(kind, K, to_natural(raw, mask), D)
        dev_ll, _ = dataset_loglik(current, dev_set, config.eval_sample_factor, config.eval_seed)
        train_ll = ll_sum / max(train_set.num_events, 1)
        report.epoch_log.append((epoch, train_ll, dev_ll))
        report.stopped_epoch = epoch
        log.info("%s epoch %d train %.4f dev %.4f", kind, epoch, train_ll, dev_ll)
        if dev_ll > report.best_dev:
            report.best_dev, report.best_params, report.best_epoch = dev_ll, current, epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return report


def learning_curve(kind: str, train_set: Dataset, heldout: Dataset, prefix_sizes, config: TrainConfig,
                   dev_set: Dataset | None = None) -> list[tuple[int, float]]:
    """Held-out log-likelihood per event after training on growing prefixes of ``train_set``.

    Early stopping uses ``dev_set`` when given, otherwise ``heldout``.
    """
    sizes = list(prefix_sizes)
    if sizes != sorted(sizes) or (sizes and sizes[-1] > len(train_set)):
        raise ValueError("prefix sizes must be ascending and at most the training-set size")
    rows = []
    for n in sizes:
        fit = train(kind, train_set[:n], dev_set if dev_set is not None else heldout, config)
        ll, _ = dataset_loglik(fit.best_params, heldout, config.eval_sample_factor, config.eval_seed)
        rows.append((n, ll))
    return rows
