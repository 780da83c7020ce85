"""Synthetic studies: ground-truth generation, cross-fitting pilots, intensity
MSE, type censoring, and the superposition/insulation harness."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import DSMPPParams, SEMPPParams, softplus_scaled
from .ctlstm import GATES, CTLSTMParams, param_count
from .events import Dataset, EventStream
from .models import KINDS
from .sampler import SampleConfig, sample_dataset
from .trainer import TrainConfig, dataset_loglik, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundTruthSpec:
    kind: str = "sempp"
    K: int = 5
    seed: int = 0
    length_range: tuple[int, int] = (20, 100)
    counts: tuple[int, int, int] = (800, 100, 100)
    D: int = 8  # generator hidden size for nsmmpp

    def __post_init__(self):
        lo, hi = self.length_range
        if not 1 <= lo <= hi <= 10000:
            raise ValueError("length_range must lie within [1, 10000]")
        if min(self.counts) < 1:
            raise ValueError("stream counts must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")


PAPER_COUNTS = (8000, 1000, 1000)
# early stopping alone ends the synthetic fits; the cap only guards against a runaway run
EXPERIMENT_MAX_EPOCHS = 500
DESK_COUNTS = (800, 100, 100)


def gen_ground_truth(spec: GroundTruthSpec):
    rng = np.random.default_rng([spec.seed, 101])
    K = spec.K
    if spec.kind == "sempp":
        return SEMPPParams(rng.uniform(0.0, 1.0, K), rng.uniform(0.0, 1.0, (K, K)), rng.uniform(10.0, 20.0, (K, K)))
    if spec.kind == "dsmpp":
        return DSMPPParams(rng.uniform(-1.0, 1.0, K), rng.uniform(-1.0, 1.0, (K, K)),
                           rng.uniform(10.0, 20.0, (K, K)), np.ones(K))
    vec = rng.uniform(-1.0, 1.0, param_count(K, spec.D))
    # the scales are drawn in the same unconstrained space as training uses
    vec[-K:] = softplus_scaled(vec[-K:], 1.0)
    return CTLSTMParams.from_vector(K, spec.D, vec)


def gen_synthetic(params, spec: GroundTruthSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Length-capped streams: ``I ~ Unif{length_range}``, horizon = last event time."""
    out = []
    for split, n in enumerate(spec.counts):
        rng = np.random.default_rng([spec.seed, 202, split])
        lengths = rng.integers(spec.length_range[0], spec.length_range[1] + 1, n)
        cfg = SampleConfig(max_events=int(lengths[0]), seed=spec.seed * 1000 + split)
        out.append(sample_dataset(params, n, cfg, lengths=lengths))
    return tuple(out)


def censor(dataset: Dataset, removed) -> Dataset:
    """Drop every event whose type is in ``removed`` and renumber survivors densely."""
    removed = set(int(k) for k in removed)
    kept = [k for k in range(1, dataset.num_types + 1) if k not in removed]
    remap = np.zeros(dataset.num_types + 1, dtype=np.int64)
    remap[kept] = np.arange(1, len(kept) + 1)
    streams = []
    for s in dataset:
        keep = remap[s.types] > 0
        streams.append(EventStream(s.times[keep], remap[s.types[keep]], s.horizon))
    return Dataset(streams, max(len(kept), 1))


def intensity_mse(true_model, fitted_model, dataset: Dataset, n_probe: int = 100) -> float:
    """MSE of fitted intensities as a fraction of the true intensity's variance.

    Probes are ``n_probe`` evenly spaced times per stream, in ``(0, T]``;
    both models condition on the same true history.  Computed per type and
    averaged over types.
    """
    true_vals, fit_vals = [], []
    for s in dataset:
        probes = s.horizon * np.arange(1, n_probe + 1) / n_probe
        # probe p belongs to the interval after the events strictly before it
        n_before = np.searchsorted(s.times, probes, side="left")
        ts, fs = true_model.start(), fitted_model.start()
        for i in range(len(s) + 1):
            sel = probes[n_before == i]
            if sel.size:
                true_vals.append(np.atleast_2d(true_model.intensities(ts, sel)))
                fit_vals.append(np.atleast_2d(fitted_model.intensities(fs, sel)))
            if i < len(s):
                k, t = int(s.types[i]), float(s.times[i])
                ts, fs = true_model.advance(ts, k, t), fitted_model.advance(fs, k, t)
    truth = np.concatenate(true_vals)
    pred = np.concatenate(fit_vals)
    return float(np.mean(((pred - truth) ** 2).mean(axis=0) / truth.var(axis=0)))


@dataclass
class PilotReport:
    loglik: dict = field(default_factory=dict)  # (generator, fitted) -> held-out ll/event
    oracle: dict = field(default_factory=dict)  # generator -> ll/event
    per_stream: dict = field(default_factory=dict)  # (generator, fitted|"oracle") -> per-stream ll
    intensity_mse: dict = field(default_factory=dict)  # (generator, fitted) -> fraction of variance
    epochs: dict = field(default_factory=dict)

    def rows(self):
        for (gen, fit), ll in sorted(self.loglik.items()):
            yield {"generator": gen, "fitted": fit, "ll_per_event": ll, "oracle": self.oracle[gen],
                   "intensity_mse": self.intensity_mse.get((gen, fit))}


PILOT_GEN_D = 48


def pilot_experiment(seed: int = 0, counts=DESK_COUNTS, K: int = 5, gen_D: int = PILOT_GEN_D, fit_D: int = 8,
                     generators=KINDS, fitted=KINDS, mse_kinds=("sempp", "nsmmpp"),
                     config: TrainConfig | None = None) -> PilotReport:
    """Fit every model kind to data from every generator kind and score on test data.

    ``gen_D`` is the hidden size of the neural generator and ``fit_D`` that of
    the fitted neural model.  Seeds depend on the generator kind only, so a
    single-generator run reproduces the matching slice of a full run.
    """
    config = config or TrainConfig(max_epochs=EXPERIMENT_MAX_EPOCHS)
    report = PilotReport()
    for gen in generators:
        g_idx = KINDS.index(gen)
        spec = GroundTruthSpec(kind=gen, K=K, seed=seed * 10 + g_idx, counts=tuple(counts), D=gen_D)
        truth = gen_ground_truth(spec)
        tr, dv, te = gen_synthetic(truth, spec)
        report.oracle[gen], report.per_stream[(gen, "oracle")] = dataset_loglik(truth, te)
        for fit_kind in fitted:
            cfg = replace(config, model_kind=fit_kind, D=fit_D, seed=config.seed + 7 * g_idx)
            fit = train(fit_kind, tr, dv, cfg)
            ll, per = dataset_loglik(fit.best_params, te)
            report.loglik[(gen, fit_kind)] = ll
            report.per_stream[(gen, fit_kind)] = per
            report.epochs[(gen, fit_kind)] = fit.stopped_epoch
            if fit_kind in mse_kinds:
                report.intensity_mse[(gen, fit_kind)] = intensity_mse(truth, fit.best_params, te)
            log.info("pilot gen=%s fit=%s ll=%.4f oracle=%.4f", gen, fit_kind, ll, report.oracle[gen])
    return report


ALL_PATTERNS = [set(c) for r in range(1, 5) for c in itertools.combinations(range(1, 6), r)]


def sample_patterns(n: int, seed: int) -> list[set]:
    """``n`` distinct censoring patterns among the non-empty proper subsets of 5 types."""
    idx = np.random.default_rng(seed).choice(len(ALL_PATTERNS), size=n, replace=False)
    return [ALL_PATTERNS[i] for i in sorted(idx)]


def missing_data_experiment(base_seed: int = 0, patterns=None, counts=DESK_COUNTS, D: int = 8,
                            config: TrainConfig | None = None) -> list[dict]:
    """Censor SE-MPP data by type, fit SE-MPP and N-SM-MPP to what remains, and compare on test."""
    config = config or TrainConfig(max_epochs=EXPERIMENT_MAX_EPOCHS)
    patterns = sample_patterns(5, base_seed) if patterns is None else [set(p) for p in patterns]
    spec = GroundTruthSpec(kind="sempp", K=5, seed=base_seed, counts=tuple(counts))
    truth = gen_ground_truth(spec)
    full = gen_synthetic(truth, spec)
    rows = []
    for pattern in patterns:
        if not pattern or not pattern <= set(range(1, 6)):
            raise ValueError(f"censoring pattern {pattern} must be a non-empty subset of 1..5")
        tr, dv, te = (censor(d, pattern) for d in full)
        row = {"removed": sorted(pattern), "K": tr.num_types, "test_events": te.num_events}
        for kind in ("sempp", "nsmmpp"):
            fit = train(kind, tr, dv, replace(config, model_kind=kind, D=D))
            row[kind], row[f"{kind}_per_stream"] = dataset_loglik(fit.best_params, te)
        log.info("missing %s sempp=%.4f nsmmpp=%.4f", row["removed"], row["sempp"], row["nsmmpp"])
        rows.append(row)
    return rows


@dataclass
class SuperpositionReport:
    decomposable_max_diff: float
    rigged_max_rel_dev: float
    unrigged_max_rel_dev: float
    violations: list

    @property
    def passed(self) -> bool:
        return self.decomposable_max_diff == 0.0 and self.rigged_max_rel_dev <= 1e-6 \
            and self.unrigged_max_rel_dev >= 1e-3


def _interleave(rng, base: EventStream, n_extra: int, extra_types, horizon: float) -> EventStream:
    extra_t = rng.uniform(0, horizon, n_extra)
    extra_k = rng.choice(extra_types, n_extra)
    t = np.concatenate([base.times, extra_t])
    k = np.concatenate([base.types, extra_k])
    order = np.argsort(t)
    return EventStream(t[order], k[order], horizon)


def block_diagonal_dsmpp(rng, K1: int, K2: int) -> DSMPPParams:
    K = K1 + K2
    alpha = np.zeros((K, K))
    alpha[:K1, :K1] = rng.uniform(-1, 1, (K1, K1))
    alpha[K1:, K1:] = rng.uniform(-1, 1, (K2, K2))
    return DSMPPParams(rng.uniform(-1, 1, K), alpha, rng.uniform(0.5, 3, (K, K)), rng.uniform(0.5, 2, K))


def rigged_ctlstm(rng, K: int, D: int, insulated_nodes, ignored_type: int, bias: float = 37.0) -> CTLSTMParams:
    """Random CT-LSTM whose nodes in ``insulated_nodes`` ignore events of ``ignored_type``.

    A dedicated embedding coordinate fires only for that type; through
    large input weights it forces ``f = fbar = 1`` and ``i = ibar = 0`` on
    the insulated nodes.  Those nodes ignore the hidden state of the other
    nodes, and their output gates and decay rates are constant (bias only),
    so an ignored event leaves their whole trajectory unchanged.
    """
    S = np.asarray(insulated_nodes)
    vec = rng.uniform(-1, 1, param_count(K, D))
    vec[-K:] = np.abs(vec[-K:]) + 0.5
    p = CTLSTMParams.from_vector(K, D, vec)
    embed, W, U, b = p.embed.copy(), p.W.copy(), p.U.copy(), p.b.copy()
    flag = D - 1  # embedding coordinate reserved as the "ignore me" flag
    embed[:, flag] = 0.0
    embed[ignored_type, :] = 0.0
    embed[ignored_type, flag] = 1.0
    W[:, :, flag] = 0.0
    gi, gf, gib, gfb = (GATES.index(g) for g in ("i", "f", "ibar", "fbar"))
    # the flag shifts the pre-activations by -2*bias / +2*bias, saturating the gates
    W[gi][S, flag] = -2 * bias
    W[gib][S, flag] = -2 * bias
    W[gf][S, flag] = 2 * bias
    W[gfb][S, flag] = 2 * bias
    others = np.setdiff1d(np.arange(D), S)
    for j in range(7):
        U[j][np.ix_(S, others)] = 0.0
    for g in ("o", "d"):
        W[GATES.index(g)][S, :] = 0.0
        U[GATES.index(g)][S, :] = 0.0
    return CTLSTMParams(embed, W, U, b, p.w, p.s)


def superposition_check(seed: int = 0, n_interleavings: int = 100) -> SuperpositionReport:
    rng = np.random.default_rng(seed)
    violations = []
    # (a) block-diagonal decomposable model: types {1,2} vs {3,4,5}
    dm = block_diagonal_dsmpp(rng, 2, 3)
    worst_block = 0.0
    for _ in range(n_interleavings):
        horizon = 10.0
        own = EventStream(np.sort(rng.uniform(0, horizon, 6)), rng.integers(1, 3, 6), horizon)
        mixed = _interleave(rng, own, 8, [3, 4, 5], horizon)
        probe = horizon + rng.uniform(0.01, 2.0)
        a = dm.intensities(state_of(dm, own), probe)[:2]
        b = dm.intensities(state_of(dm, mixed), probe)[:2]
        diff = float(np.max(np.abs(a - b)))
        worst_block = max(worst_block, diff)
        if diff != 0.0:
            violations.append(("decomposable", diff))
    # (b) gate-rigged neural model: nodes S ignore type 3, type 1 reads only S
    K, D = 3, 6
    S = [0, 1, 2]
    rigged = rigged_ctlstm(rng, K, D, S, ignored_type=3)
    w = rigged.w.copy()
    w[0, 3:] = 0.0
    rigged = CTLSTMParams(rigged.embed, rigged.W, rigged.U, rigged.b, w, rigged.s)
    free = CTLSTMParams(rigged.embed, rng.uniform(-1, 1, rigged.W.shape), rng.uniform(-1, 1, rigged.U.shape),
                        rigged.b, w, rigged.s)
    worst_rigged, worst_free = 0.0, 0.0
    for _ in range(n_interleavings):
        horizon = 12.0
        own = EventStream(np.sort(rng.uniform(0, horizon, 5)), rng.integers(1, 3, 5), horizon)
        mixed = _interleave(rng, own, 4, [3], horizon)
        probe = horizon + rng.uniform(0.01, 3.0)
        for model, store in ((rigged, "rigged"), (free, "free")):
            a = model.intensities(state_of(model, own), probe)[0]
            b = model.intensities(state_of(model, mixed), probe)[0]
            dev = abs(a - b) / abs(a)
            if store == "rigged":
                worst_rigged = max(worst_rigged, dev)
                if dev > 1e-6:
                    violations.append(("rigged", dev))
            else:
                worst_free = max(worst_free, dev)
    return SuperpositionReport(worst_block, worst_rigged, worst_free, violations)


def state_of(model, stream: EventStream):
    state = model.start()
    for k, t in zip(stream.types, stream.times):
        state = model.advance(state, int(k), float(t))
    return state
