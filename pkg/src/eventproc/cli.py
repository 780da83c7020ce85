"""Command-line entry point: ``eventproc <command> --flag value ...``.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import experiments
from .events import Dataset, EventStream, StreamError, load_dataset, save_dataset
from .likelihood import NumericalError, finite_diff_check, log_likelihood
from .models import KINDS, count_params, load_model, save_model
from .predictor import evaluate_predictions
from .sampler import BoundViolation, SampleConfig, sample_dataset
from .trainer import TrainConfig, train

log = logging.getLogger("eventproc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _header(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(path, header_comment, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header_comment, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        writer.writerows(rows)


def cmd_paramcount(args):
    if args.kind == "nsmmpp" and args.D is None:
        raise UsageError("--D is required for nsmmpp")
    print(count_params(args.kind, args.K, args.D))


def _random_instance(kind, K, D, rng, n_events):
    if kind == "sempp":
        from .classical import SEMPPParams
        model = SEMPPParams(rng.uniform(0.2, 1, K), rng.uniform(0, 1, (K, K)), rng.uniform(0.5, 3, (K, K)))
    elif kind == "dsmpp":
        from .classical import DSMPPParams
        model = DSMPPParams(rng.uniform(-1, 1, K), rng.uniform(-1, 1, (K, K)), rng.uniform(0.5, 3, (K, K)),
                            rng.uniform(0.5, 2, K))
    else:
        from .ctlstm import CTLSTMParams
        vec = rng.uniform(-1, 1, count_params("nsmmpp", K, D))
        vec[-K:] = rng.uniform(0.5, 2, K)
        model = CTLSTMParams.from_vector(K, D, vec)
    horizon = float(rng.uniform(2, 10))
    times = np.sort(rng.uniform(0, horizon, n_events))
    return model, EventStream(times, rng.integers(1, K + 1, n_events), horizon)


def cmd_gradcheck(args):
    rng = np.random.default_rng(args.seed)
    model, stream = _random_instance(args.kind, args.K, args.D, rng, args.events)
    err = finite_diff_check(model, stream, args.step, None, args.seed)
    verdict = "PASS" if err <= args.tol else "FAIL"
    print(f"max_rel_error {err:.3e} {verdict}")
    return 0 if verdict == "PASS" else 2


def cmd_sample(args):
    if (args.T is None) == (args.max_events is None):
        raise UsageError("give exactly one of --T and --max-events")
    model = load_model(args.model)
    cfg = SampleConfig(horizon=args.T, max_events=args.max_events, seed=args.seed, variant=args.variant)
    data = sample_dataset(model, args.n, cfg)
    save_dataset(data, args.out, header=_header(args))


def cmd_eval(args):
    model = load_model(args.model)
    data = load_dataset(args.data)
    _check_types(model, data)
    rows = []
    for j, s in enumerate(data):
        n = max(args.factor * len(s), 1)
        r = log_likelihood(model, s, n, np.random.default_rng([args.seed, j]))
        rows.append({"stream": j, "events": len(s), "total": r.total, "type_term": r.type_term,
                     "time_term": r.time_term})
    n_ev = max(data.num_events, 1)
    agg = {key: float(sum(r[key] for r in rows)) for key in ("total", "type_term", "time_term")}
    agg.update({f"{key}_per_event": agg[key] / n_ev for key in ("total", "type_term", "time_term")})
    agg["events"] = data.num_events
    _write_json({"config": _header(args), "aggregate": agg, "streams": rows}, args.out)


def _check_types(model, data: Dataset):
    if model.num_types != data.num_types:
        raise StreamError(f"model has K={model.num_types} but data has K={data.num_types}")


def cmd_train(args):
    tr = load_dataset(args.train)
    dv = load_dataset(args.dev)
    if tr.num_types != dv.num_types:
        raise StreamError("train and dev files disagree on K")
    cfg = TrainConfig(model_kind=args.kind, D=args.D, learning_rate=args.lr, max_epochs=args.max_epochs,
                      patience=args.patience, seed=args.seed, batch_size=args.batch_size)
    fit = train(args.kind, tr, dv, cfg)
    save_model(fit.best_params, args.out)
    if args.log:
        _write_csv(args.log, _header(args), ["epoch", "train_ll", "dev_ll"], fit.epoch_log)
    print(json.dumps({"best_epoch": fit.best_epoch, "stopped_epoch": fit.stopped_epoch,
                      "best_dev_ll_per_event": fit.best_dev}))


def cmd_predict(args):
    model = load_model(args.model)
    data = load_dataset(args.data)
    _check_types(model, data)
    rows = [] if args.csv else None
    metrics = evaluate_predictions(model, data, args.m, args.seed, rows)
    _write_json({"config": _header(args), **asdict(metrics)}, args.out)
    if args.csv:
        _write_csv(args.csv, _header(args), ["stream", "index", "t_true", "t_hat", "k_true", "k_hat"], rows)


def _pilot_job(job):
    seed, counts, gen, gen_D, fit_D, config = job
    return experiments.pilot_experiment(seed, counts, gen_D=gen_D, fit_D=fit_D, generators=(gen,), config=config)


def _missing_job(job):
    seed, pattern, counts, fit_D, config = job
    return experiments.missing_data_experiment(seed, [pattern], counts, D=fit_D, config=config)[0]


def _map(fn, jobs, threads):
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(threads) as pool:
        return list(pool.map(fn, jobs))


def cmd_experiment(args):
    counts = experiments.PAPER_COUNTS if args.scale == "paper" else experiments.DESK_COUNTS
    config = TrainConfig(max_epochs=args.max_epochs, patience=args.patience, seed=args.seed, learning_rate=args.lr)
    if args.mode == "superposition":
        rep = experiments.superposition_check(args.seed)
        out = {"config": _header(args), "passed": bool(rep.passed),
               "decomposable_max_diff": float(rep.decomposable_max_diff),
               "rigged_max_rel_dev": float(rep.rigged_max_rel_dev),
               "unrigged_max_rel_dev": float(rep.unrigged_max_rel_dev),
               "violations": [[name, float(v)] for name, v in rep.violations]}
        _write_json(out, args.out)
        return 0 if rep.passed else 2
    if args.mode == "pilot":
        parts = _map(_pilot_job, [(args.seed, counts, g, args.gen_D, args.D, config) for g in KINDS], args.threads)
        rows = [row for p in parts for row in p.rows()]
        _write_json({"config": _header(args), "grid": rows}, args.out)
        if args.csv:
            _write_csv(args.csv, _header(args), ["generator", "fitted", "ll_per_event", "oracle", "intensity_mse"],
                       [[r[k] for k in ("generator", "fitted", "ll_per_event", "oracle", "intensity_mse")]
                        for r in rows])
        return 0
    patterns = experiments.ALL_PATTERNS if args.full else experiments.sample_patterns(args.patterns, args.seed)
    rows = _map(_missing_job, [(args.seed, p, counts, args.D, config) for p in patterns], args.threads)
    table = [{"removed": r["removed"], "sempp": r["sempp"], "nsmmpp": r["nsmmpp"]} for r in rows]
    _write_json({"config": _header(args), "patterns": table}, args.out)
    if args.csv:
        _write_csv(args.csv, _header(args), ["removed", "sempp_ll", "nsmmpp_ll"],
                   [[" ".join(map(str, r["removed"])), r["sempp"], r["nsmmpp"]] for r in table])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eventproc", description=__doc__.splitlines()[0])
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("paramcount", help="number of trainable parameters")
    q.add_argument("--kind", choices=KINDS, required=True)
    q.add_argument("--K", type=int, required=True)
    q.add_argument("--D", type=int)
    q.set_defaults(func=cmd_paramcount)

    q = sub.add_parser("gradcheck", help="finite-difference check of the likelihood gradient")
    q.add_argument("--kind", choices=KINDS, required=True)
    q.add_argument("--K", type=int, required=True)
    q.add_argument("--D", type=int, default=4)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--events", type=int, default=10)
    q.add_argument("--step", type=float, default=1e-5)
    q.add_argument("--tol", type=float, default=1e-4)
    q.set_defaults(func=cmd_gradcheck)

    q = sub.add_parser("sample", help="draw streams from a model file")
    q.add_argument("--model", required=True)
    q.add_argument("--T", type=float)
    q.add_argument("--max-events", type=int)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--variant", choices=("aggregate", "per_type"), default="aggregate")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_sample)

    q = sub.add_parser("eval", help="held-out log-likelihood")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--factor", type=int, default=10, help="integration samples per event")
    q.add_argument("--out")
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("train", help="fit a model with Adam and early stopping")
    q.add_argument("--kind", choices=KINDS, required=True)
    q.add_argument("--train", required=True)
    q.add_argument("--dev", required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--D", type=int, default=8)
    q.add_argument("--lr", type=float, default=1e-3)
    q.add_argument("--max-epochs", type=int, default=50)
    q.add_argument("--patience", type=int, default=5)
    q.add_argument("--batch-size", type=int, default=1)
    q.add_argument("--out", required=True)
    q.add_argument("--log", help="epoch log CSV")
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("predict", help="minimum-Bayes-risk next-event prediction")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--m", type=int, default=1000)
    q.add_argument("--out")
    q.add_argument("--csv")
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("experiment", help="synthetic studies")
    q.add_argument("--mode", choices=("pilot", "missing", "superposition"), required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--scale", choices=("desk", "paper"), default="desk")
    q.add_argument("--patterns", type=int, default=5, help="censoring patterns to sample (missing mode)")
    q.add_argument("--full", action="store_true", help="run every censoring pattern")
    q.add_argument("--D", type=int, default=8, help="hidden size of fitted neural models")
    q.add_argument("--gen-D", type=int, default=experiments.PILOT_GEN_D, help="hidden size of the neural generator")
    q.add_argument("--lr", type=float, default=1e-3)
    q.add_argument("--max-epochs", type=int, default=experiments.EXPERIMENT_MAX_EPOCHS)
    q.add_argument("--patience", type=int, default=5)
    q.add_argument("--out")
    q.add_argument("--csv")
    q.set_defaults(func=cmd_experiment)

    for action in sub.choices.values():
        action.add_argument("--threads", type=int, default=1)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args) or 0
    except (UsageError, StreamError, ValueError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (NumericalError, BoundViolation, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
