"""Command-line entry point: ``labeldiv {train,eval,sweep,decompose,gencheck}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, NumericalError, OutOfRangeError
from .harness import (ARMS, INFER, TASKS, ExperimentConfig, _write_csv, evaluate, fmt, load_data,
                      run, run_trial, sweep, trend_summary, write_results, write_sweep)
from .inference import ambiguity_decomposition


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _experiment_args(p: argparse.ArgumentParser) -> None:
    d = ExperimentConfig()
    p.add_argument("--task", choices=TASKS, default=d.task)
    p.add_argument("--arm", choices=ARMS, default=d.arm)
    p.add_argument("--k", type=int, default=None, help="base classes (default: 91 rotated, 32 scalar)")
    p.add_argument("--l", type=int, default=d.L, help="bins per head")
    p.add_argument("--m", type=int, default=d.M, help="number of heads")
    p.add_argument("--seed", type=int, default=d.seed, help="master seed")
    p.add_argument("--trials", type=int, default=d.trials)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--lr-decay", type=float, default=d.lr_decay)
    p.add_argument("--lr-decay-every", type=int, default=d.lr_decay_every)
    p.add_argument("--l2", type=float, default=d.l2)
    p.add_argument("--trunk", type=_ints, default=list(d.trunk), help="hidden widths, e.g. 256,128")
    p.add_argument("--infer", choices=INFER, default=d.infer)
    p.add_argument("--n-train", type=int, default=d.n_train)
    p.add_argument("--n-test", type=int, default=d.n_test)
    p.add_argument("--image-size", type=int, default=d.image_size)
    p.add_argument("--noise-sd", type=float, default=None)
    p.add_argument("--ensemble-file", default=None, help="explicit member sets (explicit arm)")
    p.add_argument("--empirical-means", action="store_true",
                   help="represent bins by the mean training target instead of the midpoint")
    p.add_argument("--threads", type=int, default=d.threads, help="trials run concurrently")
    p.add_argument("--out", default="results")


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        task=args.task, arm=args.arm, K=args.k, L=args.l, M=args.m, seed=args.seed,
        trials=args.trials, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        lr_decay=args.lr_decay, lr_decay_every=args.lr_decay_every, l2=args.l2,
        trunk=tuple(args.trunk), infer=args.infer, n_train=args.n_train, n_test=args.n_test,
        image_size=args.image_size, noise_sd=args.noise_sd, ensemble_file=args.ensemble_file,
        empirical_means=args.empirical_means, threads=args.threads,
    ).validate()


def cmd_train(args) -> int:
    cfg = _config(args)
    result = run(cfg)
    out = write_results(result, args.out)
    for t in result.trials:
        save_checkpoint(t.net, out / f"model_trial{t.trial}.npz")
    print(f"{cfg.arm} on {cfg.task}: MAE {result.mae_mean:.4f} +- {result.mae_sd:.4f} "
          f"over {len(result.trials)} trials -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    net = load_checkpoint(args.checkpoint)
    _, _, test = load_data(cfg)
    ev = evaluate(net, test.features, test.targets, cfg.infer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "eval.csv", ["checkpoint", "infer", "n", "mae", "accuracy"],
               [[str(args.checkpoint), cfg.infer, len(test), ev.mae, ev.accuracy]])
    print(f"MAE {ev.mae:.4f}  accuracy {ev.accuracy:.4f}  ({len(test)} test samples)")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    cells = sweep(cfg, args.l_values, args.m_values)
    out = write_sweep(cells, cfg, args.out)
    for L, dec in trend_summary(cells).items():
        print(f"L={L}: MAE {'decreases' if dec else 'does not decrease'} with M")
    failed = [c for c in cells if c.result is None]
    for c in failed:
        print(f"cell L={c.L} M={c.M} failed: {c.error}", file=sys.stderr)
    print(f"{len(cells) - len(failed)}/{len(cells)} cells -> {out / 'sweep.csv'}")
    return 0


def cmd_decompose(args) -> int:
    cfg = _config(args)
    data = load_data(cfg)
    if args.checkpoint:
        net = load_checkpoint(args.checkpoint)
    else:
        net = run_trial(cfg, data, 0).net
    if net.mode == "direct":
        raise ConfigError("decompose needs softmax heads; the direct arm has a single output")
    test = data[2]
    ev = evaluate(net, test.features, test.targets, "expected")
    rep = ambiguity_decomposition(ev.per_head, test.targets)
    rows = zip(range(len(test)), test.targets, ev.predictions, rep.ensemble_sq_err,
               rep.mean_individual_sq_err, rep.ambiguity, rep.residual())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "decompose.csv", ["index", "target", "ensemble_pred", "ensemble_sq_err",
                                       "mean_individual_sq_err", "ambiguity", "rel_residual"], rows)
    print(f"mean ensemble sq err {np.mean(rep.ensemble_sq_err):.4f} = "
          f"{np.mean(rep.mean_individual_sq_err):.4f} - {np.mean(rep.ambiguity):.4f} "
          f"(max rel residual {np.max(rep.residual()):.2e}) -> {out / 'decompose.csv'}")
    return 0


def cmd_gencheck(args) -> int:
    from .gradcheck import check_gradients

    results = check_gradients(args.configs, args.seed, args.eps)
    worst = 0.0
    for r in results:
        worst = max(worst, r.max_rel_error)
        print(f"config {r.index:3d}  {r.mode:16s} heads={list(r.head_sizes)} params={r.n_params:4d} "
              f"max rel err {r.max_rel_error:.3e}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "gencheck.csv", ["config", "mode", "n_params", "max_rel_error"],
                   [[r.index, r.mode, r.n_params, r.max_rel_error] for r in results])
    passed = worst < args.tol
    print(f"{'PASS' if passed else 'FAIL'}: worst relative error {fmt(worst)} (tolerance {args.tol:g})")
    if not passed:
        raise NumericalError(f"gradient check failed: {worst:.3e} >= {args.tol:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labeldiv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train and evaluate one method arm over several trials")
    _experiment_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint on the task's test split")
    _experiment_args(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run every (L, M) cell of a grid")
    _experiment_args(p)
    p.add_argument("--l-values", type=_ints, default=[8, 16, 32, 64])
    p.add_argument("--m-values", type=_ints, default=[2, 4, 8, 16, 32, 64])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decompose", help="per-sample ambiguity decomposition on the test split")
    _experiment_args(p)
    p.add_argument("--checkpoint", default=None, help="use a saved model instead of training one")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("gencheck", help="finite-difference gradient verification")
    p.add_argument("--configs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gencheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OutOfRangeError, FileNotFoundError) as exc:
        print(f"labeldiv: config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"labeldiv: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
