"""Experiment runner: method arms, trials, L x M sweeps and result files.

Seeds
-----
The dataset is generated from the master seed.  Trial ``i`` draws three
seeds (bins, init, shuffle) from ``SeedSequence([master_seed, i])``, so a
run with ``trials=n`` is reproducible from the master seed alone and trial
``i`` does not depend on how many other trials run.

Output files (all in ``out``)
-----------------------------
``results.csv``     one row per trial, then ``mean`` and ``sd`` rows
                    (sample standard deviation, 0 for a single trial)
``loss_curve.csv``  one row per (trial, epoch)
``run.json``        config echo, summary, wall-clock, timestamps, build id

CSV floats use 17 significant digits so they parse back exactly.  Anything
time-dependent lives only in the JSON sidecar.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, kernels
from .binning import (DiscretizationEnsemble, equal_width_base, equal_width_overlapping,
                      load_ensemble_file, randomized_bins)
from .encoding import overlap_matrices
from .errors import ConfigError
from .inference import ambiguity_decomposition, ensemble_average, expected_values, map_estimate, marginal_posterior
from .net import MultiHeadNetwork, TrainConfig, TrainLog, forward, train
from .synthdata import SCALAR_FUNCTIONS, RotatedPatternTask, ScalarTask, generate_rotated, generate_scalar

ARMS = ("direct", "rvc", "equal-width", "randomized", "explicit")
TASKS = ("rotated", *SCALAR_FUNCTIONS)
INFER = ("expected", "map")

RESULT_FIELDS = ["trial", "bins_seed", "init_seed", "shuffle_seed", "mae", "accuracy",
                 "final_train_loss", "ensemble_sq_err", "mean_individual_sq_err", "ambiguity"]
CURVE_FIELDS = ["trial", "epoch", "lr", "train_loss", "val_mae"]
SWEEP_FIELDS = ["L", "M", "mae_mean", "mae_sd", "trials", "status", "error"]


@dataclass
class ExperimentConfig:
    task: str = "rotated"
    arm: str = "randomized"
    K: int | None = None
    L: int = 16
    M: int = 32
    seed: int = 0
    trials: int = 3
    epochs: int = 15
    batch_size: int = 32
    lr: float = 1e-3
    lr_decay: float = 0.1
    lr_decay_every: int = 10
    l2: float = 0.0
    trunk: tuple[int, ...] = (256, 128)
    infer: str = "expected"
    n_train: int = 2000
    n_test: int = 2000
    image_size: int = 16
    noise_sd: float | None = None
    ensemble_file: str | None = None
    empirical_means: bool = False
    threads: int = 1

    @property
    def n_classes(self) -> int:
        if self.K is not None:
            return self.K
        if self.task == "rotated":
            return 91  # one class per integer degree
        return 32

    def validate(self) -> "ExperimentConfig":
        if self.task not in TASKS:
            raise ConfigError(f"--task must be one of {TASKS}, got {self.task!r}")
        if self.arm not in ARMS:
            raise ConfigError(f"--arm must be one of {ARMS}, got {self.arm!r}")
        if self.infer not in INFER:
            raise ConfigError(f"--infer must be one of {INFER}, got {self.infer!r}")
        K = self.n_classes
        if K < 1:
            raise ConfigError("K must be >= 1")
        if self.arm in ("equal-width", "randomized") and (self.L < 1 or self.M < 1):
            raise ConfigError("L and M must be >= 1")
        if self.arm == "randomized" and self.L >= K:
            raise ConfigError(f"randomized bins need L < K, got L={self.L}, K={K}")
        if self.arm == "explicit" and not self.ensemble_file:
            raise ConfigError("the explicit arm needs --ensemble-file")
        if self.arm == "direct" and self.infer == "map":
            raise ConfigError("MAP inference needs softmax heads; not available for the direct arm")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if any(w < 1 for w in self.trunk):
            raise ConfigError("trunk widths must be >= 1")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be >= 1")
        self.train_config(0)  # optimizer constraints
        self.make_task()
        return self

    def make_task(self):
        if self.task == "rotated":
            kw = {} if self.noise_sd is None else {"noise_sd": self.noise_sd}
            return RotatedPatternTask(image_size=self.image_size, n_train=self.n_train,
                                      n_test=self.n_test, seed=self.seed, **kw)
        kw = {} if self.noise_sd is None else {"noise_sd": self.noise_sd}
        return ScalarTask(fn_id=self.task, n_train=self.n_train, n_test=self.n_test,
                          seed=self.seed, **kw)

    def train_config(self, shuffle_seed: int) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
                           lr_decay=self.lr_decay, lr_decay_every=self.lr_decay_every,
                           l2=self.l2, seed=shuffle_seed, empirical_means=self.empirical_means)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["trunk"] = list(self.trunk)
        d["K"] = self.n_classes
        return d


def trial_seeds(master: int, trial: int) -> tuple[int, int, int]:
    """(bins, init, shuffle) seeds of one trial."""
    s = np.random.SeedSequence([master, trial]).generate_state(3, dtype=np.uint32)
    return int(s[0]), int(s[1]), int(s[2])


def load_data(config: ExperimentConfig):
    task = config.make_task()
    if isinstance(task, RotatedPatternTask):
        train_ds, test_ds = generate_rotated(task)
    else:
        train_ds, test_ds = generate_scalar(task)
    return task, train_ds, test_ds


def build_ensemble(config: ExperimentConfig, support, bins_seed: int) -> DiscretizationEnsemble:
    base = equal_width_base(support, config.n_classes)
    if config.arm in ("direct", "rvc"):
        return DiscretizationEnsemble([base], base)
    if config.arm == "equal-width":
        return equal_width_overlapping(base, config.L, config.M)
    if config.arm == "randomized":
        return randomized_bins(base, config.L, config.M, bins_seed)
    return load_ensemble_file(config.ensemble_file, base)


def network_mode(arm: str) -> str:
    return {"direct": "direct", "rvc": "rvc"}.get(arm, "label-diversity")


@dataclass
class Evaluation:
    predictions: np.ndarray
    classes: np.ndarray
    mae: float
    accuracy: float
    per_head: np.ndarray | None = None


def evaluate(net: MultiHeadNetwork, features, targets, infer: str = "expected") -> Evaluation:
    """Point predictions, predicted base classes, MAE and class accuracy."""
    targets = np.asarray(targets, dtype=np.float64)
    base = net.ensemble.base
    fs = forward(net, features)
    per_head = None
    if net.mode == "direct":
        preds = net.target_center + net.target_scale * fs.outputs[:, 0]
        classes = base.locate(np.clip(preds, base.edges[0], base.edges[-1]))
    elif infer == "map":
        classes = map_estimate(marginal_posterior(fs, overlap_matrices(net.ensemble)))
        preds = base.midpoints[classes]
    else:
        per_head = expected_values(fs, net.representatives())
        preds = ensemble_average(per_head)
        classes = base.locate(np.clip(preds, base.edges[0], base.edges[-1]))
    mae, acc = metrics(preds, targets, classes, base.locate(targets))
    return Evaluation(preds, classes, mae, acc, per_head)


def metrics(predictions, targets, pred_classes=None, true_classes=None) -> tuple[float, float]:
    """MAE, and the fraction of exact class matches (NaN without classes)."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.size == 0 or p.shape != t.shape:
        raise ConfigError(f"metrics need equal, nonempty inputs, got {p.shape} and {t.shape}")
    mae = float(np.mean(np.abs(p - t)))
    if pred_classes is None:
        return mae, float("nan")
    return mae, float(np.mean(np.asarray(pred_classes) == np.asarray(true_classes)))


@dataclass
class TrialResult:
    trial: int
    seeds: tuple[int, int, int]
    mae: float
    accuracy: float
    final_train_loss: float
    ensemble_sq_err: float
    mean_individual_sq_err: float
    ambiguity: float
    log: TrainLog
    net: MultiHeadNetwork = field(repr=False, default=None)

    def row(self) -> list:
        return [self.trial, *self.seeds, self.mae, self.accuracy, self.final_train_loss,
                self.ensemble_sq_err, self.mean_individual_sq_err, self.ambiguity]


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


@dataclass
class RunResult:
    config: ExperimentConfig
    trials: list[TrialResult]
    wall_clock: float = 0.0
    build: dict = field(default_factory=dict)

    @property
    def maes(self) -> list[float]:
        return [t.mae for t in self.trials]

    @property
    def mae_mean(self) -> float:
        return _mean_sd(self.maes)[0]

    @property
    def mae_sd(self) -> float:
        return _mean_sd(self.maes)[1]

    def summary(self) -> dict:
        out = {}
        for name in RESULT_FIELDS[4:]:
            mean, sd = _mean_sd([getattr(t, name) for t in self.trials])
            out[name] = {"mean": mean, "sd": sd}
        return out


def run_trial(config: ExperimentConfig, data, trial: int) -> TrialResult:
    task, train_ds, test_ds = data
    seeds = trial_seeds(config.seed, trial)
    ens = build_ensemble(config, task.support, seeds[0])
    net = MultiHeadNetwork.build(train_ds.features.shape[1], config.trunk, ens,
                                 mode=network_mode(config.arm), seed=seeds[1])
    net, log = train(net, train_ds.features, train_ds.targets, config.train_config(seeds[2]),
                     val=(test_ds.features, test_ds.targets))
    ev = evaluate(net, test_ds.features, test_ds.targets, config.infer)
    dec = [float("nan")] * 3
    if ev.per_head is not None:
        rep = ambiguity_decomposition(ev.per_head, test_ds.targets)
        dec = [float(np.mean(rep.ensemble_sq_err)), float(np.mean(rep.mean_individual_sq_err)),
               float(np.mean(rep.ambiguity))]
    final = log.records[-1].train_loss if log.records else float("nan")
    return TrialResult(trial, seeds, ev.mae, ev.accuracy, final, *dec, log, net)


def build_id() -> dict:
    info = {"version": __version__, "backend": kernels.BACKEND}
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        if rev.returncode == 0:
            info["git"] = rev.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return info


def run(config: ExperimentConfig, data=None) -> RunResult:
    config.validate()
    start = time.perf_counter()
    data = data or load_data(config)
    if config.threads > 1 and config.trials > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            trials = list(pool.map(lambda i: run_trial(config, data, i), range(config.trials)))
    else:
        trials = [run_trial(config, data, i) for i in range(config.trials)]
    return RunResult(config, trials, time.perf_counter() - start, build_id())


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_results(result: RunResult, out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [t.row() for t in result.trials]
    summ = result.summary()
    blanks = ["", "", ""]
    rows.append(["mean", *blanks, *(summ[k]["mean"] for k in RESULT_FIELDS[4:])])
    rows.append(["sd", *blanks, *(summ[k]["sd"] for k in RESULT_FIELDS[4:])])
    _write_csv(out / "results.csv", RESULT_FIELDS, rows)
    curve = [[t.trial, r.epoch, r.lr, r.train_loss, r.val_mae]
             for t in result.trials for r in t.log.records]
    _write_csv(out / "loss_curve.csv", CURVE_FIELDS, curve)
    sidecar = {
        "config": result.config.to_dict(),
        "summary": summ,
        "wall_clock_seconds": result.wall_clock,
        "finished_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "build": result.build,
    }
    (out / "run.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return out


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class SweepCell:
    L: int
    M: int
    result: RunResult | None
    error: str = ""

    def row(self) -> list:
        if self.result is None:
            return [self.L, self.M, float("nan"), float("nan"), 0, "failed", self.error]
        r = self.result
        return [self.L, self.M, r.mae_mean, r.mae_sd, len(r.trials), "ok", ""]


def sweep(config: ExperimentConfig, L_values: Sequence[int], M_values: Sequence[int]) -> list[SweepCell]:
    """One run per (L, M) cell; a failing cell is recorded and the sweep goes on."""
    if not L_values or not M_values:
        raise ConfigError("sweep needs nonempty L and M grids")
    data = load_data(config)
    cells = []
    for L in L_values:
        for M in M_values:
            cfg = dataclasses.replace(config, L=int(L), M=int(M))
            try:
                cells.append(SweepCell(L, M, run(cfg, data)))
            except (ConfigError, ArithmeticError, RuntimeError) as exc:
                cells.append(SweepCell(L, M, None, str(exc)))
    return cells


def trend_summary(cells: Sequence[SweepCell]) -> dict[int, bool]:
    """Per L: does mean MAE strictly decrease as M grows (over the successful cells)?"""
    out = {}
    for L in sorted({c.L for c in cells}):
        ok = sorted((c.M, c.result.mae_mean) for c in cells if c.L == L and c.result is not None)
        maes = [m for _, m in ok]
        out[L] = len(maes) > 1 and all(b < a for a, b in zip(maes, maes[1:]))
    return out


def write_sweep(cells: Sequence[SweepCell], config: ExperimentConfig, out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", SWEEP_FIELDS, [c.row() for c in cells])
    trend = trend_summary(cells)
    _write_csv(out / "sweep_trend.csv", ["L", "decreasing_in_M"],
               [[L, "true" if v else "false"] for L, v in trend.items()])
    sidecar = {
        "config": config.to_dict(),
        "L_values": sorted({c.L for c in cells}),
        "M_values": sorted({c.M for c in cells}),
        "decreasing_in_M": {str(k): v for k, v in trend.items()},
        "finished_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_clock_seconds": sum(c.result.wall_clock for c in cells if c.result),
        "build": build_id(),
    }
    (out / "sweep.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return out
