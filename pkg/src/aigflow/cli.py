"""Configuration-driven experiment runner.

``aigflow run <config>`` runs one flow and writes ``diagnostics.csv``,
``particles_final.csv`` and ``run_meta.json``.  ``aigflow compare <configs...>``
runs several configurations over a range of seeds and writes a wide CSV of
seed-averaged per-iteration metrics plus an iterations-to-threshold summary.

Configurations are flat YAML (or JSON) mappings.  Values are resolved as
defaults < preset < file < command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from aigflow import __version__
from aigflow.core import ConfigurationError, NumericalFailure, RngStream, Schedule, init_ensemble
from aigflow.diagnostics import gaussian_fit_kl
from aigflow.flows import METRICS, SCORES, FlowKind, run_flow
from aigflow.kernels import ReferenceMMD
from aigflow.score import BANDWIDTH_METHODS, BandwidthState, kde_log_density, med_bandwidth
from aigflow.targets import (TargetModel, bimodal_ring_target, blr_target, gaussian_target,
                             load_logistic_csv, make_logistic_dataset, predictive_accuracy,
                             reference_samples)

TARGETS = ("gaussian", "bimodal", "blr")
FLUSH_EVERY = 50

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


@dataclass(frozen=True)
class RunConfig:
    metric: str
    target: str
    N: int
    tau: float
    iters: int
    seed: int
    accelerated: bool = True
    restart: bool = True
    bandwidth: str = "med"
    refresh: int = 1
    bm_evals: int = 30
    score: str = "kde"
    schedule: str = "nesterov"
    beta: Optional[float] = None
    lam: float = 1.0
    decay_factor: float = 1.0
    decay_period: int = 1
    d: Optional[int] = None
    target_mean: Optional[List[float]] = None
    target_var: Optional[List[float]] = None
    init_mean: Optional[List[float]] = None
    init_var: Optional[List[float]] = None
    stochastic: bool = False
    dataset: Optional[str] = None
    dataset_size: int = 2000
    dataset_correlation: float = 0.95
    dataset_seed: int = 0
    batch_size: int = 100
    prior_var: float = 10.0
    reference_size: int = 0
    reference_iters: int = 20_000
    seeds: int = 1
    threshold_energy: float = 1e-3
    threshold_mmd: float = 1e-3
    threshold_w2: float = 0.05
    threshold_acc: Optional[float] = None
    workers: int = 1
    name: Optional[str] = None
    out: str = "aigflow-out"

    @property
    def label(self) -> str:
        return self.name or self.flow_kind().label

    def flow_kind(self) -> FlowKind:
        return FlowKind(self.metric, accelerated=self.accelerated, restart=self.restart, lam=self.lam)

    def make_schedule(self) -> Schedule:
        decay = None if self.decay_factor == 1.0 else (self.decay_factor, self.decay_period)
        return Schedule(self.schedule, tau=self.tau, beta=self.beta, decay=decay)

    def to_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out


REQUIRED = ("metric", "target", "N", "tau", "iters", "seed")
_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
# config key -> dataclass field
_KEY_TO_FIELD = {("lambda" if n == "lam" else n): n for n in _FIELDS}

_BOOL = {"accelerated", "restart", "stochastic"}
_INT = {"N", "iters", "seed", "refresh", "bm_evals", "decay_period", "d", "dataset_size",
        "dataset_seed", "batch_size", "reference_size", "reference_iters", "seeds", "workers"}
_FLOAT = {"tau", "beta", "lam", "decay_factor", "dataset_correlation", "prior_var",
          "threshold_energy", "threshold_mmd", "threshold_w2", "threshold_acc"}
_VECTOR = {"target_mean", "target_var", "init_mean", "init_var"}

PRESETS: Dict[str, Dict[str, Any]] = {
    "toy-bimodal": {
        "metric": "wasserstein", "target": "bimodal", "seed": 0, "N": 200, "tau": 0.1, "iters": 200,
        "init_mean": [0.0, 10.0], "init_var": [1.0, 1.0], "reference_size": 2000,
    },
    "gaussian-rate": {
        "metric": "wasserstein", "target": "gaussian", "seed": 0, "N": 1000, "d": 1, "tau": 0.01,
        "iters": 3000, "target_mean": [0.0], "target_var": [25.0], "init_mean": [10.0],
        "init_var": [1.0], "score": "gaussian", "schedule": "strongly-convex", "beta": 0.04,
        "restart": False, "reference_size": 1000, "threshold_mmd": 5e-3, "threshold_w2": 0.5,
    },
    "blr-synthetic": {
        "metric": "wasserstein", "target": "blr", "seed": 0, "N": 100, "d": 5, "tau": 8.6e-4,
        "iters": 500, "schedule": "strongly-convex", "beta": 11.0, "stochastic": True,
        "init_var": [10.0], "dataset_correlation": 0.95, "threshold_acc": 0.67,
    },
}


def _err(key: str, msg: str) -> ConfigurationError:
    return ConfigurationError(f"{key}: {msg}", key)


def _coerce(key: str, name: str, value):
    if value is None:
        return None
    try:
        if name in _BOOL:
            if isinstance(value, str):
                low = value.strip().lower()
                if low in ("true", "yes", "on", "1"):
                    return True
                if low in ("false", "no", "off", "0"):
                    return False
                raise ValueError(value)
            if isinstance(value, (bool, int)) and value in (0, 1):
                return bool(value)
            raise ValueError(value)
        if name in _INT:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if name in _FLOAT:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if name in _VECTOR:
            if isinstance(value, str):
                value = yaml.safe_load(value)
            return [float(v) for v in np.atleast_1d(np.asarray(value, dtype=float))]
        return str(value)
    except (TypeError, ValueError):
        raise _err(key, f"cannot interpret {value!r}") from None


def _validate(cfg: RunConfig) -> None:
    checks = [
        ("metric", cfg.metric in METRICS, f"must be one of {METRICS}"),
        ("target", cfg.target in TARGETS, f"must be one of {TARGETS}"),
        ("bandwidth", cfg.bandwidth in BANDWIDTH_METHODS, f"must be one of {BANDWIDTH_METHODS}"),
        ("score", cfg.score in SCORES, f"must be one of {SCORES}"),
        ("N", cfg.N >= 2, "need at least 2 particles"),
        ("tau", cfg.tau > 0 and math.isfinite(cfg.tau), "must be positive"),
        ("iters", cfg.iters >= 0, "must be nonnegative"),
        ("refresh", cfg.refresh >= 1, "must be >= 1"),
        ("bm_evals", cfg.bm_evals >= 1, "must be >= 1"),
        ("lambda", cfg.lam > 0, "must be positive"),
        ("decay_factor", 0 < cfg.decay_factor <= 1, "must lie in (0, 1]"),
        ("decay_period", cfg.decay_period >= 1, "must be >= 1"),
        ("d", cfg.d is None or cfg.d >= 1, "must be >= 1"),
        ("dataset_size", cfg.dataset_size >= 10, "must be >= 10"),
        ("dataset_correlation", 0 <= cfg.dataset_correlation < 1, "must lie in [0, 1)"),
        ("batch_size", cfg.batch_size >= 1, "must be >= 1"),
        ("prior_var", cfg.prior_var > 0, "must be positive"),
        ("reference_size", cfg.reference_size >= 0, "must be nonnegative"),
        ("reference_iters", cfg.reference_iters >= 1, "must be >= 1"),
        ("seeds", cfg.seeds >= 1, "must be >= 1"),
        ("workers", cfg.workers >= 1, "must be >= 1"),
        ("threshold_energy", cfg.threshold_energy > 0, "must be positive"),
        ("threshold_mmd", cfg.threshold_mmd > 0, "must be positive"),
        ("threshold_w2", cfg.threshold_w2 > 0, "must be positive"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise _err(key, msg)
    if cfg.beta is not None and not cfg.beta > 0:
        raise _err("beta", "must be positive")
    for key in ("target_var", "init_var"):
        val = getattr(cfg, key)
        if val is not None and min(val) <= 0:
            raise _err(key, "variances must be positive")
    d = cfg.d
    for key in ("target_mean", "target_var", "init_mean", "init_var"):
        val = getattr(cfg, key)
        if val is not None and d is not None and len(val) not in (1, d):
            raise _err(key, f"length {len(val)} does not match d={d}")
    if cfg.target == "bimodal" and d not in (None, 2):
        raise _err("d", "the bimodal target is 2-dimensional")
    if cfg.dataset is not None and not os.access(cfg.dataset, os.R_OK):
        raise _err("dataset", f"cannot read {cfg.dataset}")
    try:
        cfg.make_schedule()
    except ConfigurationError as exc:
        key = "decay_factor" if exc.key == "decay" else exc.key
        raise _err(key, str(exc)) from None


def resolve_config(*layers: Dict[str, Any]) -> RunConfig:
    """Merge key/value layers (later wins) into a validated :class:`RunConfig`."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        for key, value in (layer or {}).items():
            if key not in _KEY_TO_FIELD:
                raise _err(key, "unknown configuration key")
            merged[_KEY_TO_FIELD[key]] = _coerce(key, _KEY_TO_FIELD[key], value)
    for key in REQUIRED:
        if merged.get(key) is None:
            raise _err(key, "missing required key")
    cfg = RunConfig(**merged)
    _validate(cfg)
    return cfg


def load_document(text: str) -> Dict[str, Any]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a key/value mapping")
    if "preset" in doc:
        doc = dict(doc)
        name = doc.pop("preset")
        if name not in PRESETS:
            raise _err("preset", f"unknown preset {name!r}")
        return {**PRESETS[name], **doc}
    return doc


def parse_config(text: str) -> RunConfig:
    """Parse a flat YAML/JSON key/value document into a validated RunConfig.

    A ``preset`` key expands to the named preset before the document's own keys.
    """
    return resolve_config(load_document(text))


# -- running ----------------------------------------------------------------

def _vector(val, d, default):
    if val is None:
        return np.full(d, default)
    return np.broadcast_to(np.asarray(val, dtype=float), (d,)).copy()


def _dimension(cfg: RunConfig) -> int:
    if cfg.target == "bimodal":
        return 2
    if cfg.d is not None:
        return cfg.d
    for val in (cfg.target_mean, cfg.target_var, cfg.init_mean, cfg.init_var):
        if val is not None and len(val) > 1:
            return len(val)
    return 5 if cfg.target == "blr" else 1


def build_target(cfg: RunConfig) -> TargetModel:
    d = _dimension(cfg)
    if cfg.target == "gaussian":
        return gaussian_target(_vector(cfg.target_mean, d, 0.0), np.diag(_vector(cfg.target_var, d, 1.0)))
    if cfg.target == "bimodal":
        return bimodal_ring_target()
    if cfg.dataset is not None:
        ds = load_logistic_csv(cfg.dataset, batch_size=cfg.batch_size, prior_var=cfg.prior_var,
                               rng=RngStream(cfg.dataset_seed))
    else:
        ds = make_logistic_dataset(cfg.dataset_size, d, RngStream(cfg.dataset_seed),
                                   correlation=cfg.dataset_correlation, batch_size=cfg.batch_size,
                                   prior_var=cfg.prior_var, w_true=np.linspace(1.0, -1.0, d) * 3.0)
    if ds.d != d and cfg.d is not None:
        raise _err("d", f"dataset has {ds.d} features, config says d={d}")
    return blr_target(ds)


def _w2_to_reference(x, ref_sorted) -> float:
    x = np.sort(np.asarray(x, dtype=float).ravel())
    q = (np.arange(x.size) + 0.5) / x.size
    y = np.quantile(ref_sorted, q)
    return float(np.sqrt(np.mean((x - y) ** 2)))


class _Diagnostics:
    """Per-iteration metric rows for one run."""

    def __init__(self, cfg: RunConfig, target: TargetModel, reference: Optional[np.ndarray]):
        self.cfg = cfg
        self.target = target
        self.ref_mmd = ReferenceMMD(reference) if reference is not None else None
        self.ref_sorted = (np.sort(reference.ravel())
                           if reference is not None and target.dim == 1 else None)
        self.columns = ["iter", "t", "alpha", "h", "phi", "restarted", "energy_proxy"]
        if self.ref_mmd is not None:
            self.columns.append("mmd_ref")
        if self.ref_sorted is not None:
            self.columns.append("w2_ref")
        if target.dataset is not None:
            self.columns.append("test_acc")

    def energy_proxy(self, X) -> float:
        """KL of the fitted Gaussian for Gaussian targets, else mean f + KDE log density."""
        if self.target.is_gaussian:
            if X.shape[0] <= X.shape[1]:
                return float("nan")
            return gaussian_fit_kl(X, self.target.mean, self.target.cov)
        h = med_bandwidth(X)
        return float(np.mean(self.target.f(X)) + np.mean(kde_log_density(X, X, h)))

    def row(self, rec, X) -> List[Any]:
        out = [rec.iteration, rec.t, rec.alpha, rec.h, rec.phi, int(rec.restarted), self.energy_proxy(X)]
        if self.ref_mmd is not None:
            out.append(self.ref_mmd(X))
        if self.ref_sorted is not None:
            out.append(_w2_to_reference(X, self.ref_sorted))
        if self.target.dataset is not None:
            out.append(predictive_accuracy(X, self.target.dataset))
        return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_particles(path: Path, ens) -> None:
    d = ens.d
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)])
        for x, v in zip(ens.positions, ens.velocities):
            w.writerow([_fmt(a) for a in x] + [_fmt(a) for a in v])


def run(cfg: RunConfig, out_dir=None, seed: Optional[int] = None) -> int:
    """Run one configuration and write its artifacts; returns an exit status."""
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    out = Path(out_dir if out_dir is not None else cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _err("out", f"cannot create {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise _err("out", f"cannot write to {out}")

    start = time.perf_counter()
    target = build_target(cfg)
    d = target.dim
    ens = init_ensemble(cfg.N, d, _vector(cfg.init_mean, d, 0.0), np.diag(_vector(cfg.init_var, d, 1.0)),
                        RngStream(cfg.seed, 0))
    reference = None
    if cfg.reference_size > 0:
        reference = reference_samples(target, cfg.reference_size, RngStream(cfg.seed, 2),
                                      n_iter=cfg.reference_iters, burn_in=cfg.reference_iters // 10)
    diag = _Diagnostics(cfg, target, reference)

    status = EXIT_OK
    final = ens
    with open(out / "diagnostics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(diag.columns)
        fh.flush()

        def callback(it, e, rec):
            nonlocal final
            final = e
            writer.writerow([_fmt(v) for v in diag.row(rec, e.positions)])
            if it % FLUSH_EVERY == 0:
                fh.flush()

        try:
            run_flow(cfg.flow_kind(), ens, target,
                     BandwidthState(method=cfg.bandwidth, bm_refresh_period=cfg.refresh,
                                    bm_search_evals=cfg.bm_evals),
                     cfg.make_schedule(), cfg.iters, RngStream(cfg.seed, 1), score=cfg.score,
                     stochastic=cfg.stochastic, callback=callback)
        except NumericalFailure as exc:
            status = EXIT_NUMERICAL
            fh.flush()
            print(f"numerical failure at iteration {exc.iteration}: {exc}", file=sys.stderr)

    _write_particles(out / "particles_final.csv", final)
    meta = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "version": __version__,
        "status": "ok" if status == EXIT_OK else "numerical-failure",
        "elapsed_seconds": round(time.perf_counter() - start, 3),
    }
    with open(out / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return status


def read_diagnostics(path) -> Dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


# -- comparison -------------------------------------------------------------

_TARGET_KEYS = ("target", "d", "target_mean", "target_var", "dataset", "dataset_size",
                "dataset_correlation", "dataset_seed", "batch_size", "prior_var", "reference_size",
                "reference_iters", "seed", "seeds")


def _iterations_to(values: np.ndarray, metric: str, cfg: RunConfig) -> Optional[int]:
    if metric == "test_acc":
        if cfg.threshold_acc is None:
            return None
        hit = np.flatnonzero(values >= cfg.threshold_acc)
    else:
        thr = {"energy_proxy": cfg.threshold_energy, "mmd_ref": cfg.threshold_mmd,
               "w2_ref": cfg.threshold_w2}[metric]
        hit = np.flatnonzero(values < thr)
    return int(hit[0]) + 1 if hit.size else None


def _threshold(metric: str, cfg: RunConfig):
    return {"energy_proxy": cfg.threshold_energy, "mmd_ref": cfg.threshold_mmd,
            "w2_ref": cfg.threshold_w2, "test_acc": cfg.threshold_acc}[metric]


def _run_job(job):
    cfg, out_dir, seed = job
    status = run(cfg, out_dir, seed)
    return status, read_diagnostics(Path(out_dir) / "diagnostics.csv")


SUMMARY_METRICS = ("energy_proxy", "mmd_ref", "w2_ref", "test_acc")


def compare(configs: Sequence[RunConfig], out_dir) -> List[Dict[str, Any]]:
    """Run every config for each seed and write ``comparison.csv`` and ``summary.csv``.

    Returns the summary rows.
    """
    if not configs:
        raise ConfigurationError("compare needs at least one configuration")
    base = configs[0]
    for cfg in configs[1:]:
        for key in _TARGET_KEYS:
            if getattr(cfg, key) != getattr(base, key):
                raise _err(key, "compared configurations must share target and seed policy")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    labels: List[str] = []
    for cfg in configs:
        lab = cfg.label
        n = 2
        while lab in labels:
            lab = f"{cfg.label}-{n}"
            n += 1
        labels.append(lab)
    seeds = [base.seed + s for s in range(base.seeds)]
    jobs = [(cfg, str(out / lab / f"seed-{s}"), s) for cfg, lab in zip(configs, labels) for s in seeds]
    workers = max(cfg.workers for cfg in configs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]

    per_method: Dict[str, List[Dict[str, np.ndarray]]] = {lab: [] for lab in labels}
    for i, (_, diag) in enumerate(results):
        per_method[labels[i // len(seeds)]].append(diag)

    metric_cols = [c for c in ("t", "alpha", "h", "phi", "restarted") + SUMMARY_METRICS]
    wide_cols = []
    series = {}
    n_rows = 0
    for lab in labels:
        runs = per_method[lab]
        for col in metric_cols:
            if col not in runs[0]:
                continue
            length = min(len(r[col]) for r in runs)
            series[f"{lab}/{col}"] = np.mean([r[col][:length] for r in runs], axis=0)
            wide_cols.append(f"{lab}/{col}")
            n_rows = max(n_rows, length)
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iter"] + wide_cols)
        for i in range(n_rows):
            w.writerow([i + 1] + [_fmt(series[c][i]) if i < len(series[c]) else "" for c in wide_cols])

    summary = []
    for cfg, lab in zip(configs, labels):
        runs = per_method[lab]
        for metric in SUMMARY_METRICS:
            if metric not in runs[0] or _threshold(metric, cfg) is None:
                continue
            hits = [_iterations_to(r[metric], metric, cfg) for r in runs]
            reached = [h for h in hits if h is not None]
            summary.append({
                "method": lab,
                "metric": metric,
                "threshold": _threshold(metric, cfg),
                "mean_iterations": float(np.mean(reached)) if reached else float("nan"),
                "var_iterations": float(np.var(reached)) if reached else float("nan"),
                "reached": len(reached),
                "seeds": len(runs),
            })
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["method", "metric", "threshold", "mean_iterations",
                                           "var_iterations", "reached", "seeds"])
        w.writeheader()
        for row in summary:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    return summary


# -- command line -----------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser, skip=()) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS))
    for key in _KEY_TO_FIELD:
        if key == "seed" or key in skip:
            continue
        p.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="VALUE", default=None)
    p.add_argument("--seed", dest="cfg_seed", type=int, default=None)


def _flag_layer(args) -> Dict[str, Any]:
    return {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}


def _read_file(path) -> Dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from None
    return load_document(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aigflow", description="Accelerated information gradient flows.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config", nargs="?", help="YAML/JSON configuration file")
    _add_config_flags(p_run)
    p_cmp = sub.add_parser("compare", help="run and compare several configurations")
    p_cmp.add_argument("configs", nargs="+", help="YAML/JSON configuration files")
    p_cmp.add_argument("--out", dest="compare_out", required=True, help="report directory")
    _add_config_flags(p_cmp, skip=("out",))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    preset = PRESETS[args.preset] if args.preset else {}
    flags = _flag_layer(args)
    try:
        if args.command == "run":
            cfg = resolve_config(preset, _read_file(args.config) if args.config else {}, flags)
            return run(cfg)
        cfgs = [resolve_config(preset, _read_file(p), flags) for p in args.configs]
        summary = compare(cfgs, args.compare_out)
        for row in summary:
            print(f"{row['method']:<28} {row['metric']:<13} mean={row['mean_iterations']:.1f} "
                  f"var={row['var_iterations']:.1f} reached={row['reached']}/{row['seeds']}")
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
