"""Named, seeded experiment sweeps.

Each experiment sweeps one factor over a grid.  For every grid value and
repeat a child seed is derived, the pipeline runs, and its detail rows go to
``runs/run_<factor>_<rep>.csv``.  The per-run metric is recomputable from that
file; ``summary.csv`` aggregates it per grid value.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .errors import ParameterError, StabLabError
from .gd_engine import TrainConfig, train_mmr, train_multihead
from .plotting import PlotSpec, render_plot
from .quad_surrogate import loo_quad, make_quadratic_task, verify_thm1
from .stability_lab import GDTrainer, data_perturbation_stability, normalized_loo_stability
from .synth_data import DatasetSpec, Encoder, generate_dataset

SUMMARY_HEADER = ["factor", "mean", "std", "n_runs", "n_skipped"]
DEFAULT_OUT = "stablab_out"

_DATA = {"n": 200, "d": 2, "center_distance": 2.0, "cluster_radius": 0.5}
_GD = {"steps": 1000, "loss": "logistic", "eta_fraction": 0.5, "init_scale": 0.01}
_LOO = {**_DATA, **_GD, "loo_indices": 50}


@dataclass(frozen=True)
class ExperimentDef:
    factor: str
    grid: tuple
    params: dict
    metric: str
    column: str  # per-run column holding the metric
    reduce: str  # "last" or "mean" over non-skipped rows
    log_x: bool = False


EXPERIMENTS = {
    "head-convergence": ExperimentDef(
        "heads", (1, 5, 10, 50, 100), {**_DATA, **_GD, "n": 100, "init_scale": 10.0},
        "direction gap of averaged head", "dir_gap", "last", True),
    "sample-count": ExperimentDef(
        "n", (100, 200, 400, 800), dict(_LOO), "normalized leave-one-out gap", "gap", "mean", True),
    "margin-sweep": ExperimentDef(
        "margin", (0.25, 0.5, 1.0, 2.0), {**_LOO, "bound_B": 2.5}, "normalized leave-one-out gap", "gap", "mean", True),
    "param-distance": ExperimentDef(
        "init_distance", (0.5, 1.0, 2.0, 4.0), {"d": 10, "n": 100, "mu": 0.25, "beta": 1.0, "steps": 10},
        "leave-one-out parameter gap", "gap", "mean", True),
    "sample-bound": ExperimentDef(
        "bound_B", (1.0, 2.0, 4.0, 8.0), {**_LOO, "margin": 0.5},
        "normalized leave-one-out gap", "gap", "mean", True),
    "thm1-verify": ExperimentDef(
        "n", (50, 100, 200), {"d": 10, "mu_ratios": [0.25, 0.5, 0.75], "beta": 1.0, "init_distance": 1.0,
                              "steps": 1000},
        "fraction of tasks where the bound holds", "holds", "last", True),
    "epoch-sweep": ExperimentDef(
        "steps", (100, 300, 1000, 3000), dict(_LOO), "normalized leave-one-out gap", "gap", "mean", True),
    "lr-sweep": ExperimentDef(
        "eta_fraction", (0.1, 0.2, 0.5, 0.9), dict(_LOO), "normalized leave-one-out gap", "gap", "mean", True),
    "mmr-effect": ExperimentDef(
        "alpha", (0.0, 1.0, 10.0), {**_DATA, **_GD, "n": 100, "encoder_noise": 0.1},
        "final margin of encoded data", "margin", "last"),
    "perturb-stability": ExperimentDef(
        "drop_ratio", (0.1, 0.2, 0.3), {**_DATA, **_GD, "heads": 1, "draws": 10},
        "direction gap after dropping data", "gap", "mean"),
}


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    repeats: int = 100
    grid: list | None = None
    params: dict = field(default_factory=dict)
    out_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.name!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.repeats < 1:
            raise ParameterError("repeats must be >= 1")
        if self.jobs < 1:
            raise ParameterError("jobs must be >= 1")
        if self.grid is not None:
            if len(self.grid) == 0:
                raise ParameterError("grid must be nonempty")
            if list(self.grid) != sorted(self.grid):
                raise ParameterError("grid must be sorted ascending")
        unknown = set(self.params) - set(EXPERIMENTS[self.name].params)
        if unknown:
            raise ParameterError(f"unknown params for {self.name}: {', '.join(sorted(unknown))}")

    @property
    def definition(self) -> ExperimentDef:
        return EXPERIMENTS[self.name]

    def resolved_grid(self) -> list:
        return list(self.grid if self.grid is not None else self.definition.grid)

    def resolved_params(self) -> dict:
        return {**self.definition.params, **self.params}

    def output_dir(self) -> Path:
        root = self.out_dir or os.environ.get("STABLAB_OUT") or DEFAULT_OUT
        return Path(root)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"name", "seed", "repeats", "grid", "params", "out_dir", "jobs"}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class ExperimentSummary:
    rows: list  # (factor, mean, std, n_runs, n_skipped)
    metric: str
    meta: dict


def factor_label(v) -> str:
    """Shortest text that round-trips the grid value."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def child_seed(base: int, name: str, value, rep: int) -> int:
    digest = hashlib.blake2b(f"{name}|{factor_label(value)}|{rep}".encode(), digest_size=4).digest()
    return (int(base) ^ int.from_bytes(digest, "big")) & 0xFFFFFFFF


def _dataset(p: dict, seed: int, **over):
    q = {**p, **over}
    return generate_dataset(DatasetSpec(n=int(q["n"]), d=int(q["d"]), center_distance=q["center_distance"],
                                        cluster_radius=q["cluster_radius"],
                                        bound_B=q["center_distance"] / 2 + q["cluster_radius"], seed=seed))


def _train_cfg(p: dict, seed: int, **over) -> TrainConfig:
    q = {**p, **over}
    return TrainConfig(steps=int(q["steps"]), loss=q["loss"], eta_fraction=q["eta_fraction"],
                       init_scale=q["init_scale"], seed=seed, record_every=max(1, int(q["steps"]) // 10))


def _loo_rows(ds, trainer, k, seed):
    rng = np.random.default_rng(seed)
    subset = np.sort(rng.choice(ds.n, size=min(k, ds.n), replace=False))
    rep = normalized_loo_stability(ds, trainer, subset=subset)
    rows = [(i, "" if s else g, int(s), r) for i, g, s, r in rep.per_index_gaps]
    return ["i", "gap", "skipped", "reason"], rows


def _traj_rows(traj):
    cols = ["step", "loss", "w_norm", "dir_gap", *traj.extra]
    rows = []
    for k in range(len(traj.steps)):
        rows.append([int(traj.steps[k]), traj.loss[k], traj.w_norm[k], traj.dir_gap[k],
                     *(traj.extra[c][k] for c in traj.extra)])
    return cols, rows


def _run_one(name: str, value, p: dict, seed: int):
    """One pipeline run; returns ``(header, rows)``."""
    if name == "head-convergence":
        ds = _dataset(p, seed)
        res = train_multihead(ds, cfg=_train_cfg(p, seed), H=int(value))
        return _traj_rows(res.averaged)
    if name in ("sample-count", "margin-sweep", "sample-bound", "epoch-sweep", "lr-sweep"):
        over_data, over_train = {}, {}
        if name == "sample-count":
            over_data["n"] = int(value)
        elif name == "margin-sweep":
            # feature bound held fixed so only the margin moves
            over_data["center_distance"] = p["bound_B"] + value
            over_data["cluster_radius"] = (p["bound_B"] - value) / 2
        elif name == "sample-bound":
            over_data["center_distance"] = value + p["margin"]
            over_data["cluster_radius"] = (value - p["margin"]) / 2
        elif name == "epoch-sweep":
            over_train["steps"] = int(value)
        else:
            over_train["eta_fraction"] = float(value)
        ds = _dataset(p, seed, **over_data)
        trainer = GDTrainer(_train_cfg(p, seed, **over_train))
        return _loo_rows(ds, trainer, int(p["loo_indices"]), seed)
    if name == "param-distance":
        task = make_quadratic_task(int(p["d"]), int(p["n"]), p["mu"], p["beta"], float(value), seed)
        res = loo_quad(task, int(p["steps"]))
        return ["i", "gap", "skipped", "reason"], [(int(i), g, 0, "") for i, g in zip(res.indices, res.gaps)]
    if name == "thm1-verify":
        raise AssertionError("thm1-verify is dispatched with its repeat index")
    if name == "mmr-effect":
        ds = _dataset(p, seed)
        rng = np.random.default_rng(seed)
        d = int(p["d"])
        enc = Encoder.affine(np.eye(d) + p["encoder_noise"] * rng.standard_normal((d, d)))
        traj, _ = train_mmr(ds, enc, cfg=_train_cfg(p, seed), alpha=float(value))
        return _traj_rows(traj)
    if name == "perturb-stability":
        ds = _dataset(p, seed)
        trainer = GDTrainer(_train_cfg(p, seed), heads=int(p["heads"]))
        rep = data_perturbation_stability(ds, float(value), int(p["draws"]), trainer, seed=seed)
        return ["i", "gap", "skipped", "reason"], [(i, "" if s else g, int(s), r)
                                                   for i, g, s, r in rep.per_index_gaps]
    raise ParameterError(f"unknown experiment {name!r}")


def _run_thm1(value, p, seed, rep):
    ratios = p["mu_ratios"]
    beta = float(p["beta"])
    task = make_quadratic_task(int(p["d"]), int(value), ratios[rep % len(ratios)] * beta, beta,
                               float(p["init_distance"]), seed)
    c = verify_thm1(task, int(p["steps"]))
    return (["seed", "measured_mean", "measured_max", "lhat", "rhs", "holds"],
            [(seed, c.measured_mean, c.measured_max, c.lhat, c.rhs, int(c.holds))])


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def metric_from_rows(defn: ExperimentDef, header, rows) -> float:
    col = header.index(defn.column)
    vals = [r[col] for r in rows]
    if "skipped" in header:
        sk = header.index("skipped")
        vals = [r[col] for r in rows if not int(r[sk])]
    vals = [float(v) for v in vals if v != ""]
    if not vals:
        return math.nan
    return vals[-1] if defn.reduce == "last" else float(np.mean(vals))


def metric_from_run_file(name: str, path) -> float:
    """Recompute a run's metric from its CSV file."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return metric_from_rows(EXPERIMENTS[name], header, rows)


def _task(args):
    name, value, rep, p, seed, runs_dir = args
    path = runs_dir / f"run_{factor_label(value)}_{rep}.csv"
    try:
        if name == "thm1-verify":
            header, rows = _run_thm1(value, p, seed, rep)
        else:
            header, rows = _run_one(name, value, p, seed)
        metric = metric_from_rows(EXPERIMENTS[name], header, rows)
        if not math.isfinite(metric):
            raise StabLabError("run produced no valid metric")
    except (StabLabError, ArithmeticError) as exc:
        return value, rep, seed, math.nan, f"{type(exc).__name__}: {exc}"
    write_rows(path, header, rows)
    return value, rep, seed, metric, ""


def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """Run the sweep, write per-run CSVs, ``summary.csv``, ``plot.svg`` and ``manifest.json``."""
    defn = cfg.definition
    grid = cfg.resolved_grid()
    params = cfg.resolved_params()
    out = cfg.output_dir()
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    seeds = {(v, r): child_seed(cfg.seed, cfg.name, v, r) for v in grid for r in range(cfg.repeats)}
    if len(set(seeds.values())) != len(seeds):
        raise ParameterError("child seed collision; change the base seed")
    tasks = [(cfg.name, v, r, params, seeds[(v, r)], runs_dir) for v in grid for r in range(cfg.repeats)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    with open(runs_dir / "metrics.csv", "w") as fh:
        fh.write("factor,rep,seed,metric,error\n")
        for v, r, s, m, err in results:
            fh.write(f"{factor_label(v)},{r},{s},{_fmt(m) if math.isfinite(m) else ''},{err.replace(',', ';')}\n")

    rows = []
    for v in grid:
        ms = np.array([m for vv, _, _, m, err in results if vv == v and not err])
        skipped = sum(1 for vv, *_, err in results if vv == v and err)
        mean = float(ms.mean()) if ms.size else math.nan
        std = float(ms.std()) if ms.size else math.nan
        rows.append((v, mean, std, int(ms.size), skipped))
    write_rows(out / "summary.csv", SUMMARY_HEADER, rows)
    render_plot(out / "summary.csv", out / "plot.svg",
                PlotSpec(x_label=defn.factor, y_label=defn.metric, log_x=defn.log_x, title=cfg.name))
    meta = {
        "config": {**asdict(cfg), "grid": grid, "params": params, "out_dir": str(out)},
        "metric": defn.metric,
        "log_base": "e",
        "versions": _versions(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return ExperimentSummary(rows, defn.metric, meta)


def _versions() -> dict:
    import matplotlib
    import scipy

    return {"stablab": __version__, "format": FORMAT_VERSION, "numpy": np.__version__,
            "scipy": scipy.__version__, "matplotlib": matplotlib.__version__,
            "python": platform.python_version()}
