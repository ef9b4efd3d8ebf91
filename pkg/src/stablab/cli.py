"""Command-line interface.

Every subcommand accepts ``--config file.json``; keys are the long flag names
with dashes replaced by underscores, and flags given on the command line win.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import FORMAT_VERSION, __version__
from .errors import StabLabError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# subcommand -> {dest: default}; flags default to None so config values can fill in
DEFAULTS = {
    "gen": {"n": 200, "d": 2, "center_distance": 2.0, "radius": 0.5, "bound_b": None, "seed": 0, "out": None},
    "svm": {"data": None, "out": None},
    "train": {"data": None, "loss": "logistic", "eta": None, "eta_fraction": None, "steps": 1000, "seed": 0,
              "init_scale": 0.01, "record_every": 100, "heads": 1, "no_strict_lr": False, "out": None},
    "stability": {"data": None, "trainer": "gd", "loss": "logistic", "eta": None, "eta_fraction": 0.5,
                  "steps": 1000, "seed": 0, "init_scale": 0.01, "heads": 1, "subset_seed": 0, "out": None},
    "bound": {"kind": None, "params": None},
    "thm1": {"d": 10, "n": 100, "mu": 0.5, "beta": 1.0, "dist": 1.0, "steps": 1000, "seeds": 1, "out": None},
    "experiment": {"name": None, "seed": None, "repeats": None, "grid": None, "params": None, "out_dir": None,
                   "jobs": None},
    "plot": {"summary": None, "out": None, "x_label": "factor", "y_label": "mean", "log_x": False,
             "log_y": False, "series": "mean"},
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stablab", description="Stability experiments for linear heads and quadratic surrogates.")
    p.add_argument("--version", action="store_true", help="print tool and format versions")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON file of option values")
        return s

    s = cmd("gen", "generate a separable dataset CSV")
    s.add_argument("--n", type=int)
    s.add_argument("--d", type=int)
    s.add_argument("--center-distance", type=float)
    s.add_argument("--radius", type=float)
    s.add_argument("--bound-b", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")

    s = cmd("svm", "solve the hard-margin SVM of a dataset")
    s.add_argument("--data")
    s.add_argument("--out")

    s = cmd("train", "train a head by gradient descent and write its trajectory")
    s.add_argument("--data")
    s.add_argument("--loss", choices=["logistic", "exponential"])
    s.add_argument("--eta", type=float)
    s.add_argument("--eta-fraction", type=float, help="learning rate as a fraction of the admissible bound")
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--init-scale", type=float)
    s.add_argument("--record-every", type=int)
    s.add_argument("--heads", type=int)
    s.add_argument("--no-strict-lr", action="store_const", const=True)
    s.add_argument("--out")

    s = cmd("stability", "normalized leave-one-out stability of a trainer")
    s.add_argument("--data")
    s.add_argument("--trainer", choices=["gd", "mh", "svm"])
    s.add_argument("--loss", choices=["logistic", "exponential"])
    s.add_argument("--eta", type=float)
    s.add_argument("--eta-fraction", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--init-scale", type=float)
    s.add_argument("--heads", type=int)
    s.add_argument("--subset-seed", type=int)
    s.add_argument("--out")

    s = cmd("bound", "evaluate a closed-form stability bound")
    s.add_argument("kind", nargs="?", choices=["thm1", "thm2", "cor1", "mh"])
    s.add_argument("--params", help="JSON object of bound inputs")

    s = cmd("thm1", "check the strongly convex leave-one-out bound on random quadratic tasks")
    s.add_argument("--d", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--mu", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--dist", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--seeds", type=int)
    s.add_argument("--out")

    s = cmd("experiment", "run a named experiment sweep")
    s.add_argument("--name")
    s.add_argument("--seed", type=int)
    s.add_argument("--repeats", type=int)
    s.add_argument("--grid", help="comma-separated factor values")
    s.add_argument("--params", help="JSON object overriding experiment parameters")
    s.add_argument("--out-dir")
    s.add_argument("--jobs", type=int)

    s = cmd("plot", "render a summary CSV as an SVG chart")
    s.add_argument("--summary")
    s.add_argument("--out")
    s.add_argument("--x-label")
    s.add_argument("--y-label")
    s.add_argument("--log-x", action="store_const", const=True)
    s.add_argument("--log-y", action="store_const", const=True)
    s.add_argument("--series")
    return p


def _merge(command: str, ns: argparse.Namespace) -> dict:
    defaults = DEFAULTS[command]
    conf = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                conf = json.load(fh)
        except OSError as exc:
            raise UsageError(f"--config: cannot read {ns.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config: {ns.config} is not valid JSON: {exc}") from None
        if not isinstance(conf, dict):
            raise UsageError("--config: expected a JSON object")
        unknown = sorted(set(conf) - set(defaults))
        if unknown:
            raise UsageError(f"--config: unknown field(s) {', '.join(unknown)} for '{command}'")
    merged = {}
    for key, default in defaults.items():
        val = getattr(ns, key, None)
        merged[key] = val if val is not None else conf.get(key, default)
    return merged


def _require(opts: dict, *keys):
    for k in keys:
        if opts.get(k) is None:
            raise UsageError(f"missing required option --{k.replace('_', '-')}")


def _writable(path) -> Path:
    path = Path(path)
    parent = path.parent if path.parent != Path("") else Path(".")
    if not parent.is_dir():
        raise OSError(f"output directory does not exist: {parent}")
    return path


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        _writable(out).write_text(text + "\n")
    print(text)


def _cmd_gen(o):
    from .synth_data import DatasetSpec, generate_dataset, write_csv

    c, r = o["center_distance"] / 2, o["radius"]
    spec = DatasetSpec(n=o["n"], d=o["d"], center_distance=o["center_distance"], cluster_radius=r,
                       bound_B=o["bound_b"] if o["bound_b"] is not None else c + r, seed=o["seed"])
    ds = generate_dataset(spec)
    if o["out"]:
        write_csv(ds, _writable(o["out"]))
    else:
        write_csv(ds, sys.stdout)


def _load(o):
    from .synth_data import read_csv

    _require(o, "data")
    return read_csv(o["data"], seed=None)


def _cmd_svm(o):
    from .svm_oracle import solve_hard_margin

    _emit_json(solve_hard_margin(_load(o)).to_json(), o["out"])


def _train_config(o):
    from .gd_engine import TrainConfig

    if o.get("eta") is None and o.get("eta_fraction") is None:
        raise UsageError("give --eta or --eta-fraction")
    return TrainConfig(eta=o["eta"] if o["eta"] is not None else 0.1, steps=o["steps"], loss=o["loss"],
                       init_scale=o["init_scale"], seed=o["seed"], record_every=o.get("record_every", 100),
                       strict_lr=not o.get("no_strict_lr", False),
                       eta_fraction=o["eta_fraction"] if o["eta"] is None else None)


def _cmd_train(o):
    from .gd_engine import train_multihead

    _require(o, "out")
    ds = _load(o)
    res = train_multihead(ds, cfg=_train_config(o), H=o["heads"])
    res.averaged.to_csv(_writable(o["out"]))


def _cmd_stability(o):
    from .stability_lab import GDTrainer, SvmTrainer, normalized_loo_stability

    _require(o, "out")
    ds = _load(o)
    if o["trainer"] == "svm":
        trainer = SvmTrainer()
    else:
        heads = o["heads"] if o["trainer"] == "mh" else 1
        trainer = GDTrainer(_train_config({**o, "record_every": 100}), heads=heads)
    rep = normalized_loo_stability(ds, trainer, subset_seed=o["subset_seed"])
    rep.to_csv(_writable(o["out"]))
    print(f"mean_gap={rep.mean_gap:.10g} std_gap={rep.std_gap:.10g} skipped={rep.n_skipped}")


def _cmd_bound(o):
    from .bounds import LOG_BASE, evaluate

    _require(o, "kind", "params")
    params = o["params"]
    if isinstance(params, str):
        try:
            params = json.loads(params)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--params is not valid JSON: {exc}") from None
    value = evaluate(o["kind"], params)
    print(json.dumps({"bound": o["kind"], "value": value, "params": params, "log_base": LOG_BASE},
                     sort_keys=True))


def _cmd_thm1(o):
    from .quad_surrogate import make_quadratic_task, verify_thm1

    _require(o, "out")
    path = _writable(o["out"])
    lines = ["seed,measured_mean,measured_max,lhat,rhs,holds"]
    for seed in range(o["seeds"]):
        task = make_quadratic_task(o["d"], o["n"], o["mu"], o["beta"], o["dist"], seed)
        c = verify_thm1(task, o["steps"])
        vals = [c.measured_mean, c.measured_max, c.lhat, c.rhs]
        lines.append(f"{seed}," + ",".join(format(v, ".17g") for v in vals) + f",{int(c.holds)}")
    path.write_text("\n".join(lines) + "\n")
    print(f"holds {sum(l.endswith(',1') for l in lines[1:])}/{o['seeds']}")


def _parse_grid(text):
    vals = []
    for tok in str(text).split(","):
        tok = tok.strip()
        try:
            v = float(tok)
        except ValueError:
            raise UsageError(f"--grid: {tok!r} is not a number") from None
        vals.append(int(v) if v.is_integer() and "." not in tok else v)
    return vals


def _cmd_experiment(o):
    from .experiments import ExperimentConfig, run_experiment

    _require(o, "name")
    fields = {"name": o["name"]}
    for k in ("seed", "repeats", "out_dir", "jobs"):
        if o[k] is not None:
            fields[k] = o[k]
    if o["grid"] is not None:
        fields["grid"] = o["grid"] if isinstance(o["grid"], list) else _parse_grid(o["grid"])
    if o["params"] is not None:
        p = o["params"]
        fields["params"] = json.loads(p) if isinstance(p, str) else p
    try:
        cfg = ExperimentConfig(**fields)
    except StabLabError as exc:
        raise UsageError(str(exc)) from None
    out = cfg.output_dir()
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory not writable: {out} ({exc.strerror})") from None
    summary = run_experiment(cfg)
    print("factor,mean,std,n_runs,n_skipped")
    for f, m, s, n, k in summary.rows:
        print(f"{f},{m:.10g},{s:.10g},{n},{k}")
    print(f"wrote {out}", file=sys.stderr)


def _cmd_plot(o):
    from .plotting import PlotSpec, render_plot

    _require(o, "summary", "out")
    render_plot(o["summary"], _writable(o["out"]),
                PlotSpec(x_label=o["x_label"], y_label=o["y_label"], log_x=bool(o["log_x"]),
                         log_y=bool(o["log_y"]), series=o["series"]))


COMMANDS = {"gen": _cmd_gen, "svm": _cmd_svm, "train": _cmd_train, "stability": _cmd_stability,
            "bound": _cmd_bound, "thm1": _cmd_thm1, "experiment": _cmd_experiment, "plot": _cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.version:
            print(f"stablab {__version__} (format {FORMAT_VERSION})")
            return EXIT_OK
        if not ns.command:
            raise UsageError(parser.format_usage())
        COMMANDS[ns.command](_merge(ns.command, ns))
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}".rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (StabLabError, OSError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        sys.stdout.flush()


if __name__ == "__main__":
    sys.exit(main())

