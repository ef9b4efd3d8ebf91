"""Leave-one-out and perturbation stability estimators.

A trainer is any object with ``fit(data) -> parameter vector``.  Trainers may
also provide ``bind(data)``, returning a copy whose data-dependent settings
(the learning rate) are frozen from the full dataset so that every
leave-one-out retraining uses the identical configuration, and
``fit_leave_one_out(data, indices)`` for a batched sweep.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DegenerateClassError, ParameterError
from .gd_engine import TrainConfig, direction_gap, head_seed, init_head, resolve_eta, run_gd
from .quad_surrogate import QuadraticTask, loo_quad
from .svm_oracle import solve_hard_margin
from .synth_data import Encoder, LabeledDataset, augment, leave_one_out, subsample

FULL_SWEEP_MAX_N = 500
SAMPLED_INDICES = 200
# cap on floats held by one batched leave-one-out block
BATCH_ELEMENTS = 4_000_000


def _fingerprint(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class GDTrainer:
    """Single or multi-head gradient descent; returns the averaged head."""

    cfg: TrainConfig = TrainConfig()
    heads: int = 1
    enc: Encoder | None = None

    def __post_init__(self):
        if self.heads < 1:
            raise ParameterError("heads must be >= 1")

    def bind(self, ds: LabeledDataset) -> "GDTrainer":
        if self.cfg.eta_fraction is None:
            return self
        eta = resolve_eta(self.cfg, ds, self.enc)
        return replace(self, cfg=replace(self.cfg, eta=eta, eta_fraction=None, strict_lr=False))

    def fingerprint(self) -> str:
        return _fingerprint({"trainer": "gd", "heads": self.heads, "cfg": asdict(self.cfg),
                             "enc": None if self.enc is None else self.enc.kind})

    def _init(self, p):
        return np.stack([init_head(p, self.cfg.init_scale, head_seed(self.cfg.seed, h))
                         for h in range(self.heads)])

    def fit(self, ds: LabeledDataset) -> np.ndarray:
        return self._run(ds, np.full((1, 1, ds.n), 1.0 / ds.n))[0]

    def fit_weighted(self, ds: LabeledDataset, weights) -> np.ndarray:
        """One run per row of ``weights`` (k, n); rows are the mean coefficients."""
        weights = np.asarray(weights, dtype=float)
        return self._run(ds, weights[:, None, :])

    def _run(self, ds, weights):
        aug = augment(ds, self.enc)
        eta = resolve_eta(self.cfg, aug)
        Z = aug * ds.labels[:, None]
        W0 = self._init(Z.shape[1])
        k = weights.shape[0]
        chunk = max(1, BATCH_ELEMENTS // (self.heads * ds.n))
        out = np.empty((k, Z.shape[1]))
        for lo in range(0, k, chunk):
            w = weights[lo:lo + chunk]
            W = run_gd(Z, np.broadcast_to(W0, (w.shape[0],) + W0.shape), w, eta,
                       self.cfg.steps, self.cfg.loss)
            out[lo:lo + chunk] = W.mean(axis=1)
        return out

    def fit_leave_one_out(self, ds: LabeledDataset, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=int)
        weights = np.full((len(idx), ds.n), 1.0 / (ds.n - 1))
        weights[np.arange(len(idx)), idx] = 0.0
        return self.fit_weighted(ds, weights)


@dataclass
class SvmTrainer:
    enc: Encoder | None = None

    def fit(self, ds: LabeledDataset) -> np.ndarray:
        enc = self.enc or Encoder.identity()
        return solve_hard_margin((enc(ds.features), ds.labels)).w_hat

    def fingerprint(self) -> str:
        return _fingerprint({"trainer": "svm"})


@dataclass
class QuadTrainer:
    """Gradient descent on a quadratic task for ``steps`` iterations."""

    steps: int = 1000
    eta: float | None = None

    def fit(self, task: QuadraticTask) -> np.ndarray:
        from .quad_surrogate import train_quad
        return train_quad(task, self.steps, self.eta).final_w

    def leave_one_out_gaps(self, task: QuadraticTask, indices) -> np.ndarray:
        return loo_quad(task, self.steps, self.eta, indices).gaps

    def fingerprint(self) -> str:
        return _fingerprint({"trainer": "quad", "steps": self.steps, "eta": self.eta})


@dataclass
class StabilityReport:
    per_index_gaps: list  # (i, gap, skipped, reason)
    dataset_seed: int | None
    trainer_fingerprint: str
    indices_evaluated: list
    normalized: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def gaps(self) -> np.ndarray:
        return np.array([g for _, g, skipped, _ in self.per_index_gaps if not skipped], dtype=float)

    @property
    def n_skipped(self) -> int:
        return sum(1 for row in self.per_index_gaps if row[2])

    @property
    def mean_gap(self) -> float:
        g = self.gaps
        return float(g.mean()) if g.size else float("nan")

    @property
    def std_gap(self) -> float:
        g = self.gaps
        return float(g.std()) if g.size else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("i,gap,skipped,reason\n")
            for i, g, skipped, reason in self.per_index_gaps:
                gap = "" if skipped else format(float(g), ".17g")
                fh.write(f"{i},{gap},{int(skipped)},{reason}\n")


def default_subset(n: int, seed: int = 0) -> np.ndarray:
    """All indices for ``n <= 500``, otherwise 200 seeded distinct indices."""
    if n <= FULL_SWEEP_MAX_N:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=SAMPLED_INDICES, replace=False))


def _removable(ds: LabeledDataset, i: int) -> str:
    if not 0 <= i < ds.n:
        raise IndexError(f"index {i} out of range for n={ds.n}")
    pos, neg = ds.class_counts()
    if (ds.labels[i] > 0 and pos == 1) or (ds.labels[i] < 0 and neg == 1):
        return "removal empties a class"
    return ""


def _bind(trainer, ds):
    return trainer.bind(ds) if hasattr(trainer, "bind") else trainer


def normalized_loo_stability(ds: LabeledDataset, trainer, subset=None, subset_seed: int = 0) -> StabilityReport:
    """Direction gap between the model trained on S and on each S^i."""
    trainer = _bind(trainer, ds)
    idx = default_subset(ds.n, subset_seed) if subset is None else np.asarray(subset, dtype=int)
    reasons = [_removable(ds, int(i)) for i in idx]
    valid = [int(i) for i, r in zip(idx, reasons) if not r]
    w_full = trainer.fit(ds)
    if hasattr(trainer, "fit_leave_one_out") and valid:
        loo = dict(zip(valid, trainer.fit_leave_one_out(ds, valid)))
    else:
        loo = {i: trainer.fit(leave_one_out(ds, i)) for i in valid}
    rows = []
    for i, reason in zip(idx, reasons):
        i = int(i)
        if reason:
            rows.append((i, float("nan"), True, reason))
        else:
            rows.append((i, direction_gap(loo[i], w_full), False, ""))
    return StabilityReport(rows, ds.seed, trainer.fingerprint() if hasattr(trainer, "fingerprint") else "",
                           [int(i) for i in idx], True)


def loo_model_stability(task, trainer, subset=None) -> StabilityReport:
    """Unnormalized gaps ``||A(S^i) - A(S)||``.

    ``task`` is a :class:`QuadraticTask` or a :class:`LabeledDataset`.
    """
    if isinstance(task, QuadraticTask):
        idx = np.arange(task.n) if subset is None else np.asarray(subset, dtype=int)
        if isinstance(trainer, QuadTrainer):
            gaps = trainer.leave_one_out_gaps(task, idx)
        else:
            w = trainer.fit(task)
            gaps = [np.linalg.norm(trainer.fit(task.without(int(i))) - w) for i in idx]
        rows = [(int(i), float(g), False, "") for i, g in zip(idx, gaps)]
        fp = trainer.fingerprint() if hasattr(trainer, "fingerprint") else ""
        return StabilityReport(rows, task.seed, fp, [int(i) for i in idx], False)
    ds = task
    trainer = _bind(trainer, ds)
    idx = default_subset(ds.n) if subset is None else np.asarray(subset, dtype=int)
    w_full = trainer.fit(ds)
    rows = []
    for i in idx:
        i = int(i)
        reason = _removable(ds, i)
        if reason:
            rows.append((i, float("nan"), True, reason))
            continue
        rows.append((i, float(np.linalg.norm(trainer.fit(leave_one_out(ds, i)) - w_full)), False, ""))
    fp = trainer.fingerprint() if hasattr(trainer, "fingerprint") else ""
    return StabilityReport(rows, ds.seed, fp, [int(i) for i in idx], False)


@dataclass(frozen=True)
class SvmShift:
    index: int
    shift: float
    direction_gap: float
    norm_full: float
    norm_loo: float

    @property
    def lipschitz_rhs(self) -> float:
        return 2.0 / min(self.norm_full, self.norm_loo) * self.shift


def svm_solution_shift(ds: LabeledDataset, indices=None) -> list[SvmShift]:
    """Exact SVM solutions on S and on each S^i, compared in raw parameter space."""
    from .errors import ConvergenceError

    full = solve_hard_margin(ds).w_hat
    idx = range(ds.n) if indices is None else indices
    out = []
    for i in idx:
        i = int(i)
        try:
            w = solve_hard_margin(leave_one_out(ds, i)).w_hat
        except ConvergenceError as exc:
            raise ConvergenceError(f"index {i}: {exc}", residual=exc.residual) from exc
        out.append(SvmShift(i, float(np.linalg.norm(w - full)), direction_gap(w, full),
                            float(np.linalg.norm(full)), float(np.linalg.norm(w))))
    return out


def data_perturbation_stability(ds: LabeledDataset, drop_ratio: float, n_seeds: int, trainer,
                                seed: int = 0) -> StabilityReport:
    """Direction gap between training on S and on random subsamples of S.

    Draw ``k`` keeps ``(1 - drop_ratio) * n`` samples chosen with seed ``seed + k``.
    """
    if not 0 < drop_ratio < 1:
        raise ParameterError(f"drop_ratio must lie in (0, 1), got {drop_ratio}")
    if n_seeds < 1:
        raise ParameterError("n_seeds must be >= 1")
    trainer = _bind(trainer, ds)
    w_full = trainer.fit(ds)
    rows = []
    for k in range(n_seeds):
        try:
            sub = subsample(ds, 1.0 - drop_ratio, seed + k)
        except (DegenerateClassError, ParameterError) as exc:
            rows.append((k, float("nan"), True, str(exc).replace(",", ";")))
            continue
        rows.append((k, direction_gap(trainer.fit(sub), w_full), False, ""))
    fp = trainer.fingerprint() if hasattr(trainer, "fingerprint") else ""
    return StabilityReport(rows, ds.seed, fp, list(range(n_seeds)), True,
                           {"drop_ratio": drop_ratio, "seed": seed})
