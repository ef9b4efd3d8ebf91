"""Full-batch gradient descent on linear heads.

Every trainer here funnels into :func:`run_gd`, which advances a stack of
heads in lockstep.  A single run is a stack of one; multi-head training and
leave-one-out sweeps stack heads or per-sample weight masks on the same data.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, DegenerateVectorError, DivergenceError, ParameterError
from .losses import MmrConfig, loss_and_derivative, loss_derivative, mmr_objective, smoothness
from .svm_oracle import solve_hard_margin
from .synth_data import Encoder, LabeledDataset, augment, class_centers

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
POWER_SEED = 0


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings.

    If ``eta_fraction`` is set the learning rate is that fraction of
    :func:`max_admissible_lr` on the training data and ``eta`` is ignored.
    """

    eta: float = 0.1
    steps: int = 1000
    loss: str = "logistic"
    init_scale: float = 0.01
    seed: int = 0
    record_every: int = 100
    strict_lr: bool = True
    eta_fraction: float | None = None

    def __post_init__(self):
        smoothness(self.loss)
        if self.steps < 0:
            raise ParameterError(f"steps must be >= 0, got {self.steps}")
        if self.record_every < 1:
            raise ParameterError("record_every must be >= 1")
        if self.init_scale < 0 or not np.isfinite(self.init_scale):
            raise ParameterError("init_scale must be finite and >= 0")
        if self.eta_fraction is None:
            if not (np.isfinite(self.eta) and self.eta > 0):
                raise ParameterError(f"eta must be finite and > 0, got {self.eta}")
        elif not (np.isfinite(self.eta_fraction) and self.eta_fraction > 0):
            raise ParameterError("eta_fraction must be finite and > 0")


@dataclass
class Trajectory:
    steps: np.ndarray
    loss: np.ndarray
    w_norm: np.ndarray
    dir_gap: np.ndarray
    final_w: np.ndarray
    config: TrainConfig | None = None
    eta: float | None = None
    extra: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        cols = ["step", "loss", "w_norm", "dir_gap", *self.extra]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for k in range(len(self.steps)):
                row = [int(self.steps[k]), self.loss[k], self.w_norm[k], self.dir_gap[k]]
                row += [self.extra[c][k] for c in self.extra]
                w.writerow([row[0]] + [format(float(v), ".17g") for v in row[1:]])


def direction_gap(w1, w2) -> float:
    """``|| w1/|w1| - w2/|w2| ||``, in ``[0, 2]``."""
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    n1, n2 = np.linalg.norm(w1), np.linalg.norm(w2)
    if n1 == 0 or n2 == 0:
        raise DegenerateVectorError("direction of a zero vector is undefined")
    return float(np.linalg.norm(w1 / n1 - w2 / n2))


def _gap_or_nan(w, ref) -> float:
    if ref is None or not np.any(w):
        return np.nan
    return direction_gap(w, ref)


def sigma_max(aug) -> float:
    """Largest singular value of ``aug`` via power iteration on ``aug.T @ aug``."""
    X = np.asarray(aug, dtype=float)
    M = X.T @ X
    v = np.random.default_rng(POWER_SEED).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = float(v @ M @ v)
    for _ in range(POWER_MAX_ITER):
        mv = M @ v
        norm = np.linalg.norm(mv)
        if norm == 0.0:
            return 0.0
        v = mv / norm
        new = float(v @ M @ v)
        if abs(new - lam) <= POWER_TOL * abs(new):
            return float(np.sqrt(new))
        lam = new
    raise ConvergenceError(f"power iteration did not converge in {POWER_MAX_ITER} iterations")


def _aug_of(data, enc=None):
    if isinstance(data, LabeledDataset):
        return augment(data, enc)
    return np.asarray(data, dtype=float)


def max_admissible_lr(data, kind: str = "logistic", enc: Encoder | None = None) -> float:
    """Learning-rate ceiling ``2 / (beta * sigma_max(X~))``."""
    s = sigma_max(_aug_of(data, enc))
    beta = smoothness(kind)
    return np.inf if s == 0 else 2.0 / (beta * s)


def lr_diagnostics(data, kind: str = "logistic", enc: Encoder | None = None) -> dict:
    """Both learning-rate ceilings: the linear-in-sigma one enforced here and
    the squared-sigma one common in the implicit-bias literature."""
    s = sigma_max(_aug_of(data, enc))
    beta = smoothness(kind)
    return {
        "sigma_max": s,
        "beta": beta,
        "eta_max_sigma": np.inf if s == 0 else 2.0 / (beta * s),
        "eta_max_sigma_sq": np.inf if s == 0 else 2.0 / (beta * s * s),
        "beta_eff": beta * s * s,
    }


def resolve_eta(cfg: TrainConfig, data, enc: Encoder | None = None) -> float:
    if cfg.eta_fraction is not None:
        return cfg.eta_fraction * max_admissible_lr(data, cfg.loss, enc)
    if cfg.strict_lr:
        bound = max_admissible_lr(data, cfg.loss, enc)
        if not cfg.eta < bound:
            raise ParameterError(f"eta={cfg.eta} is not below the admissible bound {bound:.6g}; "
                                 "disable strict_lr to override")
    return cfg.eta


def init_head(p: int, init_scale: float, seed: int) -> np.ndarray:
    if init_scale == 0:
        return np.zeros(p)
    return init_scale * np.random.default_rng(seed).standard_normal(p)


def record_steps(steps: int, every: int) -> list[int]:
    out = list(range(0, steps + 1, every))
    if out[-1] != steps:
        out.append(steps)
    return out


def run_gd(Z, W0, weights, eta, steps, kind, record_every=None, on_record=None):
    """Advance a stack of heads by full-batch gradient descent.

    ``Z`` holds label-signed augmented rows ``y_i * x~_i`` with shape
    ``(..., n, p)``; ``W0`` has shape ``(..., m, p)``; ``weights`` (broadcast to
    ``(..., m, n)``) are the per-sample coefficients of the mean, e.g. ``1/n``
    or a leave-one-out mask.  ``eta`` may be an array broadcasting against
    ``W0``.  ``on_record(t, W)`` is called at step 0, every ``record_every``
    steps and at the last step.
    """
    W = np.array(W0, dtype=float)
    Zt = np.swapaxes(Z, -1, -2)
    marks = set(record_steps(steps, record_every)) if record_every else {0, steps}
    if on_record is not None and 0 in marks:
        on_record(0, W)
    # shared data: one GEMM over all stacked heads instead of many tiny ones
    flat = Z.ndim == 2
    shape = W.shape
    lead = shape[:-1] + (Z.shape[-2],)
    weights = np.asarray(weights, dtype=float)
    if flat and weights.ndim:
        weights = np.broadcast_to(weights, lead).reshape(-1, Z.shape[-2])
    # overflow is detected explicitly below
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, steps + 1):
            if flat:
                der = loss_derivative(kind, W.reshape(-1, shape[-1]) @ Zt)
                G = ((der * weights) @ Z).reshape(shape)
            else:
                der = loss_derivative(kind, W @ Zt)
                G = (der * weights) @ Z
            if not np.isfinite(G).all():
                raise DivergenceError(f"non-finite gradient at step {t}", step=t)
            W -= eta * G
            if on_record is not None and t in marks:
                on_record(t, W)
    if not np.isfinite(W).all():
        raise DivergenceError(f"non-finite weights after step {steps}", step=steps)
    return W


def _svm_reference(ds: LabeledDataset, enc: Encoder | None) -> np.ndarray:
    enc = enc or Encoder.identity()
    return solve_hard_margin((enc(ds.features), ds.labels)).w_hat


def _mean_loss(kind, Z, w) -> float:
    val, _ = loss_and_derivative(kind, Z @ w)
    return float(val.mean())


class _Recorder:
    def __init__(self, Z, kind, reference, pick):
        self.Z, self.kind, self.reference, self.pick = Z, kind, reference, pick
        self.rows = []

    def __call__(self, t, W):
        w = self.pick(W)
        loss = _mean_loss(self.kind, self.Z, w)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at step {t}", step=t)
        self.rows.append((t, loss, float(np.linalg.norm(w)), _gap_or_nan(w, self.reference)))

    def trajectory(self, final_w, cfg, eta, **extra) -> Trajectory:
        arr = np.array(self.rows, dtype=float).reshape(-1, 4)
        return Trajectory(arr[:, 0].astype(int), arr[:, 1], arr[:, 2], arr[:, 3],
                          final_w, cfg, eta, dict(extra))


def train_gd(ds: LabeledDataset, enc: Encoder | None = None, cfg: TrainConfig = TrainConfig(),
             reference="svm") -> Trajectory:
    """Train one head on ``head_loss`` from a seeded Gaussian start.

    ``reference`` is the vector the direction gap is measured against: the
    hard-margin SVM of the encoded data by default, or ``None`` to skip.
    """
    aug = augment(ds, enc)
    eta = resolve_eta(cfg, aug)
    ref = _svm_reference(ds, enc) if isinstance(reference, str) else reference
    Z = aug * ds.labels[:, None]
    W0 = init_head(aug.shape[1], cfg.init_scale, cfg.seed)[None, :]
    rec = _Recorder(Z, cfg.loss, ref, lambda W: W[0])
    W = run_gd(Z, W0, 1.0 / ds.n, eta, cfg.steps, cfg.loss, cfg.record_every, rec)
    return rec.trajectory(W[0].copy(), cfg, eta)


def train_gd_many(datasets, enc: Encoder | None = None, cfg: TrainConfig = TrainConfig(),
                  reference="svm") -> list[Trajectory]:
    """:func:`train_gd` on several equally sized datasets in one stacked run.

    Each dataset gets its own learning rate and SVM reference; results match
    separate :func:`train_gd` calls up to floating-point summation order.
    """
    datasets = list(datasets)
    if not datasets:
        return []
    n = datasets[0].n
    if any(ds.n != n for ds in datasets):
        raise ParameterError("train_gd_many needs datasets of equal size")
    augs = [augment(ds, enc) for ds in datasets]
    etas = np.array([resolve_eta(cfg, a) for a in augs])
    refs = [_svm_reference(ds, enc) if isinstance(reference, str) else reference for ds in datasets]
    Z = np.stack([a * ds.labels[:, None] for a, ds in zip(augs, datasets)])
    p = Z.shape[2]
    W0 = np.stack([init_head(p, cfg.init_scale, cfg.seed)[None, :] for _ in datasets])
    recs = [_Recorder(Z[k], cfg.loss, refs[k], lambda W, k=k: W[k, 0]) for k in range(len(datasets))]

    def on_record(t, W):
        for r in recs:
            r(t, W)

    W = run_gd(Z, W0, 1.0 / n, etas[:, None, None], cfg.steps, cfg.loss, cfg.record_every, on_record)
    return [r.trajectory(W[k, 0].copy(), cfg, float(etas[k])) for k, r in enumerate(recs)]


def head_seed(seed: int, h: int) -> int:
    return int(seed) ^ int(h)


@dataclass
class MultiHeadResult:
    averaged: Trajectory
    heads: np.ndarray | None = None


def train_multihead(ds: LabeledDataset, enc: Encoder | None = None, cfg: TrainConfig = TrainConfig(),
                    H: int = 1, keep_heads: bool = False, reference="svm") -> MultiHeadResult:
    """Train ``H`` decoupled heads and track their average.

    Head ``h`` starts from the Gaussian draw seeded by ``seed ^ h``.
    """
    if H < 1:
        raise ParameterError(f"H must be >= 1, got {H}")
    aug = augment(ds, enc)
    eta = resolve_eta(cfg, aug)
    ref = _svm_reference(ds, enc) if isinstance(reference, str) else reference
    Z = aug * ds.labels[:, None]
    p = aug.shape[1]
    W0 = np.stack([init_head(p, cfg.init_scale, head_seed(cfg.seed, h)) for h in range(H)])
    rec = _Recorder(Z, cfg.loss, ref, lambda W: W.mean(axis=0))
    W = run_gd(Z, W0, 1.0 / ds.n, eta, cfg.steps, cfg.loss, cfg.record_every, rec)
    traj = rec.trajectory(W.mean(axis=0), cfg, eta)
    return MultiHeadResult(traj, W.copy() if keep_heads else None)


def train_mmr(ds: LabeledDataset, enc: Encoder, w=None, cfg: TrainConfig = TrainConfig(),
              alpha: float = 1.0, track_margin: bool = True):
    """Joint gradient descent on the head and the affine encoder.

    Minimizes ``head_loss + alpha * R(S)``.  Each recorded step also stores the
    encoded class-centre distance and, if ``track_margin``, the hard-margin
    SVM margin of the encoded data.  Returns ``(trajectory, final_encoder)``.
    """
    if enc is None or enc.kind != "affine":
        from .errors import UnsupportedEncoderError
        raise UnsupportedEncoderError("train_mmr needs an affine encoder")
    mcfg = MmrConfig(alpha)
    eta = resolve_eta(cfg, ds, enc)
    p = enc.out_dim(ds.d) + 1
    w = init_head(p, cfg.init_scale, cfg.seed) if w is None else np.array(w, dtype=float)
    A, off = enc.A.copy(), enc.offset.copy()
    marks = set(record_steps(cfg.steps, cfg.record_every))
    rows, dists, margins = [], [], []

    def record(t, value):
        cur = Encoder.affine(A, off)
        mu_p, mu_n = class_centers(ds, cur)
        dists.append(float(np.linalg.norm(mu_p - mu_n)))
        margins.append(solve_hard_margin((cur(ds.features), ds.labels)).gamma if track_margin else np.nan)
        rows.append((t, value, float(np.linalg.norm(w)), np.nan))

    for t in range(cfg.steps + 1):
        cur = Encoder.affine(A, off)
        value, gw, genc = mmr_objective(w, ds, cur, cfg.loss, mcfg)
        if not np.isfinite(value):
            raise DivergenceError(f"non-finite objective at step {t}", step=t)
        if t in marks:
            record(t, value)
        if t == cfg.steps:
            break
        w = w - eta * gw
        A = A - eta * genc.A
        off = off - eta * genc.offset
    arr = np.array(rows, dtype=float)
    traj = Trajectory(arr[:, 0].astype(int), arr[:, 1], arr[:, 2], arr[:, 3], w, cfg, eta,
                      {"center_dist": np.array(dists), "margin": np.array(margins)})
    return traj, Encoder.affine(A, off)


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=int(seed))
