"""Classification losses, the max-margin regularizer and the multi-head loss.

A head ``w = [v, b]`` scores an augmented sample ``x~ = [E(x), -1]`` as
``w @ x~``; the per-sample loss is ``l(y * w @ x~)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError, ParameterError, ShapeError, UnsupportedEncoderError
from .synth_data import Encoder, LabeledDataset, augment, class_centers

# smoothness constants; the exponential loss is only smooth on bounded
# domains, 1 is the declared value used for learning-rate bounds
SMOOTHNESS = {"logistic": 0.25, "exponential": 1.0}

# largest exponent fed to exp() by the exponential loss
EXP_CLAMP = 50.0


def smoothness(kind: str) -> float:
    try:
        return SMOOTHNESS[kind]
    except KeyError:
        raise ParameterError(f"unknown loss kind {kind!r}; use 'logistic' or 'exponential'") from None


def loss_and_derivative(kind: str, u):
    """Elementwise ``(l(u), l'(u))`` for arrays of margins."""
    u = np.asarray(u, dtype=float)
    if kind == "logistic":
        return np.logaddexp(0.0, -u), -expit(-u)
    if kind == "exponential":
        e = np.exp(np.minimum(-u, EXP_CLAMP))
        return e, -e
    smoothness(kind)  # raises for unknown kinds


def loss_derivative(kind: str, u):
    """Elementwise ``l'(u)`` alone, for the training inner loop."""
    if kind == "logistic":
        return -expit(-np.asarray(u, dtype=float))
    if kind == "exponential":
        return -np.exp(np.minimum(-np.asarray(u, dtype=float), EXP_CLAMP))
    smoothness(kind)


def loss_value_grad(kind: str, u: float) -> tuple[float, float]:
    if not np.isfinite(u):
        raise DomainError(f"loss argument must be finite, got {u}")
    val, der = loss_and_derivative(kind, u)
    return float(val), float(der)


def _check_dims(w, aug, labels):
    w = np.asarray(w, dtype=float)
    aug = np.asarray(aug, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if aug.ndim != 2 or w.shape[-1] != aug.shape[1]:
        raise ShapeError(f"head dimension {w.shape[-1]} does not match features {aug.shape}")
    if labels.shape != (aug.shape[0],):
        raise ShapeError(f"{labels.shape[0]} labels for {aug.shape[0]} samples")
    return w, aug, labels


def head_loss(w, aug, labels, kind: str = "logistic") -> tuple[float, np.ndarray]:
    """Mean loss ``(1/n) sum l(w @ x~_i y_i)`` and its gradient in ``w``."""
    w, aug, labels = _check_dims(w, aug, labels)
    z = aug * labels[:, None]
    val, der = loss_and_derivative(kind, z @ w)
    return float(val.mean()), der @ z / z.shape[0]


def _weighted_center_difference(ds: LabeledDataset, enc: Encoder) -> np.ndarray:
    mu_pos, mu_neg = class_centers(ds, enc)
    return mu_pos - mu_neg


def mmr_value(ds: LabeledDataset, enc: Encoder | None = None) -> float:
    """``1 / (1 + ||mu_+ - mu_-||)`` over the encoded class means."""
    diff = _weighted_center_difference(ds, enc or Encoder.identity())
    return 1.0 / (1.0 + float(np.linalg.norm(diff)))


@dataclass(frozen=True)
class EncoderGrad:
    A: np.ndarray
    offset: np.ndarray


def mmr_grad(ds: LabeledDataset, enc: Encoder) -> EncoderGrad:
    """Gradient of :func:`mmr_value` with respect to the affine encoder.

    With ``delta`` the raw class-mean difference and ``D = A @ delta``,
    ``dR/dA = -(1 + |D|)^-2 * outer(D/|D|, delta)``.  The offset cancels in
    the difference of means, so its gradient is zero.
    """
    if enc is None or enc.kind != "affine":
        raise UnsupportedEncoderError("mmr_grad needs an affine encoder; identity has no parameters")
    mu_pos, mu_neg = class_centers(ds)
    delta = mu_pos - mu_neg
    D = enc.A @ delta
    dist = float(np.linalg.norm(D))
    if dist == 0.0:
        gA = np.zeros_like(enc.A)
    else:
        gA = -np.outer(D / dist, delta) / (1.0 + dist) ** 2
    return EncoderGrad(gA, np.zeros_like(enc.offset))


@dataclass(frozen=True)
class MmrConfig:
    alpha: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ParameterError(f"alpha must be finite and >= 0, got {self.alpha}")


def head_loss_encoder_grad(w, ds: LabeledDataset, enc: Encoder, kind: str) -> EncoderGrad:
    """Gradient of the head loss with respect to the affine encoder parameters."""
    w = np.asarray(w, dtype=float)
    aug = augment(ds, enc)
    _check_dims(w, aug, ds.labels)
    z = aug * ds.labels[:, None]
    _, der = loss_and_derivative(kind, z @ w)
    coef = der * ds.labels / ds.n
    v = w[:-1]
    return EncoderGrad(np.outer(v, coef @ ds.features), v * coef.sum())


def mmr_objective(w, ds: LabeledDataset, enc: Encoder, kind: str = "logistic",
                  cfg: MmrConfig = MmrConfig()):
    """``head_loss + alpha * R(S)`` with gradients in ``w`` and in the encoder.

    The encoder gradient is ``None`` for the identity encoder.  ``R`` does not
    depend on ``w``, so ``grad_w`` is exactly the head-loss gradient.
    """
    aug = augment(ds, enc)
    val, grad_w = head_loss(w, aug, ds.labels, kind)
    val += cfg.alpha * mmr_value(ds, enc)
    if enc.kind != "affine":
        return val, grad_w, None
    g_head = head_loss_encoder_grad(w, ds, enc, kind)
    g_reg = mmr_grad(ds, enc)
    grad_enc = EncoderGrad(g_head.A + cfg.alpha * g_reg.A, g_head.offset + cfg.alpha * g_reg.offset)
    return val, grad_w, grad_enc


def mh_loss(heads, aug, labels, kind: str = "logistic") -> tuple[float, np.ndarray]:
    """Multi-head loss, mean over heads of the single-head loss.

    Returns the value and an ``(H, p)`` array whose row ``h`` is the gradient in
    head ``h`` (that head's own gradient scaled by ``1/H``).
    """
    heads = np.atleast_2d(np.asarray(heads, dtype=float))
    if heads.shape[0] == 0:
        raise ParameterError("need at least one head")
    heads, aug, labels = _check_dims(heads, aug, labels)
    H = heads.shape[0]
    values = np.empty(H)
    grads = np.empty_like(heads)
    # heads are decoupled; each one goes through the single-head path
    for h in range(H):
        values[h], g = head_loss(heads[h], aug, labels, kind)
        grads[h] = g / H
    return float(values.mean()), grads


def average_heads(heads) -> np.ndarray:
    heads = np.asarray(heads, dtype=float)
    if heads.ndim != 2 or heads.shape[0] == 0:
        raise ParameterError("average_heads needs a non-empty (H, p) array of heads")
    return heads.mean(axis=0)
