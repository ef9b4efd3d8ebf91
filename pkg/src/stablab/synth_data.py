"""Synthetic linearly separable datasets.

Two uniform balls of radius ``r`` are centred at ``+c*u`` and ``-c*u`` for a
seeded random unit vector ``u``.  Because ``r < c`` the classes are separated
by a slab of half-width ``c - r`` around the hyperplane through the origin
orthogonal to ``u``, so every generated set carries a margin certificate.

All randomness goes through :func:`numpy.random.default_rng` (PCG64).  Identical
seeds give bit-identical datasets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateClassError,
    FormatError,
    ParameterError,
    ShapeError,
    UnsupportedEncoderError,
)


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=float).ravel()
        if x.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise ShapeError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ParameterError("labels must be -1 or +1")
        if not np.all(np.isfinite(x)):
            raise ParameterError("features must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        pos = int(np.count_nonzero(self.labels > 0))
        return pos, self.n - pos

    def take(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(self.features[idx], self.labels[idx], self.seed)


@dataclass(frozen=True)
class DatasetSpec:
    """Generation parameters.

    ``center_distance`` is the distance ``2c`` between the class means and
    ``cluster_radius`` is ``r``; the margin of the result is at least ``c - r``.
    """

    n: int
    d: int = 2
    center_distance: float = 2.0
    cluster_radius: float = 0.5
    bound_B: float = 2.0
    seed: int = 0

    @property
    def half_distance(self) -> float:
        return self.center_distance / 2.0

    @classmethod
    def from_margin(cls, n, margin, radius, d=2, bound_B=None, seed=0):
        """Spec whose construction margin ``c - r`` equals ``margin``."""
        c = margin + radius
        if bound_B is None:
            bound_B = c + radius
        return cls(n=n, d=d, center_distance=2 * c, cluster_radius=radius,
                   bound_B=bound_B, seed=seed)

    def validate(self) -> None:
        c, r = self.half_distance, self.cluster_radius
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if r < 0 or c < 0:
            raise ParameterError("center_distance and cluster_radius must be nonnegative")
        if not r < c:
            raise ParameterError(f"cluster_radius r={r} must be < c={c} (half the center distance)")
        # small slack so that from_margin(...) specs with c + r == B survive rounding
        if c + r > self.bound_B * (1 + 1e-12):
            raise ParameterError(f"c + r = {c + r} exceeds bound_B = {self.bound_B}")


@dataclass(frozen=True)
class Encoder:
    """Feature map E.  ``identity`` or ``affine`` (``x -> A x + offset``)."""

    kind: str = "identity"
    A: np.ndarray | None = None
    offset: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ("identity", "affine"):
            raise UnsupportedEncoderError(f"unknown encoder kind {self.kind!r}")
        if self.kind == "affine":
            if self.A is None:
                raise ParameterError("affine encoder needs a matrix A")
            A = np.array(self.A, dtype=float)
            if A.ndim != 2:
                raise ShapeError("A must be a matrix")
            off = np.zeros(A.shape[0]) if self.offset is None else np.array(self.offset, dtype=float)
            if off.shape != (A.shape[0],):
                raise ShapeError(f"offset shape {off.shape} does not match A rows {A.shape[0]}")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "offset", off)

    @classmethod
    def identity(cls) -> "Encoder":
        return cls("identity")

    @classmethod
    def affine(cls, A, offset=None) -> "Encoder":
        return cls("affine", A, offset)

    def out_dim(self, d: int) -> int:
        return d if self.kind == "identity" else self.A.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x
        if x.shape[-1] != self.A.shape[1]:
            raise ShapeError(f"encoder expects input dim {self.A.shape[1]}, got {x.shape[-1]}")
        return x @ self.A.T + self.offset


def _unit_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        u = rng.standard_normal(d)
        norm = np.linalg.norm(u)
        if norm > 1e-12:
            return u / norm


def _uniform_ball(rng: np.random.Generator, m: int, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((m, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * rng.random((m, 1)) ** (1.0 / d)
    return g / norms * radii


def generate_dataset(spec: DatasetSpec) -> LabeledDataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    c, r = spec.half_distance, spec.cluster_radius
    u = _unit_vector(rng, spec.d)
    n_pos = math.ceil(spec.n / 2)
    labels = np.where(np.arange(spec.n) < n_pos, 1.0, -1.0)
    labels = labels[rng.permutation(spec.n)]
    noise = _uniform_ball(rng, spec.n, spec.d, r)
    x = labels[:, None] * c * u[None, :] + noise
    return LabeledDataset(x, labels, spec.seed)


def _check_classes(labels: np.ndarray, what: str) -> None:
    if not (np.any(labels > 0) and np.any(labels < 0)):
        raise DegenerateClassError(f"{what} leaves a class without samples")


def leave_one_out(ds: LabeledDataset, i: int) -> LabeledDataset:
    """Return S^i, the dataset with sample ``i`` removed."""
    if not 0 <= i < ds.n:
        raise IndexError(f"index {i} out of range for n={ds.n}")
    keep = np.arange(ds.n) != i
    _check_classes(ds.labels[keep], f"removing sample {i}")
    return LabeledDataset(ds.features[keep], ds.labels[keep], ds.seed)


def augment(ds: LabeledDataset, enc: Encoder | None = None) -> np.ndarray:
    """Rows ``[E(x_i), -1]``."""
    enc = enc or Encoder.identity()
    e = enc(ds.features)
    return np.hstack([e, -np.ones((e.shape[0], 1))])


def subsample(ds: LabeledDataset, keep_ratio: float, seed: int) -> LabeledDataset:
    if not 0 < keep_ratio <= 1:
        raise ParameterError(f"keep_ratio must lie in (0, 1], got {keep_ratio}")
    m = math.ceil(keep_ratio * ds.n)
    if m < 2:
        raise ParameterError(f"keep_ratio {keep_ratio} keeps fewer than 2 samples")
    if m == ds.n:
        return ds
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(ds.n, size=m, replace=False))
    _check_classes(ds.labels[idx], "subsampling")
    return ds.take(idx)


def class_centers(ds: LabeledDataset, enc: Encoder | None = None) -> tuple[np.ndarray, np.ndarray]:
    _check_classes(ds.labels, "class_centers on this dataset")
    e = (enc or Encoder.identity())(ds.features)
    return e[ds.labels > 0].mean(axis=0), e[ds.labels < 0].mean(axis=0)


def write_csv(ds: LabeledDataset, path) -> None:
    """Write ``f0..f{d-1},label`` rows to a path or an open text stream."""
    if hasattr(path, "write"):
        _write_rows(ds, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(ds, fh)


def _write_rows(ds: LabeledDataset, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([f"f{k}" for k in range(ds.d)] + ["label"])
    for row, lab in zip(ds.features, ds.labels):
        w.writerow([format(v, ".17g") for v in row] + [str(int(lab))])


def read_csv(path, seed: int | None = None) -> LabeledDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = rows[0]
    if not header or header[-1] != "label" or any(h != f"f{k}" for k, h in enumerate(header[:-1])):
        raise FormatError(f"{path}: expected header f0,...,f{{d-1}},label, got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise FormatError(f"{path}: ragged rows")
    return LabeledDataset(data[:, :-1], data[:, -1], seed)
