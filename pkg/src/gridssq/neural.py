"""Single-hidden-layer network: sigmoid hidden units, linear output.

Hidden unit ``j`` computes ``sigmoid(sum_i w_ih[j, i] * x_i - a[j])``; output
``k`` is ``sum_j H_j * w_ho[k, j] - b[k]``. Thresholds are subtracted, not
added, so their gradients carry the opposite sign of an ordinary bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch, EmptyDataset, SchemaMismatch

MODEL_SCHEMA = "grid-ssq-mlp/1"
BATCH_SIZE = 32


@dataclass(frozen=True)
class NormalizationMeta:
    """Per-dimension min/max ranges for features (x) and labels (y)."""

    x_min: np.ndarray
    x_max: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray

    def __post_init__(self) -> None:
        for name in ("x_min", "x_max", "y_min", "y_max"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if self.x_min.shape != self.x_max.shape or self.y_min.shape != self.y_max.shape:
            raise DimensionMismatch("min/max vectors differ in length")
        if np.any(self.x_min > self.x_max) or np.any(self.y_min > self.y_max):
            raise DimensionMismatch("min exceeds max in normalization ranges")

    @classmethod
    def identity(cls, n: int, m: int) -> "NormalizationMeta":
        return cls(np.zeros(n), np.ones(n), np.zeros(m), np.ones(m))

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray) -> "NormalizationMeta":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return cls(x.min(axis=0), x.max(axis=0), y.min(axis=0), y.max(axis=0))

    @property
    def x_constant(self) -> np.ndarray:
        return self.x_min == self.x_max

    @property
    def y_constant(self) -> np.ndarray:
        return self.y_min == self.y_max

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("x_min", "x_max", "y_min", "y_max")}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationMeta":
        return cls(*(np.asarray(doc[k], dtype=float) for k in ("x_min", "x_max", "y_min", "y_max")))


def _minmax(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != lo.shape[0]:
        raise DimensionMismatch(f"expected {lo.shape[0]} columns, got {v.shape[-1]}")
    span = hi - lo
    constant = span == 0
    out = (v - lo) / np.where(constant, 1.0, span)
    return np.where(constant, 0.5, out)


def _unminmax(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != lo.shape[0]:
        raise DimensionMismatch(f"expected {lo.shape[0]} columns, got {v.shape[-1]}")
    return lo + v * (hi - lo)


def normalize_features(meta: NormalizationMeta, x) -> np.ndarray:
    return _minmax(x, meta.x_min, meta.x_max)


def denormalize_features(meta: NormalizationMeta, x) -> np.ndarray:
    return _unminmax(x, meta.x_min, meta.x_max)


def normalize_labels(meta: NormalizationMeta, y) -> np.ndarray:
    return _minmax(y, meta.y_min, meta.y_max)


def denormalize_labels(meta: NormalizationMeta, y) -> np.ndarray:
    """Inverse of ``normalize_labels``; constant dimensions come back as their value."""
    return _unminmax(y, meta.y_min, meta.y_max)


@dataclass(frozen=True)
class MlpParams:
    w_ih: np.ndarray  # (l, n)
    w_ho: np.ndarray  # (m, l)
    a: np.ndarray  # (l,)
    b: np.ndarray  # (m,)
    norm: NormalizationMeta | None = None

    def __post_init__(self) -> None:
        for name in ("w_ih", "w_ho", "a", "b"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.w_ih.ndim != 2 or self.w_ho.ndim != 2 or self.a.ndim != 1 or self.b.ndim != 1:
            raise DimensionMismatch("w_ih/w_ho must be matrices, a/b vectors")
        l, n = self.w_ih.shape
        m = self.w_ho.shape[0]
        if min(n, l, m) < 1:
            raise DimensionMismatch(f"all layer sizes must be >= 1, got n={n} l={l} m={m}")
        if self.w_ho.shape != (m, l) or self.a.shape != (l,) or self.b.shape != (m,):
            raise DimensionMismatch(
                f"inconsistent shapes w_ih={self.w_ih.shape} w_ho={self.w_ho.shape} "
                f"a={self.a.shape} b={self.b.shape}"
            )
        for name in ("w_ih", "w_ho", "a", "b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DimensionMismatch(f"{name} has non-finite entries")
        if self.norm is not None and (
            self.norm.x_min.shape != (n,) or self.norm.y_min.shape != (m,)
        ):
            raise DimensionMismatch("normalization metadata does not match layer sizes")

    @property
    def n(self) -> int:
        return self.w_ih.shape[1]

    @property
    def l(self) -> int:  # noqa: E743
        return self.w_ih.shape[0]

    @property
    def m(self) -> int:
        return self.w_ho.shape[0]

    @classmethod
    def zeros(cls, n: int, l: int, m: int) -> "MlpParams":
        return cls(np.zeros((l, n)), np.zeros((m, l)), np.zeros(l), np.zeros(m))

    @classmethod
    def random(cls, n: int, l: int, m: int, rng: np.random.Generator, low=-1.0, high=1.0) -> "MlpParams":
        return cls(
            rng.uniform(low, high, (l, n)),
            rng.uniform(low, high, (m, l)),
            rng.uniform(low, high, l),
            rng.uniform(low, high, m),
        )

    def with_norm(self, norm: NormalizationMeta | None) -> "MlpParams":
        return replace(self, norm=norm)


@dataclass(frozen=True)
class Dataset:
    """Model-space samples: rows of ``x`` are network inputs, rows of ``y`` targets."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{x.shape[0]} feature rows vs {y.shape[0]} label rows")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx])


def sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def _check_input(params: MlpParams, x: np.ndarray) -> None:
    if x.shape[-1] != params.n:
        raise DimensionMismatch(f"network expects {params.n} inputs, got {x.shape[-1]}")


def forward(params: MlpParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(hidden, output)`` for one input vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    _check_input(params, x)
    hidden = sigmoid(params.w_ih @ x - params.a)
    return hidden, params.w_ho @ hidden - params.b


def forward_batch(params: MlpParams, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_input(params, x)
    hidden = sigmoid(x @ params.w_ih.T - params.a)
    return hidden, hidden @ params.w_ho.T - params.b


def predict(params: MlpParams, x) -> np.ndarray:
    return forward_batch(params, x)[1]


def _check_dataset(params: MlpParams, data: Dataset) -> None:
    if len(data) == 0:
        raise EmptyDataset("dataset has no samples")
    if data.x.shape[1] != params.n or data.y.shape[1] != params.m:
        raise DimensionMismatch(
            f"dataset is {data.x.shape[1]}->{data.y.shape[1]}, network is {params.n}->{params.m}"
        )


def loss(params: MlpParams, data: Dataset) -> float:
    """Mean over samples of the summed absolute output error."""
    _check_dataset(params, data)
    err = np.abs(data.y - predict(params, data.x)).sum(axis=1)
    return float(err.mean())


def squared_loss(params: MlpParams, data: Dataset) -> float:
    """Mean over samples of ``0.5 * sum_k (y_k - O_k)**2``."""
    _check_dataset(params, data)
    err = data.y - predict(params, data.x)
    return float(0.5 * (err**2).sum(axis=1).mean())


@dataclass(frozen=True)
class Gradient:
    w_ih: np.ndarray
    w_ho: np.ndarray
    a: np.ndarray
    b: np.ndarray


def _batch_gradient(w_ih, w_ho, a, b, x: np.ndarray, y: np.ndarray) -> Gradient:
    """Gradient of the batch-mean of ``0.5 * sum_k (y_k - O_k)**2``."""
    hidden = sigmoid(x @ w_ih.T - a)
    out = hidden @ w_ho.T - b
    d_out = (out - y) / x.shape[0]  # dL/dO
    d_hidden = d_out @ w_ho  # dL/dH
    d_z = d_hidden * hidden * (1.0 - hidden)  # dL/dz, z = w_ih x - a
    return Gradient(
        w_ih=d_z.T @ x,
        w_ho=d_out.T @ hidden,
        a=-d_z.sum(axis=0),
        b=-d_out.sum(axis=0),
    )


def gradient(params: MlpParams, x, y) -> Gradient:
    """Analytic gradient of ``0.5 * sum_k (y_k - O_k)**2`` for one sample."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    _check_input(params, x)
    if y.shape[1] != params.m:
        raise DimensionMismatch(f"network has {params.m} outputs, label has {y.shape[1]}")
    return _batch_gradient(params.w_ih, params.w_ho, params.a, params.b, x, y)


def train_bp(
    params: MlpParams,
    data: Dataset,
    lr: float = 0.05,
    epochs: int = 200,
    seed: int = 0,
    momentum: float = 0.9,
    batch_size: int = BATCH_SIZE,
) -> MlpParams:
    """Mini-batch gradient descent (heavy-ball momentum) on squared error.

    Each step follows the batch-mean gradient; ``momentum=0`` is plain
    gradient descent. The sample order is reshuffled every epoch from
    ``seed``, which is the only randomness. ``epochs=0`` returns ``params``
    untouched.
    """
    if not lr > 0:
        raise ConfigInvalid(f"learning rate must be > 0, got {lr}")
    if epochs < 0:
        raise ConfigInvalid(f"epochs must be >= 0, got {epochs}")
    if not 0.0 <= momentum < 1.0:
        raise ConfigInvalid(f"momentum must be in [0, 1), got {momentum}")
    if epochs == 0:
        return params
    _check_dataset(params, data)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6270]))
    weights = [params.w_ih.copy(), params.w_ho.copy(), params.a.copy(), params.b.copy()]
    velocity = [np.zeros_like(w) for w in weights]
    n = len(data)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            g = _batch_gradient(*weights, data.x[idx], data.y[idx])
            for w, v, dw in zip(weights, velocity, (g.w_ih, g.w_ho, g.a, g.b)):
                v *= momentum
                v -= lr * dw
                w += v
    return MlpParams(*weights, params.norm)


# --- model file -------------------------------------------------------------


def model_to_dict(params: MlpParams) -> dict:
    norm = params.norm or NormalizationMeta.identity(params.n, params.m)
    return {
        "schema": MODEL_SCHEMA,
        "n": params.n,
        "l": params.l,
        "m": params.m,
        "w_ih": params.w_ih.tolist(),
        "w_ho": params.w_ho.tolist(),
        "a": params.a.tolist(),
        "b": params.b.tolist(),
        "norm": norm.to_dict(),
    }


def model_from_dict(doc: dict) -> MlpParams:
    if not isinstance(doc, dict) or doc.get("schema") != MODEL_SCHEMA:
        raise SchemaMismatch(f"not a {MODEL_SCHEMA} model document")
    try:
        params = MlpParams(
            np.asarray(doc["w_ih"], dtype=float),
            np.asarray(doc["w_ho"], dtype=float),
            np.asarray(doc["a"], dtype=float),
            np.asarray(doc["b"], dtype=float),
            NormalizationMeta.from_dict(doc["norm"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"malformed model document: {exc}") from exc
    if (params.n, params.l, params.m) != (doc.get("n"), doc.get("l"), doc.get("m")):
        raise SchemaMismatch("declared n/l/m disagree with weight shapes")
    return params


def save_model(params: MlpParams, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(params), indent=1) + "\n")


def load_model(path) -> MlpParams:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: invalid JSON: {exc}") from exc
    return model_from_dict(doc)


def predict_raw(params: MlpParams, features) -> np.ndarray:
    """Raw features in, denormalized label values out."""
    norm = params.norm or NormalizationMeta.identity(params.n, params.m)
    return denormalize_labels(norm, predict(params, normalize_features(norm, features)))

