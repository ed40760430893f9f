"""Deterministic dense-network engine.

Purpose
-------
Provide the small amount of deep-learning machinery the inverse-design
pipeline needs: fully connected layers with ReLU, LeakyReLU or linear
activation, inverted dropout, exact reverse-mode gradients of the batch-mean
squared error, Adam, and an early-stopping trainer.

Contents
--------
* :class:`LayerSpec`, :class:`MlpModel`, :class:`AdamState`, :class:`Gradients`.
* :func:`init_model`, :func:`forward`, :func:`backward`, :func:`adam_step`.
* :func:`train`, :func:`evaluate`, :func:`predict`, :func:`gradient_check`.

Numerics
--------
Weights are stored ``(out_dim, in_dim)`` and applied as ``x @ W.T + b``.
Training runs in float32; :func:`gradient_check` works on a float64 copy.
Every random draw (initialisation, epoch shuffles, dropout masks) comes from
:func:`siw_inverse.models.make_rng`, so a seed fully determines the result.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt

from .errors import MissingCacheError, NonFiniteError, ShapeMismatchError
from .models import AdamSettings, TrainConfig, TrainRecord, make_rng

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.floating]

_EVAL_BATCH = 4096


class Activation(str, Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    LINEAR = "linear"


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class LayerSpec:
    """One dense layer: ``activation(x @ W.T + b)`` followed by optional dropout.

    Examples
    --------
    >>> LayerSpec(6, 64, Activation.LEAKY_RELU, slope=0.01).describe()
    '6->64 leaky_relu(0.01)'
    >>> LayerSpec(6, 0)
    Traceback (most recent call last):
    ...
    siw_inverse.errors.ShapeMismatchError: layer dimensions must be >= 1, got 6->0
    """

    in_dim: int
    out_dim: int
    activation: Activation = Activation.RELU
    slope: float = 0.01
    dropout_after: float = 0.0

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeMismatchError(f"layer dimensions must be >= 1, got {self.in_dim}->{self.out_dim}")
        if not 0.0 <= self.dropout_after < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.dropout_after}")

    def describe(self) -> str:
        act = f"leaky_relu({self.slope:g})" if self.activation is Activation.LEAKY_RELU else self.activation.value
        drop = f" dropout({self.dropout_after:g})" if self.dropout_after > 0 else ""
        return f"{self.in_dim}->{self.out_dim} {act}{drop}"

    def to_dict(self) -> dict[str, object]:
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "activation": self.activation.value, "slope": self.slope, "dropout_after": self.dropout_after}

    @classmethod
    def from_dict(cls, data: dict[str, object]) -> LayerSpec:
        return cls(
            in_dim=int(str(data["in_dim"])),
            out_dim=int(str(data["out_dim"])),
            activation=Activation(str(data["activation"])),
            slope=float(str(data["slope"])),
            dropout_after=float(str(data["dropout_after"])),
        )


def validate_chain(layers: Sequence[LayerSpec]) -> None:
    """Raise :class:`ShapeMismatchError` unless consecutive layers chain and the head has no dropout."""
    if not layers:
        raise ShapeMismatchError("a model needs at least one layer")
    for index, (left, right) in enumerate(zip(layers, layers[1:], strict=False)):
        if left.out_dim != right.in_dim:
            raise ShapeMismatchError(f"layer {index} outputs {left.out_dim} features but layer {index + 1} expects {right.in_dim}")
    if layers[-1].dropout_after > 0:
        raise ShapeMismatchError("dropout is not allowed after the output layer")


@dataclass
class _ForwardCache:
    inputs: list[Array]
    pre_activations: list[Array]
    masks: list[Array | None]


@dataclass(eq=False)
class MlpModel:
    """Multilayer perceptron parameters plus the train/eval switch.

    ``seed`` records the initialisation seed for checkpoint headers.
    """

    layers: tuple[LayerSpec, ...]
    weights: list[Array]
    biases: list[Array]
    mode: Mode = Mode.EVAL
    seed: int | None = None
    _cache: _ForwardCache | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        validate_chain(self.layers)
        if len(self.weights) != len(self.layers) or len(self.biases) != len(self.layers):
            raise ShapeMismatchError(f"{len(self.layers)} layers need as many weight and bias arrays, got {len(self.weights)} and {len(self.biases)}")
        for index, (spec, w, b) in enumerate(zip(self.layers, self.weights, self.biases, strict=True)):
            if w.shape != (spec.out_dim, spec.in_dim) or b.shape != (spec.out_dim,):
                raise ShapeMismatchError(f"layer {index} parameters have shapes {w.shape}/{b.shape}, expected ({spec.out_dim}, {spec.in_dim})/({spec.out_dim},)")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def dtype(self) -> np.dtype[np.floating]:
        return self.weights[0].dtype

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases, strict=True))

    def widths(self) -> list[int]:
        """Return the width sequence ``[in, hidden..., out]``."""
        return [self.layers[0].in_dim, *(spec.out_dim for spec in self.layers)]

    def parameters(self) -> list[Array]:
        """Return the live parameter arrays as ``[W0, b0, W1, b1, ...]``."""
        out: list[Array] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            out.extend((w, b))
        return out

    def snapshot(self) -> list[Array]:
        return [p.copy() for p in self.parameters()]

    def restore(self, snapshot: Sequence[Array]) -> None:
        for live, saved in zip(self.parameters(), snapshot, strict=True):
            live[...] = saved

    def astype(self, dtype: npt.DTypeLike) -> MlpModel:
        """Return a detached copy with parameters cast to ``dtype``."""
        return MlpModel(
            layers=self.layers,
            weights=[w.astype(dtype, copy=True) for w in self.weights],
            biases=[b.astype(dtype, copy=True) for b in self.biases],
            mode=self.mode,
            seed=self.seed,
        )

    def copy(self) -> MlpModel:
        return self.astype(self.dtype)

    def is_finite(self) -> bool:
        return all(bool(np.isfinite(p).all()) for p in self.parameters())


def init_model(specs: Sequence[LayerSpec], seed: int, *, dtype: npt.DTypeLike = np.float32) -> MlpModel:
    """Create a model with uniform ``(-sqrt(6/in), +sqrt(6/in))`` weights and zero biases.

    Weights are drawn layer by layer in row-major order from one generator.

    Examples
    --------
    >>> model = init_model([LayerSpec(6, 4), LayerSpec(4, 2, Activation.LINEAR)], seed=7)
    >>> model.widths(), model.parameter_count
    ([6, 4, 2], 38)
    >>> bool(np.abs(model.weights[0]).max() <= 1.0)
    True
    """
    layers = tuple(specs)
    validate_chain(layers)
    rng = make_rng(seed)
    weights: list[Array] = []
    biases: list[Array] = []
    for spec in layers:
        bound = math.sqrt(6.0 / spec.in_dim)
        weights.append(rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim)).astype(dtype))
        biases.append(np.zeros(spec.out_dim, dtype=dtype))
    return MlpModel(layers=layers, weights=weights, biases=biases, seed=seed)


# ============================================================================
# Forward and backward
# ============================================================================


def activate(z: Array, spec: LayerSpec) -> Array:
    """Apply the layer's activation.

    Examples
    --------
    >>> activate(np.array([-1.0, 2.0]), LayerSpec(1, 1, Activation.LEAKY_RELU, slope=0.01)).tolist()
    [-0.01, 2.0]
    """
    if spec.activation is Activation.RELU:
        return np.maximum(z, 0)
    if spec.activation is Activation.LEAKY_RELU:
        return np.where(z > 0, z, z * spec.slope).astype(z.dtype)
    return z


def _activation_derivative(z: Array, spec: LayerSpec) -> Array:
    if spec.activation is Activation.RELU:
        return (z > 0).astype(z.dtype)
    if spec.activation is Activation.LEAKY_RELU:
        return np.where(z > 0, 1.0, spec.slope).astype(z.dtype)
    return np.ones_like(z)


def _as_batch(model: MlpModel, x: npt.ArrayLike) -> Array:
    batch = np.asarray(x, dtype=model.dtype)
    if batch.ndim == 1:
        batch = batch[np.newaxis, :]
    if batch.ndim != 2 or batch.shape[1] != model.in_dim:
        raise ShapeMismatchError(f"input batch of shape {batch.shape} does not match model input width {model.in_dim}")
    if not np.isfinite(batch).all():
        raise NonFiniteError("input batch contains non-finite values")
    return batch


def forward(model: MlpModel, x_batch: npt.ArrayLike, *, rng: np.random.Generator | None = None) -> Array:
    """Run the network on ``x_batch``.

    In train mode the layer inputs, pre-activations and dropout masks are
    cached for :func:`backward`, and dropout keeps each unit with probability
    ``1 - rate`` scaling survivors by ``1 / (1 - rate)``. Dropout draws need
    ``rng``. In eval mode dropout is the identity and nothing is cached.

    Raises
    ------
    ShapeMismatchError
        When the input width differs from the first layer.
    NonFiniteError
        When the input contains NaN or infinity.
    """
    a = _as_batch(model, x_batch)
    training = model.mode is Mode.TRAIN
    cache = _ForwardCache([], [], []) if training else None
    for spec, w, b in zip(model.layers, model.weights, model.biases, strict=True):
        z = a @ w.T + b
        out = activate(z, spec)
        mask: Array | None = None
        if training and spec.dropout_after > 0:
            if rng is None:
                raise ValueError("train-mode forward through dropout layers needs an rng")
            keep = 1.0 - spec.dropout_after
            mask = ((rng.random(out.shape) < keep) / keep).astype(out.dtype)
            out = out * mask
        if cache is not None:
            cache.inputs.append(a)
            cache.pre_activations.append(z)
            cache.masks.append(mask)
        a = out
    model._cache = cache
    return a


def predict(model: MlpModel, x: npt.ArrayLike) -> Array:
    """Eval-mode forward pass that leaves the model's mode and cache untouched."""
    batch = _as_batch(model, x)
    outputs: list[Array] = []
    for start in range(0, batch.shape[0], _EVAL_BATCH):
        a = batch[start : start + _EVAL_BATCH]
        for spec, w, b in zip(model.layers, model.weights, model.biases, strict=True):
            a = activate(a @ w.T + b, spec)
        outputs.append(a)
    return np.concatenate(outputs, axis=0)


@dataclass
class Gradients:
    weights: list[Array]
    biases: list[Array]

    def arrays(self) -> list[Array]:
        out: list[Array] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            out.extend((w, b))
        return out

    def is_finite(self) -> bool:
        return all(bool(np.isfinite(g).all()) for g in self.arrays())


def mse_loss(y_pred: npt.ArrayLike, y_true: npt.ArrayLike) -> float:
    """Mean over samples and outputs of the squared error."""
    diff = np.asarray(y_pred, dtype=np.float64) - np.asarray(y_true, dtype=np.float64)
    return float(np.mean(diff * diff))


def backward(model: MlpModel, x_batch: npt.ArrayLike, y_true: npt.ArrayLike) -> Gradients:
    """Return exact gradients of the batch-mean MSE for the last train-mode forward pass.

    The dropout masks of that pass are reused.

    Raises
    ------
    MissingCacheError
        When no train-mode forward preceded the call.
    """
    cache = model._cache
    if cache is None:
        raise MissingCacheError("backward needs a preceding train-mode forward pass")
    x = np.asarray(x_batch)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.shape != cache.inputs[0].shape:
        raise ShapeMismatchError(f"backward batch {x.shape} differs from the cached forward batch {cache.inputs[0].shape}")
    target = np.asarray(y_true, dtype=model.dtype).reshape(x.shape[0], model.out_dim)

    last = len(model.layers) - 1
    output = activate(cache.pre_activations[last], model.layers[last])
    delta = (2.0 / output.size) * (output - target)

    grad_w: list[Array] = [np.empty(0)] * len(model.layers)
    grad_b: list[Array] = [np.empty(0)] * len(model.layers)
    for index in range(last, -1, -1):
        spec = model.layers[index]
        mask = cache.masks[index]
        if mask is not None:
            delta = delta * mask
        delta = delta * _activation_derivative(cache.pre_activations[index], spec)
        grad_w[index] = (delta.T @ cache.inputs[index]).astype(model.dtype)
        grad_b[index] = delta.sum(axis=0).astype(model.dtype)
        if index > 0:
            delta = delta @ model.weights[index]
    return Gradients(weights=grad_w, biases=grad_b)


# ============================================================================
# Adam
# ============================================================================


@dataclass(eq=False)
class AdamState:
    """Adam moments, one pair of arrays per parameter array in :meth:`MlpModel.parameters` order."""

    first_moment: list[Array]
    second_moment: list[Array]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_model(cls, model: MlpModel, settings: AdamSettings | None = None) -> AdamState:
        adam = settings or AdamSettings()
        params = model.parameters()
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            learning_rate=adam.learning_rate,
            beta1=adam.beta1,
            beta2=adam.beta2,
            epsilon=adam.epsilon,
        )

    def copy(self) -> AdamState:
        return replace(self, first_moment=[m.copy() for m in self.first_moment], second_moment=[v.copy() for v in self.second_moment])


def adam_step(model: MlpModel, grads: Gradients, state: AdamState) -> None:
    """Apply one bias-corrected Adam update to ``model`` and ``state`` in place.

    Raises
    ------
    NonFiniteError
        When any gradient is NaN or infinite; parameters stay untouched.
    """
    arrays = grads.arrays()
    params = model.parameters()
    if len(arrays) != len(params) or any(g.shape != p.shape for g, p in zip(arrays, params, strict=True)):
        raise ShapeMismatchError("gradient shapes do not match the model parameters")
    if not grads.is_finite():
        raise NonFiniteError("non-finite gradient")

    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, arrays, state.first_moment, state.second_moment, strict=True):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype)


# ============================================================================
# Training
# ============================================================================


def evaluate(model: MlpModel, x: npt.ArrayLike, y: npt.ArrayLike) -> tuple[float, float]:
    """Return ``(mse, mae)`` of eval-mode predictions, averaged over samples and outputs.

    Examples
    --------
    >>> model = init_model([LayerSpec(1, 1, Activation.LINEAR)], seed=0)
    >>> model.weights[0][...] = 1.0
    >>> mse, mae = evaluate(model, [[0.0], [1.0]], [[-0.1], [0.9]])
    >>> round(mse, 6), round(mae, 6)
    (0.01, 0.1)
    """
    inputs = np.asarray(x)
    if inputs.shape[0] == 0:
        raise ShapeMismatchError("cannot evaluate on an empty batch")
    return regression_errors(predict(model, inputs), y)


def regression_errors(y_pred: npt.ArrayLike, y_true: npt.ArrayLike) -> tuple[float, float]:
    """Return ``(mse, mae)`` over every element, computed in float64."""
    pred = np.asarray(y_pred).astype(np.float64)
    diff = pred - np.asarray(y_true, dtype=np.float64).reshape(pred.shape)
    return float(np.mean(diff * diff)), float(np.mean(np.abs(diff)))


def train(
    model: MlpModel,
    train_x: npt.ArrayLike,
    train_y: npt.ArrayLike,
    val_x: npt.ArrayLike,
    val_y: npt.ArrayLike,
    config: TrainConfig,
    *,
    name: str = "model",
) -> tuple[MlpModel, TrainRecord]:
    """Train ``model`` in place with mini-batch Adam and return it with its learning curve.

    Each epoch shuffles the training rows with a generator seeded from
    ``config.seed``; the same generator draws the dropout masks. After every
    epoch train and validation MSE/MAE are measured in eval mode.

    With early stopping, an epoch improves when its validation MSE is below
    the best so far minus ``min_delta``; training stops once ``patience``
    epochs in a row fail to improve and the best epoch's parameters are
    restored. Without early stopping exactly ``max_epochs`` run and the final
    parameters are kept.

    Raises
    ------
    NonFiniteError
        With the epoch and batch where the loss or a gradient became non-finite.
    """
    tx = np.asarray(train_x, dtype=model.dtype)
    ty = np.asarray(train_y, dtype=model.dtype)
    vx = np.asarray(val_x, dtype=model.dtype)
    vy = np.asarray(val_y, dtype=model.dtype)
    if tx.shape[0] == 0 or vx.shape[0] == 0:
        raise ShapeMismatchError("training and validation sets must be nonempty")
    if tx.shape[0] != ty.shape[0] or vx.shape[0] != vy.shape[0]:
        raise ShapeMismatchError("inputs and targets must have the same number of rows")

    rng = make_rng(config.seed)
    state = AdamState.for_model(model, config.adam)
    stopping = config.early_stopping
    record = TrainRecord()
    best_val = math.inf
    best_params: list[Array] | None = None
    stale = 0
    started = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        model.mode = Mode.TRAIN
        order = rng.permutation(tx.shape[0])
        for batch, start in enumerate(range(0, tx.shape[0], config.batch_size)):
            idx = order[start : start + config.batch_size]
            xb, yb = tx[idx], ty[idx]
            loss = mse_loss(forward(model, xb, rng=rng), yb)
            if not math.isfinite(loss):
                model.mode = Mode.EVAL
                raise NonFiniteError(f"{name}: non-finite training loss", epoch=epoch, batch=batch)
            try:
                adam_step(model, backward(model, xb, yb), state)
            except NonFiniteError as exc:
                model.mode = Mode.EVAL
                raise NonFiniteError(f"{name}: {exc}", epoch=epoch, batch=batch) from exc
        model.mode = Mode.EVAL
        model._cache = None

        train_mse, train_mae = evaluate(model, tx, ty)
        val_mse, val_mae = evaluate(model, vx, vy)
        record.train_mse.append(train_mse)
        record.train_mae.append(train_mae)
        record.val_mse.append(val_mse)
        record.val_mae.append(val_mae)
        logger.debug("Epoch finished", extra={"model": name, "epoch": epoch, "train_mse": train_mse, "val_mse": val_mse})

        if val_mse < best_val - (stopping.min_delta if stopping else 0.0):
            best_val = val_mse
            record.best_epoch = epoch
            stale = 0
            if stopping is not None:
                best_params = model.snapshot()
        else:
            stale += 1
        record.stopped_epoch = epoch
        if stopping is not None and stale >= stopping.patience:
            break

    if stopping is not None and best_params is not None:
        model.restore(best_params)
    record.wall_time_s = time.perf_counter() - started
    logger.info(
        "Training finished",
        extra={
            "model": name,
            "epochs": record.epochs,
            "best_epoch": record.best_epoch,
            "best_val_mse": best_val,
            "wall_time_s": round(record.wall_time_s, 3),
        },
    )
    return model, record


# ============================================================================
# Gradient verification
# ============================================================================


def gradient_check(model: MlpModel, x: npt.ArrayLike, y: npt.ArrayLike, epsilon: float = 1e-5) -> float:
    """Compare :func:`backward` with central differences on a float64, dropout-free copy.

    Returns the largest ``|g_num - g_an| / max(|g_num| + |g_an|, 1e-12)`` over
    all parameters. Intended for small models.

    Examples
    --------
    >>> model = init_model([LayerSpec(1, 1, Activation.LINEAR)], seed=3)
    >>> model.weights[0][...] = 1.0
    >>> gradient_check(model, [[2.0]], [[0.0]], epsilon=1e-3) < 1e-10
    True
    """
    twin = MlpModel(
        layers=tuple(replace(spec, dropout_after=0.0) for spec in model.layers),
        weights=[w.astype(np.float64, copy=True) for w in model.weights],
        biases=[b.astype(np.float64, copy=True) for b in model.biases],
        mode=Mode.TRAIN,
    )
    inputs = np.asarray(x, dtype=np.float64)
    targets = np.asarray(y, dtype=np.float64)
    forward(twin, inputs)
    analytic = backward(twin, inputs, targets).arrays()

    worst = 0.0
    for param, grad in zip(twin.parameters(), analytic, strict=True):
        flat = param.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            plus = mse_loss(predict(twin, inputs), targets)
            flat[i] = saved - epsilon
            minus = mse_loss(predict(twin, inputs), targets)
            flat[i] = saved
            numeric = (plus - minus) / (2.0 * epsilon)
            error = abs(numeric - float(flat_grad[i])) / max(abs(numeric) + abs(float(flat_grad[i])), 1e-12)
            worst = max(worst, error)
    return worst


__all__ = [
    "Activation",
    "AdamState",
    "Gradients",
    "LayerSpec",
    "MlpModel",
    "Mode",
    "activate",
    "adam_step",
    "backward",
    "evaluate",
    "forward",
    "gradient_check",
    "init_model",
    "mse_loss",
    "predict",
    "regression_errors",
    "train",
    "validate_chain",
]
