"""Scikit-learn-compatible neural distinguisher.

The estimator wraps the hand-written dense network and training loop behind
the standard fit/predict/predict_proba surface so it composes with
pipelines, cross-validation, and cloning.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .network import forward, init_params, load_checkpoint, save_checkpoint
from .training import TrainingHistory, TrainingSchedule, train_network

#: hidden-layer layouts of the two bundled network sizes
PRESET_HIDDEN_LAYERS = {
    "small": (100, 100),
    "big": (600, 600, 600, 600),
}


def resolve_hidden_layers(value) -> tuple[int, ...]:
    """Accept a preset name ("small"/"big") or an explicit width tuple."""
    if isinstance(value, str):
        try:
            return PRESET_HIDDEN_LAYERS[value]
        except KeyError:
            raise ValueError(
                f"unknown network preset {value!r}; expected one of "
                f"{sorted(PRESET_HIDDEN_LAYERS)}"
            ) from None
    dims = tuple(int(d) for d in value)
    if not dims or any(d < 1 for d in dims):
        raise ValueError("hidden_layers must hold positive widths")
    return dims


class MlpDistinguisher(ClassifierMixin, BaseEstimator):
    """Binary MLP classifier: ReLU hidden layers, sigmoid output, BCE loss,
    mini-batch SGD with Nesterov momentum, plateau LR reduction, and early
    stopping on the validation loss. Parameters are float32; the fitted
    weights are the checkpoint with minimum validation loss.

    Parameters
    ----------
    hidden_layers : tuple of int, or "small" / "big"
        Hidden widths; the presets are 2x100 and 4x600.
    learning_rate : float
        Initial SGD step size.
    momentum : float
        Momentum coefficient.
    nesterov : bool
        Use the look-ahead (Nesterov) update; False gives classical momentum.
    batch_size : int
        Mini-batch size; the last partial batch is used.
    max_epochs : int
        Epoch budget.
    lr_factor, lr_patience, lr_min_delta, lr_min
        Plateau reduction: multiply by lr_factor after lr_patience epochs
        without a lr_min_delta improvement of validation loss, never below
        lr_min.
    es_patience, es_min_delta
        Early stopping on validation loss.
    feature_scale : float
        Inputs are divided by this before the network (255.0 maps raw bytes
        into [0, 1]; use 1.0 for pre-scaled features).
    random_state : int or None
        Seeds weight init and epoch shuffles; fixed values give bit-identical
        fits on a platform.

    Attributes
    ----------
    coefs_, intercepts_ : per-layer float32 weight matrices / bias vectors.
    history_ : TrainingHistory with one record per epoch.
    best_epoch_ : epoch whose validation loss the fitted weights attain.
    """

    def __init__(
        self,
        hidden_layers=(100, 100),
        learning_rate: float = 1e-4,
        momentum: float = 0.9,
        nesterov: bool = True,
        batch_size: int = 1024,
        max_epochs: int = 1000,
        lr_factor: float = 0.5,
        lr_patience: int = 20,
        lr_min_delta: float = 1e-5,
        lr_min: float = 1e-7,
        es_patience: int = 100,
        es_min_delta: float = 1e-6,
        feature_scale: float = 255.0,
        random_state: int | None = None,
    ):
        self.hidden_layers = hidden_layers
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.nesterov = nesterov
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.lr_factor = lr_factor
        self.lr_patience = lr_patience
        self.lr_min_delta = lr_min_delta
        self.lr_min = lr_min
        self.es_patience = es_patience
        self.es_min_delta = es_min_delta
        self.feature_scale = feature_scale
        self.random_state = random_state

    @classmethod
    def from_schedule(cls, schedule: TrainingSchedule, **kwargs) -> "MlpDistinguisher":
        fields = asdict(schedule)
        fields.pop("seed", None)
        fields.update(kwargs)
        if schedule.seed is not None and "random_state" not in kwargs:
            fields["random_state"] = schedule.seed
        return cls(**fields)

    def _scale(self, x: np.ndarray) -> np.ndarray:
        scaled = np.asarray(x, dtype=np.float32)
        if self.feature_scale != 1.0:
            scaled = scaled / np.float32(self.feature_scale)
        return scaled

    def _check_labels(self, y: np.ndarray) -> np.ndarray:
        values = np.unique(y)
        if not np.isin(values, (0, 1)).all():
            raise ValueError(f"labels must lie in {{0, 1}}, got values {values}")
        return np.asarray(y, dtype=np.float32)

    def fit(self, X, y, validation_data=None):
        """Train on (X, y), monitoring ``validation_data=(X_val, y_val)``.

        Without validation data the training set itself is monitored (fine
        for overfit checks; real experiments should pass a held-out split).
        """
        X, y = check_X_y(X, y, dtype="numeric")
        if self.feature_scale <= 0:
            raise ValueError("feature_scale must be positive")
        y32 = self._check_labels(y)
        xs = self._scale(X)
        if validation_data is not None:
            x_val, y_val = check_X_y(*validation_data, dtype="numeric")
            if x_val.shape[1] != X.shape[1]:
                raise ValueError("validation features differ in width from training features")
            xv, yv = self._scale(x_val), self._check_labels(y_val)
        else:
            xv, yv = xs, y32
        dims = [X.shape[1], *resolve_hidden_layers(self.hidden_layers), 1]
        rng = np.random.default_rng(self.random_state)
        params = init_params(dims, rng)
        schedule = TrainingSchedule(
            max_epochs=self.max_epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            nesterov=self.nesterov,
            lr_factor=self.lr_factor,
            lr_patience=self.lr_patience,
            lr_min_delta=self.lr_min_delta,
            lr_min=self.lr_min,
            es_patience=self.es_patience,
            es_min_delta=self.es_min_delta,
        )
        best, history = train_network(params, xs, y32, xv, yv, schedule, rng)
        self.coefs_ = [w for w, _ in best]
        self.intercepts_ = [b for _, b in best]
        self.history_: TrainingHistory = history
        self.best_epoch_ = history.best_epoch
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return self

    @property
    def _params(self):
        return list(zip(self.coefs_, self.intercepts_))

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "coefs_")
        X = check_array(X, dtype="numeric")
        p = forward(self._params, self._scale(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        # ties at 0.5 predict class 1
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def save(self, path: str | Path) -> None:
        """Write the fitted weights as a checkpoint file."""
        check_is_fitted(self, "coefs_")
        save_checkpoint(path, self._params, feature_scale=self.feature_scale)

    @classmethod
    def load(cls, path: str | Path) -> "MlpDistinguisher":
        """Rebuild a fitted estimator from a checkpoint (weights only)."""
        params, feature_scale = load_checkpoint(path)
        dims = [params[0][0].shape[0]] + [w.shape[1] for w, _ in params]
        est = cls(hidden_layers=tuple(dims[1:-1]), feature_scale=feature_scale)
        est.coefs_ = [w for w, _ in params]
        est.intercepts_ = [b for _, b in params]
        est.n_features_in_ = dims[0]
        est.classes_ = np.array([0, 1])
        return est


@dataclass
class EvalResult:
    """Accuracy bookkeeping for one test set."""

    accuracy: float
    k: int
    n: int
    probabilities: np.ndarray
    predictions: np.ndarray


def evaluate(est: MlpDistinguisher, X, y) -> EvalResult:
    """Per-sample predictions plus (k correct, n total) for significance tests."""
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("test set must be non-empty")
    proba = est.predict_proba(X)[:, 1]
    pred = (proba >= 0.5).astype(np.int64)
    k = int((pred == y.astype(np.int64)).sum())
    return EvalResult(k / len(y), k, len(y), proba, pred)
