"""Shared fit/predict plumbing for the model zoo."""

from __future__ import annotations

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)


def check_task(task: str) -> str:
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    return task


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a (n, d) feature matrix, got shape {X.shape}")
    return X


def as_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"classification targets must be 1-D, got shape {y.shape}")
    return y.astype(np.int64)


def as_targets(y) -> np.ndarray:
    """Coerce regression targets to an (n, 2) coordinate matrix."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError(f"regression targets must be (n, 2), got shape {y.shape}")
    return y


class Model:
    """Base for every family: fit(X, y) then predict(X).

    Classification targets are integer labels; regression targets are
    (n, 2) coordinate rows.  predict is deterministic given trained state,
    and trained models are immutable, so concurrent prediction is safe.
    """

    task: str = CLASSIFICATION
    n_train: int = 0

    def fit(self, X, y) -> "Model":
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict_one(self, x):
        return self.predict(np.asarray(x, dtype=np.float64)[None, :])[0]

    def _check_fitted(self) -> None:
        if self.n_train == 0:
            raise RuntimeError(f"{type(self).__name__} has not been fitted")

    def get_state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_state(cls, state: dict) -> "Model":
        raise NotImplementedError


def encode_labels(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (sorted unique classes, per-sample class indices)."""
    classes, y_idx = np.unique(y, return_inverse=True)
    return classes.astype(np.int64), y_idx.astype(np.int64)
