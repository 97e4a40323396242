"""k-nearest-neighbors matching with Manhattan distances.

The same kernel serves the classification and regression stages of the
cascade and the stand-alone benchmark matcher.  Neighbor ties at the k-th
rank break by lowest training index (stable sort); vote ties break by
lowest label id; a zero-distance neighbor dominates a weighted query
(exact match wins).
"""

from __future__ import annotations

import numpy as np

from .base import (CLASSIFICATION, REGRESSION, Model, as_labels, as_matrix,
                   as_targets, check_task)


def manhattan_distances(matrix: np.ndarray, query: np.ndarray,
                        chunk: int = 4096) -> np.ndarray:
    """Manhattan distance from ``query`` to every row of ``matrix``.

    Chunked so large radio maps never materialize a full-size temporary;
    all scratch space is local, keeping concurrent prediction safe.
    """
    n = matrix.shape[0]
    out = np.empty(n, dtype=np.float64)
    for start in range(0, n, chunk):
        block = matrix[start:start + chunk] - query
        np.abs(block, out=block)
        out[start:start + chunk] = block.sum(axis=1)
    return out


def nearest_neighbors(distances: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances, ascending, ties by lowest index."""
    return np.argsort(distances, kind="stable")[:k]


def vote(labels, weights=None) -> int:
    """(Weighted) majority vote; ties resolve to the lowest label id.

    ``weights`` of None means an unweighted vote.  A non-finite weight
    (the infinite-weight limit of an exact match) restricts the vote to
    the zero-distance neighbors.
    """
    tally: dict[int, float] = {}
    for i, label in enumerate(labels):
        w = 1.0 if weights is None else float(weights[i])
        label = int(label)
        tally[label] = tally.get(label, 0.0) + w
    best_label = None
    best_score = -np.inf
    for label in sorted(tally):
        if tally[label] > best_score:
            best_label, best_score = label, tally[label]
    return best_label


def _combine(neighbor_idx: np.ndarray, distances: np.ndarray, targets,
             weighted: bool, task: str):
    """Reduce the selected neighbors to one prediction.

    Accumulation runs sequentially in ascending (distance, index) order so
    the result is bit-identical to a scalar reference computation.
    """
    dists = [float(distances[i]) for i in neighbor_idx]
    if weighted and any(d == 0.0 for d in dists):
        exact = [i for i, d in zip(neighbor_idx, dists) if d == 0.0]
        neighbor_idx, dists, weighted = exact, [0.0] * len(exact), False

    if task == CLASSIFICATION:
        labels = [int(targets[i]) for i in neighbor_idx]
        weights = None if not weighted else [1.0 / d for d in dists]
        return vote(labels, weights)

    sx = sy = sw = 0.0
    for i, d in zip(neighbor_idx, dists):
        w = 1.0 / d if weighted else 1.0
        sx += w * float(targets[i, 0])
        sy += w * float(targets[i, 1])
        sw += w
    return np.array([sx / sw, sy / sw])


def knn_predict(train_rss, train_targets, query, k: int, weighted: bool,
                task: str):
    """One kNN/WkNN prediction over an explicit training set.

    Classification returns the (weighted) majority label of the k nearest
    rows; regression the (weighted) mean of their coordinate pairs.
    """
    check_task(task)
    train_rss = as_matrix(train_rss)
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != train_rss.shape[1]:
        raise ValueError(
            f"query has {query.shape[0]} features, training set has "
            f"{train_rss.shape[1]}")
    if not 1 <= k <= train_rss.shape[0]:
        raise ValueError(
            f"k={k} must lie in [1, {train_rss.shape[0]}] for this training set")
    targets = (as_labels(train_targets) if task == CLASSIFICATION
               else as_targets(train_targets))
    distances = manhattan_distances(train_rss, query)
    neighbors = nearest_neighbors(distances, k)
    return _combine(neighbors, distances, targets, weighted, task)


class KNeighborsModel(Model):
    """Instance-based matcher: no training beyond storing the radio map."""

    def __init__(self, task: str, k: int = 1, weighted: bool = False):
        self.task = check_task(task)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = int(k)
        self.weighted = bool(weighted)
        self.X: np.ndarray | None = None
        self.y: np.ndarray | None = None

    def fit(self, X, y) -> "KNeighborsModel":
        X = as_matrix(X)
        if self.k > X.shape[0]:
            raise ValueError(
                f"k={self.k} exceeds the training-set size {X.shape[0]}")
        self.X = X
        self.y = (as_labels(y) if self.task == CLASSIFICATION else as_targets(y))
        if len(self.y) != X.shape[0]:
            raise ValueError("X and y row counts differ")
        self.n_train = X.shape[0]
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_matrix(X)
        out = [self.predict_one(q) for q in X]
        if self.task == CLASSIFICATION:
            return np.array(out, dtype=np.int64)
        return np.array(out, dtype=np.float64)

    def predict_one(self, x):
        self._check_fitted()
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        distances = manhattan_distances(self.X, x)
        neighbors = nearest_neighbors(distances, self.k)
        return _combine(neighbors, distances, self.y, self.weighted, self.task)

    def get_state(self) -> dict:
        self._check_fitted()
        return {
            "task": self.task, "k": self.k, "weighted": self.weighted,
            "X": self.X.tolist(), "y": self.y.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "KNeighborsModel":
        model = cls(state["task"], state["k"], state["weighted"])
        return model.fit(state["X"], state["y"])
