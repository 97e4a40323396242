"""CART-style decision trees over dense numeric features.

Classification splits minimize weighted Gini impurity, regression splits
minimize weighted squared error summed over both coordinate outputs.
Candidate thresholds are midpoints between consecutive distinct sorted
feature values; equal-quality splits resolve to the lowest feature index
and lowest threshold, which makes predictions invariant to training-row
permutation.  Sample weights and per-node feature subsets exist for the
boosting and forest ensembles built on top.
"""

from __future__ import annotations

import numpy as np

from .base import (CLASSIFICATION, REGRESSION, Model, as_labels, as_matrix,
                   as_targets, check_task, encode_labels)


def gini_impurity(labels, weights=None) -> float:
    """Gini impurity of a label multiset: 1 - sum of squared class shares."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    if weights is None:
        weights = np.ones(labels.shape[0], dtype=np.float64)
    _, idx = np.unique(labels, return_inverse=True)
    class_w = np.bincount(idx, weights=np.asarray(weights, dtype=np.float64))
    total = class_w.sum()
    if total <= 0.0:
        return 0.0
    shares = class_w / total
    return float(1.0 - (shares ** 2).sum())


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None,
                 value=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            value = self.value
            if isinstance(value, np.ndarray):
                value = value.tolist()
            return {"value": value}
        return {"feature": int(self.feature), "threshold": float(self.threshold),
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "_Node":
        if "value" in data:
            value = data["value"]
            if isinstance(value, list):
                value = np.asarray(value, dtype=np.float64)
            return cls(value=value)
        return cls(data["feature"], data["threshold"],
                   cls.from_dict(data["left"]), cls.from_dict(data["right"]))


def _class_leaf(classes, y_idx, w):
    counts = np.bincount(y_idx, weights=w, minlength=len(classes))
    return int(classes[int(np.argmax(counts))])


def _class_impurity(y_idx, w, n_classes) -> float:
    """Total weight times Gini: W * (1 - sum((W_c/W)^2))."""
    class_w = np.bincount(y_idx, weights=w, minlength=n_classes)
    total = class_w.sum()
    if total <= 0.0:
        return 0.0
    return float(total - (class_w ** 2).sum() / total)


def _sse_impurity(Y, w) -> float:
    """Weighted squared error around the weighted mean, summed over outputs."""
    total = w.sum()
    if total <= 0.0:
        return 0.0
    sums = w @ Y
    sq = w @ (Y ** 2)
    return float((sq - sums ** 2 / total).sum())


class DecisionTreeModel(Model):
    """Greedy binary tree; depth capped at ``max_depth`` (None = unbounded)."""

    def __init__(self, task: str, max_depth: int | None = 50,
                 max_features: int | None = None):
        self.task = check_task(task)
        if max_depth is not None and max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        self.max_depth = max_depth
        self.max_features = max_features
        self.root: _Node | None = None
        self.classes: np.ndarray | None = None

    def fit(self, X, y, sample_weight=None, rng=None) -> "DecisionTreeModel":
        X = as_matrix(X)
        n = X.shape[0]
        if n == 0:
            raise ValueError("training set is empty")
        w = (np.ones(n, dtype=np.float64) if sample_weight is None
             else np.asarray(sample_weight, dtype=np.float64))
        if w.shape != (n,):
            raise ValueError("sample_weight must match the number of rows")
        if self.task == CLASSIFICATION:
            self.classes, y_enc = encode_labels(as_labels(y))
            targets = y_enc
        else:
            self.classes = None
            targets = as_targets(y)
        if len(targets) != n:
            raise ValueError("X and y row counts differ")
        self._rng = rng
        self.root = self._build(X, targets, w, depth=0)
        del self._rng
        self.n_train = n
        return self

    def _leaf(self, targets, w) -> _Node:
        if self.task == CLASSIFICATION:
            return _Node(value=_class_leaf(self.classes, targets, w))
        total = w.sum()
        mean = (w @ targets) / total if total > 0 else targets.mean(axis=0)
        return _Node(value=mean)

    def _build(self, X, targets, w, depth: int) -> _Node:
        if self.max_depth is not None and depth >= self.max_depth:
            return self._leaf(targets, w)
        if X.shape[0] < 2:
            return self._leaf(targets, w)
        if self.task == CLASSIFICATION:
            parent = _class_impurity(targets, w, len(self.classes))
        else:
            parent = _sse_impurity(targets, w)
        if parent <= 0.0:
            return self._leaf(targets, w)

        feature, threshold, child_impurity = self._best_split(X, targets, w)
        if feature < 0 or child_impurity >= parent:
            return self._leaf(targets, w)

        mask = X[:, feature] <= threshold
        node = _Node(feature, threshold)
        node.left = self._build(X[mask], targets[mask], w[mask], depth + 1)
        node.right = self._build(X[~mask], targets[~mask], w[~mask], depth + 1)
        return node

    def _feature_candidates(self, d: int) -> np.ndarray:
        if self.max_features is not None and self.max_features < d:
            if self._rng is None:
                raise ValueError("max_features requires an rng at fit time")
            return np.sort(self._rng.choice(d, self.max_features, replace=False))
        return np.arange(d)

    def _best_split(self, X, targets, w):
        best_feature, best_threshold, best_impurity = -1, 0.0, np.inf
        classification = self.task == CLASSIFICATION
        if classification:
            n_classes = len(self.classes)
        for feature in self._feature_candidates(X.shape[1]):
            col = X[:, feature]
            order = np.argsort(col, kind="stable")
            vals = col[order]
            cuts = np.nonzero(vals[:-1] != vals[1:])[0]
            if cuts.size == 0:
                continue
            wo = w[order]
            if classification:
                onehot = np.zeros((len(vals), n_classes), dtype=np.float64)
                onehot[np.arange(len(vals)), targets[order]] = wo
                cum = np.cumsum(onehot, axis=0)
                left_c = cum[cuts]
                right_c = cum[-1] - left_c
                left_w = left_c.sum(axis=1)
                right_w = right_c.sum(axis=1)
                left_term = _safe_gini_term(left_c, left_w)
                right_term = _safe_gini_term(right_c, right_w)
                impurity = left_term + right_term
            else:
                yo = targets[order]
                cw = np.cumsum(wo)
                cs = np.cumsum(wo[:, None] * yo, axis=0)
                cq = np.cumsum(wo[:, None] * yo ** 2, axis=0)
                lw, ls, lq = cw[cuts], cs[cuts], cq[cuts]
                rw = cw[-1] - lw
                rs = cs[-1] - ls
                rq = cq[-1] - lq
                impurity = (_safe_sse_term(lq, ls, lw)
                            + _safe_sse_term(rq, rs, rw))
            pos = int(np.argmin(impurity))
            if impurity[pos] < best_impurity:
                best_impurity = float(impurity[pos])
                best_feature = int(feature)
                cut = cuts[pos]
                best_threshold = float((vals[cut] + vals[cut + 1]) / 2.0)
        return best_feature, best_threshold, best_impurity

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_matrix(X)
        out = [self._traverse(row) for row in X]
        if self.task == CLASSIFICATION:
            return np.array(out, dtype=np.int64)
        return np.array(out, dtype=np.float64)

    def predict_one(self, x):
        self._check_fitted()
        return self._traverse(np.asarray(x, dtype=np.float64).reshape(-1))

    def _traverse(self, row):
        node = self.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        return node.value

    def depth(self) -> int:
        self._check_fitted()
        return self.root.depth()

    def get_state(self) -> dict:
        self._check_fitted()
        return {
            "task": self.task,
            "max_depth": self.max_depth,
            "max_features": self.max_features,
            "n_train": self.n_train,
            "classes": None if self.classes is None else self.classes.tolist(),
            "root": self.root.to_dict(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "DecisionTreeModel":
        model = cls(state["task"], state["max_depth"], state["max_features"])
        model.root = _Node.from_dict(state["root"])
        model.classes = (None if state["classes"] is None
                         else np.asarray(state["classes"], dtype=np.int64))
        model.n_train = state["n_train"]
        return model


def _safe_gini_term(class_w: np.ndarray, side_w: np.ndarray) -> np.ndarray:
    """W * gini for one side, 0 where the side carries no weight."""
    sq = (class_w ** 2).sum(axis=1)
    return side_w - np.divide(sq, side_w, out=np.zeros_like(sq),
                              where=side_w > 0)


def _safe_sse_term(sq, sums, side_w) -> np.ndarray:
    corr = np.divide(sums ** 2, side_w[:, None],
                     out=np.zeros_like(sums), where=side_w[:, None] > 0)
    return (sq - corr).sum(axis=1)
