"""Bootstrap ensemble of randomized decision trees."""

from __future__ import annotations

import numpy as np

from .base import (CLASSIFICATION, Model, as_labels, as_matrix, as_targets,
                   check_task)
from .knn import vote
from .tree import DecisionTreeModel


class RandomForestModel(Model):
    """Trees on bootstrap resamples with sqrt-of-features split candidates.

    Classification aggregates by majority vote (ties to the lowest label),
    regression by the mean over trees.  Fully deterministic per seed:
    ``bootstrap=False`` together with ``feature_subsampling=False`` and one
    tree degenerates to a plain decision tree.
    """

    def __init__(self, task: str, n_trees: int = 10, max_depth: int | None = 50,
                 seed: int = 0, bootstrap: bool = True,
                 feature_subsampling: bool = True):
        self.task = check_task(task)
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.seed = int(seed)
        self.bootstrap = bool(bootstrap)
        self.feature_subsampling = bool(feature_subsampling)
        self.trees: list[DecisionTreeModel] = []

    def fit(self, X, y) -> "RandomForestModel":
        X = as_matrix(X)
        y = (as_labels(y) if self.task == CLASSIFICATION else as_targets(y))
        n, d = X.shape
        max_features = (max(1, int(np.sqrt(d))) if self.feature_subsampling
                        else None)
        self.trees = []
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        for child in seeds:
            rng = np.random.default_rng(child)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTreeModel(self.task, self.max_depth, max_features)
            tree.fit(X[idx], y[idx], rng=rng)
            self.trees.append(tree)
        self.n_train = n
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_matrix(X)
        per_tree = np.stack([tree.predict(X) for tree in self.trees])
        if self.task == CLASSIFICATION:
            return np.array([vote(per_tree[:, i]) for i in range(X.shape[0])],
                            dtype=np.int64)
        return per_tree.mean(axis=0)

    def get_state(self) -> dict:
        self._check_fitted()
        return {
            "task": self.task, "n_trees": self.n_trees,
            "max_depth": self.max_depth, "seed": self.seed,
            "bootstrap": self.bootstrap,
            "feature_subsampling": self.feature_subsampling,
            "n_train": self.n_train,
            "trees": [tree.get_state() for tree in self.trees],
        }

    @classmethod
    def from_state(cls, state: dict) -> "RandomForestModel":
        model = cls(state["task"], state["n_trees"], state["max_depth"],
                    state["seed"], state["bootstrap"],
                    state["feature_subsampling"])
        model.trees = [DecisionTreeModel.from_state(t) for t in state["trees"]]
        model.n_train = state["n_train"]
        return model
