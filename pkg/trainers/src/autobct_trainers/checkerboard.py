"""Checkerboard random-forest trainer.

The task: predict f(x, y) = (floor(a x + 1) + floor(b y + 1)) mod 2 on the
unit square with a = b = 10.  Each eval trains a random forest whose tree
count comes from the ``n_trees`` parameter and replies with the validation
accuracy and the measured training-plus-scoring time in seconds.

Datasets are regenerated from ``data_seed`` (with ``n_train``/``n_valid``
sizes) sent via params, making runs reproducible end to end.  One feature is
considered per split and tree depth is capped, so a single tree resolves the
board poorly and accuracy climbs markedly with the tree count.
"""

import time

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .protocol import serve

CELLS = 10
TREE_DEPTH = 14


def checkerboard_labels(points: np.ndarray) -> np.ndarray:
    return (np.floor(CELLS * points[:, 0] + 1) + np.floor(CELLS * points[:, 1] + 1)).astype(int) % 2


def make_dataset(seed: int, n_train: int, n_valid: int):
    rng = np.random.default_rng(seed)
    train = rng.uniform(0.0, 1.0, size=(n_train, 2))
    valid = rng.uniform(0.0, 1.0, size=(n_valid, 2))
    return train, checkerboard_labels(train), valid, checkerboard_labels(valid)


class CheckerboardTrainer:
    def __init__(self):
        self._cache_key = None
        self._data = None
        self._evals = 0

    def _dataset(self, params):
        key = (int(params.get("data_seed", 0)), int(params.get("n_train", 30_000)),
               int(params.get("n_valid", 20_000)))
        if key != self._cache_key:
            self._data = make_dataset(*key)
            self._cache_key = key
        return self._data

    def __call__(self, u, params):
        train_x, train_y, valid_x, valid_y = self._dataset(params)
        n_trees = max(int(params.get("n_trees", 1)), 1)
        self._evals += 1
        started = time.perf_counter()
        forest = RandomForestClassifier(
            n_estimators=n_trees,
            max_features=1,
            max_depth=TREE_DEPTH,
            random_state=(int(params.get("data_seed", 0)) + self._evals) & 0x7FFFFFFF,
            n_jobs=1,
        )
        forest.fit(train_x, train_y)
        accuracy = float(np.mean(forest.predict(valid_x) == valid_y))
        elapsed = time.perf_counter() - started
        return accuracy, elapsed


def main():
    serve(CheckerboardTrainer())


if __name__ == "__main__":
    main()
