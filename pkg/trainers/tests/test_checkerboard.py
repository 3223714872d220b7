import numpy as np

from autobct_trainers.checkerboard import CheckerboardTrainer, checkerboard_labels, make_dataset

PARAMS = {"data_seed": 7, "n_train": 30_000, "n_valid": 20_000}


def test_labels_alternate_cells():
    points = np.array([[0.05, 0.05], [0.15, 0.05], [0.15, 0.15], [0.95, 0.95]])
    labels = checkerboard_labels(points)
    assert labels.tolist() == [0, 1, 0, 0]


def test_dataset_regenerates_deterministically():
    a = make_dataset(3, 1000, 500)
    b = make_dataset(3, 1000, 500)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    c = make_dataset(4, 1000, 500)
    assert not np.array_equal(a[0], c[0])


def test_accuracy_rises_with_tree_count():
    trainer = CheckerboardTrainer()
    acc_one, _ = trainer([0.0], {**PARAMS, "n_trees": 1})
    acc_many, _ = trainer([1.0], {**PARAMS, "n_trees": 100})
    assert acc_many >= 0.95
    assert acc_one <= acc_many - 0.1  # a single depth-capped tree is far weaker


def test_cost_roughly_linear_in_trees():
    trainer = CheckerboardTrainer()
    counts = [10, 40, 80]
    costs = []
    for n in counts:
        _, cost = trainer([0.0], {**PARAMS, "n_trees": n})
        costs.append(cost)
    # correlation of cost with tree count close to 1, slope positive
    corr = np.corrcoef(counts, costs)[0, 1]
    assert corr >= 0.98
    assert costs[2] / costs[0] >= 4.0  # 8x the trees costs at least 4x the time
