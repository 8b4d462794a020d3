"""Supervised random forest over labeled clusters with out-of-bag,
class-adaptive confidence thresholds.

Training is standard CART bagging: bootstrap bags, Gini splits over the
real class labels, floor(sqrt(Q)) features per node, fully grown trees.
Bags are recorded so out-of-bag membership stays recoverable; the OOB vote
fraction for the true class gives a per-point confidence whose class-wise
mean is the assignment threshold. A prediction is withdrawn when the
winning vote fraction falls below an adjustable ratio of that threshold.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, LabeledDataset
from .xmurf.forest import tree_rng

__all__ = [
    "UNASSIGNED",
    "ClassNode",
    "ClassTree",
    "SupervisedForest",
    "ClassThresholds",
    "fit_classifier",
    "oob_thresholds",
    "forest_votes",
    "predict_with_threshold",
    "predict_detail",
    "assignment_rate",
    "save_model",
    "load_model",
]

UNASSIGNED = "UNASSIGNED"


@dataclass
class ClassNode:
    node_id: int
    feature: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    class_counts: list[int] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class ClassTree:
    nodes: list[ClassNode]
    bag: np.ndarray  # bootstrap row indices, with repeats


@dataclass
class SupervisedForest:
    trees: list[ClassTree]
    labels: list[str]  # sorted label set; vote vectors index into it
    q: int
    seed: int
    feature_names: list[str] | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@dataclass
class ClassThresholds:
    kappa_bar: dict
    kappas: list  # per training row; None when the row was never out-of-bag


def _gini_from_counts(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=-1, keepdims=True)
    frac = counts / totals
    return 1.0 - (frac * frac).sum(axis=-1)


def _best_split_supervised(x: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray, n_classes: int):
    """Best Gini split over candidate midpoints (ties: lowest feature, then
    lowest threshold)."""
    m = len(rows)
    counts_parent = np.bincount(y[rows], minlength=n_classes).astype(np.float64)
    g_parent = float(_gini_from_counts(counts_parent))
    best = None
    for q in features:
        vals = x[rows, q]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        if sv[0] == sv[-1]:
            continue
        onehot = np.zeros((m, n_classes))
        onehot[np.arange(m), y[rows][order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        boundaries = np.nonzero(sv[1:] != sv[:-1])[0]  # split after sorted position b
        left_counts = cum[boundaries]
        right_counts = counts_parent - left_counts
        n_left = left_counts.sum(axis=1)
        n_right = m - n_left
        gains = g_parent - (n_left * _gini_from_counts(left_counts) + n_right * _gini_from_counts(right_counts)) / m
        k = int(np.argmax(gains))
        if best is None or gains[k] > best[0]:
            tau = float((sv[boundaries[k]] + sv[boundaries[k] + 1]) / 2.0)
            best = (float(gains[k]), int(q), tau)
    return best


def fit_classifier(d: LabeledDataset, b_trees: int, seed: int) -> SupervisedForest:
    """Fit the bagged CART ensemble; deterministic per seed.

    Per-tree rng draw order matches the unsupervised forest: bag first, then
    per node the feature sample (no noise draw here) in preorder.
    """
    labels = d.label_set
    if len(labels) < 2:
        raise ValueError(f"need at least 2 classes, got {labels}")
    if b_trees < 1:
        raise ValueError("need at least one tree")
    x = d.base.values
    m, q = x.shape
    label_index = {c: k for k, c in enumerate(labels)}
    y = np.array([label_index[c] for c in d.labels], dtype=np.int64)
    n_classes = len(labels)
    q_split = max(1, math.isqrt(q))
    trees = []
    for b in range(b_trees):
        rng = tree_rng(seed, b)
        bag = rng.integers(0, m, size=m)
        nodes: list[ClassNode] = []
        stack = [(np.asarray(bag), None, False)]
        while stack:
            rows, parent_id, is_left = stack.pop()
            node_id = len(nodes)
            counts = np.bincount(y[rows], minlength=n_classes)
            node = ClassNode(node_id=node_id, class_counts=counts.tolist())
            nodes.append(node)
            if parent_id is not None:
                if is_left:
                    nodes[parent_id].left = node_id
                else:
                    nodes[parent_id].right = node_id
            if len(rows) <= 1 or int(np.count_nonzero(counts)) <= 1:
                continue
            features = np.sort(rng.choice(q, size=min(q_split, q), replace=False))
            best = _best_split_supervised(x, y, rows, features, n_classes)
            if best is None or best[0] <= 0.0:
                continue
            _, feat, tau = best
            node.feature = feat
            node.threshold = tau
            mask = x[rows, feat] <= tau
            stack.append((rows[~mask], node_id, False))
            stack.append((rows[mask], node_id, True))
        trees.append(ClassTree(nodes=nodes, bag=np.asarray(bag)))
    return SupervisedForest(trees=trees, labels=labels, q=q, seed=seed, feature_names=list(d.base.feature_names))


def _tree_vote(tree: ClassTree, x: np.ndarray) -> int:
    node = tree.nodes[0]
    while not node.is_leaf:
        node = tree.nodes[node.left if x[node.feature] <= node.threshold else node.right]
    return int(np.argmax(node.class_counts))  # ties: lowest label order


def forest_votes(f: SupervisedForest, x: np.ndarray) -> np.ndarray:
    """Vote counts per label (sorted label order) over all trees."""
    votes = np.zeros(len(f.labels), dtype=np.int64)
    for tree in f.trees:
        votes[_tree_vote(tree, x)] += 1
    return votes


def oob_thresholds(f: SupervisedForest, d: LabeledDataset) -> ClassThresholds:
    """Per-point OOB confidence kappa_i and class-mean thresholds kappa_bar.

    kappa_i is the fraction of out-of-bag trees voting for the true class.
    Rows that are in-bag everywhere get kappa None, are excluded from the
    class means, and are reported with a warning. A class with no covered
    rows raises, naming the class.
    """
    x = d.base.values
    m = x.shape[0]
    label_index = {c: k for k, c in enumerate(f.labels)}
    oob_votes = np.zeros((m, len(f.labels)), dtype=np.int64)
    oob_count = np.zeros(m, dtype=np.int64)
    for tree in f.trees:
        in_bag = np.zeros(m, dtype=bool)
        in_bag[np.unique(tree.bag)] = True
        for i in np.nonzero(~in_bag)[0]:
            oob_votes[i, _tree_vote(tree, x[i])] += 1
            oob_count[i] += 1
    kappas: list = []
    for i in range(m):
        if oob_count[i] == 0:
            kappas.append(None)
            continue
        true_k = label_index[d.labels[i]]
        kappas.append(float(oob_votes[i, true_k] / oob_count[i]))
    never = [d.base.ids[i] for i in range(m) if kappas[i] is None]
    if never:
        warnings.warn(f"{len(never)} datapoint(s) never out-of-bag, excluded from thresholds: {never[:5]}")
    kappa_bar = {}
    for c in f.labels:
        vals = [k for k, lab in zip(kappas, d.labels) if lab == c and k is not None]
        if not vals:
            raise ValueError(f"class {c!r} has no out-of-bag covered datapoints")
        kappa_bar[c] = float(np.mean(vals))
    return ClassThresholds(kappa_bar=kappa_bar, kappas=kappas)


def predict_detail(f: SupervisedForest, th: ClassThresholds, x: np.ndarray, ratio: float):
    """Return (label or None, winning vote fraction, threshold used)."""
    if ratio < 0:
        raise ValueError("ratio must be nonnegative")
    votes = forest_votes(f, x)
    k = int(np.argmax(votes))
    winner = f.labels[k]
    fraction = float(votes[k] / f.n_trees)
    threshold = ratio * th.kappa_bar[winner]
    return (winner if fraction >= threshold else None), fraction, threshold


def predict_with_threshold(f: SupervisedForest, th: ClassThresholds, x: np.ndarray, ratio: float):
    """Plurality label over all trees, or None when the vote fraction falls
    below ratio * kappa_bar of the winning class (assignment withdrawn)."""
    return predict_detail(f, th, x, ratio)[0]


def assignment_rate(f: SupervisedForest, th: ClassThresholds, data: Dataset, ratio: float) -> float:
    assigned = sum(
        1 for i in range(data.n_rows) if predict_with_threshold(f, th, data.values[i], ratio) is not None
    )
    return assigned / data.n_rows


def _model_dict(f: SupervisedForest, th: ClassThresholds | None) -> dict:
    return {
        "seed": f.seed,
        "B": f.n_trees,
        "Q": f.q,
        "labels": f.labels,
        "feature_names": f.feature_names,
        "kappa_bar": None if th is None else th.kappa_bar,
        "kappas": None if th is None else th.kappas,
        "trees": [
            {
                "bag": t.bag.tolist(),
                "nodes": [
                    {
                        "id": n.node_id,
                        "feature": n.feature,
                        "threshold": n.threshold,
                        "left": n.left,
                        "right": n.right,
                        "class_counts": n.class_counts,
                    }
                    for n in t.nodes
                ],
            }
            for t in f.trees
        ],
    }


def save_model(f: SupervisedForest, th: ClassThresholds | None, path) -> None:
    Path(path).write_text(json.dumps(_model_dict(f, th)) + "\n")


def load_model(path):
    """Load (forest, thresholds-or-None) from a model JSON."""
    d = json.loads(Path(path).read_text())
    trees = [
        ClassTree(
            nodes=[
                ClassNode(
                    node_id=n["id"],
                    feature=n["feature"],
                    threshold=n["threshold"],
                    left=n["left"],
                    right=n["right"],
                    class_counts=n["class_counts"],
                )
                for n in t["nodes"]
            ],
            bag=np.array(t["bag"], dtype=np.int64),
        )
        for t in d["trees"]
    ]
    forest = SupervisedForest(
        trees=trees, labels=d["labels"], q=d["Q"], seed=d["seed"], feature_names=d.get("feature_names")
    )
    th = None
    if d.get("kappa_bar") is not None:
        th = ClassThresholds(kappa_bar=d["kappa_bar"], kappas=d.get("kappas"))
    return forest, th
