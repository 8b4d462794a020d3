"""Single-tree construction and path extraction for the unsupervised forest.

Trees are grown fully (no pruning): splitting stops only when a node holds
one bagged datapoint or all sampled features are constant within the node.
Node ids are assigned in preorder so a serialized tree rebuilds
identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .noise import NOISE_KINDS, noise_cdf

__all__ = ["TreeNode", "Tree", "grow_tree", "path", "path_proximity_tree"]


@dataclass
class TreeNode:
    node_id: int
    feature: int | None = None      # split feature index, None for leaves
    threshold: float | None = None  # go left iff value <= threshold
    left: int | None = None
    right: int | None = None
    real_count: int = 0             # bagged datapoints reaching this node
    noise_kind: str | None = None   # CDF drawn for this node's split search

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class Tree:
    nodes: list[TreeNode] = field(default_factory=list)
    bag: np.ndarray | None = None   # bootstrap row indices (with repeats)

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]


def _best_split(x: np.ndarray, rows: np.ndarray, features: np.ndarray, kind: str):
    """Scan all candidate thresholds of the sampled features.

    Candidates are midpoints between consecutive sorted unique values.
    Returns (gain, feature, threshold) of the best split or None if every
    sampled feature is degenerate. Ties resolve to the lowest feature index
    (features are scanned in ascending order) and then the lowest threshold
    (argmax picks the first of equal gains on an ascending threshold grid).
    """
    m = len(rows)
    best = None
    for q in features:
        vals = np.sort(x[rows, q])
        lo, hi = vals[0], vals[-1]
        if hi == lo:
            continue
        uniq = np.unique(vals)
        thresholds = (uniq[:-1] + uniq[1:]) / 2.0
        real_left = np.searchsorted(vals, thresholds, side="right").astype(np.float64)
        real_right = m - real_left
        z = (thresholds - (hi + lo) / 2.0) / ((hi - lo) / 6.0)
        p = noise_cdf(kind, np.clip(z, -3.0, 3.0))
        noise_left = m * p
        noise_right = m - noise_left
        # parent impurity is exactly 0.5: the assumed noise mass equals the
        # real count, so the node is perfectly balanced before the split
        total_left = real_left + noise_left
        total_right = real_right + noise_right
        r_left = 2.0 * real_left * noise_left / (total_left * total_left)
        r_right = 2.0 * real_right * noise_right / (total_right * total_right)
        gains = 0.5 - (total_left * r_left + total_right * r_right) / (2.0 * m)
        k = int(np.argmax(gains))
        if best is None or gains[k] > best[0]:
            best = (float(gains[k]), int(q), float(thresholds[k]))
    return best


def grow_tree(x: np.ndarray, bag: np.ndarray, n_features_split: int, rng: np.random.Generator) -> Tree:
    """Grow one fully-grown tree on the bagged rows of the data matrix.

    Per node the rng draws, in order: the noise-CDF kind, then
    ``n_features_split`` distinct feature indices.
    """
    q_total = x.shape[1]
    tree = Tree(bag=np.asarray(bag))
    # preorder DFS; stack holds (rows, parent_id, is_left), root has no parent
    stack = [(np.asarray(bag), None, False)]
    while stack:
        rows, parent_id, is_left = stack.pop()
        node_id = len(tree.nodes)
        node = TreeNode(node_id=node_id, real_count=len(rows))
        tree.nodes.append(node)
        if parent_id is not None:
            if is_left:
                tree.nodes[parent_id].left = node_id
            else:
                tree.nodes[parent_id].right = node_id
        if len(rows) <= 1:
            continue
        kind = NOISE_KINDS[rng.integers(len(NOISE_KINDS))]
        features = np.sort(rng.choice(q_total, size=min(n_features_split, q_total), replace=False))
        best = _best_split(x, rows, features, kind)
        # a perfectly balanced candidate scores exactly zero against the
        # balanced virtual noise; trees still split there (fully grown down
        # to singleton or degenerate leaves), and negative gain cannot occur
        if best is None or best[0] < 0.0:
            continue
        _, q, tau = best
        node.feature = q
        node.threshold = tau
        node.noise_kind = kind
        mask = x[rows, q] <= tau
        # push right first so the left child is created (and numbered) first
        stack.append((rows[~mask], node_id, False))
        stack.append((rows[mask], node_id, True))
    return tree


def path(x: np.ndarray, tree: Tree) -> set:
    """Node ids visited by one datapoint from the root to its leaf."""
    visited = set()
    node = tree.root
    while True:
        visited.add(node.node_id)
        if node.is_leaf:
            return visited
        node = tree.nodes[node.left if x[node.feature] <= node.threshold else node.right]


def path_proximity_tree(p1: set, p2: set) -> float:
    """Jaccard index of two root-to-leaf path sets from the same tree."""
    inter = len(p1 & p2)
    return inter / (len(p1) + len(p2) - inter)
