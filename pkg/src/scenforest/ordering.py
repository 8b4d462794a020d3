"""Proximity-matrix seriation: hierarchical clustering, leaf ordering,
reordering, PPM heatmap rendering, and range-file cluster labeling.

Clustering runs on the dissimilarity 1 - P with selectable linkage
(average/UPGMA by default). Merge records use the scipy id convention:
leaves are 0..M-1 and the k-th merge creates cluster id M+k, so the exact
optimal-leaf-ordering refinement can reuse scipy's dynamic program.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, LabeledDataset, ProximityMatrix

__all__ = [
    "Dendrogram",
    "ClusterRange",
    "linkage",
    "leaf_order",
    "optimal_leaf_order",
    "reorder",
    "cut_clusters",
    "render_heatmap",
    "load_cluster_ranges",
    "apply_cluster_ranges",
    "range_report",
    "save_dendrogram",
    "save_permutation",
    "load_permutation",
]

LINKAGE_METHODS = ("average", "single", "complete")


@dataclass
class Dendrogram:
    """Agglomerative merge history: (left id, right id, height, size) per merge."""

    merges: list[tuple]
    n_leaves: int

    def __post_init__(self):
        if len(self.merges) != self.n_leaves - 1:
            raise ValueError(f"{len(self.merges)} merges for {self.n_leaves} leaves")


@dataclass
class ClusterRange:
    """Inclusive [start, end] index range into the seriated order."""

    start: int
    end: int
    label: str


def linkage(p: ProximityMatrix, method: str = "average") -> Dendrogram:
    """Agglomerate on d = 1 - P; ties break to the lowest (i, j) pair.

    Each step merges the globally closest pair of active clusters; the
    merged cluster keeps the lower slot, so recorded left/right children are
    ordered by slot. Average linkage weights by cluster sizes (UPGMA).
    """
    if method not in LINKAGE_METHODS:
        raise ValueError(f"unknown linkage method {method!r}")
    m = p.size
    if m < 2:
        raise ValueError("need at least 2 rows to cluster")
    d = 1.0 - p.values.astype(np.float64)
    np.fill_diagonal(d, np.inf)
    active = np.ones(m, dtype=bool)
    sizes = np.ones(m, dtype=np.int64)
    cluster_id = np.arange(m)
    merges = []
    for step in range(m - 1):
        # row-major argmin hits the lexicographically smallest (i, j), i < j
        flat = int(np.argmin(d))
        i, j = divmod(flat, m)
        if i > j:
            i, j = j, i
        h = float(d[i, j])
        merges.append((int(cluster_id[i]), int(cluster_id[j]), h, int(sizes[i] + sizes[j])))
        mask = active.copy()
        mask[i] = mask[j] = False
        if method == "average":
            new_row = (sizes[i] * d[i] + sizes[j] * d[j]) / (sizes[i] + sizes[j])
        elif method == "single":
            new_row = np.minimum(d[i], d[j])
        else:
            new_row = np.maximum(d[i], d[j])
        d[i, mask] = new_row[mask]
        d[mask, i] = new_row[mask]
        d[j, :] = np.inf
        d[:, j] = np.inf
        d[i, i] = np.inf
        active[j] = False
        sizes[i] += sizes[j]
        cluster_id[i] = m + step
    return Dendrogram(merges=merges, n_leaves=m)


def _children_map(dend: Dendrogram) -> dict:
    return {dend.n_leaves + k: (l, r) for k, (l, r, _, _) in enumerate(dend.merges)}


def leaf_order(dend: Dendrogram) -> np.ndarray:
    """Left-to-right leaf traversal of the dendrogram (a permutation of [0, M))."""
    children = _children_map(dend)
    order = []
    stack = [dend.n_leaves + len(dend.merges) - 1] if dend.merges else [0]
    while stack:
        node = stack.pop()
        if node < dend.n_leaves:
            order.append(node)
        else:
            l, r = children[node]
            stack.append(r)
            stack.append(l)
    return np.array(order, dtype=np.int64)


def _scipy_linkage_matrix(dend: Dendrogram) -> np.ndarray:
    return np.array([[l, r, h, s] for l, r, h, s in dend.merges], dtype=np.float64)


def optimal_leaf_order(dend: Dendrogram, p: ProximityMatrix) -> np.ndarray:
    """Exact optimal leaf ordering: minimizes the summed adjacent
    dissimilarity among orders consistent with the dendrogram. O(M^3)."""
    from scipy.cluster import hierarchy
    from scipy.spatial.distance import squareform

    d = 1.0 - p.values.astype(np.float64)
    np.fill_diagonal(d, 0.0)
    z = hierarchy.optimal_leaf_ordering(_scipy_linkage_matrix(dend), squareform(d, checks=False))
    return np.asarray(hierarchy.leaves_list(z), dtype=np.int64)


def cut_clusters(dend: Dendrogram, k: int) -> np.ndarray:
    """Flat cluster labels from undoing the last k-1 merges.

    Labels are 0..k-1 in order of each cluster's smallest leaf index.
    """
    m = dend.n_leaves
    if not 1 <= k <= m:
        raise ValueError(f"cannot cut {m} leaves into {k} clusters")
    parent = np.arange(m + len(dend.merges))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for idx, (l, r, _, _) in enumerate(dend.merges[: m - k]):
        new = m + idx
        parent[find(l)] = new
        parent[find(r)] = new
    roots = [find(i) for i in range(m)]
    label_of = {}
    labels = np.empty(m, dtype=np.int64)
    for i, root in enumerate(roots):
        if root not in label_of:
            label_of[root] = len(label_of)
        labels[i] = label_of[root]
    return labels


def reorder(p: ProximityMatrix, perm) -> ProximityMatrix:
    """Apply a permutation similarity: out[i, j] = p[perm[i], perm[j]]."""
    perm = np.asarray(perm, dtype=np.int64)
    m = p.size
    if perm.shape != (m,) or not np.array_equal(np.sort(perm), np.arange(m)):
        raise ValueError("perm is not a bijection on [0, M)")
    values = p.values[np.ix_(perm, perm)].copy()
    ids = [p.ids[i] for i in perm]
    return ProximityMatrix(values=values, ids=ids)


# blue -> yellow anchors, interpolated to a 256-entry lookup table
_COLOR_ANCHORS = np.array(
    [
        (0.000, 68, 1, 84),
        (0.125, 72, 40, 120),
        (0.250, 62, 74, 137),
        (0.375, 49, 104, 142),
        (0.500, 38, 130, 142),
        (0.625, 31, 158, 137),
        (0.750, 53, 183, 121),
        (0.875, 109, 205, 89),
        (1.000, 253, 231, 37),
    ],
    dtype=np.float64,
)


def _colormap() -> np.ndarray:
    grid = np.linspace(0.0, 1.0, 256)
    lut = np.stack(
        [np.interp(grid, _COLOR_ANCHORS[:, 0], _COLOR_ANCHORS[:, c + 1]) for c in range(3)],
        axis=1,
    )
    return np.round(lut).astype(np.uint8)


def render_heatmap(p: ProximityMatrix, path) -> None:
    """Write the matrix as a binary PPM (P6), one pixel per entry.

    [0, 1] maps linearly onto the colormap; 0 hits the first entry and 1 the
    last (dark blue = low similarity, yellow = high).
    """
    lut = _colormap()
    idx = np.clip(np.round(p.values * 255.0), 0, 255).astype(np.intp)
    img = lut[idx]
    m = p.size
    with open(path, "wb") as fh:
        fh.write(f"P6\n{m} {m}\n255\n".encode("ascii"))
        fh.write(img.tobytes(order="C"))


def load_cluster_ranges(path) -> list[ClusterRange]:
    raw = json.loads(Path(path).read_text())
    return [ClusterRange(int(r["start"]), int(r["end"]), str(r["label"])) for r in raw]


def _check_ranges(ranges: list[ClusterRange], m: int) -> None:
    for r in ranges:
        if not (0 <= r.start <= r.end < m):
            raise ValueError(f"range [{r.start}, {r.end}] outside [0, {m})")
    ordered = sorted(ranges, key=lambda r: r.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start <= a.end:
            raise ValueError(f"overlapping ranges [{a.start}, {a.end}] and [{b.start}, {b.end}]")


def apply_cluster_ranges(data: Dataset, perm, ranges: list[ClusterRange]) -> LabeledDataset:
    """Materialize labels from index ranges over the seriated order.

    Seriated position i refers to original row perm[i]; rows not covered by
    any range are excluded (the labeled set may be smaller than the input).
    """
    perm = np.asarray(perm, dtype=np.int64)
    m = data.n_rows
    if perm.shape != (m,) or not np.array_equal(np.sort(perm), np.arange(m)):
        raise ValueError("perm is not a bijection on [0, M)")
    _check_ranges(ranges, m)
    if not ranges:
        warnings.warn("no cluster ranges given; labeled dataset is empty")
    label_by_row: dict[int, str] = {}
    for r in ranges:
        for pos in range(r.start, r.end + 1):
            label_by_row[int(perm[pos])] = r.label
    rows = sorted(label_by_row)
    return LabeledDataset(data.subset(rows), [label_by_row[i] for i in rows])


def range_report(p_ordered: ProximityMatrix, ranges: list[ClusterRange]) -> list[dict]:
    """Mean within-block similarity per candidate range of a seriated matrix."""
    _check_ranges(ranges, p_ordered.size)
    report = []
    for r in ranges:
        block = p_ordered.values[r.start : r.end + 1, r.start : r.end + 1]
        n = block.shape[0]
        mean = 1.0 if n < 2 else float((block.sum() - np.trace(block)) / (n * (n - 1)))
        report.append({"label": r.label, "start": r.start, "end": r.end, "size": n, "mean_similarity": mean})
    return report


def save_dendrogram(dend: Dendrogram, path) -> None:
    payload = {
        "n_leaves": dend.n_leaves,
        "merges": [{"left": l, "right": r, "height": h, "size": s} for l, r, h, s in dend.merges],
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def save_permutation(perm, path) -> None:
    Path(path).write_text(json.dumps([int(i) for i in perm]) + "\n")


def load_permutation(path) -> np.ndarray:
    return np.array(json.loads(Path(path).read_text()), dtype=np.int64)
