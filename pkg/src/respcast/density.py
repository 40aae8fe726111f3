"""Density-based clustering with noise labeling.

The cited algorithm's pipeline: core distances from the min_samples-th
neighbor, mutual-reachability distances, a minimum spanning tree, a
condensed cluster tree under min_cluster_size, and stability-based flat
cluster extraction. Points in no stable cluster are labeled -1 (noise).
Fully deterministic: no randomness anywhere.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import minimum_spanning_tree

NOISE = -1

_INF_LAMBDA = 1e12


def _pairwise_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    return np.sqrt(np.maximum(d2, 0.0))


def mutual_reachability(distances: np.ndarray, min_samples: int) -> np.ndarray:
    """max(core_i, core_j, d_ij) with core = distance to the
    min_samples-th nearest neighbor (self excluded)."""
    n = distances.shape[0]
    k = min(min_samples, n - 1)
    sorted_d = np.sort(distances, axis=1)
    core = sorted_d[:, k]  # column 0 is the self-distance
    return np.maximum(np.maximum(core[:, None], core[None, :]), distances)


def _mst_edges(mreach: np.ndarray) -> list[tuple[float, int, int]]:
    tree = minimum_spanning_tree(csr_matrix(mreach + 1.0))  # +1 keeps zero distances as edges
    coo = tree.tocoo()
    edges = [(float(w) - 1.0, int(i), int(j)) for w, i, j in zip(coo.data, coo.row, coo.col)]
    edges.sort()
    return edges


class _Linkage:
    """Single-linkage dendrogram over the MST edges (union-find)."""

    def __init__(self, n: int, edges: list[tuple[float, int, int]]) -> None:
        self.n = n
        self.children: dict[int, tuple[int, int]] = {}
        self.distance: dict[int, float] = {}
        parent = list(range(2 * n - 1))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        current = {i: i for i in range(n)}
        next_id = n
        for dist, i, j in edges:
            ri, rj = find(i), find(j)
            ci, cj = current[ri], current[rj]
            self.children[next_id] = (ci, cj)
            self.distance[next_id] = dist
            parent[ri] = next_id
            parent[rj] = next_id
            parent.append(next_id)
            current[next_id] = next_id
            next_id += 1
        self.root = next_id - 1

    def size(self, node: int) -> int:
        return 1 if node < self.n else self._sizes[node]

    def compute_sizes(self) -> None:
        self._sizes: dict[int, int] = {}
        for node in sorted(self.children):
            a, b = self.children[node]
            sa = 1 if a < self.n else self._sizes[a]
            sb = 1 if b < self.n else self._sizes[b]
            self._sizes[node] = sa + sb

    def leaves(self, node: int) -> list[int]:
        out: list[int] = []
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur < self.n:
                out.append(cur)
            else:
                stack.extend(self.children[cur])
        return out


def hdbscan_labels(
    X: np.ndarray,
    min_cluster_size: int = 5,
    min_samples: int = 5,
    distances: np.ndarray | None = None,
) -> np.ndarray:
    """Cluster labels (0..k-1) with -1 for noise."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0] if distances is None else distances.shape[0]
    if n == 0:
        return np.empty(0, dtype=int)
    if n < min_cluster_size:
        return np.full(n, NOISE, dtype=int)
    if distances is None:
        distances = _pairwise_distances(X)
    mreach = mutual_reachability(distances, min_samples)
    linkage = _Linkage(n, _mst_edges(mreach))
    linkage.compute_sizes()

    # condensed tree: walk splits top-down, small children fall out as noise
    birth: dict[int, float] = {0: 0.0}
    parent_of: dict[int, int] = {}
    stability: dict[int, float] = {0: 0.0}
    members: dict[int, list[int]] = {0: []}
    child_clusters: dict[int, list[int]] = {0: []}
    next_cid = 1
    stack: list[tuple[int, int]] = [(linkage.root, 0)]
    any_split = False
    while stack:
        node, cid = stack.pop()
        if node < linkage.n:
            members[cid].append(node)
            stability[cid] += _INF_LAMBDA - birth[cid]
            continue
        a, b = linkage.children[node]
        dist = linkage.distance[node]
        lam = 1.0 / dist if dist > 0 else _INF_LAMBDA
        lam = min(lam, _INF_LAMBDA)
        sa, sb = linkage.size(a), linkage.size(b)
        if sa >= min_cluster_size and sb >= min_cluster_size:
            any_split = True
            stability[cid] += (sa + sb) * (lam - birth[cid])
            for child in (a, b):
                new_cid = next_cid
                next_cid += 1
                birth[new_cid] = lam
                parent_of[new_cid] = cid
                stability[new_cid] = 0.0
                members[new_cid] = []
                child_clusters[new_cid] = []
                child_clusters[cid].append(new_cid)
                stack.append((child, new_cid))
        else:
            for child, size in ((a, sa), (b, sb)):
                if size >= min_cluster_size:
                    stack.append((child, cid))
                else:
                    for point in linkage.leaves(child):
                        members[cid].append(point)
                        stability[cid] += lam - birth[cid]

    labels = np.full(n, NOISE, dtype=int)
    if not any_split:
        # no split survived min_cluster_size: one degenerate cluster
        labels[:] = 0
        return labels

    # excess-of-mass selection; the root is never selected
    selected: set[int] = set()
    subtree_value: dict[int, float] = {}
    for cid in range(next_cid - 1, -1, -1):
        children_value = sum(subtree_value[c] for c in child_clusters[cid])
        if cid == 0:
            continue
        if not child_clusters[cid] or stability[cid] >= children_value:
            subtree_value[cid] = stability[cid]
            selected.add(cid)
            # deselect all descendants
            drop = list(child_clusters[cid])
            while drop:
                d = drop.pop()
                selected.discard(d)
                drop.extend(child_clusters[d])
        else:
            subtree_value[cid] = children_value

    def subtree_members(cid: int) -> list[int]:
        out: list[int] = []
        stack2 = [cid]
        while stack2:
            cur = stack2.pop()
            out.extend(members[cur])
            stack2.extend(child_clusters[cur])
        return out

    for label, cid in enumerate(sorted(selected)):
        for point in subtree_members(cid):
            labels[point] = label
    # renumber labels to be dense 0..k-1 in first-appearance order
    unique = [lbl for lbl in dict.fromkeys(labels.tolist()) if lbl != NOISE]
    remap = {old: new for new, old in enumerate(sorted(unique))}
    return np.array([remap[lbl] if lbl != NOISE else NOISE for lbl in labels], dtype=int)
