"""Region partitions, Binary Partition Trees and UCM-derived hierarchies.

Contour lengths are measured in 4-neighbour pixel sides: every side of a
region pixel that faces a pixel of another region counts one unit of shared
contour, every side facing outside the image counts one unit of image
border. With that convention ``perimeter == border_len + sum(contacts)``
holds exactly and contacts simply add when regions merge.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import DimensionError, RangeError


@dataclass(frozen=True)
class Region:
    """Descriptor snapshot of one region of a partition."""

    id: int
    area: int
    centroid: tuple[float, float]  # (x, y) in pixel units
    sum_lab: np.ndarray | None
    perimeter: int
    border_len: int
    neighbor_contact: dict[int, int] = field(default_factory=dict)

    @property
    def mean_lab(self) -> np.ndarray | None:
        return None if self.sum_lab is None else self.sum_lab / self.area


def _first_occurrence_relabel(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relabel to 0..n-1 in order of first raster appearance."""
    flat = labels.ravel()
    uniq, first, inv = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inv].reshape(labels.shape), uniq[order]


def adjacent_pairs(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique 4-adjacent label pairs ``(i < j)`` and their shared contour length."""
    h = (labels[:, :-1].ravel(), labels[:, 1:].ravel())
    v = (labels[:-1, :].ravel(), labels[1:, :].ravel())
    a = np.concatenate([h[0], v[0]])
    b = np.concatenate([h[1], v[1]])
    diff = a != b
    a, b = a[diff], b[diff]
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    if lo.size == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)
    pairs, counts = np.unique(np.stack([lo, hi], axis=1), axis=0, return_counts=True)
    return pairs, counts.astype(np.int64)


def border_lengths(labels: np.ndarray, n: int) -> np.ndarray:
    """Number of exposed image-border sides per label."""
    out = np.zeros(n, dtype=np.int64)
    for edge in (labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]):
        np.add.at(out, edge, 1)
    return out


class Partition:
    """A labeling of the image into disjoint regions with exact descriptors.

    Labels are compact (``0 .. n_regions - 1``). ``node_ids`` maps each label
    back to the hierarchy node it came from when the partition is a cut of a
    merge tree; otherwise it is the identity.
    """

    def __init__(self, labels: np.ndarray, lab: np.ndarray | None = None, node_ids=None):
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.size == 0:
            raise DimensionError(f"labels must be a non-empty 2-D array, got {labels.shape}")
        if lab is not None and lab.shape[:2] != labels.shape:
            raise DimensionError("label map and Lab image differ in size")
        uniq, inv = np.unique(labels, return_inverse=True)
        self.labels = inv.reshape(labels.shape).astype(np.int64)
        self.node_ids = uniq.astype(np.int64) if node_ids is None else np.asarray(node_ids)[uniq]
        self.lab = lab
        n = uniq.size
        flat = self.labels.ravel()
        height, width = labels.shape
        ys, xs = np.divmod(np.arange(flat.size), width)
        self.area = np.bincount(flat, minlength=n).astype(np.int64)
        self.sum_xy = np.stack(
            [np.bincount(flat, xs, minlength=n), np.bincount(flat, ys, minlength=n)], axis=1
        )
        if lab is not None:
            lab_flat = lab.reshape(-1, 3)
            self.sum_lab = np.stack(
                [np.bincount(flat, lab_flat[:, c], minlength=n) for c in range(3)], axis=1
            )
        else:
            self.sum_lab = None
        self.pairs, self.pair_contact = adjacent_pairs(self.labels)
        self.border_len = border_lengths(self.labels, n)
        contact_sum = np.bincount(self.pairs[:, 0], self.pair_contact, minlength=n) + np.bincount(
            self.pairs[:, 1], self.pair_contact, minlength=n
        )
        self.perimeter = self.border_len + contact_sum.astype(np.int64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def n_regions(self) -> int:
        return int(self.area.size)

    @property
    def centroids(self) -> np.ndarray:
        return self.sum_xy / self.area[:, None]

    @property
    def mean_lab(self) -> np.ndarray:
        if self.sum_lab is None:
            raise ValueError("partition was built without a Lab image")
        return self.sum_lab / self.area[:, None]

    def neighbor_contact(self, i: int) -> dict[int, int]:
        out = {}
        for (a, b), c in zip(self.pairs, self.pair_contact):
            if a == i:
                out[int(b)] = int(c)
            elif b == i:
                out[int(a)] = int(c)
        return out

    def contact_matrix(self) -> np.ndarray:
        """Dense symmetric matrix of shared contour lengths."""
        n = self.n_regions
        m = np.zeros((n, n), dtype=np.int64)
        m[self.pairs[:, 0], self.pairs[:, 1]] = self.pair_contact
        m[self.pairs[:, 1], self.pairs[:, 0]] = self.pair_contact
        return m

    def region(self, i: int) -> Region:
        return Region(
            id=int(i),
            area=int(self.area[i]),
            centroid=(float(self.sum_xy[i, 0] / self.area[i]), float(self.sum_xy[i, 1] / self.area[i])),
            sum_lab=None if self.sum_lab is None else self.sum_lab[i].copy(),
            perimeter=int(self.perimeter[i]),
            border_len=int(self.border_len[i]),
            neighbor_contact=self.neighbor_contact(i),
        )

    def regions(self) -> list[Region]:
        return [self.region(i) for i in range(self.n_regions)]

    def pixels(self, i: int) -> np.ndarray:
        """Lab values of the pixels of region ``i``, shape ``(area, 3)``."""
        return self.lab[self.labels == i]

    def __repr__(self) -> str:
        return f"Partition(n_regions={self.n_regions}, shape={self.shape})"


def is_nested(fine: Partition, coarse: Partition) -> bool:
    """True when every region of ``fine`` lies inside one region of ``coarse``."""
    if fine.shape != coarse.shape:
        return False
    pairs = np.unique(np.stack([fine.labels.ravel(), coarse.labels.ravel()], axis=1), axis=0)
    return pairs.shape[0] == fine.n_regions


def initial_partition(lab: np.ndarray, mode: str = "flat-zones") -> Partition:
    """Starting partition for BPT construction.

    ``"per-pixel"`` makes every pixel a region; ``"flat-zones"`` groups
    maximal 4-connected sets of pixels sharing the exact same Lab value.
    """
    lab = np.asarray(lab, dtype=np.float64)
    height, width = lab.shape[:2]
    if mode == "per-pixel":
        return Partition(np.arange(height * width).reshape(height, width), lab)
    if mode != "flat-zones":
        raise ValueError(f"unknown initial partition mode {mode!r}")
    idx = np.arange(height * width).reshape(height, width)
    same_h = np.all(lab[:, :-1] == lab[:, 1:], axis=2)
    same_v = np.all(lab[:-1, :] == lab[1:, :], axis=2)
    rows = np.concatenate([idx[:, :-1][same_h], idx[:-1, :][same_v]])
    cols = np.concatenate([idx[:, 1:][same_h], idx[1:, :][same_v]])
    graph = coo_matrix(
        (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(idx.size, idx.size)
    )
    _, comp = connected_components(graph, directed=False)
    labels, _ = _first_occurrence_relabel(comp.reshape(height, width))
    return Partition(labels, lab)


def bpt_merge_cost(area_a: int, mean_a, area_b: int, mean_b) -> float:
    """Size-weighted colour distance used to order BPT merges."""
    d = math.sqrt(
        (mean_a[0] - mean_b[0]) ** 2 + (mean_a[1] - mean_b[1]) ** 2 + (mean_a[2] - mean_b[2]) ** 2
    )
    return min(area_a, area_b) * d


class Hierarchy:
    """Binary merge tree over an initial partition.

    Nodes ``0 .. N-1`` are the leaves (the regions of ``leaf_partition``);
    merge ``t`` creates node ``N + t`` from ``merges[t, 0] < merges[t, 1]``.
    Per-node descriptors (area, coordinate sums, Lab sums, perimeter and
    border length) are held in arrays indexed by node id.
    """

    def __init__(self, leaf_partition: Partition, merges, area, sum_xy, sum_lab, perimeter, border_len):
        self.leaf_partition = leaf_partition
        self.merges = np.asarray(merges, dtype=np.int64).reshape(-1, 3)
        self.area = np.asarray(area, dtype=np.int64)
        self.sum_xy = np.asarray(sum_xy, dtype=np.float64)
        self.sum_lab = np.asarray(sum_lab, dtype=np.float64)
        self.perimeter = np.asarray(perimeter, dtype=np.int64)
        self.border_len = np.asarray(border_len, dtype=np.int64)
        n_nodes = self.n_nodes
        self.parent = np.full(n_nodes, -1, dtype=np.int64)
        self.children = np.full((n_nodes, 2), -1, dtype=np.int64)
        for left, right, new in self.merges:
            self.parent[left] = new
            self.parent[right] = new
            self.children[new] = (left, right)

    @property
    def n_leaves(self) -> int:
        return self.leaf_partition.n_regions

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_leaves - 1

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    @property
    def leaf_labels(self) -> np.ndarray:
        return self.leaf_partition.labels

    @property
    def lab(self) -> np.ndarray | None:
        return self.leaf_partition.lab

    @property
    def shape(self) -> tuple[int, int]:
        return self.leaf_partition.shape

    def depth(self) -> np.ndarray:
        """Number of edges from each node up to the root."""
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes - 2, -1, -1):
            depth[node] = depth[self.parent[node]] + 1
        return depth

    def _owner_after(self, n_merges: int) -> np.ndarray:
        """Live ancestor of every node after the first ``n_merges`` merges."""
        limit = self.n_leaves + n_merges
        owner = np.arange(self.n_nodes, dtype=np.int64)
        for node in range(limit - 1, -1, -1):
            p = self.parent[node]
            if p != -1 and p < limit:
                owner[node] = owner[p]
        return owner

    def partition_at(self, n_regions: int) -> Partition:
        """Cut of the merge sequence leaving exactly ``n_regions`` regions."""
        if not 1 <= n_regions <= self.n_leaves:
            raise RangeError(f"n_regions must be in [1, {self.n_leaves}], got {n_regions}")
        owner = self._owner_after(self.n_leaves - n_regions)
        labels = owner[self.leaf_labels]
        return Partition(labels, self.lab)

    def truncate(self, n_regions: int) -> "Hierarchy":
        """The merge tree above the ``n_regions`` cut, with that cut as leaves."""
        if not 1 <= n_regions <= self.n_leaves:
            raise RangeError(f"n_regions must be in [1, {self.n_leaves}], got {n_regions}")
        m = self.n_leaves - n_regions
        owner = self._owner_after(m)
        cut_nodes = np.unique(owner[: self.n_leaves])
        kept = np.concatenate([cut_nodes, np.arange(self.n_leaves + m, self.n_nodes)])
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[kept] = np.arange(kept.size)
        merges = remap[self.merges[m:]]
        leaf = Partition(remap[owner[self.leaf_labels]], self.lab)
        return Hierarchy(
            leaf,
            merges,
            self.area[kept],
            self.sum_xy[kept],
            self.sum_lab[kept],
            self.perimeter[kept],
            self.border_len[kept],
        )

    def leaves_under(self, node: int) -> np.ndarray:
        """Sorted leaf ids contained in ``node``."""
        stack, out = [int(node)], []
        while stack:
            v = stack.pop()
            if v < self.n_leaves:
                out.append(v)
            else:
                stack.extend(int(c) for c in self.children[v])
        return np.array(sorted(out), dtype=np.int64)

    def __repr__(self) -> str:
        return f"Hierarchy(n_leaves={self.n_leaves}, merges={len(self.merges)})"


def build_bpt(p0: Partition) -> Hierarchy:
    """Binary Partition Tree by greedy merging of the most similar neighbours.

    Similarity is ``min(|Ri|, |Rj|) * ||mean_lab(Ri) - mean_lab(Rj)||``;
    ties go to the lexicographically lowest ``(i, j)`` pair. Stale queue
    entries are skipped lazily (a merged region never comes back alive).
    """
    if p0.sum_lab is None:
        raise ValueError("BPT construction needs a partition built with a Lab image")
    n = p0.n_regions
    n_nodes = 2 * n - 1
    area = np.zeros(n_nodes, dtype=np.int64)
    sum_xy = np.zeros((n_nodes, 2))
    sum_lab = np.zeros((n_nodes, 3))
    perimeter = np.zeros(n_nodes, dtype=np.int64)
    border = np.zeros(n_nodes, dtype=np.int64)
    area[:n], sum_xy[:n], sum_lab[:n] = p0.area, p0.sum_xy, p0.sum_lab
    perimeter[:n], border[:n] = p0.perimeter, p0.border_len

    areas = [int(a) for a in p0.area] + [0] * (n - 1)
    sums = [tuple(float(v) for v in s) for s in p0.sum_lab] + [None] * (n - 1)
    means = [tuple(v / a for v in s) for s, a in zip(sums[:n], areas[:n])] + [None] * (n - 1)
    nbrs: list[dict[int, int] | None] = [dict() for _ in range(n)] + [None] * (n - 1)
    heap = []
    for (i, j), c in zip(p0.pairs.tolist(), p0.pair_contact.tolist()):
        nbrs[i][j] = c
        nbrs[j][i] = c
        heap.append((bpt_merge_cost(areas[i], means[i], areas[j], means[j]), i, j))
    heapq.heapify(heap)
    alive = [True] * n + [False] * (n - 1)
    merges = []
    new = n
    while new < n_nodes:
        if not heap:
            raise ValueError("region adjacency graph is disconnected")
        _, i, j = heapq.heappop(heap)
        if not (alive[i] and alive[j]):
            continue
        alive[i] = alive[j] = False
        alive[new] = True
        areas[new] = areas[i] + areas[j]
        sums[new] = tuple(a + b for a, b in zip(sums[i], sums[j]))
        means[new] = tuple(v / areas[new] for v in sums[new])
        contact_ij = nbrs[i].pop(j)
        nbrs[j].pop(i)
        merged = dict(nbrs[i])
        for k, c in nbrs[j].items():
            merged[k] = merged.get(k, 0) + c
        nbrs[i] = nbrs[j] = None
        nbrs[new] = merged
        for k in sorted(merged):
            nk = nbrs[k]
            nk.pop(i, None)
            nk.pop(j, None)
            nk[new] = merged[k]
            heapq.heappush(heap, (bpt_merge_cost(areas[k], means[k], areas[new], means[new]), k, new))
        area[new] = areas[new]
        sum_xy[new] = sum_xy[i] + sum_xy[j]
        sum_lab[new] = sums[new]
        perimeter[new] = perimeter[i] + perimeter[j] - 2 * contact_ij
        border[new] = border[i] + border[j]
        merges.append((i, j, new))
        new += 1
    return Hierarchy(p0, merges, area, sum_xy, sum_lab, perimeter, border)


class UcmHierarchy:
    """Nested partitions obtained by thresholding an ultrametric contour map.

    The UCM is accepted either at image resolution ``(H, W)`` or on the
    contour grid ``(2H+1, 2W+1)`` where pixel cells sit at odd coordinates
    and contour strengths at the interleaved positions. A pixel (or edge) is
    treated as contour at threshold ``t`` when its strength is positive and
    ``>= t``.

    At image resolution, contour pixels are absorbed by following a fixed
    descent chain: each pixel points to its neighbour with the lowest
    ``(strength, raster index)`` key below its own. The chain does not
    depend on ``t``, which keeps the partitions nested for every pair of
    thresholds.
    """

    def __init__(self, ucm: np.ndarray, lab: np.ndarray | None = None, image_shape=None):
        ucm = np.asarray(ucm, dtype=np.float64)
        if ucm.ndim != 2:
            raise DimensionError("UCM must be a 2-D map")
        if image_shape is None and lab is not None:
            image_shape = lab.shape[:2]
        if image_shape is None:
            image_shape = ucm.shape
        height, width = image_shape
        if ucm.shape == (height, width):
            self.grid = False
        elif ucm.shape == (2 * height + 1, 2 * width + 1):
            self.grid = True
        else:
            raise DimensionError(
                f"UCM shape {ucm.shape} matches neither ({height}, {width}) "
                f"nor ({2 * height + 1}, {2 * width + 1})"
            )
        self.ucm = ucm
        self.lab = lab
        self.shape = (height, width)
        self._idx = np.arange(height * width).reshape(height, width)
        if self.grid:
            self._h_strength = ucm[1:-1:2, 2:-1:2]  # between (y, x) and (y, x+1)
            self._v_strength = ucm[2:-1:2, 1:-1:2]  # between (y, x) and (y+1, x)
            strengths = np.concatenate([self._h_strength.ravel(), self._v_strength.ravel()])
        else:
            self._descent = self._descent_parent()
            strengths = ucm.ravel()
        positive = np.unique(strengths[strengths > 0])
        # Threshold candidates: each unique positive strength, then one above the max.
        top = positive[-1] + 1.0 if positive.size else 1.0
        self.thresholds = np.append(positive, top) if positive.size else np.array([top])
        self._count_cache: dict[float, int] = {}

    def _descent_parent(self) -> np.ndarray:
        s = self.ucm
        idx = self._idx
        best_s = s.copy()
        best_i = idx.copy()
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ys = slice(max(dy, 0), s.shape[0] + min(dy, 0))
            yd = slice(max(-dy, 0), s.shape[0] + min(-dy, 0))
            xs = slice(max(dx, 0), s.shape[1] + min(dx, 0))
            xd = slice(max(-dx, 0), s.shape[1] + min(-dx, 0))
            qs, qi = s[ys, xs], idx[ys, xs]
            cur_s, cur_i = best_s[yd, xd], best_i[yd, xd]
            better = (qs < cur_s) | ((qs == cur_s) & (qi < cur_i))
            cur_s[better] = qs[better]
            cur_i[better] = qi[better]
        return best_i.ravel()

    def _labels(self, threshold: float) -> np.ndarray:
        height, width = self.shape
        idx = self._idx
        if self.grid:
            keep_h = (self._h_strength < threshold) | (self._h_strength == 0)
            keep_v = (self._v_strength < threshold) | (self._v_strength == 0)
            rows = np.concatenate([idx[:, :-1][keep_h], idx[:-1, :][keep_v]])
            cols = np.concatenate([idx[:, 1:][keep_h], idx[1:, :][keep_v]])
        else:
            s = self.ucm
            interior = (s < threshold) | (s == 0)
            keep_h = interior[:, :-1] & interior[:, 1:]
            keep_v = interior[:-1, :] & interior[1:, :]
            contour = ~interior.ravel()
            src = idx.ravel()[contour]
            dst = self._descent[contour]
            chain = src != dst
            rows = np.concatenate([idx[:, :-1][keep_h], idx[:-1, :][keep_v], src[chain]])
            cols = np.concatenate([idx[:, 1:][keep_h], idx[1:, :][keep_v], dst[chain]])
        graph = coo_matrix(
            (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(idx.size, idx.size)
        )
        _, comp = connected_components(graph, directed=False)
        labels, _ = _first_occurrence_relabel(comp.reshape(height, width))
        return labels

    def partition(self, threshold: float) -> Partition:
        if not np.isfinite(threshold) or threshold < 0:
            raise RangeError(f"threshold must be a finite value >= 0, got {threshold}")
        return Partition(self._labels(threshold), self.lab)

    def region_count(self, threshold: float) -> int:
        key = float(threshold)
        if key not in self._count_cache:
            self._count_cache[key] = int(self._labels(key).max()) + 1
        return self._count_cache[key]

    def threshold_for_count(self, target: int) -> float:
        """Coarsest candidate threshold whose partition has ``>= target`` regions."""
        lo, hi = 0, self.thresholds.size - 1
        if self.region_count(self.thresholds[lo]) < target:
            return float(self.thresholds[lo])
        # Region counts are non-increasing along the candidates.
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.region_count(self.thresholds[mid]) >= target:
                lo = mid
            else:
                hi = mid - 1
        return float(self.thresholds[lo])


def ucm_partition(ucm: np.ndarray, threshold: float, lab: np.ndarray | None = None, image_shape=None) -> Partition:
    """Partition given by the regions of ``ucm`` below ``threshold``."""
    return UcmHierarchy(ucm, lab=lab, image_shape=image_shape).partition(threshold)


def geometric_targets(k_levels: int, n_first: int, n_last: int) -> list[int]:
    """Region counts following a geometric progression from ``n_first`` to ``n_last``."""
    if k_levels < 2:
        raise RangeError(f"k_levels must be >= 2, got {k_levels}")
    if not n_first >= n_last >= 1:
        raise RangeError(f"need n_first >= n_last >= 1, got {n_first}, {n_last}")
    ratio = n_last / n_first
    out: list[int] = []
    for j in range(k_levels):
        n = int(math.floor(n_first * ratio ** (j / (k_levels - 1)) + 0.5))
        if n not in out:
            out.append(n)
    return out


def extract_partition_stack(
    source: Hierarchy | UcmHierarchy,
    k_levels: int = 6,
    n_first: int = 100,
    n_last: int = 3,
    targets: Sequence[int] | None = None,
) -> list[Partition]:
    """Nested partitions from finest to coarsest.

    ``targets`` overrides the geometric schedule. Targets larger than the
    number of BPT leaves are clamped; partitions that coincide are dropped.
    """
    if targets is None:
        targets = geometric_targets(k_levels, n_first, n_last)
    else:
        targets = [int(t) for t in targets]
        if not targets or min(targets) < 1 or list(targets) != sorted(targets, reverse=True):
            raise RangeError("explicit targets must be positive and non-increasing")
    stack: list[Partition] = []
    if isinstance(source, Hierarchy):
        seen = []
        for t in targets:
            t = min(t, source.n_leaves)
            if t not in seen:
                seen.append(t)
                stack.append(source.partition_at(t))
        return stack
    seen_thresholds = []
    for t in targets:
        thr = source.threshold_for_count(t)
        if thr not in seen_thresholds:
            seen_thresholds.append(thr)
            stack.append(source.partition(thr))
    return stack
