"""Saliency computed directly on every node of a binary merge tree.

Each node is scored once, against the regions alive right after the merge
that created it (leaves against the whole initial partition), so a tree
with N leaves costs exactly 2N - 1 node evaluations. Pixel saliency is the
average over all nodes containing the pixel.
"""
from __future__ import annotations

import math

from dataclasses import dataclass

import numpy as np

from .exceptions import RangeError
from .fusion import rescale
from .hierarchy import Hierarchy
from .levelsal import boundary_weight
from .regionmodel import MODEL_KINDS, build_models, distance_matrix, distances_to, merge_models


@dataclass(frozen=True)
class SohParams:
    model: str = "hist"
    sigma_s2: float = 4.0
    sigma_b2: float = 0.5
    sigma_center2: float = 0.4
    squared_distance: bool = False
    boundary_prior: bool = True
    center_prior: bool = True

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if not (self.sigma_s2 > 0 and self.sigma_b2 > 0 and self.sigma_center2 > 0):
            raise RangeError("all sigma parameters must be positive")


@dataclass(frozen=True, eq=False)
class NodeSaliency:
    values: np.ndarray
    boundary_w: np.ndarray
    center_w: np.ndarray
    evaluations: int


def center_distances(shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel distance to the image centre over half the image diagonal."""
    height, width = shape
    ys, xs = np.mgrid[0:height, 0:width]
    d = np.hypot(xs - (width - 1) / 2.0, ys - (height - 1) / 2.0)
    return d / (np.hypot(height, width) / 2.0)


def center_weight(mask: np.ndarray, sigma_center2: float = 0.4) -> float:
    """Centre prior of the region ``mask``: ``exp(-mean_dist^2 / sigma_center2)``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty region")
    dbar = center_distances(mask.shape)[mask].mean()
    return float(np.exp(-(dbar**2) / sigma_center2))


def _spatial(c_i: np.ndarray, c_others: np.ndarray, diag: float, params: SohParams) -> np.ndarray:
    dist = np.linalg.norm(c_others - c_i, axis=-1) / diag
    if params.squared_distance:
        dist = dist**2
    return np.exp(-dist / params.sigma_s2)


def node_saliency(h: Hierarchy, params: SohParams = SohParams(), models=None) -> NodeSaliency:
    """Score all ``2N - 1`` nodes of ``h``."""
    n = h.n_leaves
    n_nodes = h.n_nodes
    height, width = h.shape
    diag = float(np.hypot(height, width))
    if models is None:
        models = build_models(params.model, h.leaf_labels, h.lab)
    models = list(models) + [None] * (n_nodes - n)
    area = h.area.astype(np.float64)
    centroids = h.sum_xy / area[:, None]

    if params.boundary_prior:
        wb = boundary_weight(sigma_b2=params.sigma_b2, border_len=h.border_len, perimeter=h.perimeter)
        wb = np.atleast_1d(wb)
    else:
        wb = np.ones(n_nodes)
    dist_sum = np.zeros(n_nodes)
    dist_sum[:n] = np.bincount(h.leaf_labels.ravel(), center_distances(h.shape).ravel(), minlength=n)
    for left, right, new in h.merges:
        dist_sum[new] = dist_sum[left] + dist_sum[right]
    if params.center_prior:
        wc = np.exp(-((dist_sum / area) ** 2) / params.sigma_center2)
    else:
        wc = np.ones(n_nodes)

    values = np.zeros(n_nodes)
    contrib = area * wb  # |R_j| w_b(R_j)
    dmat = distance_matrix(params.model, models[:n])
    diff = centroids[:n, None, :] - centroids[None, :n, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)) / diag
    if params.squared_distance:
        dist = dist**2
    terms = np.exp(-dist / params.sigma_s2) * dmat * contrib[None, :n]
    np.fill_diagonal(terms, 0.0)
    values[:n] = wb[:n] * wc[:n] * terms.sum(axis=1)
    evaluations = n

    alive = np.zeros(n_nodes, dtype=bool)
    alive[:n] = True
    for left, right, new in h.merges:
        models[new] = merge_models(models[left], models[right])
        alive[left] = alive[right] = False
        others = np.flatnonzero(alive)
        alive[new] = True
        if others.size:
            d = distances_to(params.model, models[new], [models[j] for j in others])
            ws = _spatial(centroids[new], centroids[others], diag, params)
            values[new] = wb[new] * wc[new] * float(np.sum(ws * contrib[others] * d))
        evaluations += 1
    return NodeSaliency(values, wb, wc, evaluations)


def integrate(h: Hierarchy, ns: NodeSaliency | np.ndarray, rescale_output: bool = True) -> np.ndarray:
    """Per-pixel mean of the saliency of every node containing the pixel."""
    values = ns.values if isinstance(ns, NodeSaliency) else np.asarray(ns, dtype=np.float64)
    # Sum each leaf-to-root path with a correctly rounded sum so the result
    # does not depend on the order in which ancestors are visited.
    leaf_mean = np.empty(h.n_leaves)
    for leaf in range(h.n_leaves):
        path = []
        node = leaf
        while node != -1:
            path.append(values[node])
            node = h.parent[node]
        leaf_mean[leaf] = math.fsum(path) / len(path)
    out = leaf_mean[h.leaf_labels]
    return rescale(out) if rescale_output else out


def containing_counts(h: Hierarchy) -> np.ndarray:
    """Number of tree nodes containing each pixel."""
    return (h.depth()[: h.n_leaves] + 1)[h.leaf_labels]
