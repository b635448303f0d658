"""Fusion of per-level saliency into a single map.

Mean and max combine the level maps pixel-wise. Hierarchical inference
refines the region values by minimising a quadratic energy on a graph whose
nodes are the regions of every level (plus a root for the whole image):

    E(s) = sum_i D_i (s_i - s0_i)^2 + lambda * sum_(a,b) w_ab (s_a - s_b)^2

with unit weights on inclusion edges and ``exp(-d_ab^2 / sigma_c2)`` on the
optional same-level adjacency edges. The energy is convex, so the default
solver is an exact sparse linear solve; a discrete min-sum message passing
solver over quantised labels is available as well.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, spsolve

from .exceptions import NonConvergenceWarning, RangeError
from .levelsal import LevelSaliency

STRATEGIES = ("mean", "max", "bp", "lbp")


def rescale(values: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; constant input maps to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi - lo <= 0:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def normalize_stack(stack: Sequence[LevelSaliency]) -> list[LevelSaliency]:
    """Map all levels jointly onto [0, 1] with the global min and max."""
    if not stack:
        raise ValueError("empty stack")
    lo = min(float(s.values.min()) for s in stack)
    hi = max(float(s.values.max()) for s in stack)
    if hi - lo <= 0:
        return [replace(s, values=np.zeros_like(s.values, dtype=np.float64)) for s in stack]
    return [replace(s, values=(s.values - lo) / (hi - lo)) for s in stack]


def fuse_mean(stack: Sequence[LevelSaliency], rescale_output: bool = True) -> np.ndarray:
    acc = np.zeros(stack[0].partition.shape)
    for s in stack:
        acc += s.pixel_map()
    acc /= len(stack)
    return rescale(acc) if rescale_output else acc


def fuse_max(stack: Sequence[LevelSaliency], rescale_output: bool = True) -> np.ndarray:
    acc = stack[0].pixel_map().astype(np.float64)
    for s in stack[1:]:
        acc = np.maximum(acc, s.pixel_map())
    return rescale(acc) if rescale_output else acc


@dataclass(frozen=True, eq=False)
class InferenceGraph:
    """Region graph for hierarchical inference.

    Node ``offsets[k] + i`` is region ``i`` of level ``k``; the last node is
    the image root. ``edges`` rows are node pairs, ``intra`` flags the
    same-level adjacency edges.
    """

    offsets: np.ndarray
    s0: np.ndarray
    data_weight: np.ndarray
    edges: np.ndarray
    edge_weight: np.ndarray
    intra: np.ndarray
    smoothness: float = 1.0

    @property
    def n_nodes(self) -> int:
        return int(self.s0.size)

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    @property
    def n_levels(self) -> int:
        return int(self.offsets.size - 1)

    def level_values(self, s: np.ndarray, k: int) -> np.ndarray:
        return s[self.offsets[k]:self.offsets[k + 1]]

    def energy(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=np.float64)
        data = float(np.sum(self.data_weight * (s - self.s0) ** 2))
        diff = s[self.edges[:, 0]] - s[self.edges[:, 1]]
        return data + self.smoothness * float(np.sum(self.edge_weight * diff**2))

    def system(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Normal equations ``A s = b`` of the energy."""
        n = self.n_nodes
        a, b = self.edges[:, 0], self.edges[:, 1]
        w = self.smoothness * self.edge_weight
        lap = sp.coo_matrix(
            (np.concatenate([-w, -w, w, w]), (np.concatenate([a, b, a, b]), np.concatenate([b, a, a, b]))),
            shape=(n, n),
        )
        mat = (sp.diags(self.data_weight) + lap).tocsr()
        return mat, self.data_weight * self.s0


def build_graph(
    stack: Sequence[LevelSaliency],
    with_intra_level: bool = False,
    sigma_c2: float = 0.1,
    smoothness: float = 1.0,
    root_data_term: bool = True,
) -> InferenceGraph:
    """Inference graph over a nested stack (finest level first).

    Same-level edge weights use region distances divided by their maximum
    over the adjacent pairs of that level.
    """
    if not stack:
        raise ValueError("empty stack")
    if with_intra_level and not sigma_c2 > 0:
        raise RangeError("sigma_c2 must be positive")
    sizes = [s.partition.n_regions for s in stack]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    root = int(offsets[-1])
    s0 = np.concatenate([np.asarray(s.values, dtype=np.float64) for s in stack] + [[0.0]])
    data_weight = np.ones(root + 1)
    if not root_data_term:
        data_weight[root] = 0.0
    edges, weights, intra = [], [], []
    for k in range(len(stack) - 1):
        fine, coarse = stack[k].partition, stack[k + 1].partition
        pairs = np.unique(np.stack([fine.labels.ravel(), coarse.labels.ravel()], axis=1), axis=0)
        if pairs.shape[0] != fine.n_regions:
            raise ValueError(f"levels {k} and {k + 1} are not nested")
        edges.append(np.stack([pairs[:, 0] + offsets[k], pairs[:, 1] + offsets[k + 1]], axis=1))
        weights.append(np.ones(pairs.shape[0]))
        intra.append(np.zeros(pairs.shape[0], dtype=bool))
    top = np.arange(offsets[-2], offsets[-1])
    edges.append(np.stack([top, np.full(top.size, root)], axis=1))
    weights.append(np.ones(top.size))
    intra.append(np.zeros(top.size, dtype=bool))
    if with_intra_level:
        for k, s in enumerate(stack):
            p = s.partition
            if p.pairs.shape[0] == 0:
                continue
            if s.distances is None:
                raise ValueError("same-level edges need the level distance matrices")
            d = s.distances[p.pairs[:, 0], p.pairs[:, 1]]
            dmax = d.max()
            dn = d / dmax if dmax > 0 else np.zeros_like(d)
            edges.append(p.pairs + offsets[k])
            weights.append(np.exp(-(dn**2) / sigma_c2))
            intra.append(np.ones(p.pairs.shape[0], dtype=bool))
    return InferenceGraph(
        offsets,
        s0,
        data_weight,
        np.concatenate(edges).astype(np.int64),
        np.concatenate(weights),
        np.concatenate(intra),
        float(smoothness),
    )


@dataclass(frozen=True, eq=False)
class InferenceResult:
    values: np.ndarray
    energy: float
    converged: bool
    iterations: int
    energy_trace: np.ndarray | None = None


def solve_exact(graph: InferenceGraph, tol: float = 1e-8, max_iter: int | None = None) -> InferenceResult:
    """Minimise the energy with conjugate gradients on its normal equations."""
    mat, rhs = graph.system()
    if max_iter is None:
        max_iter = 10 * graph.n_nodes
    count = [0]

    def _cb(_):
        count[0] += 1

    x, info = cg(mat, rhs, x0=graph.s0.copy(), rtol=tol, atol=0.0, maxiter=max_iter, callback=_cb)
    return InferenceResult(x, graph.energy(x), info == 0, count[0])


def solve_direct(graph: InferenceGraph) -> np.ndarray:
    """Sparse direct solve of the normal equations (reference minimiser)."""
    mat, rhs = graph.system()
    return spsolve(mat.tocsc(), rhs)


def solve_messages(
    graph: InferenceGraph,
    n_labels: int = 64,
    max_iter: int = 200,
    damping: float | None = None,
    tol: float = 1e-9,
    chunk: int = 256,
) -> InferenceResult:
    """Synchronous min-sum message passing over ``n_labels`` values in [0, 1].

    Exact for the discretised problem on trees. On loopy graphs messages are
    damped and the lowest-energy decoded iterate is returned; if the cap is
    reached first a :class:`NonConvergenceWarning` is issued.
    """
    x = np.linspace(0.0, 1.0, n_labels)
    n = graph.n_nodes
    unary = graph.data_weight[:, None] * (x[None, :] - graph.s0[:, None]) ** 2
    loopy = bool(graph.intra.any())
    if damping is None:
        damping = 0.5 if loopy else 0.0
    src = np.concatenate([graph.edges[:, 0], graph.edges[:, 1]])
    dst = np.concatenate([graph.edges[:, 1], graph.edges[:, 0]])
    w = np.concatenate([graph.edge_weight, graph.edge_weight]) * graph.smoothness
    ne = graph.edges.shape[0]
    rev = np.concatenate([np.arange(ne, 2 * ne), np.arange(ne)])
    sq = (x[:, None] - x[None, :]) ** 2
    msgs = np.zeros((2 * ne, n_labels))
    best_s, best_e = None, np.inf
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        incoming = unary.copy()
        np.add.at(incoming, dst, msgs)
        h = incoming[src] - msgs[rev]
        new = np.empty_like(msgs)
        for lo in range(0, 2 * ne, chunk):
            hi = min(lo + chunk, 2 * ne)
            new[lo:hi] = np.min(h[lo:hi, :, None] + w[lo:hi, None, None] * sq[None], axis=1)
        new -= new.min(axis=1, keepdims=True)
        if damping > 0:
            new = (1.0 - damping) * new + damping * msgs
        delta = float(np.max(np.abs(new - msgs))) if msgs.size else 0.0
        msgs = new
        belief = unary.copy()
        np.add.at(belief, dst, msgs)
        s = x[np.argmin(belief, axis=1)]
        e = graph.energy(s)
        if e < best_e:
            best_e, best_s = e, s
        trace.append(best_e)
        if delta < tol:
            converged = True
            break
    if best_s is None:
        best_s = x[np.argmin(unary, axis=1)]
        best_e = graph.energy(best_s)
    if not converged and loopy:
        warnings.warn(
            f"message passing did not converge in {max_iter} iterations", NonConvergenceWarning, stacklevel=2
        )
    return InferenceResult(best_s, best_e, converged, it, np.array(trace))


def infer(graph: InferenceGraph, method: str = "exact", **kwargs) -> InferenceResult:
    if method == "exact":
        return solve_exact(graph, **kwargs)
    if method == "messages":
        return solve_messages(graph, **kwargs)
    raise ValueError(f"unknown inference method {method!r}")


def fuse(
    stack: Sequence[LevelSaliency],
    strategy: str = "mean",
    *,
    normalize: bool = True,
    sigma_c2: float = 0.1,
    smoothness: float = 1.0,
    root_data_term: bool = True,
    inference: str = "exact",
    n_labels: int = 64,
    max_iter: int = 200,
) -> np.ndarray:
    """Combine the level saliencies of ``stack`` into one [0, 1] map."""
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if normalize:
        stack = normalize_stack(stack)
    if strategy == "mean":
        return fuse_mean(stack)
    if strategy == "max":
        return fuse_max(stack)
    graph = build_graph(stack, strategy == "lbp", sigma_c2, smoothness, root_data_term)
    if inference == "messages":
        result = solve_messages(graph, n_labels=n_labels, max_iter=max_iter)
    else:
        result = solve_exact(graph)
    finest = graph.level_values(result.values, 0)
    return rescale(finest[stack[0].partition.labels])
