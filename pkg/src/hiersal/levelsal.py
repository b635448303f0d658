"""Region saliency on a single partition: local and global contrast."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import RangeError
from .hierarchy import Partition, Region
from .regionmodel import MODEL_KINDS, build_models, distance_matrix


@dataclass(frozen=True)
class SaliencyParams:
    """Parameters of the single-partition saliency measures.

    ``boundary_prior=None`` selects the default for the contrast kind: off
    for local contrast (its contour weights already damp border regions),
    on for global contrast.
    """

    contrast: str = "global"
    model: str = "hist"
    sigma_s2: float = 4.0
    sigma_b2: float = 0.5
    boundary_prior: bool | None = None
    squared_distance: bool = False
    normalize_centroids: bool = True

    def __post_init__(self):
        if self.contrast not in ("local", "global"):
            raise ValueError(f"contrast must be 'local' or 'global', got {self.contrast!r}")
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if not self.sigma_s2 > 0 or not self.sigma_b2 > 0:
            raise RangeError("sigma_s2 and sigma_b2 must be positive")

    @property
    def use_boundary_prior(self) -> bool:
        if self.boundary_prior is None:
            return self.contrast == "global"
        return bool(self.boundary_prior)


@dataclass(frozen=True, eq=False)
class LevelSaliency:
    level: int
    values: np.ndarray
    partition: Partition
    distances: np.ndarray | None = None

    def pixel_map(self) -> np.ndarray:
        return self.values[self.partition.labels]


def boundary_weight(region: Region | None = None, sigma_b2: float = 0.5, *, border_len=None, perimeter=None):
    """Down-weight for regions whose contour runs along the image border.

    Accepts a :class:`Region` or explicit (array) ``border_len`` and
    ``perimeter`` values.
    """
    if region is not None:
        border_len, perimeter = region.border_len, region.perimeter
    border_len = np.asarray(border_len, dtype=np.float64)
    perimeter = np.asarray(perimeter, dtype=np.float64)
    if np.any(perimeter <= 0):
        raise RangeError("perimeter must be positive")
    w = np.exp(-(border_len / perimeter) / sigma_b2)
    return float(w) if w.ndim == 0 else w


def spatial_weights(centroids: np.ndarray, shape: tuple[int, int], params: SaliencyParams) -> np.ndarray:
    """Pairwise centroid-distance weights ``exp(-dist / sigma_s2)``."""
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if params.normalize_centroids:
        dist = dist / np.hypot(shape[0], shape[1])
    if params.squared_distance:
        dist = dist**2
    return np.exp(-dist / params.sigma_s2)


def local_contrast(p: Partition, distances: np.ndarray, params: SaliencyParams | None = None, level: int = 0) -> LevelSaliency:
    """Contrast to adjacent regions weighted by the shared-contour fraction."""
    n = p.n_regions
    i, j = p.pairs[:, 0], p.pairs[:, 1]
    d = distances[i, j]
    c = p.pair_contact.astype(np.float64)
    perim = p.perimeter.astype(np.float64)
    values = np.bincount(i, c / perim[i] * d, minlength=n) + np.bincount(j, c / perim[j] * d, minlength=n)
    if params is not None and params.use_boundary_prior:
        values = values * boundary_weight(sigma_b2=params.sigma_b2, border_len=p.border_len, perimeter=p.perimeter)
    return LevelSaliency(level, values, p, distances)


def global_contrast(p: Partition, distances: np.ndarray, params: SaliencyParams, level: int = 0) -> LevelSaliency:
    """Area- and proximity-weighted contrast to every other region."""
    ws = spatial_weights(p.centroids, p.shape, params)
    terms = ws * distances * p.area[None, :].astype(np.float64)
    np.fill_diagonal(terms, 0.0)
    values = terms.sum(axis=1)
    if params.use_boundary_prior:
        values = values * boundary_weight(sigma_b2=params.sigma_b2, border_len=p.border_len, perimeter=p.perimeter)
    return LevelSaliency(level, values, p, distances)


def level_saliency(p: Partition, params: SaliencyParams, level: int = 0, models=None) -> LevelSaliency:
    """Saliency of every region of ``p`` according to ``params``."""
    if models is None:
        models = build_models(params.model, p.labels, p.lab)
    distances = distance_matrix(params.model, models)
    if params.contrast == "local":
        return local_contrast(p, distances, params, level)
    return global_contrast(p, distances, params, level)
