"""scikit-learn style estimators for the two hierarchical saliency models.

Both estimators are stateless transformers: ``fit`` only validates the
hyper-parameters, ``transform`` maps RGB images to [0, 1] saliency maps and
``predict`` binarises those maps with Otsu's threshold. ``score`` returns
the mean F1 against ground-truth masks, so the estimators plug into
``GridSearchCV``-like tooling that relies on ``get_params``/``set_params``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError
from .fusion import STRATEGIES, fuse, normalize_stack
from .hierarchy import Hierarchy, UcmHierarchy, build_bpt, extract_partition_stack, initial_partition
from .imgcore import check_gray, check_rgb, rgb_to_lab, to_uint8
from .levelsal import LevelSaliency, SaliencyParams, level_saliency
from .metrics import otsu_threshold, scores
from .regionmodel import MODEL_KINDS
from .soh import SohParams, integrate, node_saliency


def check_images(X) -> list[np.ndarray]:
    """Accept one ``(H, W, 3)`` image or a sequence of them."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [check_rgb(X)]
    if isinstance(X, np.ndarray) and X.ndim == 4:
        return [check_rgb(x) for x in X]
    return [check_rgb(x) for x in X]


def _check_ucms(ucms, n: int) -> list:
    if ucms is None:
        return [None] * n
    if isinstance(ucms, np.ndarray) and ucms.ndim == 2:
        ucms = [ucms]
    ucms = list(ucms)
    if len(ucms) != n:
        raise ValueError(f"got {len(ucms)} UCMs for {n} images")
    return [check_gray(u) for u in ucms]


def _choice(name, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {tuple(allowed)}, got {value!r}")


class _HierarchicalSaliency(TransformerMixin, BaseEstimator):
    def fit(self, X=None, y=None):
        self._validate()
        self.is_fitted_ = True
        return self

    def _validate(self):
        raise NotImplementedError

    def saliency_map(self, image, ucm=None) -> np.ndarray:
        raise NotImplementedError

    def transform(self, X, ucms=None) -> list[np.ndarray]:
        check_is_fitted(self)
        images = check_images(X)
        return [self.saliency_map(img, u) for img, u in zip(images, _check_ucms(ucms, len(images)))]

    def predict(self, X, ucms=None) -> list[np.ndarray]:
        out = []
        for smap in self.transform(X, ucms):
            t, _ = otsu_threshold(smap)
            out.append(to_uint8(smap) >= t)
        return out

    def score(self, X, y, ucms=None) -> float:
        maps = self.transform(X, ucms)
        gts = [y] if isinstance(y, np.ndarray) and y.ndim == 2 else list(y)
        return float(np.mean([scores(m, g).f1 for m, g in zip(maps, gts)]))

    def _bpt(self, lab: np.ndarray) -> Hierarchy:
        return build_bpt(initial_partition(lab, self.initial_partition))


class HierarchicalPartitionSaliency(_HierarchicalSaliency):
    """Saliency on a stack of nested partitions, fused into one map.

    Parameters
    ----------
    hierarchy : {"bpt", "ucm"}
        Source of the nested partitions. ``"ucm"`` needs a UCM per image.
    n_levels, n_first, n_last : int
        Geometric region-count schedule, finest partition first.
    region_counts : sequence of int, optional
        Explicit schedule overriding the geometric one.
    contrast : {"local", "global"}
    region_model : {"mean", "hist"}
    boundary_prior : bool or None
        ``None`` picks the default for the contrast kind.
    fusion : {"mean", "max", "bp", "lbp"}
    sigma_s2, sigma_b2 : float
        Spatial and boundary fall-offs.
    sigma_c2, smoothness, root_data_term, inference, n_labels, max_iter
        Hierarchical-inference settings (``bp``/``lbp`` only).
    """

    def __init__(
        self,
        hierarchy: str = "bpt",
        initial_partition: str = "flat-zones",
        n_levels: int = 6,
        n_first: int = 100,
        n_last: int = 3,
        region_counts: Sequence[int] | None = None,
        contrast: str = "global",
        region_model: str = "hist",
        boundary_prior: bool | None = None,
        fusion: str = "mean",
        sigma_s2: float = 4.0,
        sigma_b2: float = 0.5,
        squared_distance: bool = False,
        sigma_c2: float = 0.1,
        smoothness: float = 1.0,
        root_data_term: bool = True,
        inference: str = "exact",
        n_labels: int = 64,
        max_iter: int = 200,
    ):
        self.hierarchy = hierarchy
        self.initial_partition = initial_partition
        self.n_levels = n_levels
        self.n_first = n_first
        self.n_last = n_last
        self.region_counts = region_counts
        self.contrast = contrast
        self.region_model = region_model
        self.boundary_prior = boundary_prior
        self.fusion = fusion
        self.sigma_s2 = sigma_s2
        self.sigma_b2 = sigma_b2
        self.squared_distance = squared_distance
        self.sigma_c2 = sigma_c2
        self.smoothness = smoothness
        self.root_data_term = root_data_term
        self.inference = inference
        self.n_labels = n_labels
        self.max_iter = max_iter

    def _validate(self):
        _choice("hierarchy", self.hierarchy, ("bpt", "ucm"))
        _choice("initial_partition", self.initial_partition, ("flat-zones", "per-pixel"))
        _choice("fusion", self.fusion, STRATEGIES)
        _choice("inference", self.inference, ("exact", "messages"))
        _choice("contrast", self.contrast, ("local", "global"))
        _choice("region_model", self.region_model, MODEL_KINDS)
        if self.region_counts is None and not (self.n_first >= self.n_last >= 1 and self.n_levels >= 2):
            raise ConfigError("need n_first >= n_last >= 1 and n_levels >= 2")
        if not (self.sigma_s2 > 0 and self.sigma_b2 > 0 and self.sigma_c2 > 0):
            raise ConfigError("sigma parameters must be positive")
        self.params_ = self.saliency_params()

    def saliency_params(self) -> SaliencyParams:
        return SaliencyParams(
            contrast=self.contrast,
            model=self.region_model,
            sigma_s2=self.sigma_s2,
            sigma_b2=self.sigma_b2,
            boundary_prior=self.boundary_prior,
            squared_distance=self.squared_distance,
        )

    def partition_stack(self, image, ucm=None):
        lab = rgb_to_lab(check_rgb(image))
        if self.hierarchy == "ucm":
            if ucm is None:
                raise ConfigError("hierarchy='ucm' needs a UCM for every image")
            source = UcmHierarchy(ucm, lab=lab)
        else:
            source = self._bpt(lab)
        return extract_partition_stack(
            source, self.n_levels, self.n_first, self.n_last, targets=self.region_counts
        )

    def level_saliencies(self, image, ucm=None) -> list[LevelSaliency]:
        """Per-level region saliency, finest level first (not normalised)."""
        params = self.saliency_params()
        return [level_saliency(p, params, k) for k, p in enumerate(self.partition_stack(image, ucm))]

    def level_maps(self, image, ucm=None) -> list[np.ndarray]:
        """Jointly normalised per-level pixel maps."""
        return [s.pixel_map() for s in normalize_stack(self.level_saliencies(image, ucm))]

    def saliency_map(self, image, ucm=None) -> np.ndarray:
        return self.fuse_levels(self.level_saliencies(image, ucm))

    def fuse_levels(self, levels: Sequence[LevelSaliency]) -> np.ndarray:
        """Fuse precomputed per-level saliencies with the configured strategy."""
        return fuse(
            levels,
            self.fusion,
            sigma_c2=self.sigma_c2,
            smoothness=self.smoothness,
            root_data_term=self.root_data_term,
            inference=self.inference,
            n_labels=self.n_labels,
            max_iter=self.max_iter,
        )


class SaliencyOverHierarchy(_HierarchicalSaliency):
    """Saliency scored on every node of a BPT and averaged per pixel.

    Parameters
    ----------
    initial_regions : int
        Size of the BPT cut used as the tree's leaves.
    initial_partition : {"flat-zones", "per-pixel"}
        Partition the BPT is grown from.
    region_model : {"mean", "hist"}
    sigma_s2, sigma_b2, sigma_center2 : float
    boundary_prior, center_prior : bool
    """

    def __init__(
        self,
        initial_regions: int = 300,
        initial_partition: str = "flat-zones",
        region_model: str = "hist",
        sigma_s2: float = 4.0,
        sigma_b2: float = 0.5,
        sigma_center2: float = 0.4,
        squared_distance: bool = False,
        boundary_prior: bool = True,
        center_prior: bool = True,
    ):
        self.initial_regions = initial_regions
        self.initial_partition = initial_partition
        self.region_model = region_model
        self.sigma_s2 = sigma_s2
        self.sigma_b2 = sigma_b2
        self.sigma_center2 = sigma_center2
        self.squared_distance = squared_distance
        self.boundary_prior = boundary_prior
        self.center_prior = center_prior

    def _validate(self):
        _choice("initial_partition", self.initial_partition, ("flat-zones", "per-pixel"))
        _choice("region_model", self.region_model, MODEL_KINDS)
        if self.initial_regions < 1:
            raise ConfigError("initial_regions must be >= 1")
        self.params_ = self.soh_params()

    def soh_params(self) -> SohParams:
        return SohParams(
            model=self.region_model,
            sigma_s2=self.sigma_s2,
            sigma_b2=self.sigma_b2,
            sigma_center2=self.sigma_center2,
            squared_distance=self.squared_distance,
            boundary_prior=bool(self.boundary_prior),
            center_prior=bool(self.center_prior),
        )

    def tree(self, image) -> Hierarchy:
        h = self._bpt(rgb_to_lab(check_rgb(image)))
        return h.truncate(min(self.initial_regions, h.n_leaves))

    def saliency_map(self, image, ucm=None) -> np.ndarray:
        if ucm is not None:
            raise ConfigError("the SOH model runs on a BPT; UCM input is not supported")
        h = self.tree(image)
        return integrate(h, node_saliency(h, self.soh_params()))
