"""Region appearance models and the distances between them.

Two models are supported:

* ``"mean"``: the mean Lab colour, compared with the Euclidean distance.
* ``"hist"``: a colour signature set derived from a 64-bins-per-channel
  quantisation of Lab space, compared with the Earth Mover's Distance.

Signature models keep their sparse bin table (bin index, pixel count, Lab
sum) so that merging two regions is exact and cheap; the signatures are
derived from the table on demand.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import _transport
from .exceptions import KindMismatch

N_BINS = 64
MAX_SIGNATURES = 256
L_RANGE = (0.0, 100.0)
AB_RANGE = (-128.0, 128.0)

MODEL_KINDS = ("mean", "hist")


@dataclass(frozen=True)
class MeanColorModel:
    """Mean Lab colour, carried as an exact (sum, area) pair."""

    sum_lab: np.ndarray
    area: int

    @property
    def lab(self) -> np.ndarray:
        return self.sum_lab / self.area

    kind = "mean"


@dataclass(frozen=True, eq=False)
class SignatureModel:
    """Colour signatures backed by a sparse 64^3 bin table.

    ``bins`` is sorted ascending; ``counts`` and ``sums`` are aligned with it.
    """

    bins: np.ndarray
    counts: np.ndarray
    sums: np.ndarray
    max_signatures: int = MAX_SIGNATURES

    kind = "hist"

    @cached_property
    def _selected(self) -> np.ndarray:
        # Most frequent bins first, ties by lowest bin index.
        order = np.lexsort((self.bins, -self.counts))
        return order[: self.max_signatures]

    @cached_property
    def colors(self) -> np.ndarray:
        sel = self._selected
        return np.ascontiguousarray(self.sums[sel] / self.counts[sel, None])

    @cached_property
    def weights(self) -> np.ndarray:
        c = self.counts[self._selected].astype(np.float64)
        return c / c.sum()

    @property
    def source_bins(self) -> np.ndarray:
        return self.bins[self._selected]

    @property
    def n_signatures(self) -> int:
        return int(self._selected.size)


RegionModel = Union[MeanColorModel, SignatureModel]


def quantize(lab_pixels: np.ndarray) -> np.ndarray:
    """Flat 64^3 bin index of each Lab pixel; out-of-range values clamp."""
    lab_pixels = np.asarray(lab_pixels, dtype=np.float64).reshape(-1, 3)
    lo = np.array([L_RANGE[0], AB_RANGE[0], AB_RANGE[0]])
    span = np.array([L_RANGE[1] - L_RANGE[0], AB_RANGE[1] - AB_RANGE[0], AB_RANGE[1] - AB_RANGE[0]])
    q = np.floor((lab_pixels - lo) / span * N_BINS).astype(np.int64)
    np.clip(q, 0, N_BINS - 1, out=q)
    return (q[:, 0] * N_BINS + q[:, 1]) * N_BINS + q[:, 2]


def build_mean(lab_pixels: np.ndarray) -> MeanColorModel:
    px = np.asarray(lab_pixels, dtype=np.float64).reshape(-1, 3)
    if px.shape[0] == 0:
        raise ValueError("region has no pixels")
    return MeanColorModel(px.sum(axis=0), px.shape[0])


def build_signatures(lab_pixels: np.ndarray, max_signatures: int = MAX_SIGNATURES) -> SignatureModel:
    """Signature model of a region from its Lab pixels."""
    px = np.asarray(lab_pixels, dtype=np.float64).reshape(-1, 3)
    if px.shape[0] == 0:
        raise ValueError("region has no pixels")
    b = quantize(px)
    bins, inv, counts = np.unique(b, return_inverse=True, return_counts=True)
    sums = np.stack([np.bincount(inv, px[:, c], minlength=bins.size) for c in range(3)], axis=1)
    return SignatureModel(bins, counts.astype(np.int64), sums, max_signatures)


def build_model(kind: str, lab_pixels: np.ndarray) -> RegionModel:
    if kind == "mean":
        return build_mean(lab_pixels)
    if kind == "hist":
        return build_signatures(lab_pixels)
    raise ValueError(f"unknown region model kind {kind!r}")


def build_models(kind: str, labels: np.ndarray, lab: np.ndarray) -> list[RegionModel]:
    """One model per label of a compact label map, in label order."""
    flat = labels.ravel()
    px = lab.reshape(-1, 3)
    n = int(flat.max()) + 1
    if kind == "mean":
        area = np.bincount(flat, minlength=n)
        sums = np.stack([np.bincount(flat, px[:, c], minlength=n) for c in range(3)], axis=1)
        return [MeanColorModel(sums[i], int(area[i])) for i in range(n)]
    if kind != "hist":
        raise ValueError(f"unknown region model kind {kind!r}")
    # Group pixels by (label, bin) once instead of masking per region.
    key = flat.astype(np.int64) * (N_BINS**3) + quantize(px)
    uk, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    sums = np.stack([np.bincount(inv, px[:, c], minlength=uk.size) for c in range(3)], axis=1)
    owner = uk // (N_BINS**3)
    bins = uk % (N_BINS**3)
    bounds = np.searchsorted(owner, np.arange(n + 1))
    return [
        SignatureModel(bins[lo:hi], counts[lo:hi].astype(np.int64), sums[lo:hi])
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]


def _check_same_kind(a: RegionModel, b: RegionModel) -> None:
    if type(a) is not type(b):
        raise KindMismatch(f"cannot combine {a.kind!r} and {b.kind!r} models")


def emd(a: SignatureModel, b: SignatureModel) -> float:
    """Earth Mover's Distance between two signature sets (Euclidean ground distance)."""
    return float(_transport.emd_kernel(a.colors, a.weights, b.colors, b.weights))


def region_distance(kind: str, mi: RegionModel, mj: RegionModel) -> float:
    _check_same_kind(mi, mj)
    if mi.kind != kind:
        raise KindMismatch(f"distance {kind!r} requested for {mi.kind!r} models")
    if kind == "mean":
        return float(np.linalg.norm(mi.lab - mj.lab))
    return emd(mi, mj)


def merge_models(mi: RegionModel, mj: RegionModel, areas: tuple[int, int] | None = None) -> RegionModel:
    """Model of the union of two disjoint regions.

    ``areas`` is accepted for interface symmetry; both model kinds already
    carry their pixel counts.
    """
    _check_same_kind(mi, mj)
    if isinstance(mi, MeanColorModel):
        return MeanColorModel(mi.sum_lab + mj.sum_lab, mi.area + mj.area)
    bins = np.concatenate([mi.bins, mj.bins])
    counts = np.concatenate([mi.counts, mj.counts])
    sums = np.concatenate([mi.sums, mj.sums])
    ub, inv = np.unique(bins, return_inverse=True)
    c = np.bincount(inv, counts, minlength=ub.size).astype(np.int64)
    s = np.stack([np.bincount(inv, sums[:, k], minlength=ub.size) for k in range(3)], axis=1)
    return SignatureModel(ub, c, s, mi.max_signatures)


class PackedSignatures:
    """Signature sets of many regions packed into contiguous arrays."""

    def __init__(self, models: Sequence[SignatureModel]):
        sizes = np.array([m.n_signatures for m in models], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.colors = np.ascontiguousarray(np.concatenate([m.colors for m in models]))
        self.weights = np.ascontiguousarray(np.concatenate([m.weights for m in models]))


def distance_matrix(kind: str, models: Sequence[RegionModel]) -> np.ndarray:
    """Symmetric matrix of pairwise region distances."""
    if not models:
        return np.zeros((0, 0))
    for m in models:
        if m.kind != kind:
            raise KindMismatch(f"distance {kind!r} requested for {m.kind!r} models")
    if kind == "mean":
        labs = np.stack([m.lab for m in models])
        diff = labs[:, None, :] - labs[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    packed = PackedSignatures(models)
    return _transport.emd_pairwise(packed.colors, packed.weights, packed.offsets)


def distances_to(kind: str, model: RegionModel, others: Sequence[RegionModel]) -> np.ndarray:
    """Distances from ``model`` to each of ``others``."""
    if not others:
        return np.zeros(0)
    if kind == "mean":
        labs = np.stack([m.lab for m in others])
        return np.linalg.norm(labs - model.lab, axis=1)
    packed = PackedSignatures(others)
    return _transport.emd_one_to_many(
        model.colors, model.weights, packed.colors, packed.weights, packed.offsets,
        np.arange(len(others), dtype=np.int64),
    )
