"""Synthetic single-object saliency benchmark.

Each sample is a plain noisy background holding one object of a distinct
colour (rectangle or ellipse) that covers a bounded fraction of the image
and stays clear of the border.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .imgcore import rgb_to_lab, save_gray, save_rgb


@dataclass(frozen=True)
class SyntheticSpec:
    count: int = 10
    height: int = 64
    width: int = 64
    min_fraction: float = 0.05
    max_fraction: float = 0.25
    shapes: tuple[str, ...] = ("rectangle", "ellipse")
    min_color_distance: float = 40.0  # Lab units between object and background
    noise: float = 4.0  # Gaussian sigma in 8-bit RGB units
    margin: int = 2
    touch_border: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.count < 0 or self.height < 8 or self.width < 8:
            raise ValueError("count must be >= 0 and images at least 8x8")
        if not 0 < self.min_fraction <= self.max_fraction < 1:
            raise ValueError("need 0 < min_fraction <= max_fraction < 1")
        for s in self.shapes:
            if s not in ("rectangle", "ellipse"):
                raise ValueError(f"unknown shape {s!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shapes"] = list(self.shapes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if "shapes" in d:
            d["shapes"] = tuple(d["shapes"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SyntheticSample:
    image: np.ndarray
    mask: np.ndarray
    info: dict = field(default_factory=dict)


def _object_mask(rng, spec: SyntheticSpec) -> tuple[np.ndarray, dict]:
    h, w = spec.height, spec.width
    m = 0 if spec.touch_border else spec.margin + 1
    ys, xs = np.mgrid[0:h, 0:w]
    for _ in range(1000):
        shape = spec.shapes[int(rng.integers(len(spec.shapes)))]
        frac = rng.uniform(spec.min_fraction, spec.max_fraction)
        aspect = rng.uniform(0.6, 1.6)
        target = frac * h * w
        if shape == "rectangle":
            bw = int(round(math.sqrt(target * aspect)))
            bh = int(round(target / max(bw, 1)))
            if bw < 2 or bh < 2 or bw > w - 2 * m or bh > h - 2 * m:
                continue
            x0 = int(rng.integers(m, w - m - bw + 1))
            y0 = int(rng.integers(m, h - m - bh + 1))
            mask = (xs >= x0) & (xs < x0 + bw) & (ys >= y0) & (ys < y0 + bh)
        else:
            a = math.sqrt(target * aspect / math.pi)  # horizontal semi-axis
            b = target / (math.pi * a)
            if 2 * a + 1 > w - 2 * m or 2 * b + 1 > h - 2 * m:
                continue
            cx = rng.uniform(m + a, w - 1 - m - a)
            cy = rng.uniform(m + b, h - 1 - m - b)
            mask = ((xs - cx) / a) ** 2 + ((ys - cy) / b) ** 2 <= 1.0
        area = int(mask.sum())
        if not spec.min_fraction <= area / (h * w) <= spec.max_fraction:
            continue
        if not spec.touch_border and (mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any()):
            continue
        return mask, {"shape": shape, "area": area}
    raise RuntimeError("could not place an object with the requested constraints")


def _colors(rng, spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    bg = rng.integers(0, 256, 3)
    for _ in range(1000):
        fg = rng.integers(0, 256, 3)
        d = np.linalg.norm(rgb_to_lab(fg.astype(np.uint8)) - rgb_to_lab(bg.astype(np.uint8)))
        if d >= spec.min_color_distance:
            return bg, fg
        bg = rng.integers(0, 256, 3)
    raise RuntimeError("could not draw sufficiently distinct colours")


def generate_sample(spec: SyntheticSpec, index: int) -> SyntheticSample:
    """Sample ``index`` of the benchmark; depends only on ``(spec, index)``."""
    rng = np.random.default_rng([spec.seed, index])
    mask, info = _object_mask(rng, spec)
    bg, fg = _colors(rng, spec)
    img = np.where(mask[..., None], fg, bg).astype(np.float64)
    if spec.noise > 0:
        img += rng.normal(0.0, spec.noise, img.shape)
    img = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    info.update(background=bg.tolist(), foreground=fg.tolist())
    return SyntheticSample(img, mask, info)


def generate(spec: SyntheticSpec) -> list[SyntheticSample]:
    return [generate_sample(spec, i) for i in range(spec.count)]


def write_dataset(spec: SyntheticSpec, out_dir) -> list[Path]:
    """Write ``NNNN.png`` / ``NNNN_gt.png`` pairs; returns the image paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(spec.count):
        s = generate_sample(spec, i)
        p = out_dir / f"{i:04d}.png"
        save_rgb(p, s.image)
        save_gray(out_dir / f"{i:04d}_gt.png", s.mask.astype(np.float64))
        paths.append(p)
    return paths
