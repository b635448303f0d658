"""Saliency benchmark metrics: PR sweeps, Otsu binarisation, F-measure and MAE."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .exceptions import DimensionError, EmptyGroundTruth, HierSalError, MissingPair
from .imgcore import check_gray, load_gray, to_uint8

N_THRESHOLDS = 256
IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")


@dataclass(frozen=True)
class PrCurve:
    precision: np.ndarray  # indexed by threshold 0..255
    recall: np.ndarray

    @property
    def thresholds(self) -> np.ndarray:
        return np.arange(N_THRESHOLDS)


@dataclass(frozen=True)
class ScalarScores:
    precision: float
    recall: float
    f1: float
    mae: float


@dataclass
class DatasetReport:
    curve: PrCurve
    mean: ScalarScores
    per_image: list[tuple[str, ScalarScores]]
    errors: list[tuple[str, str]] = field(default_factory=list)


def _check_pair(smap, gt) -> tuple[np.ndarray, np.ndarray]:
    smap = check_gray(smap)
    gt = np.asarray(gt)
    if smap.shape != gt.shape:
        raise DimensionError(f"map shape {smap.shape} differs from ground truth {gt.shape}")
    gt = gt.astype(bool) if gt.dtype == bool else np.asarray(gt, dtype=np.float64) >= 0.5
    return smap, gt


def _ratio(num, den):
    """Elementwise ``num / den`` with ``0 / 0`` defined as 1."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.ones(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def threshold_counts(smap, gt) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """TP, FP, FN for every threshold ``t`` (pixels with 8-bit value >= t selected)."""
    smap, gt = _check_pair(smap, gt)
    q = to_uint8(smap).ravel()
    g = gt.ravel()
    pos = np.bincount(q[g], minlength=N_THRESHOLDS)
    neg = np.bincount(q[~g], minlength=N_THRESHOLDS)
    tp = np.cumsum(pos[::-1])[::-1]
    fp = np.cumsum(neg[::-1])[::-1]
    fn = int(g.sum()) - tp
    return tp, fp, fn


def pr_sweep(smap, gt) -> PrCurve:
    """Precision and recall of ``smap`` binarised at each threshold 0..255."""
    smap, gt = _check_pair(smap, gt)
    if not gt.any():
        raise EmptyGroundTruth("ground truth has no foreground pixels")
    tp, fp, fn = threshold_counts(smap, gt)
    return PrCurve(_ratio(tp, tp + fp), _ratio(tp, tp + fn))


def otsu_threshold(smap) -> tuple[int, bool]:
    """8-bit Otsu threshold of a saliency map.

    Foreground is ``value >= t``. Returns ``(t, degenerate)``; a constant map
    yields ``(0, True)``. Ties in between-class variance go to the lowest t.
    """
    q = to_uint8(check_gray(smap)).ravel()
    hist = np.bincount(q, minlength=N_THRESHOLDS).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        return 0, True
    levels = np.arange(N_THRESHOLDS, dtype=np.float64)
    total = hist.sum()
    # Background = values < t, for t = 1..255.
    w0 = np.cumsum(hist)[:-1]
    m0 = np.cumsum(hist * levels)[:-1]
    w1 = total - w0
    m1 = (hist * levels).sum() - m0
    valid = (w0 > 0) & (w1 > 0)
    var = np.full(N_THRESHOLDS - 1, -1.0)
    mu0 = m0[valid] / w0[valid]
    mu1 = m1[valid] / w1[valid]
    var[valid] = w0[valid] * w1[valid] * (mu0 - mu1) ** 2
    return int(np.argmax(var)) + 1, False


def f_measure(precision: float, recall: float, beta2: float = 1.0) -> float:
    if precision + recall <= 0:
        return 0.0
    return (1 + beta2) * precision * recall / (beta2 * precision + recall)


def mae(smap, gt) -> float:
    """Mean absolute error between a continuous map and a binary ground truth."""
    smap = check_gray(smap)
    g = np.asarray(gt, dtype=np.float64)
    if smap.shape != g.shape:
        raise DimensionError(f"map shape {smap.shape} differs from ground truth {g.shape}")
    return float(np.mean(np.abs(smap - g)))


def scores_from_mask(pred: np.ndarray, gt: np.ndarray) -> tuple[float, float, float]:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    p = float(_ratio(tp, tp + fp))
    r = float(_ratio(tp, tp + fn))
    return p, r, f_measure(p, r)


def scores(smap, gt) -> ScalarScores:
    """Otsu-thresholded precision/recall/F1 plus MAE of the continuous map."""
    smap, gtb = _check_pair(smap, gt)
    t, _ = otsu_threshold(smap)
    pred = to_uint8(smap) >= t
    p, r, f = scores_from_mask(pred, gtb)
    return ScalarScores(p, r, f, mae(smap, gtb.astype(np.float64)))


def _stem(path: Path) -> str:
    return path.stem


def _gt_stem(path: Path) -> str:
    s = path.stem
    return s[:-3] if s.endswith("_gt") else s


def _list_images(directory: Path) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def pair_files(map_dir, gt_dir) -> tuple[list[tuple[str, Path, Path]], list[tuple[str, str]]]:
    """Match map files to ground-truth files by stem (``_gt`` suffix optional)."""
    maps = {_stem(p): p for p in _list_images(map_dir) if not p.stem.endswith("_gt")}
    gt_files = _list_images(gt_dir)
    # A directory holding ``*_gt`` files next to the images (the synth
    # layout) contributes only those files as ground truth.
    if any(p.stem.endswith("_gt") for p in gt_files):
        gt_files = [p for p in gt_files if p.stem.endswith("_gt")]
    gts = {}
    for p in gt_files:
        gts.setdefault(_gt_stem(p), p)
    pairs, errors = [], []
    for name in sorted(maps):
        if name in gts:
            pairs.append((name, maps[name], gts[name]))
        else:
            errors.append((name, "MissingPair: no ground truth"))
    for name in sorted(set(gts) - set(maps)):
        errors.append((name, "MissingPair: no saliency map"))
    return pairs, errors


def evaluate_arrays(items: Iterable[tuple[str, np.ndarray, np.ndarray]]) -> DatasetReport:
    """Dataset report from in-memory ``(name, map, gt)`` triples."""
    per_image, curves, errors = [], [], []
    for name, smap, gt in sorted(items, key=lambda t: t[0]):
        try:
            curves.append(pr_sweep(smap, gt))
            per_image.append((name, scores(smap, gt)))
        except HierSalError as exc:
            errors.append((name, f"{type(exc).__name__}: {exc}"))
    if not per_image:
        raise MissingPair("no evaluable map/ground-truth pairs")
    prec = np.mean([c.precision for c in curves], axis=0)
    rec = np.mean([c.recall for c in curves], axis=0)
    mean = ScalarScores(*(float(np.mean([getattr(s, f) for _, s in per_image])) for f in ("precision", "recall", "f1", "mae")))
    return DatasetReport(PrCurve(prec, rec), mean, per_image, errors)


def dataset_report(map_dir, gt_dir) -> DatasetReport:
    """Evaluate every saliency map in ``map_dir`` against ``gt_dir``."""
    pairs, errors = pair_files(map_dir, gt_dir)
    items = []
    for name, mp, gp in pairs:
        try:
            items.append((name, load_gray(mp), load_gray(gp) >= 0.5))
        except HierSalError as exc:
            errors.append((name, f"{type(exc).__name__}: {exc}"))
    if not items:
        raise MissingPair(f"no matching map/ground-truth pairs between {map_dir} and {gt_dir}")
    report = evaluate_arrays(items)
    report.errors = sorted(errors + report.errors)
    return report


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def scores_csv(report: DatasetReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "precision", "recall", "f1", "mae"])
    for name, s in report.per_image:
        w.writerow([name, _fmt(s.precision), _fmt(s.recall), _fmt(s.f1), _fmt(s.mae)])
    return buf.getvalue()


def curve_csv(curve: PrCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "precision", "recall"])
    for t in range(N_THRESHOLDS):
        w.writerow([t, _fmt(curve.precision[t]), _fmt(curve.recall[t])])
    return buf.getvalue()


def write_report(report: DatasetReport, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sp = out_dir / "scores.csv"
    cp = out_dir / "pr_curve.csv"
    sp.write_bytes(scores_csv(report).encode("utf-8"))
    cp.write_bytes(curve_csv(report.curve).encode("utf-8"))
    return sp, cp


def summary_line(report: DatasetReport) -> str:
    m = report.mean
    return (
        f"images={len(report.per_image)} precision={_fmt(m.precision)} recall={_fmt(m.recall)} "
        f"F1={_fmt(m.f1)} MAE={_fmt(m.mae)}"
    )
