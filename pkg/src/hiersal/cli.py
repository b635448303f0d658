"""Command line driver: ``run``, ``eval``, ``synth`` and ``ablate``.

Exit codes: 0 success, 1 partial failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig
from .exceptions import ConfigError, HierSalError, MissingPair
from .imgcore import load_gray, load_image, save_gray, to_uint8
from .metrics import IMAGE_SUFFIXES, evaluate_arrays, dataset_report, summary_line, write_report
from .synth import SyntheticSpec, write_dataset

log = logging.getLogger("hiersal")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


def _setup_logging() -> None:
    level = os.environ.get("HIERSAL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def collect_inputs(paths) -> list[Path]:
    """Image files named directly or found in the given directories (ground truths skipped)."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(
                q for q in sorted(p.iterdir())
                if q.suffix.lower() in IMAGE_SUFFIXES and not q.stem.endswith(("_gt", "_ucm"))
            )
        else:
            out.append(p)
    return out


def find_ucm(ucm_dir: Path | None, stem: str) -> Path | None:
    if ucm_dir is None:
        return None
    for name in (stem, f"{stem}_ucm"):
        for suffix in (".png", ".pgm"):
            p = Path(ucm_dir) / f"{name}{suffix}"
            if p.is_file():
                return p
    return None


def _process_image(task):
    """Worker: saliency map of one image as 8-bit array, or an error string."""
    cfg_dict, image_path, ucm_path = task
    cfg = RunConfig.from_dict(cfg_dict)
    stem = Path(image_path).stem
    t0 = time.perf_counter()
    try:
        image = load_image(image_path)
        ucm = None
        if cfg.hierarchy == "ucm":
            if ucm_path is None:
                raise MissingPair(f"no UCM found for {stem}")
            ucm = load_gray(ucm_path)
        est = cfg.estimator()
        levels = None
        if cfg.model == "hp":
            stack = est.level_saliencies(image, ucm)
            levels = [s.partition.n_regions for s in stack]
            smap = est.fuse_levels(stack)
        else:
            smap = est.saliency_map(image, ucm)
        return stem, to_uint8(smap), None, time.perf_counter() - t0, levels
    except (HierSalError, OSError, ValueError) as exc:
        return stem, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0, None


def _map_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def cmd_run(cfg: RunConfig, inputs, ucm_dir=None) -> int:
    """Write one saliency PNG per input plus ``run_manifest.json`` into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    images = collect_inputs(inputs)
    if not images:
        log.error("no input images")
        return EXIT_PARTIAL
    tasks = []
    for p in images:
        ucm = find_ucm(ucm_dir, p.stem)
        tasks.append((cfg.to_dict(), str(p), None if ucm is None else str(ucm)))
    results = _map_tasks(_process_image, tasks, cfg.jobs)
    per_image, failed = [], 0
    for stem, arr, err, secs, levels in results:
        entry = {"name": stem, "seconds": round(secs, 4)}
        if err is None:
            save_gray(out / f"{stem}.png", arr)
            if levels is not None:
                entry["levels"] = levels
        else:
            failed += 1
            entry["error"] = err
            log.error("%s: %s", stem, err)
        per_image.append(entry)
    manifest = {
        "config": cfg.to_dict(),
        "level_targets": cfg.level_targets if cfg.model == "hp" else None,
        "images": per_image,
        "failed": failed,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_eval(map_dir, gt_dir, out_dir, stream=None) -> int:
    """Write ``scores.csv`` and ``pr_curve.csv``; print a one-line summary."""
    stream = stream or sys.stdout
    try:
        report = dataset_report(map_dir, gt_dir)
    except (MissingPair, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    write_report(report, out_dir)
    for name, err in report.errors:
        log.warning("%s: %s", name, err)
    print(summary_line(report), file=stream)
    return EXIT_PARTIAL if report.errors else EXIT_OK


def cmd_synth(spec: SyntheticSpec, out_dir) -> int:
    write_dataset(spec, out_dir)
    return EXIT_OK


def _dataset_pairs(dataset) -> list[tuple[Path, Path]]:
    """``(image, gt)`` pairs from a synth-style directory or ``images/`` + ``gt/`` subdirectories."""
    dataset = Path(dataset)
    if (dataset / "images").is_dir() and (dataset / "gt").is_dir():
        img_dir, gt_dir = dataset / "images", dataset / "gt"
    else:
        img_dir = gt_dir = dataset
    pairs = []
    for img in collect_inputs([img_dir]):
        for cand in (f"{img.stem}_gt.png", f"{img.stem}.png", f"{img.stem}_gt.pgm", f"{img.stem}.pgm"):
            g = gt_dir / cand
            if g.is_file() and g != img:
                pairs.append((img, g))
                break
    return pairs


def _cell_value(v) -> str:
    return v if isinstance(v, str) else json.dumps(v)


def expand_grid(grid_spec: dict) -> list[dict]:
    """Config overrides for each grid cell, in declaration order."""
    if "configs" in grid_spec:
        return [dict(c) for c in grid_spec["configs"]]
    grid = grid_spec.get("grid", {})
    keys = list(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def cmd_ablate(grid_spec: dict, dataset, out_dir, jobs: int = 1, base: RunConfig | None = None) -> int:
    """Mean scores of every configuration in the grid over one dataset."""
    base_dict = (base or RunConfig()).to_dict()
    base_dict.update(grid_spec.get("base", {}))
    cells = expand_grid(grid_spec)
    pairs = _dataset_pairs(dataset)
    if not pairs:
        raise MissingPair(f"no image/ground-truth pairs in {dataset}")
    keys = []
    for c in cells:
        keys.extend(k for k in c if k not in keys)
    gts = {img.stem: load_gray(g) >= 0.5 for img, g in pairs}
    rows, failed = [], 0
    for idx, cell in enumerate(cells):
        cfg = RunConfig.from_dict({**base_dict, **cell, "jobs": jobs})
        tasks = [(cfg.to_dict(), str(img), None) for img, _ in pairs]
        results = _map_tasks(_process_image, tasks, jobs)
        items = []
        for stem, arr, err, _, _ in results:
            if err is not None:
                failed += 1
                log.error("cell %d, %s: %s", idx, stem, err)
                continue
            items.append((stem, arr.astype(np.float64) / 255.0, gts[stem]))
        m = evaluate_arrays(items).mean
        rows.append([idx] + [_cell_value(cell.get(k)) for k in keys] + [f"{v:.6f}" for v in (m.precision, m.recall, m.f1, m.mae)])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell"] + keys + ["precision", "recall", "f1", "mae"])
    w.writerows(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_bytes(buf.getvalue().encode("utf-8"))
    return EXIT_PARTIAL if failed else EXIT_OK


def _on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on|off, got {value!r}")


def _regions(value: str) -> list[int]:
    try:
        first, last = (int(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FIRST,LAST, got {value!r}") from None
    return [first, last]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--model", choices=("hp", "soh"))
    p.add_argument("--hierarchy", choices=("bpt", "ucm"))
    p.add_argument("--fusion", choices=("mean", "max", "bp", "lbp"))
    p.add_argument("--levels", type=int, metavar="K")
    p.add_argument("--regions", type=_regions, metavar="FIRST,LAST")
    p.add_argument("--contrast", choices=("local", "global"))
    p.add_argument("--region-model", dest="region_model", choices=("mean", "hist"))
    p.add_argument("--boundary-prior", dest="boundary_prior", type=_on_off, metavar="on|off")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--jobs", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="S")


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        k: getattr(args, k, None)
        for k in ("model", "hierarchy", "fusion", "levels", "regions", "contrast", "region_model", "boundary_prior", "out", "jobs", "seed")
    }
    return cfg.updated(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiersal", description="Hierarchical salient object segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="compute saliency maps")
    _add_run_flags(p)
    p.add_argument("inputs", nargs="+", help="image files or directories")
    p.add_argument("--ucm-dir", dest="ucm_dir", type=Path, help="directory of UCM files (hierarchy=ucm)")

    p = sub.add_parser("eval", help="score saliency maps against ground truth")
    p.add_argument("map_dir", type=Path)
    p.add_argument("gt_dir", type=Path)
    p.add_argument("--out", default="report", metavar="DIR")

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--config", type=Path, help="JSON file of generator settings")
    p.add_argument("--count", type=int)
    p.add_argument("--size", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int, metavar="S")
    p.add_argument("--out", default="synth", metavar="DIR")

    p = sub.add_parser("ablate", help="evaluate a grid of configurations")
    _add_run_flags(p)
    p.add_argument("--grid", type=Path, required=True, help="JSON grid specification")
    p.add_argument("--dataset", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(_resolve_config(args), args.inputs, args.ucm_dir)
        if args.command == "eval":
            return cmd_eval(args.map_dir, args.gt_dir, args.out)
        if args.command == "synth":
            d = json.loads(args.config.read_text(encoding="utf-8")) if args.config else {}
            if args.count is not None:
                d["count"] = args.count
            if args.size is not None:
                d["height"], d["width"] = args.size
            if args.noise is not None:
                d["noise"] = args.noise
            if args.seed is not None:
                d["seed"] = args.seed
            return cmd_synth(SyntheticSpec.from_dict(d), args.out)
        if args.command == "ablate":
            cfg = _resolve_config(args)
            grid = json.loads(args.grid.read_text(encoding="utf-8"))
            return cmd_ablate(grid, args.dataset, cfg.out, cfg.jobs, base=cfg)
    except (ConfigError, json.JSONDecodeError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingPair as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
