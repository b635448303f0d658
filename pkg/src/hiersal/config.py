"""Run configuration shared by the CLI, the manifest and the estimators."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .exceptions import ConfigError
from .fusion import STRATEGIES
from .hierarchy import geometric_targets
from .regionmodel import MODEL_KINDS


@dataclass
class RunConfig:
    model: str = "soh"
    hierarchy: str = "bpt"
    initial_partition: str = "flat-zones"
    # hierarchy-of-partitions model
    levels: int = 6
    regions: list[int] = field(default_factory=lambda: [100, 3])
    region_counts: list[int] | None = None
    contrast: str = "global"
    fusion: str = "mean"
    sigma_c2: float = 0.1
    smoothness: float = 1.0
    root_data_term: bool = True
    inference: str = "exact"
    n_labels: int = 64
    max_iter: int = 200
    # saliency-over-the-hierarchy model
    soh_regions: int = 300
    sigma_center2: float = 0.4
    center_prior: bool = True
    # shared
    region_model: str = "hist"
    boundary_prior: bool | None = None
    sigma_s2: float = 4.0
    sigma_b2: float = 0.5
    squared_distance: bool = False
    out: str = "out"
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def choice(name, allowed):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {tuple(allowed)}, got {getattr(self, name)!r}")

        choice("model", ("hp", "soh"))
        choice("hierarchy", ("bpt", "ucm"))
        choice("initial_partition", ("flat-zones", "per-pixel"))
        choice("contrast", ("local", "global"))
        choice("fusion", STRATEGIES)
        choice("inference", ("exact", "messages"))
        choice("region_model", MODEL_KINDS)
        if self.model == "soh" and self.hierarchy != "bpt":
            raise ConfigError("the soh model needs hierarchy='bpt'")
        if len(self.regions) != 2 or not self.regions[0] >= self.regions[1] >= 1:
            raise ConfigError(f"regions must be [first, last] with first >= last >= 1, got {self.regions}")
        if self.levels < 2:
            raise ConfigError("levels must be >= 2")
        if self.region_counts is not None:
            rc = list(self.region_counts)
            if not rc or min(rc) < 1 or rc != sorted(rc, reverse=True):
                raise ConfigError("region_counts must be positive and non-increasing")
        for name in ("sigma_s2", "sigma_b2", "sigma_c2", "sigma_center2"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.soh_regions < 1 or self.jobs < 1 or self.n_labels < 2:
            raise ConfigError("soh_regions, jobs must be >= 1 and n_labels >= 2")

    @property
    def level_targets(self) -> list[int]:
        if self.region_counts is not None:
            return list(self.region_counts)
        return geometric_targets(self.levels, self.regions[0], self.regions[1])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def updated(self, **overrides) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(d)

    def estimator(self):
        """Estimator configured from this run config."""
        from .estimators import HierarchicalPartitionSaliency, SaliencyOverHierarchy

        if self.model == "soh":
            return SaliencyOverHierarchy(
                initial_regions=self.soh_regions,
                initial_partition=self.initial_partition,
                region_model=self.region_model,
                sigma_s2=self.sigma_s2,
                sigma_b2=self.sigma_b2,
                sigma_center2=self.sigma_center2,
                squared_distance=self.squared_distance,
                boundary_prior=True if self.boundary_prior is None else self.boundary_prior,
                center_prior=self.center_prior,
            ).fit()
        return HierarchicalPartitionSaliency(
            hierarchy=self.hierarchy,
            initial_partition=self.initial_partition,
            n_levels=self.levels,
            n_first=self.regions[0],
            n_last=self.regions[1],
            region_counts=self.region_counts,
            contrast=self.contrast,
            region_model=self.region_model,
            boundary_prior=self.boundary_prior,
            fusion=self.fusion,
            sigma_s2=self.sigma_s2,
            sigma_b2=self.sigma_b2,
            squared_distance=self.squared_distance,
            sigma_c2=self.sigma_c2,
            smoothness=self.smoothness,
            root_data_term=self.root_data_term,
            inference=self.inference,
            n_labels=self.n_labels,
            max_iter=self.max_iter,
        ).fit()
