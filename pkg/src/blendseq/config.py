"""Class configuration files (TOML) and their defaults."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .apriori import MIN_SUPPORT, default_rules, parse_rule
from .errors import BlendseqError, ConfigError
from .ingest import SourceSchema, validate_platform_map
from .patterns import SupportMode, Target, parse_target
from .sessionize import BROWSER_CUTOFF, STUDY_CUTOFF
from .stats import EDGE_P, SIGNIFICANT_P

DEFAULT_GRID = (5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 90.0, 120.0)


@dataclass(frozen=True)
class SourceSpec:
    file: str
    schema: SourceSchema = field(default_factory=SourceSchema)


@dataclass(frozen=True)
class ClassConfig:
    platforms: Mapping[str, str]
    sources: tuple[SourceSpec, ...] = ()
    roster: str | None = None
    distinction_threshold: float = 90.0
    exclude_ids: tuple[str, ...] = ()
    browser_cutoff: float = BROWSER_CUTOFF
    study_cutoff: float = STUDY_CUTOFF
    support_mode: SupportMode = SupportMode.EXACT
    exclude_long: bool = False
    extended_families: bool = False
    targets: tuple[str, ...] = ()
    rules: tuple[str, ...] = ()
    min_support: float = MIN_SUPPORT
    unordered: bool = False
    significant_p: float = SIGNIFICANT_P
    edge_p: float = EDGE_P
    diagnostic_grid: tuple[float, ...] = DEFAULT_GRID
    out_dir: str = "report"
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            validate_platform_map(self.platforms)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not (self.browser_cutoff > 0 and self.study_cutoff > 0):
            raise ConfigError("cutoffs must be positive")
        if self.browser_cutoff > self.study_cutoff:
            raise ConfigError(f"browser cutoff {self.browser_cutoff} exceeds study cutoff {self.study_cutoff}")
        if not 0 < self.min_support <= 1:
            raise ConfigError(f"min_support must be in (0, 1], got {self.min_support}")
        if not 0 < self.significant_p <= self.edge_p < 1:
            raise ConfigError("need 0 < significant_p <= edge_p < 1")
        grid = list(self.diagnostic_grid)
        if not grid or any(g <= 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"diagnostic_grid must be positive and strictly increasing, got {grid}")
        try:
            self.parsed_targets()
            self.parsed_rules()
        except BlendseqError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def codes(self) -> list[str]:
        return sorted(self.platforms.values())

    def parsed_targets(self) -> list[Target]:
        return [parse_target(t, extended=self.extended_families) for t in self.targets]

    def parsed_rules(self) -> list[tuple[str, str]]:
        if not self.rules:
            return default_rules(self.codes)
        return [parse_rule(r) for r in self.rules]

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, **changes: Any) -> "ClassConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        """Canonical, JSON-ready view (output directory left out)."""
        return {
            "platforms": dict(sorted(self.platforms.items())),
            "sources": [
                {
                    "file": s.file,
                    "format": s.schema.format,
                    "delimiter": s.schema.delimiter,
                    "fields": dict(sorted(s.schema.fields.items())),
                    "platform": s.schema.platform,
                    "tag": s.schema.tag,
                }
                for s in self.sources
            ],
            "roster": self.roster,
            "distinction_threshold": self.distinction_threshold,
            "exclude_ids": sorted(self.exclude_ids),
            "browser_cutoff": self.browser_cutoff,
            "study_cutoff": self.study_cutoff,
            "support_mode": str(self.support_mode),
            "exclude_long": self.exclude_long,
            "extended_families": self.extended_families,
            "targets": list(self.targets),
            "rules": list(self.rules),
            "min_support": self.min_support,
            "unordered": self.unordered,
            "significant_p": self.significant_p,
            "edge_p": self.edge_p,
            "diagnostic_grid": list(self.diagnostic_grid),
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _source(entry: Mapping) -> SourceSpec:
    if "file" not in entry:
        raise ConfigError("every [[sources]] entry needs a file")
    schema = SourceSchema(
        format=entry.get("format", "csv"),
        delimiter=entry.get("delimiter", ","),
        fields=dict(entry.get("fields", {})),
        platform=entry.get("platform"),
        tag=entry.get("tag"),
    )
    if schema.format not in ("csv", "jsonl"):
        raise ConfigError(f"source {entry['file']}: format must be csv or jsonl")
    return SourceSpec(str(entry["file"]), schema)


def config_from_mapping(data: Mapping, base_dir: Path = Path(".")) -> ClassConfig:
    known = set(ClassConfig.__dataclass_fields__) - {"base_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "platforms" not in data:
        raise ConfigError("config needs a [platforms] table")
    kwargs: dict[str, Any] = {k: v for k, v in data.items() if k in known}
    kwargs["platforms"] = {str(k).lower(): v for k, v in data["platforms"].items()}
    kwargs["sources"] = tuple(_source(s) for s in data.get("sources", ()))
    for key in ("exclude_ids", "targets", "rules"):
        if key in data:
            kwargs[key] = tuple(str(v) for v in data[key])
    if "diagnostic_grid" in data:
        kwargs["diagnostic_grid"] = tuple(float(v) for v in data["diagnostic_grid"])
    if "support_mode" in data:
        try:
            kwargs["support_mode"] = SupportMode(data["support_mode"])
        except ValueError:
            raise ConfigError(f"support_mode must be 'exact' or 'contain', got {data['support_mode']!r}") from None
    for key in ("distinction_threshold", "browser_cutoff", "study_cutoff", "min_support", "significant_p", "edge_p"):
        if key in kwargs:
            kwargs[key] = float(kwargs[key])
    return ClassConfig(base_dir=base_dir, **kwargs)


def load_toml(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path: str | Path) -> ClassConfig:
    path = Path(path)
    return config_from_mapping(load_toml(path), base_dir=path.parent)
