"""Run configuration for gcs-planner."""

from __future__ import annotations

import os
import platform
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import yaml

from gcs_planner.planner import STRATEGIES, PlanOptions


def get_config_dir() -> Path:
    """Return the platform-appropriate config directory."""
    if platform.system() == "Darwin":
        return Path.home() / "Library" / "Application Support" / "gcs-planner"
    elif platform.system() == "Windows":
        return Path(os.environ.get("APPDATA", Path.home())) / "gcs-planner"
    else:
        return Path.home() / ".config" / "gcs-planner"


def get_default_config_path() -> Path:
    """Return the default config file path."""
    return get_config_dir() / "config.yaml"


def get_default_out_dir() -> Path:
    return Path(os.environ.get("GCS_PLANNER_OUT", "out"))


@dataclass
class RunConfig:
    scenario: Path | None = None
    out_dir: Path | None = None
    strategy: str = "auto"
    degree: int | None = None
    facets: int | None = None
    alpha: tuple[float, float, float, float] | None = None
    v_min: float | None = None
    v_max: float | None = None
    h_prime_min: float | None = None
    t_max: float | None = None
    audit_dt: float | None = None
    max_len: int = 12
    enumerate_limit: int = 64
    workers: int = 1
    seed: int = 0
    verbosity: int = 0

    def __post_init__(self):
        if self.out_dir is None:
            self.out_dir = get_default_out_dir()
        self.out_dir = Path(self.out_dir).expanduser()
        if self.scenario is not None:
            self.scenario = Path(self.scenario).expanduser()
        if self.alpha is not None:
            self.alpha = tuple(float(a) for a in self.alpha)

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides: Any) -> RunConfig:
        """Load configuration from a YAML file, then apply *overrides*.

        Resolution order:
        1. Explicit *path* argument
        2. GCS_PLANNER_CONFIG environment variable
        3. Platform config dir (~/.config/gcs-planner/config.yaml or equivalent)
        4. Built-in defaults

        Keyword overrides whose value is ``None`` are ignored, so command-line
        flags left unset do not mask file values.
        """
        if path is None:
            path = os.environ.get("GCS_PLANNER_CONFIG")

        raw: dict[str, Any] = {}
        if path is not None:
            path = Path(path).expanduser().resolve()
            if not path.exists():
                raise FileNotFoundError(f"Config file not found: {path}")
            with open(path) as f:
                raw = yaml.safe_load(f) or {}
        else:
            default = get_default_config_path()
            if default.exists():
                with open(default) as f:
                    raw = yaml.safe_load(f) or {}

        known = {f.name for f in fields(cls)}
        raw = {k.replace("-", "_"): v for k, v in raw.items()}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"Unknown config keys: {', '.join(sorted(unknown))}")

        config = cls(**raw)
        config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
        config.validate()
        return config

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy: must be one of {', '.join(STRATEGIES)}, got '{self.strategy}'")
        if self.degree is not None and not 4 <= self.degree <= 10:
            raise ValueError(f"degree: must lie in 4..10, got {self.degree}")
        if self.facets is not None and not 4 <= self.facets <= 64:
            raise ValueError(f"facets: must lie in 4..64, got {self.facets}")
        if self.alpha is not None:
            if len(self.alpha) != 4 or any(a < 0 for a in self.alpha) or not any(self.alpha):
                raise ValueError("alpha: need four non-negative weights, not all zero")
        if self.v_min is not None and self.v_min < 0:
            raise ValueError(f"v_min: must be non-negative, got {self.v_min}")
        for name in ("v_max", "h_prime_min", "t_max"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name}: must be positive, got {value}")
        if self.audit_dt is not None and not 0 < self.audit_dt <= 0.1:
            raise ValueError(f"audit_dt: must lie in (0, 0.1], got {self.audit_dt}")
        if self.max_len < 2:
            raise ValueError(f"max_len: must be at least 2, got {self.max_len}")
        if self.enumerate_limit < 1:
            raise ValueError(f"enumerate_limit: must be at least 1, got {self.enumerate_limit}")
        if self.workers < 1:
            raise ValueError(f"workers: must be at least 1, got {self.workers}")

    def scenario_overrides(self) -> dict[str, Any]:
        return {
            "degree": self.degree,
            "facets": self.facets,
            "alpha": self.alpha,
            "v_min": self.v_min,
            "v_max": self.v_max,
            "h_prime_min": self.h_prime_min,
            "t_max": self.t_max,
            "audit_dt": self.audit_dt,
        }

    def plan_options(self) -> PlanOptions:
        return PlanOptions(
            strategy=self.strategy,
            max_len=self.max_len,
            enumerate_limit=self.enumerate_limit,
            workers=self.workers,
        )
