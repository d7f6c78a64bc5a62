"""Run options shared by the CLI, the scripts and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Mapping


@dataclass(frozen=True)
class RunConfig:
    wmax: int = 4
    k: int = 2
    order: int = 3
    window: int = 4
    nerve_depth: int = 1
    pmax: int = 3
    jobs: int = 1
    uea_order: int = 2
    jet_order: int = 2

    def merged(self, overrides: Mapping[str, object]) -> "RunConfig":
        """Apply non-None overrides; keys may use dashes or underscores."""
        names = {f.name for f in fields(self)}
        clean = {}
        for key, value in overrides.items():
            name = key.replace("-", "_")
            if value is None:
                continue
            if name not in names:
                raise KeyError(f"unknown option {key!r}")
            clean[name] = int(value)
        out = replace(self, **clean)
        out.validate()
        return out

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"option {f.name} must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.window < 1:
            raise ValueError("window must be nonempty")


@dataclass(frozen=True)
class AcceptanceLimits:
    """Wall-clock budgets in seconds per criterion (None: no stated limit)."""

    koszul: float = 5.0
    truncations: float = 30.0
    self_intersection: float = 30.0
    end_complex: float = 60.0
    tw_tot: float = 60.0
    obstructions: float = 120.0
