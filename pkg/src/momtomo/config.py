"""Run configuration shared by the CLI, scripts and the reconstruction pipeline."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError
from .geometry import MIN_GRID

ENV_OUTDIR = "MOMTOMO_OUTDIR"


@dataclass
class RunConfig:
    m: int = 1
    grid_n: int = 129
    n_beta: int = 256
    n_theta: int = 256
    N: int = 64
    phantom_kind: str = "polynomial"
    phantom: list = field(default_factory=lambda: [{"center": (0.1, -0.05), "radius": 0.6}])
    attenuation: Optional[dict] = None  # {"kind": ..., "params": [...], "amplitude": ...}
    quad_step: Optional[float] = None  # None: half the grid spacing
    error_radius: float = 0.85
    parity_tol: float = 5e-2
    neg_mode_tol: float = 1e-4
    n_lines: int = 257
    output_dir: str = "out"

    @property
    def parity(self) -> str:
        return "even" if self.m % 2 == 0 else "odd"

    @property
    def attenuated(self) -> bool:
        return self.attenuation is not None and self.attenuation.get("kind", "gaussian") != "zero"

    @property
    def spacing(self) -> float:
        return 2.0 / (self.grid_n - 1)

    def validate(self) -> "RunConfig":
        if self.m < 1:
            raise ConfigurationError("tensor order m must be >= 1")
        if self.grid_n < MIN_GRID:
            raise ConfigurationError(f"grid_n must be >= {MIN_GRID}")
        if self.n_theta < 2 * self.N + 2:
            raise ConfigurationError(f"n_theta={self.n_theta} must be >= 2N+2={2 * self.N + 2}")
        if self.N < 2 * (self.m + 1) + 8:
            raise ConfigurationError(f"N={self.N} must be >= 2(m+1)+8={2 * (self.m + 1) + 8}")
        if self.n_beta < 4:
            raise ConfigurationError("n_beta must be >= 4")
        if self.quad_step is not None and not 0 < self.quad_step <= self.spacing:
            raise ConfigurationError("quad_step must lie in (0, grid spacing]")
        # every sweep-up level erodes one stencil width; the error disc must survive all of them
        if self.error_radius + (self.m + 2) * self.spacing >= 1.0:
            raise ConfigurationError("grid too coarse for m sweep-up levels inside the error region")
        return self

    def with_overrides(self, **kw) -> "RunConfig":
        names = {f.name for f in fields(self)}
        bad = set(kw) - names
        if bad:
            raise ConfigurationError(f"unknown config fields {sorted(bad)}")
        return RunConfig(**{**asdict(self), **{k: v for k, v in kw.items() if v is not None}})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        bad = set(d) - names
        if bad:
            raise ConfigurationError(f"unknown config fields {sorted(bad)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)

    def doubled(self) -> "RunConfig":
        """All resolutions doubled: grid step halved, boundary/direction counts and N doubled."""
        return self.with_overrides(grid_n=2 * self.grid_n - 1, n_beta=2 * self.n_beta,
                                   n_theta=2 * self.n_theta, N=2 * self.N)
