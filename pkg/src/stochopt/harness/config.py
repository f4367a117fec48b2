"""Experiment configuration: a flat key/value structure with ``step`` and ``precond`` tables."""
from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigurationError

__all__ = ["ExperimentConfig", "load_config", "PROBLEMS"]

PROBLEMS = ("ct_tv", "pet_rdp", "ridge", "lasso")

_PROBLEM_DEFAULTS = {
    "ct_tv": {},
    "pet_rdp": {
        "subsets": 6,
        "passes": 15,
        "noise_seed": 3,
        "step": {"kind": "decreasing", "gamma0": "estimate", "beta": 0.01},
        "precond": {"kind": "bsrem", "epsilon": 1e-6},
    },
    "ridge": {"subsets": 10, "partition": "sequential", "alpha": 0.5, "passes": 50},
    "lasso": {"subsets": 10, "partition": "sequential", "alpha": 0.1, "passes": 50},
}


@dataclass
class ExperimentConfig:
    """All knobs of one experiment.

    ``alpha`` is the regularisation weight: TV weight for ``ct_tv``, RDP
    ``beta`` for ``pet_rdp``, ``lambda`` in ``lambda/2 ||x||^2`` for
    ``ridge`` and ``lambda ||x||_1`` for ``lasso``.
    """

    name: str = "experiment"
    problem: str = "ct_tv"
    # imaging geometry
    grid: int = 32
    angles: int = 60
    detectors: int = 64
    # matrix problems
    rows: int = 100
    cols: int = 50
    condition: float = 1e3
    # data
    noise_seed: int = 1
    noise_level: float = 0.02
    count_scale: float = 10.0
    background: float = 2.0
    mlem_iterations: int = 10
    # objective
    alpha: float = 1.0
    nonnegativity: bool = True
    fgp_iterations: int = 100
    # finite sum
    subsets: int = 10
    partition: str = "staggered"
    partition_seed: int = 0
    sampler: str = "random_with_replacement"
    sampler_stride: int = 2
    seed: int = 40
    estimator: str = "saga"
    svrg_period: int | None = None
    lsvrg_prob: float | None = None
    lsvrg_seed: int = 1
    warm_start: bool = True
    # solver
    algorithm: str = "pgd"
    step: dict = field(default_factory=lambda: {"kind": "auto"})
    precond: dict = field(default_factory=lambda: {"kind": "identity", "epsilon": 1e-6})
    passes: int = 20
    initial: str = "default"
    # reference
    reference: str = "compute"
    reference_fgp_iterations: int = 300
    reference_max_iterations: int = 3000
    reference_tol: float = 1e-9
    record_wall_time: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        for key in ("grid", "angles", "detectors", "rows", "cols", "subsets", "passes", "fgp_iterations"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"{key} must be positive")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be nonnegative")
        if not isinstance(self.step, dict) or "kind" not in self.step:
            raise ConfigurationError("step must be a table with a 'kind' key")
        if not isinstance(self.precond, dict) or "kind" not in self.precond:
            raise ConfigurationError("precond must be a table with a 'kind' key")

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        problem = data.get("problem", "ct_tv")
        if problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {problem!r}; choose from {PROBLEMS}")
        merged = json.loads(json.dumps(_PROBLEM_DEFAULTS[problem]))
        for key, value in data.items():
            if key in ("step", "precond") and isinstance(value, dict):
                merged.setdefault(key, {}).update(value)
            else:
                merged[key] = value
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(merged) - known)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {unknown}")
        if "step" in merged and "kind" not in merged["step"]:
            merged["step"]["kind"] = "auto"
        if "precond" in merged:
            merged["precond"].setdefault("kind", "identity")
            merged["precond"].setdefault("epsilon", 1e-6)
        return cls(**merged)

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return ExperimentConfig(**data)

    def problem_key(self):
        """Fields that determine the optimisation problem (used for reference caching)."""
        keys = ["problem", "grid", "angles", "detectors", "rows", "cols", "condition", "noise_seed",
                "noise_level", "count_scale", "background", "mlem_iterations", "alpha", "nonnegativity",
                "reference_fgp_iterations", "reference_max_iterations", "reference_tol"]
        return {k: getattr(self, k) for k in keys}


def load_config(path):
    """Read a TOML (``.toml``) or JSON (``.json``) experiment file."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        try:
            data = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)
