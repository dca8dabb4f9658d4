"""JSON configuration documents for the command-line tools.

Two document types exist: :class:`SchemaConfig` describes a dataset and a
training protocol, :class:`SimSpec` describes a synthetic dataset.  Both
are plain JSON; unknown keys are rejected so that typos surface early.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional

from .compositional import CompositionBlock
from .engine import BoostConfig
from .trainers import FAMILIES

ROLES = ("numeric", "categorical", "exposure", "target", "ignore")
SELECT_BY = ("deviance", "mad")


class ConfigError(ValueError):
    """A configuration document is malformed."""


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


_BOOST_KEYS = {f.name for f in fields(BoostConfig)}


@dataclass
class SchemaConfig:
    """Column roles, composition blocks and the training protocol.

    ``grid`` maps :class:`BoostConfig` field names to candidate values;
    every combination is a cell of the cross-validation grid.
    """

    columns: Dict[str, str]
    seed: int
    composition_blocks: List[CompositionBlock] = field(default_factory=list)
    family: str = "zitw_s2"
    p: float = 1.5
    boost: Dict[str, object] = field(default_factory=dict)
    grid: Dict[str, List[object]] = field(default_factory=lambda: {
        "learning_rate": [0.01, 0.05, 0.10],
        "l2_lambda": [float(v) for v in range(0, 101, 10)],
    })
    cv_folds: int = 3
    test_fraction: float = 0.2
    select_by: str = "deviance"

    KEYS = ("columns", "seed", "composition_blocks", "family", "p", "boost", "grid",
            "cv_folds", "test_fraction", "select_by")

    def __post_init__(self):
        for name, role in self.columns.items():
            if role not in ROLES:
                raise ConfigError(f"column {name!r}: unknown role {role!r}; expected one of {ROLES}")
        for role in ("exposure", "target"):
            n = sum(r == role for r in self.columns.values())
            if n != 1:
                raise ConfigError(f"exactly one {role} column is required, found {n}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if not 1.0 < float(self.p) < 2.0:
            raise ConfigError("p must lie in (1, 2)")
        bad = sorted(set(self.boost) - _BOOST_KEYS)
        if bad:
            raise ConfigError(f"boost: unknown keys {bad}")
        bad = sorted(set(self.grid) - _BOOST_KEYS)
        if bad:
            raise ConfigError(f"grid: unknown keys {bad}")
        for k, v in self.grid.items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"grid[{k!r}] must be a non-empty list")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.select_by not in SELECT_BY:
            raise ConfigError(f"select_by must be one of {SELECT_BY}")
        for b in self.composition_blocks:
            for c in b.columns:
                if self.columns.get(c) != "numeric":
                    raise ConfigError(f"block {b.name!r}: column {c!r} must have role 'numeric'")
        # validate the base config and every grid cell eagerly
        for cell in self.grid_cells():
            self.boost_config(cell)

    @property
    def exposure_column(self) -> str:
        return next(c for c, r in self.columns.items() if r == "exposure")

    @property
    def target_column(self) -> str:
        return next(c for c, r in self.columns.items() if r == "target")

    def names(self, role) -> List[str]:
        return [c for c, r in self.columns.items() if r == role]

    def grid_cells(self) -> List[Dict[str, object]]:
        keys = sorted(self.grid)
        return [dict(zip(keys, combo))
                for combo in itertools.product(*(self.grid[k] for k in keys))]

    def boost_config(self, cell: Optional[Dict[str, object]] = None) -> BoostConfig:
        params = dict(self.boost)
        params.update(cell or {})
        try:
            return BoostConfig(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid boosting parameters {params}: {exc}") from exc

    @classmethod
    def from_dict(cls, d) -> "SchemaConfig":
        _check_keys(d, cls.KEYS, "config")
        for key in ("columns", "seed"):
            if key not in d:
                raise ConfigError(f"config: missing required key {key!r}")
        kw = {k: v for k, v in d.items() if k != "composition_blocks"}
        try:
            kw["composition_blocks"] = [CompositionBlock.from_dict(b)
                                        for b in d.get("composition_blocks", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"composition_blocks: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "SchemaConfig":
        return cls.from_dict(load_json(path))

    def to_dict(self):
        return {
            "columns": dict(self.columns), "seed": self.seed,
            "composition_blocks": [b.to_dict() for b in self.composition_blocks],
            "family": self.family, "p": self.p, "boost": dict(self.boost),
            "grid": {k: list(v) for k, v in self.grid.items()}, "cv_folds": self.cv_folds,
            "test_fraction": self.test_fraction, "select_by": self.select_by,
        }


# --------------------------------------------------------------------------
# Simulation specs
# --------------------------------------------------------------------------

FEATURE_DISTS = {
    "uniform": ("low", "high"),
    "normal": ("mean", "sd"),
    "categorical": ("levels", "probs"),
    "dirichlet": ("parts", "alpha"),
}


@dataclass
class SimSpec:
    """Synthetic zero-inflated Tweedie data.

    ``mu`` is an expression over feature names giving the mean per unit
    exposure.  Exactly one of ``gamma`` (so that ``q = 1/(1 + mu**gamma)``)
    or ``q`` (an expression or constant) sets the inflation.
    """

    n: int
    seed: int
    mu: str
    features: List[Dict[str, object]] = field(default_factory=list)
    phi: float = 1.0
    p: float = 1.5
    gamma: Optional[float] = None
    q: Optional[object] = None
    exposure: Dict[str, object] = field(default_factory=lambda: {"dist": "constant", "value": 1.0})
    target_name: str = "y"
    exposure_name: str = "exposure"

    KEYS = ("n", "seed", "mu", "features", "phi", "p", "gamma", "q", "exposure",
            "target_name", "exposure_name")

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 0:
            raise ConfigError("n must be a non-negative integer")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not float(self.phi) > 0:
            raise ConfigError("phi must be positive")
        if not 1.0 < float(self.p) < 2.0:
            raise ConfigError("p must lie in (1, 2)")
        if (self.gamma is None) == (self.q is None):
            raise ConfigError("give exactly one of 'gamma' or 'q'")
        if self.gamma is not None and not float(self.gamma) > 0:
            raise ConfigError("gamma must be positive")
        names = []
        for i, f in enumerate(self.features):
            where = f"features[{i}]"
            if not isinstance(f, dict) or "dist" not in f:
                raise ConfigError(f"{where}: needs a 'dist'")
            dist = f["dist"]
            if dist not in FEATURE_DISTS:
                raise ConfigError(f"{where}: unknown dist {dist!r}")
            _check_keys(f, ("name", "dist") + FEATURE_DISTS[dist], where)
            if dist == "dirichlet":
                parts = f.get("parts")
                if not isinstance(parts, list) or len(parts) < 2:
                    raise ConfigError(f"{where}: 'parts' must list at least two names")
                alpha = f.get("alpha", [1.0] * len(parts))
                if len(alpha) != len(parts) or min(alpha) <= 0:
                    raise ConfigError(f"{where}: 'alpha' must be positive, one per part")
                names += parts
            else:
                if "name" not in f:
                    raise ConfigError(f"{where}: needs a 'name'")
                names.append(f["name"])
                if dist == "categorical" and not f.get("levels"):
                    raise ConfigError(f"{where}: 'levels' must be non-empty")
        names += [self.target_name, self.exposure_name]
        if len(set(names)) != len(names):
            raise ConfigError("feature, target and exposure names must be distinct")
        dist = self.exposure.get("dist")
        if dist == "constant":
            _check_keys(self.exposure, ("dist", "value"), "exposure")
            if not float(self.exposure.get("value", 1.0)) > 0:
                raise ConfigError("exposure value must be positive")
        elif dist == "uniform":
            _check_keys(self.exposure, ("dist", "low", "high"), "exposure")
            if not 0 < float(self.exposure["low"]) <= float(self.exposure["high"]):
                raise ConfigError("exposure bounds must satisfy 0 < low <= high")
        else:
            raise ConfigError("exposure dist must be 'constant' or 'uniform'")

    @property
    def feature_names(self) -> List[str]:
        out = []
        for f in self.features:
            out += f["parts"] if f["dist"] == "dirichlet" else [f["name"]]
        return out

    @classmethod
    def from_dict(cls, d) -> "SimSpec":
        _check_keys(d, cls.KEYS, "simulation spec")
        for key in ("n", "seed", "mu"):
            if key not in d:
                raise ConfigError(f"simulation spec: missing required key {key!r}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SimSpec":
        return cls.from_dict(load_json(path))
