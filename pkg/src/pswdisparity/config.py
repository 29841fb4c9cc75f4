"""Analysis configuration: JSON schema, parsing and hashing.

A configuration file looks like::

    {
      "data": "survey.csv",
      "group": "white",
      "outcome": "totexp",
      "covariates": {
        "age":    {"role": "health_status"},
        "bmi":    {"role": "health_status"},
        "region": {"role": "ses", "type": "categorical",
                   "levels": ["west", "east", "south"], "reference": "west"}
      },
      "propensity_covariates": ["age", "bmi"],
      "scheme": "ow",
      "variance": "sandwich",
      "reps": 1000,
      "seed": 0,
      "trim": null,
      "output_dir": "out"
    }

Structural choices (roles, covariate lists, encodings) live in the file;
scalar options may be overridden from the command line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import jsonschema

from .errors import ConfigError

ROLES = ("health_status", "ses")

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["group", "outcome", "covariates"],
    "additionalProperties": False,
    "properties": {
        "data": {"type": "string"},
        "group": {"type": "string", "minLength": 1},
        "outcome": {"type": "string", "minLength": 1},
        "covariates": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["role"],
                "additionalProperties": False,
                "properties": {
                    "role": {"enum": list(ROLES)},
                    "type": {"enum": ["numeric", "categorical"]},
                    "levels": {
                        "type": "array",
                        "items": {"type": "string"},
                        "minItems": 2,
                        "uniqueItems": True,
                    },
                    "reference": {"type": "string"},
                },
                "if": {"properties": {"type": {"const": "categorical"}}, "required": ["type"]},
                "then": {"required": ["levels", "reference"]},
            },
        },
        "propensity_covariates": {"type": "array", "items": {"type": "string"}},
        "scheme": {"enum": ["ipw", "att", "atc", "ow"]},
        "variance": {"enum": ["sandwich", "bootstrap"]},
        "reps": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "trim": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0, "maximum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
            ]
        },
        "bins": {"type": "integer", "minimum": 2},
        "threshold": {"type": "number", "exclusiveMinimum": 0},
        "extreme_weight_multiple": {"type": "number", "exclusiveMinimum": 0},
        "output_dir": {"type": "string"},
        "svg": {"type": "boolean"},
    },
}


@dataclass(frozen=True)
class Categorical:
    levels: tuple[str, ...]
    reference: str

    def __post_init__(self):
        if self.reference not in self.levels:
            raise ConfigError(
                f"reference level {self.reference!r} not among levels {list(self.levels)}"
            )

    def indicator_levels(self) -> tuple[str, ...]:
        return tuple(lv for lv in self.levels if lv != self.reference)


@dataclass(frozen=True)
class CovariateSpec:
    """Covariates entering the propensity model and how each one is encoded.

    ``expansion`` maps a covariate name to a :class:`Categorical` rule; names
    absent from it pass through as numeric columns.
    """

    selected: tuple[str, ...]
    expansion: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(self.selected))
        if len(set(self.selected)) != len(self.selected):
            raise ConfigError(f"duplicate names in selected covariates {list(self.selected)}")


@dataclass(frozen=True)
class AnalysisConfig:
    group: str
    outcome: str
    covariates: dict
    data: str | None = None
    propensity_covariates: tuple[str, ...] | None = None
    scheme: str = "ow"
    variance: str = "sandwich"
    reps: int = 1000
    seed: int = 0
    trim: tuple[float, float] | None = None
    bins: int = 20
    threshold: float = 0.1
    extreme_weight_multiple: float = 10.0
    output_dir: str = "out"
    svg: bool = False
    base_dir: str | None = field(default=None, compare=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "AnalysisConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {loc}: {exc.message}") from None
        kw = dict(raw)
        if kw.get("propensity_covariates") is not None:
            kw["propensity_covariates"] = tuple(kw["propensity_covariates"])
        if kw.get("trim") is not None:
            lo, hi = kw["trim"]
            if not lo < hi:
                raise ConfigError(f"trim bounds must satisfy lo < hi, got {kw['trim']}")
            kw["trim"] = (float(lo), float(hi))
        cfg = cls(**kw)
        for name, spec in cfg.covariates.items():
            if spec.get("type") == "categorical":
                Categorical(tuple(spec["levels"]), spec["reference"])
        if cfg.group in cfg.covariates or cfg.outcome in cfg.covariates:
            raise ConfigError("group and outcome columns cannot also be covariates")
        unknown = set(cfg.propensity_names()) - set(cfg.covariates)
        if unknown:
            raise ConfigError(f"propensity_covariates not declared as covariates: {sorted(unknown)}")
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        for key in ("propensity_covariates", "trim"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    def with_overrides(self, **kw) -> "AnalysisConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        return replace(AnalysisConfig.from_dict({**self.to_dict(), **kw}), base_dir=self.base_dir)

    def data_path(self) -> Path:
        if self.data is None:
            raise ConfigError("config has no 'data' entry")
        p = Path(self.data)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p

    def propensity_names(self) -> tuple[str, ...]:
        # default: the health-status covariates, in declaration order
        if self.propensity_covariates is not None:
            return tuple(self.propensity_covariates)
        return tuple(n for n, s in self.covariates.items() if s["role"] == "health_status")

    def expansion(self) -> dict:
        return {
            name: Categorical(tuple(s["levels"]), s["reference"])
            for name, s in self.covariates.items()
            if s.get("type") == "categorical"
        }

    def roles(self) -> dict:
        return {name: s["role"] for name, s in self.covariates.items()}

    def covariate_spec(self) -> CovariateSpec:
        return CovariateSpec(self.propensity_names(), self.expansion())

    def config_hash(self) -> str:
        """SHA-256 of the analysis settings; where outputs go does not count."""
        d = {k: v for k, v in self.to_dict().items() if k not in ("output_dir", "svg")}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> AnalysisConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return replace(AnalysisConfig.from_dict(raw), base_dir=str(path.parent))
