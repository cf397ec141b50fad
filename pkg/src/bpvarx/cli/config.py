"""Run configuration.

A run is described by one YAML document. Values are resolved with the
precedence ``built-in defaults < config file < command-line flags``; the
file only needs the keys it changes. Unknown keys anywhere in the document
are rejected with a :class:`~bpvarx.errors.ConfigError` naming the key.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..errors import ConfigError
from ..model import ModelSpec
from ..panel import VariableSpec, rule_from_config
from ..errors import InvalidRule

ESTIMATORS = ("ols", "bayes-wishart", "bayes-minnesota")
IRF_KINDS = ("girf", "oirf")
VARIANTS = ("proxy-swap", "alt-lags", "prior-swap", "oirf", "no-controls", "balanced",
            "exclude-0", "exclude-100", "exclude-0-100", "trim-5", "trim-10", "switching",
            "unrestricted")
STAGES = ("pretests", "lag_selection", "estimation", "irf", "causality", "reverse",
          "moderation", "robustness")


@dataclass
class DatasetConfig:
    """``path`` of a delimited panel, or ``None`` for the synthetic replication panel."""

    path: str | None = None
    synthetic_seed: int = 2001
    synthetic_firms: int = 1200


@dataclass
class ModelConfig:
    endogenous: list = field(default_factory=lambda: ["VI", "dAd", "dMedia"])
    exogenous: list = field(default_factory=lambda: [
        "BDT", "Age", "International", "Financing", "lnSize", "Industry", "Incentives",
        "Royalty", "Selection", "Socialization"])
    lags: int = 5
    intercept: bool = True
    categorical: list = field(default_factory=lambda: ["Industry"])
    firm_effects: bool = False
    year_effects: str = "none"


@dataclass
class PretestConfig:
    enabled: bool = True
    unit_root: list = field(default_factory=lambda: ["VI", "Ad", "Media", "dAd", "dMedia"])
    deterministic: str = "constant"
    johansen: list = field(default_factory=lambda: ["VI", "Ad", "Media"])
    johansen_lags: int = 2
    ljung_box_h: int = 10


@dataclass
class LagSelectionConfig:
    enabled: bool = True
    max_lag: int = 5
    alpha: float = 0.05


@dataclass
class BayesConfig:
    draws: int = 1000
    burn_in: int = 200
    chains: int = 1
    looseness: float = 10.0
    lambda1: float = 0.2
    lambda2: float = 0.5
    lambda3: float = 1.0
    lambda4: float = 100.0


@dataclass
class IrfConfig:
    enabled: bool = True
    kind: str = "girf"
    horizon: int = 10
    accumulate: bool = True
    bands: bool = True
    quantiles: list = field(default_factory=lambda: [0.05, 0.5, 0.95])
    ordering: list | None = None
    plots: bool = True


@dataclass
class FocalConfig:
    """The responses tracked across subsamples and variants."""

    response: str = "VI"
    impulses: list = field(default_factory=lambda: ["dAd", "dMedia"])


@dataclass
class CausalityConfig:
    enabled: bool = True
    reverse: bool = True
    robust: bool = True
    alpha: float = 0.1


def _default_splits():
    from ..simgen import replication_category_map

    return [
        {"name": "age", "rule": "split-median", "variable": "Age"},
        {"name": "size", "rule": "split-median", "variable": "lnSize"},
        {"name": "financing", "rule": "split-category", "variable": "Financing"},
        {"name": "scope", "rule": "split-category", "variable": "International"},
        {"name": "industry", "rule": "split-category", "variable": "Industry",
         "mapping": {int(k): v for k, v in replication_category_map().items()}},
    ]


@dataclass
class ModerationConfig:
    enabled: bool = True
    splits: list = field(default_factory=_default_splits)
    drop_split_variable: bool = True


@dataclass
class RobustnessConfig:
    enabled: bool = True
    variants: list = field(default_factory=lambda: list(VARIANTS))
    proxy_from: str = "dMedia"
    proxy_to: str = "dlnFee"
    alt_lags: int = 3
    outcome_variable: str = "VI"
    switching_restarts: int = 4
    switching_max_iter: int = 200


def _default_variables():
    return [
        {"name": "VI", "role": "endogenous", "transform": "percent-ratio",
         "source": ["company_owned", "total_outlets"]},
        {"name": "dAd", "role": "endogenous", "transform": "first-difference", "source": ["Ad"]},
        {"name": "Media", "role": "exogenous", "transform": "reverse-rank-501",
         "source": ["Rank"]},
        {"name": "dMedia", "role": "endogenous", "transform": "first-difference",
         "source": ["Media"]},
        {"name": "lnFee", "role": "exogenous", "transform": "natural-log",
         "source": ["FranchiseFee"]},
        {"name": "dlnFee", "role": "endogenous", "transform": "first-difference",
         "source": ["lnFee"]},
        {"name": "lnSize", "role": "exogenous", "transform": "natural-log",
         "source": ["total_outlets"]},
    ]


@dataclass
class RunConfig:
    """Everything a batch run needs; see the module docstring for precedence."""

    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    variables: list = field(default_factory=_default_variables)
    model: ModelConfig = field(default_factory=ModelConfig)
    pretests: PretestConfig = field(default_factory=PretestConfig)
    lag_selection: LagSelectionConfig = field(default_factory=LagSelectionConfig)
    estimator: str = "bayes-wishart"
    bayes: BayesConfig = field(default_factory=BayesConfig)
    irf: IrfConfig = field(default_factory=IrfConfig)
    focal: FocalConfig = field(default_factory=FocalConfig)
    causality: CausalityConfig = field(default_factory=CausalityConfig)
    moderation: ModerationConfig = field(default_factory=ModerationConfig)
    robustness: RobustnessConfig = field(default_factory=RobustnessConfig)
    seed: int = 0
    output: str = "bpvarx-out"

    def model_spec(self) -> ModelSpec:
        m = self.model
        return ModelSpec(tuple(m.endogenous), tuple(m.exogenous), lags=int(m.lags),
                         intercept=m.intercept, categorical=tuple(m.categorical),
                         firm_effects=m.firm_effects, year_effects=m.year_effects)

    def variable_specs(self) -> list[VariableSpec]:
        return [VariableSpec(v["name"], v.get("role", "exogenous"), v.get("transform", "level"),
                             tuple(v.get("source", ()))) for v in self.variables]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        """Copy with top-level or dotted (``"irf.kind"``) fields changed."""
        out = from_mapping(self.to_dict())
        for key, value in changes.items():
            _set(out, key.replace("__", ".").split("."), value)
        validate(out)
        return out


def _set(obj, path, value):
    for p in path[:-1]:
        obj = getattr(obj, p)
    setattr(obj, path[-1], value)


def _build(cls, data: Mapping, prefix: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{prefix or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key {prefix + unknown[0]!r}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get(name) if cls is RunConfig else None
        kwargs[name] = _build(sub, value, f"{name}.") if sub is not None else value
    return cls(**kwargs)


_SECTIONS = {"dataset": DatasetConfig, "model": ModelConfig, "pretests": PretestConfig,
             "lag_selection": LagSelectionConfig, "bayes": BayesConfig, "irf": IrfConfig,
             "focal": FocalConfig, "causality": CausalityConfig,
             "moderation": ModerationConfig, "robustness": RobustnessConfig}


def from_mapping(data: Mapping[str, Any] | None) -> RunConfig:
    cfg = _build(RunConfig, data or {}, "")
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Check that every toggle names something the toolkit can run."""
    if cfg.estimator not in ESTIMATORS:
        raise ConfigError(f"estimator: unknown estimator {cfg.estimator!r}; "
                          f"choose one of {', '.join(ESTIMATORS)}")
    if cfg.irf.kind not in IRF_KINDS:
        raise ConfigError(f"irf.kind: unknown IRF kind {cfg.irf.kind!r}")
    bad = [v for v in cfg.robustness.variants if v not in VARIANTS]
    if bad:
        raise ConfigError(f"robustness.variants: unknown variant {bad[0]!r}")
    for i, v in enumerate(cfg.variables):
        extra = set(v) - {"name", "role", "transform", "source"}
        if extra:
            raise ConfigError(f"unknown config key 'variables[{i}].{sorted(extra)[0]}'")
    for i, split in enumerate(cfg.moderation.splits):
        if "name" not in split:
            raise ConfigError(f"moderation.splits[{i}]: missing 'name'")
        extra = set(split) - {"name", "rule", "variable", "mapping"}
        if extra:
            raise ConfigError(f"unknown config key 'moderation.splits[{i}].{sorted(extra)[0]}'")
        try:
            rule_from_config(split)
        except InvalidRule as exc:
            raise ConfigError(f"moderation.splits[{i}]: {exc}") from None
    try:
        cfg.variable_specs()
        cfg.model_spec()
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from None
    if int(cfg.irf.horizon) < 0:
        raise ConfigError("irf.horizon: must be >= 0")


def default_config() -> RunConfig:
    """The bundled replication configuration."""
    text = resources.files("bpvarx.cli").joinpath("replication.yaml").read_text("utf-8")
    return from_mapping(yaml.safe_load(text))


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML config; keys absent from the file keep their defaults."""
    if path is None:
        return default_config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
    return from_mapping(data)


def apply_overrides(cfg: RunConfig, seed=None, out=None, lags=None, estimator=None, prior=None,
                    irf=None, accumulate=None, horizon=None) -> RunConfig:
    """Command-line flags win over file values. ``prior`` implies a Bayesian estimator."""
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
    if out is not None:
        changes["output"] = str(out)
    if lags is not None:
        changes["model.lags"] = int(lags)
    if estimator is not None:
        changes["estimator"] = estimator
    if prior is not None:
        choice = {"wishart": "bayes-wishart", "minnesota": "bayes-minnesota"}.get(prior)
        if choice is None:
            raise ConfigError(f"--prior: unknown prior {prior!r}")
        if estimator not in (None, choice):
            raise ConfigError(f"--prior {prior} conflicts with --estimator {estimator}")
        changes["estimator"] = choice
    if irf is not None:
        changes["irf.kind"] = irf
    if accumulate is not None:
        changes["irf.accumulate"] = bool(accumulate)
    if horizon is not None:
        changes["irf.horizon"] = int(horizon)
    return cfg.replace(**changes) if changes else cfg
