"""Experiment configuration schema and loader.

Config files are JSON documents; unknown keys anywhere are errors.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import safety
from .environments import arm_from_config
from .errors import BanditError, ConfigError
from .policies import POLICY_TYPES


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ValueFunctionSpec(_Strict):
    type: Literal["mean", "mean_variance", "cvar"]
    rho: float | None = Field(default=None, ge=0)
    alpha: float | None = Field(default=None, gt=0, le=1)
    estimator_form: Literal["biased", "unbiased"] | None = None

    def build(self) -> safety.SafetyValueFunction:
        try:
            return safety.from_config(self.model_dump(exclude_none=True))
        except BanditError as exc:
            raise ConfigError(str(exc)) from None


class TwoArmEnvironment(_Strict):
    type: Literal["two_arm"]
    r: float = Field(ge=0, lt=0.5)


class MixtureEnvironment(_Strict):
    type: Literal["mixture"]
    k: int = Field(default=20, ge=2)


class CsvEnvironment(_Strict):
    type: Literal["csv"]
    path: str
    value_column: str
    group_column: str


class ArmsEnvironment(_Strict):
    type: Literal["arms"]
    arms: list[dict[str, Any]] = Field(min_length=2)
    labels: list[str] | None = None

    @field_validator("arms")
    @classmethod
    def _arms_valid(cls, arms):
        for spec in arms:
            try:
                arm_from_config(spec)
            except BanditError as exc:
                raise ValueError(str(exc)) from None
        return arms


EnvironmentSpec = Annotated[
    Union[TwoArmEnvironment, MixtureEnvironment, CsvEnvironment, ArmsEnvironment],
    Field(discriminator="type"),
]


class PolicySpec(_Strict):
    type: Literal[POLICY_TYPES]  # type: ignore[valid-type]
    name: str | None = None
    rho: float | None = Field(default=None, ge=0)
    alpha: float | None = Field(default=None, gt=0, le=1)
    C: float | None = Field(default=None, ge=0)
    tau: int | None = Field(default=None, ge=0)

    @property
    def label(self) -> str:
        return self.name or self.type


class ExperimentConfig(_Strict):
    environment: EnvironmentSpec
    policies: list[PolicySpec] = Field(min_length=1)
    value_function: ValueFunctionSpec
    horizon: int = Field(ge=1)
    runs: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=1 << 64)
    output: str = "bandit_results"
    full_traces: bool = False

    @field_validator("policies")
    @classmethod
    def _unique_labels(cls, policies):
        labels = [p.label for p in policies]
        dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
        if dupes:
            raise ValueError(f"duplicate policy labels {dupes}; set distinct 'name' fields")
        return policies


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment config:\n{exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(data)
