"""Pydantic documents for SO plans, two-stage results and plan validation."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import Field, ValidationError, field_validator, model_validator

from coso.common.errors import CosoError
from coso.common.ids import sorted_users, user_sort_key
from coso.common.schemas import CosoModel, NormalizedUserId, Rational
from coso.omniscience.service import Model, RateVector


class InvalidPlanError(CosoError, ValueError):
    """Raised when a plan document cannot be read."""


class Stage(CosoModel):
    """One SO stage: the subsets attaining local omniscience and r_V^(k) so far."""

    index: int = Field(..., ge=1)
    alpha: Rational
    targets: List[List[NormalizedUserId]]
    cumulative_rates: Dict[NormalizedUserId, Rational]

    @field_validator("targets")
    @classmethod
    def sort_targets(cls, value):
        return sorted((sorted_users(t) for t in value), key=lambda t: [user_sort_key(u) for u in t])

    @model_validator(mode="after")
    def check_targets(self):
        seen: set = set()
        for target in self.targets:
            if len(target) < 2:
                raise ValueError(f"stage {self.index}: target {target} must have at least two users")
            if seen & set(target):
                raise ValueError(f"stage {self.index}: targets overlap")
            seen |= set(target)
        stray = seen - set(self.cumulative_rates)
        if stray:
            raise ValueError(f"stage {self.index}: users {sorted_users(stray)} have no rate")
        return self

    @property
    def rates(self) -> RateVector:
        return RateVector(dict(self.cumulative_rates))

    @property
    def target_sets(self) -> List[frozenset]:
        return [frozenset(t) for t in self.targets]

    @property
    def union(self) -> frozenset:
        return frozenset().union(*self.target_sets)


class SoPlan(CosoModel):
    model: Model
    stages: List[Stage] = Field(..., min_length=1)
    ordering: List[NormalizedUserId]
    policy: str = "min-rate"
    refined_ordering: Optional[List[NormalizedUserId]] = None
    reused_first_run: Optional[bool] = None
    alpha_tilde: List[Rational] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_carriers(self):
        users = set(self.ordering)
        for stage in self.stages:
            if set(stage.cumulative_rates) != users:
                raise ValueError(f"stage {stage.index}: rates must cover exactly {sorted_users(users)}")
        return self

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    @property
    def users(self) -> frozenset:
        return frozenset(self.ordering)

    @property
    def final_rates(self) -> RateVector:
        return self.stages[-1].rates


class TwoStageDocument(CosoModel):
    model: Model
    found: bool
    ordering: List[NormalizedUserId]
    alpha_lb: Rational
    subset: Optional[List[NormalizedUserId]] = None
    prefix: Optional[int] = None
    alpha_hat: Optional[Rational] = None
    rates: Optional[Dict[NormalizedUserId, Rational]] = None
    global_min_sum_rate: Optional[Rational] = None
    global_rates: Optional[Dict[NormalizedUserId, Rational]] = None


class ValidationItem(CosoModel):
    name: str
    passed: bool
    detail: str = ""


class ValidationReport(CosoModel):
    model: Model
    items: List[ValidationItem] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(item.passed for item in self.items)

    def item(self, name: str) -> ValidationItem:
        for entry in self.items:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def failures(self) -> List[ValidationItem]:
        return [item for item in self.items if not item.passed]


class ComplimentaryDocument(CosoModel):
    model: Model
    method: str
    alpha_lb: Optional[Rational] = None
    subsets: List[List[NormalizedUserId]]


def load_plan(document: Any) -> SoPlan:
    """Read a plan from a model, a mapping, JSON text or a path."""
    try:
        if isinstance(document, SoPlan):
            return document
        if isinstance(document, Path):
            return SoPlan.model_validate_json(document.read_text(encoding="utf-8"))
        if isinstance(document, (str, bytes)):
            return SoPlan.model_validate_json(document)
        return SoPlan.model_validate(document)
    except ValidationError as exc:
        raise InvalidPlanError(f"Invalid plan document: {exc.error_count()} errors\n{exc}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidPlanError(f"Cannot read plan: {exc}") from exc
