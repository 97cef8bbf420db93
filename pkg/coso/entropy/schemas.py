from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import Field, field_validator, model_validator

from coso.common.ids import normalize_user_id
from coso.common.schemas import CosoModel, Rational, UserIdField


class SourceModel(str, Enum):
    TABLE = "table"
    BITS = "bits"
    LINEAR = "linear"


class InstanceDocument(CosoModel):
    """Structured instance text: users plus exactly one source description."""

    users: List[UserIdField]
    model: SourceModel
    bits: Optional[Dict[str, List[str]]] = None
    table: Optional[Dict[str, Rational]] = None
    linear: Optional[Dict[str, Any]] = None
    partial: bool = False
    name: Optional[str] = None

    @field_validator("users", mode="before")
    @classmethod
    def normalize_users(cls, value):
        if not isinstance(value, list):
            raise ValueError("users must be a list")
        return [normalize_user_id(u) for u in value]

    @field_validator("bits", mode="before")
    @classmethod
    def stringify_labels(cls, value):
        if value is None:
            return None
        if not isinstance(value, dict):
            raise ValueError("bits must map user -> list of labels")
        return {str(k): [str(label) for label in labels] for k, labels in value.items()}

    @model_validator(mode="after")
    def check_model_section(self):
        section = getattr(self, self.model.value)
        if section is None:
            raise ValueError(f'model "{self.model.value}" needs a "{self.model.value}" section')
        if len(set(self.users)) != len(self.users):
            raise ValueError("users must be distinct")
        return self


class OracleViolation(CosoModel):
    kind: str  # normalization | monotonicity | submodularity
    sets: List[List[UserIdField]]
    detail: str


class OracleReport(CosoModel):
    ground_set: List[UserIdField]
    checked_subsets: int = 0
    violations: List[OracleViolation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations
