from fractions import Fraction
from typing import Annotated, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, PlainSerializer, PlainValidator

from coso.common.ids import normalize_user_id
from coso.common.rationals import format_rational, parse_rational

# Exact rationals travel as "p/q" strings, never decimals.
Rational = Annotated[
    Fraction,
    PlainValidator(parse_rational),
    PlainSerializer(format_rational, return_type=str),
]

UserIdField = Union[int, str]

# Digit strings (JSON object keys) come back as ints.
NormalizedUserId = Annotated[Union[int, str], BeforeValidator(normalize_user_id)]


class CosoModel(BaseModel):
    """Base for every document the toolkit reads or writes."""

    model_config = ConfigDict(arbitrary_types_allowed=True, populate_by_name=True)
