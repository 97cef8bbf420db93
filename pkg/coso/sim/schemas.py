from typing import Dict, List, Optional

from pydantic import Field

from coso.common.errors import CosoError
from coso.common.schemas import CosoModel, NormalizedUserId, Rational


class PlanInconsistencyError(CosoError):
    """Raised when deterministic coding cannot decode a stage: the plan does not fit the source."""


class DecodeFailureError(CosoError):
    """Raised when random coding fails to decode; a larger field or another seed usually helps."""


class Transmission(CosoModel):
    stage: int
    sender: NormalizedUserId
    row: List[int]


class StageReport(CosoModel):
    index: int
    targets: List[List[NormalizedUserId]]
    senders: Dict[NormalizedUserId, int] = Field(default_factory=dict)
    rows_sent: int = 0
    decoded: bool = False
    attempts: int = 1
    per_user_rank: Dict[NormalizedUserId, int] = Field(default_factory=dict)


class SimReport(CosoModel):
    coding: str
    seed: int
    block_length: int
    field: int
    stages: List[StageReport] = Field(default_factory=list)
    total_transmissions: int = 0
    expected_transmissions: Rational
    transcript: Optional[List[Transmission]] = None

    @property
    def success(self) -> bool:
        return all(stage.decoded for stage in self.stages)

    def failed_stages(self) -> List[int]:
        return [stage.index for stage in self.stages if not stage.decoded]

    def raise_for_failure(self) -> None:
        """Raise if any stage failed to decode."""
        failed = self.failed_stages()
        if not failed:
            return
        if self.coding == "deterministic":
            raise PlanInconsistencyError(f"stages {failed} did not decode; the plan does not fit this source")
        raise DecodeFailureError(
            f"stages {failed} did not decode under random coding over GF({self.field}); "
            "retry with another seed or a larger field"
        )


class RoundRecord(CosoModel):
    round: int
    found: bool
    subset: List[NormalizedUserId]
    alpha_hat: Optional[Rational] = None
    rates: Dict[NormalizedUserId, Rational] = Field(default_factory=dict)
    transmissions: int = 0
    decoded: bool = False
    users_after: List[NormalizedUserId] = Field(default_factory=list)
    derived_entropy: Rational


class RecursiveTrace(CosoModel):
    block_length: int
    rounds: List[RoundRecord] = Field(default_factory=list)
    total_transmissions: int = 0
    omniscient: bool = False
