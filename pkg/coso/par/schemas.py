from typing import Dict, List, Optional

from pydantic import Field

from coso.common.schemas import CosoModel, Rational, UserIdField
from coso.par.service import ParOutput, Psp
from coso.pwl.schemas import PwlPiece, dump_pwl


class PspLevel(CosoModel):
    """One rung of the chain: P^(j) and the α^(j) at which it stops being optimal."""

    index: int
    alpha: Rational
    partition: List[List[UserIdField]]


class PspDocument(CosoModel):
    full_entropy: Rational
    critical_points: List[Rational] = Field(default_factory=list)
    partitions: List[List[List[UserIdField]]] = Field(default_factory=list)
    levels: List[PspLevel] = Field(default_factory=list)
    min_sum_rate: Rational
    fundamental_partition: List[List[UserIdField]]


class PartitionSegment(CosoModel):
    interval: List[Rational]
    partition: List[List[UserIdField]]


class ParDocument(CosoModel):
    ordering: List[UserIdField]
    domain: List[Rational]
    segments: List[PartitionSegment]
    rate_profile: Dict[str, List[PwlPiece]]
    envelope_calls: int
    envelope_calls_per_prefix: List[int]
    psp: Optional[PspDocument] = None


def psp_document(result: Psp) -> PspDocument:
    levels = [
        PspLevel(index=j, alpha=result.alpha(j), partition=result.partition(j).as_lists())
        for j in range(result.p, -1, -1)
    ]
    return PspDocument(
        full_entropy=result.full_entropy,
        critical_points=list(result.critical_points),
        partitions=[p.as_lists() for p in result.partitions],
        levels=levels,
        min_sum_rate=result.min_sum_rate,
        fundamental_partition=result.fundamental_partition.as_lists(),
    )


def par_document(output: ParOutput, psp: Psp | None = None) -> ParDocument:
    segments = [
        PartitionSegment(interval=[lo, hi], partition=partition.as_lists())
        for lo, hi, partition in output.segmented_partition.segments()
    ]
    profile: Dict[str, List[PwlPiece]] = {}
    for user in output.ordering:
        profile[str(user)] = dump_pwl(output.rate_profile[user])
    return ParDocument(
        ordering=list(output.ordering),
        domain=list(output.domain),
        segments=segments,
        rate_profile=profile,
        envelope_calls=output.stats.envelope_calls,
        envelope_calls_per_prefix=list(output.stats.envelope_calls_per_prefix),
        psp=psp_document(psp) if psp is not None else None,
    )

