from typing import Dict, List, Optional

from coso.common.schemas import CosoModel, NormalizedUserId, Rational
from coso.omniscience.service import Model


class MinRateDocument(CosoModel):
    model: Model
    method: str
    subset: List[NormalizedUserId]
    min_sum_rate: Rational
    fundamental_partition: Optional[List[List[NormalizedUserId]]] = None
    optimal_rates: Optional[Dict[NormalizedUserId, Rational]] = None


class RegionDocument(CosoModel):
    subset: List[NormalizedUserId]
    rates: Dict[NormalizedUserId, Rational]
    sum_rate: Rational
    in_region: bool
    violated: List[List[NormalizedUserId]] = []
