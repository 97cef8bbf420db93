"""Minimum sum-rates, the CO region and optimal rate vectors.

Every quantity here is computed inside a carrier X treated as a self-contained
system: H is only ever evaluated on subsets of X.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from coso.common.errors import CosoError
from coso.common.ids import UserId, format_subset_key, sorted_users
from coso.common.rationals import ceil_rational, format_rational, is_integral, parse_rational
from coso.entropy.service import EntropyOracle
from coso.par.service import ParOutput, extract_psp, par
from coso.partitions.service import CarrierMismatchError, Partition, enumerate_partitions, meet_all

logger = logging.getLogger(__name__)


class Model(str, Enum):
    ACO = "aco"
    NCO = "nco"


class TooFewUsersError(CosoError, ValueError):
    """Raised when a carrier has fewer than two users."""


class UnknownMethodError(CosoError, ValueError):
    """Raised for an unknown model name or minimum sum-rate method."""


@dataclass(frozen=True)
class RateVector:
    """Per-user rates r_X on a carrier X."""

    rates: Mapping[UserId, Fraction]

    @classmethod
    def of(cls, rates: Mapping[UserId, Fraction | int | str]) -> "RateVector":
        return cls({u: parse_rational(v) for u, v in rates.items()})

    @classmethod
    def zeros(cls, carrier: Iterable[UserId]) -> "RateVector":
        return cls({u: Fraction(0) for u in carrier})

    @property
    def carrier(self) -> frozenset:
        return frozenset(self.rates)

    def __getitem__(self, user: UserId) -> Fraction:
        return self.rates[user]

    def __iter__(self) -> Iterator[UserId]:
        return iter(sorted_users(self.rates))

    def sum(self, subset: Iterable[UserId] | None = None) -> Fraction:
        """r(C); the whole carrier when *subset* is None."""
        users = self.rates if subset is None else subset
        return sum((self.rates[u] for u in users), Fraction(0))

    @property
    def total(self) -> Fraction:
        return self.sum()

    @property
    def is_integral(self) -> bool:
        return all(is_integral(v) for v in self.rates.values())

    def restricted(self, subset: Iterable[UserId]) -> "RateVector":
        return RateVector({u: self.rates[u] for u in subset})

    def as_tuple(self, order: Sequence[UserId] | None = None) -> tuple[Fraction, ...]:
        order = sorted_users(self.rates) if order is None else order
        return tuple(self.rates[u] for u in order)

    def as_document(self) -> dict[str, str]:
        return {str(u): format_rational(self.rates[u]) for u in sorted_users(self.rates)}

    def __str__(self) -> str:
        return "(" + ", ".join(format_rational(v) for v in self.as_tuple()) + ")"


def parse_model(value: Model | str) -> Model:
    try:
        return Model(value)
    except ValueError as exc:
        raise UnknownMethodError(f"Unknown model {value!r}; expected aco or nco") from exc


def _carrier(oracle: EntropyOracle, subset: Iterable[UserId] | None) -> frozenset:
    carrier = oracle.members if subset is None else oracle.check_subset(subset)
    if len(carrier) < 2:
        raise TooFewUsersError(f"need at least two users, got {sorted_users(carrier)}")
    return carrier


def _restricted_ordering(carrier: frozenset, ordering: Sequence[UserId] | None) -> list[UserId] | None:
    if ordering is None:
        return None
    return [u for u in ordering if u in carrier]


def partition_rate_bruteforce(
    oracle: EntropyOracle, subset: Iterable[UserId] | None = None
) -> tuple[Fraction, Partition]:
    """max over |P| > 1 of Σ (H(X) − H(C)) / (|P| − 1), with the meet of the maximizers."""
    carrier = _carrier(oracle, subset)
    h_x = oracle.entropy(carrier)
    best: Fraction | None = None
    maximizers: list[Partition] = []
    for partition in enumerate_partitions(carrier):
        if len(partition) < 2:
            continue
        value = sum((h_x - oracle.entropy(b) for b in partition.blocks), Fraction(0)) / (len(partition) - 1)
        if best is None or value > best:
            best, maximizers = value, [partition]
        elif value == best:
            maximizers.append(partition)
    return best, meet_all(maximizers)


def psp_min_sum_rate(
    oracle: EntropyOracle, subset: Iterable[UserId] | None = None, ordering: Sequence[UserId] | None = None
) -> tuple[Fraction, Partition, ParOutput]:
    carrier = _carrier(oracle, subset)
    sub = oracle if carrier == oracle.members else oracle.restrict(carrier)
    output = par(sub, _restricted_ordering(carrier, ordering))
    chain = extract_psp(output)
    return chain.min_sum_rate, chain.fundamental_partition, output


def min_sum_rate_aco(
    oracle: EntropyOracle, subset: Iterable[UserId] | None = None, method: str = "psp"
) -> tuple[Fraction, Partition]:
    """R_ACO(X) and the finest maximizing partition (the fundamental partition)."""
    if method == "psp":
        value, partition, _ = psp_min_sum_rate(oracle, subset)
    elif method == "bruteforce":
        value, partition = partition_rate_bruteforce(oracle, subset)
    else:
        raise UnknownMethodError(f"Unknown method {method!r}; expected psp or bruteforce")
    logger.debug("R_ACO(%s) = %s via %s", format_subset_key(partition.carrier), value, method)
    return value, partition


def min_sum_rate_nco(oracle: EntropyOracle, subset: Iterable[UserId] | None = None, method: str = "psp") -> int:
    value, _ = min_sum_rate_aco(oracle, subset, method)
    return ceil_rational(value)


def min_sum_rate(
    oracle: EntropyOracle, subset: Iterable[UserId] | None = None, model: Model | str = Model.ACO, method: str = "psp"
) -> Fraction:
    if parse_model(model) is Model.NCO:
        return Fraction(min_sum_rate_nco(oracle, subset, method))
    return min_sum_rate_aco(oracle, subset, method)[0]


def co_region_violations(
    oracle: EntropyOracle, subset: Iterable[UserId] | None, rates: RateVector | Mapping[UserId, Fraction]
) -> list[frozenset]:
    """Every nonempty C ⊊ X with r(C) < H(X) − H(X∖C)."""
    carrier = oracle.members if subset is None else oracle.check_subset(subset)
    r = rates if isinstance(rates, RateVector) else RateVector.of(rates)
    if r.carrier != carrier:
        raise CarrierMismatchError(
            f"rate vector on {sorted_users(r.carrier)} does not match carrier {sorted_users(carrier)}"
        )
    h_x = oracle.entropy(carrier)
    sub = oracle.restrict(carrier)
    failing = []
    for c in sub.subsets(min_size=1):
        if c == carrier:
            continue
        if r.sum(c) < h_x - oracle.entropy(carrier - c):
            failing.append(c)
    return failing


def in_co_region(
    oracle: EntropyOracle, subset: Iterable[UserId] | None, rates: RateVector | Mapping[UserId, Fraction]
) -> bool:
    return not co_region_violations(oracle, subset, rates)


def optimal_rate_vector(
    oracle: EntropyOracle,
    subset: Iterable[UserId] | None = None,
    model: Model | str = Model.ACO,
    ordering: Sequence[UserId] | None = None,
) -> RateVector:
    """r_{α,X} from the PAR rate profile at α = R_ACO(X) or R_NCO(X).

    *ordering* may list users outside X; they are dropped.
    """
    model = parse_model(model)
    value, _, output = psp_min_sum_rate(oracle, subset, ordering)
    alpha = Fraction(ceil_rational(value)) if model is Model.NCO else value
    vector = RateVector(output.rates_at(alpha))
    logger.info("optimal %s rate vector %s at α=%s", model.value, vector, format_rational(alpha))
    return vector
