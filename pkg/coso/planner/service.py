"""Complimentary subsets and the two-stage SO planner."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from coso.common.errors import CosoError
from coso.common.ids import UserId, format_subset_key, sorted_users, subset_sort_key
from coso.common.rationals import ceil_rational, format_rational, is_integral, parse_rational
from coso.entropy.service import EntropyOracle
from coso.omniscience.service import (
    Model,
    RateVector,
    TooFewUsersError,
    partition_rate_bruteforce,
    parse_model,
)
from coso.par.service import (
    ParConsistencyError,
    ParOutput,
    ParStats,
    PrefixSnapshot,
    ResidualEntropy,
    alpha_domain,
    dilworth_truncation_bruteforce,
    extract_psp,
    iter_par,
)
from coso.planner.schemas import TwoStageDocument

logger = logging.getLogger(__name__)


class BoundTypeError(CosoError, ValueError):
    """Raised when a non-asymptotic lower bound is not an integer."""


class InvalidSubsetError(CosoError, ValueError):
    """Raised when a candidate is not a nonsingleton proper subset."""


class UnknownVariantError(CosoError, ValueError):
    """Raised for an unknown lower-bound variant or detection method."""


def _check_users(oracle: EntropyOracle) -> None:
    if len(oracle.ground_set) < 2:
        raise TooFewUsersError(f"need at least two users, got {list(oracle.ground_set)}")


def lower_bound(oracle: EntropyOracle, model: Model | str = Model.ACO, variant: str = "tight") -> Fraction:
    """Max of the partition rate Σ (H(V) − H(C)) / (|P| − 1) over the singleton partition and the ({i}, V∖{i}) cuts.

    variant="singleton" keeps only the singleton partition.
    """
    model = parse_model(model)
    _check_users(oracle)
    h_v = oracle.full_entropy
    users = oracle.ground_set
    bound = sum((h_v - oracle.entropy([i]) for i in users), Fraction(0)) / (len(users) - 1)
    if variant == "tight":
        for i in users:
            rest = oracle.members - {i}
            bound = max(bound, (h_v - oracle.entropy([i])) + (h_v - oracle.entropy(rest)))
    elif variant != "singleton":
        raise UnknownVariantError(f"Unknown lower-bound variant {variant!r}; expected tight or singleton")
    if model is Model.NCO:
        return Fraction(ceil_rational(bound))
    return bound


def _candidates(oracle: EntropyOracle) -> list[frozenset]:
    """Nonsingleton proper subsets, by size then members."""
    n = len(oracle.ground_set)
    return [s for s in oracle.subsets(min_size=2) if len(s) < n]


def sort_subsets(subsets: Iterable[frozenset]) -> list[frozenset]:
    return sorted(subsets, key=subset_sort_key)


def complimentary_oracle(oracle: EntropyOracle, model: Model | str = Model.ACO) -> set[frozenset]:
    """Every X with H(V) − H(X) + R(X) ≤ R(V), R the model's minimum sum-rate."""
    model = parse_model(model)
    _check_users(oracle)
    h_v = oracle.full_entropy

    def rate(subset: frozenset) -> Fraction:
        value, _ = partition_rate_bruteforce(oracle, subset)
        return Fraction(ceil_rational(value)) if model is Model.NCO else value

    target = rate(oracle.members)
    found = {x for x in _candidates(oracle) if h_v - oracle.entropy(x) + rate(x) <= target}
    logger.info("complimentary oracle (%s): %d subsets", model.value, len(found))
    return found


def _check_bound(alpha_lb: Fraction | int | str, model: Model) -> Fraction:
    alpha_lb = parse_rational(alpha_lb)
    if model is Model.NCO and not is_integral(alpha_lb):
        raise BoundTypeError(f"non-asymptotic lower bound must be an integer, got {format_rational(alpha_lb)}")
    return alpha_lb


def is_complimentary_sufficient(
    oracle: EntropyOracle,
    subset: Iterable[UserId],
    alpha_lb: Fraction | int | str,
    model: Model | str = Model.ACO,
    method: str = "identity",
) -> bool:
    """F_α̲(X) = F̂_α̲(X).

    The identity path uses the equivalent α̲ ≥ H(V) − H(X) + R_ACO(X); the
    truncation path minimizes over every partition of X.
    """
    model = parse_model(model)
    alpha_lb = _check_bound(alpha_lb, model)
    subset = oracle.check_subset(subset)
    if len(subset) < 2 or subset == oracle.members:
        raise InvalidSubsetError(f"{format_subset_key(subset)} is not a nonsingleton proper subset")
    if method == "identity":
        r_x, _ = partition_rate_bruteforce(oracle, subset)
        return alpha_lb >= oracle.full_entropy - oracle.entropy(subset) + r_x
    if method == "truncation":
        value, _ = dilworth_truncation_bruteforce(oracle, subset, alpha_lb)
        return ResidualEntropy(oracle).at(subset, alpha_lb) == value
    raise UnknownVariantError(f"Unknown method {method!r}; expected identity or truncation")


def detect_complimentary(
    oracle: EntropyOracle,
    alpha_lb: Fraction | int | str,
    model: Model | str = Model.ACO,
    method: str = "identity",
) -> set[frozenset]:
    return {x for x in _candidates(oracle) if is_complimentary_sufficient(oracle, x, alpha_lb, model, method)}


@dataclass
class TwoStageResult:
    """Either a complimentary C with α̂ and r_{α̂,C}, or none-found with the full PAR run."""

    model: Model
    ordering: tuple[UserId, ...]
    alpha_lb: Fraction
    subset: frozenset | None = None
    prefix: int | None = None
    alpha_hat: Fraction | None = None
    rates: RateVector | None = None
    par_output: ParOutput | None = None
    global_min_sum_rate: Fraction | None = None
    global_rates: RateVector | None = None

    @property
    def found(self) -> bool:
        return self.subset is not None

    def to_document(self) -> TwoStageDocument:
        return TwoStageDocument(
            model=self.model,
            found=self.found,
            ordering=list(self.ordering),
            alpha_lb=self.alpha_lb,
            subset=sorted_users(self.subset) if self.found else None,
            prefix=self.prefix,
            alpha_hat=self.alpha_hat,
            rates=dict(self.rates.rates) if self.rates is not None else None,
            global_min_sum_rate=self.global_min_sum_rate,
            global_rates=dict(self.global_rates.rates) if self.global_rates is not None else None,
        )


def _first_intact(snapshot: PrefixSnapshot, subset: frozenset) -> Fraction:
    for lo, _, partition in snapshot.partition.segments():
        if any(subset <= block for block in partition.blocks):
            return lo
    raise ParConsistencyError(f"{format_subset_key(subset)} never appears in the segmented partition")


def two_stage(
    oracle: EntropyOracle,
    ordering: Sequence[UserId] | None = None,
    model: Model | str = Model.ACO,
    alpha_lb: Fraction | int | str | None = None,
) -> TwoStageResult:
    """Run PAR prefix by prefix until Q_α̲(V_i) holds a nonsingleton block."""
    model = parse_model(model)
    _check_users(oracle)
    if alpha_lb is None:
        alpha_lb = lower_bound(oracle, model, variant="singleton")
    alpha_lb = _check_bound(alpha_lb, model)
    full_ordering = tuple(oracle.ground_set if ordering is None else ordering)

    stats = ParStats()
    snapshots: list[PrefixSnapshot] = []
    for snapshot in iter_par(oracle, ordering, stats=stats):
        snapshots.append(snapshot)
        blocks = snapshot.partition_at(alpha_lb).nonsingleton_blocks()
        if not blocks:
            continue
        newcomer = snapshot.users[-1]
        subset = next((b for b in blocks if newcomer in b), blocks[0])
        alpha_hat = _first_intact(snapshot, subset)
        if model is Model.NCO:
            alpha_hat = Fraction(ceil_rational(alpha_hat))
        rates = RateVector({u: r for u, r in snapshot.rates_at(alpha_hat).items() if u in subset})
        logger.info(
            "two-stage: %s complimentary at prefix %d, α̂=%s, rates %s",
            format_subset_key(subset),
            len(snapshot.users),
            format_rational(alpha_hat),
            rates,
        )
        return TwoStageResult(
            model=model,
            ordering=full_ordering,
            alpha_lb=alpha_lb,
            subset=subset,
            prefix=len(snapshot.users),
            alpha_hat=alpha_hat,
            rates=rates,
        )

    output = ParOutput(oracle, full_ordering, alpha_domain(oracle), snapshots, stats)
    value = extract_psp(output).min_sum_rate
    if model is Model.NCO:
        value = Fraction(ceil_rational(value))
    logger.info("two-stage: no complimentary subset, global %s rate %s", model.value, format_rational(value))
    return TwoStageResult(
        model=model,
        ordering=full_ordering,
        alpha_lb=alpha_lb,
        par_output=output,
        global_min_sum_rate=value,
        global_rates=RateVector(output.rates_at(value)),
    )

