"""Multi-stage SO plans read off one (or, for integer rates, two) PAR runs."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from coso.common.errors import CosoError
from coso.common.ids import UserId, format_subset_key, parse_id_list, sorted_users, user_sort_key
from coso.common.rationals import ceil_rational, format_rational
from coso.entropy.service import EntropyOracle
from coso.omniscience.service import Model, RateVector, TooFewUsersError, in_co_region, parse_model
from coso.par.service import ParOutput, Psp, extract_psp, par
from coso.partitions.service import Partition, restrict_blocks
from coso.planner.schemas import SoPlan, Stage

logger = logging.getLogger(__name__)


class UnknownPolicyError(CosoError, ValueError):
    """Raised for a Δr policy string that cannot be parsed."""


POLICY_KINDS = ("min-rate", "smallest-index", "explicit", "random")


@dataclass
class RecipientPolicy:
    """Which member of an already-omniscient block receives the extra rate Δr."""

    kind: str = "min-rate"
    recipients: list[UserId] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self) -> None:
        self._rng = random.Random(self.seed)

    def choose(self, block: Iterable[UserId], rates: Mapping[UserId, Fraction]) -> UserId:
        members = sorted_users(block)
        if self.kind == "smallest-index":
            return members[0]
        if self.kind == "random":
            return self._rng.choice(members)
        if self.kind == "explicit":
            for user in self.recipients:
                if user in members:
                    return user
        return min(members, key=lambda u: (rates[u], user_sort_key(u)))

    def __str__(self) -> str:
        if self.kind == "explicit":
            return "explicit:" + ",".join(str(u) for u in self.recipients)
        if self.kind == "random":
            return f"random:{self.seed}"
        return self.kind


def parse_policy(text: str | RecipientPolicy | None, seed: int = 0) -> RecipientPolicy:
    """Read "min-rate", "smallest-index", "explicit:4,5" or "random[:seed]"."""
    if isinstance(text, RecipientPolicy):
        return text
    if text is None:
        return RecipientPolicy()
    kind, _, arg = text.strip().partition(":")
    if kind not in POLICY_KINDS:
        raise UnknownPolicyError(f"Unknown policy {text!r}; expected one of {', '.join(POLICY_KINDS)}")
    if kind == "explicit":
        if not arg:
            raise UnknownPolicyError("explicit policy needs recipient ids, e.g. explicit:4")
        return RecipientPolicy(kind, parse_id_list(arg))
    if kind == "random":
        try:
            return RecipientPolicy(kind, seed=int(arg) if arg else seed)
        except ValueError as exc:
            raise UnknownPolicyError(f"random policy seed must be an integer, got {arg!r}") from exc
    if arg:
        raise UnknownPolicyError(f"policy {kind} takes no argument")
    return RecipientPolicy(kind)


def _stage(index: int, alpha: Fraction, targets: Iterable[frozenset], rates: Mapping[UserId, Fraction]) -> Stage:
    ordered = {u: rates[u] for u in sorted_users(rates)}
    return Stage(index=index, alpha=alpha, targets=[sorted_users(t) for t in targets], cumulative_rates=ordered)


def _check(oracle: EntropyOracle) -> None:
    if len(oracle.ground_set) < 2:
        raise TooFewUsersError(f"need at least two users, got {list(oracle.ground_set)}")


def multi_stage_aco(
    oracle: EntropyOracle,
    ordering: Sequence[UserId] | None = None,
    policy: str | RecipientPolicy | None = None,
    *,
    output: ParOutput | None = None,
) -> SoPlan:
    """One stage per critical point, from the finest nonsingleton blocks up to V."""
    _check(oracle)
    policy = parse_policy(policy)
    output = par(oracle, ordering) if output is None else output
    chain = extract_psp(output)
    p = chain.p
    current = {u: Fraction(0) for u in oracle.ground_set}
    stages: list[Stage] = []

    for k in range(1, p + 1):
        coarse, fine = chain.partition(p - k), chain.partition(p - k + 1)
        alpha = chain.alpha(p - k + 1)
        optimal = output.rates_at(alpha)
        targets = coarse.nonsingleton_blocks()
        for target in targets:
            if target in fine.blocks:
                continue
            for part in restrict_blocks(target, fine):
                if len(part) == 1:
                    (user,) = part
                    current[user] = optimal[user]
                    continue
                delta = sum((optimal[u] - current[u] for u in part), Fraction(0))
                recipient = policy.choose(part, current)
                current[recipient] += delta
                logger.debug("stage %d: Δr=%s to user %s of %s", k, delta, recipient, format_subset_key(part))
        stages.append(_stage(k, alpha, targets, current))
        logger.info("aco stage %d at α=%s: %d targets", k, format_rational(alpha), len(targets))

    return SoPlan(model=Model.ACO, stages=stages, ordering=list(output.ordering), policy=str(policy))


@dataclass
class NcoLevel:
    alpha: Fraction
    subset: frozenset


def nco_levels(oracle: EntropyOracle, chain: Psp) -> list[NcoLevel]:
    """(α̃^(k), X^(k)) for every stage of the integer-rate plan.

    Walks j = p..1; level j contributes the least integer in [α^(j), α^(j−1))
    and the block of P^(j−1) holding X^(k−1). The last level is always
    (R_NCO(V), V).
    """
    p = chain.p
    r_nco = Fraction(ceil_rational(chain.min_sum_rate))
    levels: list[NcoLevel] = []
    previous: frozenset = frozenset()
    for j in range(p, 1, -1):
        lo, hi = chain.alpha(j), chain.alpha(j - 1)
        integer = Fraction(math.ceil(lo))
        if not integer < hi:
            continue
        coarse = chain.partition(j - 1)
        if previous:
            block = coarse.block_of(next(iter(previous)))
            if block == previous:
                continue
        else:
            nonsingleton = coarse.nonsingleton_blocks()
            if not nonsingleton:
                continue
            block = nonsingleton[0]
        levels.append(NcoLevel(integer, block))
        previous = block
    levels.append(NcoLevel(r_nco, oracle.members))
    return levels


def refined_ordering(levels: Sequence[NcoLevel]) -> list[UserId]:
    ordering: list[UserId] = []
    seen: set = set()
    for level in levels:
        fresh = sorted_users(level.subset - seen)
        ordering.extend(fresh)
        seen |= level.subset
    return ordering


def _reusable(oracle: EntropyOracle, output: ParOutput, levels: Sequence[NcoLevel]) -> bool:
    """Strict growth of r(X^(k)) between consecutive levels and local omniscience at each."""
    for k, level in enumerate(levels):
        rates = RateVector(output.rates_at(level.alpha)).restricted(level.subset)
        if not in_co_region(oracle, level.subset, rates):
            return False
        if k + 1 < len(levels):
            later = RateVector(output.rates_at(levels[k + 1].alpha))
            if later.sum(level.subset) <= rates.total:
                return False
    return True


def multi_stage_nco(
    oracle: EntropyOracle,
    ordering: Sequence[UserId] | None = None,
    policy: str | RecipientPolicy | None = None,
) -> SoPlan:
    """Integer-rate SO along a single chain X^(1) ⊊ ... ⊊ X^(K) = V."""
    _check(oracle)
    policy = parse_policy(policy)
    first = par(oracle, ordering)
    levels = nco_levels(oracle, extract_psp(first))
    refined = refined_ordering(levels)
    reused = _reusable(oracle, first, levels)
    if reused:
        output = first
    else:
        output = par(oracle, refined)
        logger.info("nco: rerunning PAR with ordering %s", refined)

    current = {u: Fraction(0) for u in oracle.ground_set}
    stages: list[Stage] = []
    previous: frozenset = frozenset()
    for k, level in enumerate(levels, start=1):
        optimal = output.rates_at(level.alpha)
        if previous:
            delta = sum((optimal[u] - current[u] for u in previous), Fraction(0))
            recipient = policy.choose(previous, current)
            current[recipient] += delta
            logger.debug("stage %d: Δr=%s to user %s", k, delta, recipient)
        for user in level.subset - previous:
            current[user] = optimal[user]
        stages.append(_stage(k, level.alpha, [level.subset], current))
        logger.info("nco stage %d at α̃=%s: %s", k, format_rational(level.alpha), format_subset_key(level.subset))
        previous = level.subset

    return SoPlan(
        model=Model.NCO,
        stages=stages,
        ordering=list(first.ordering),
        policy=str(policy),
        refined_ordering=refined,
        reused_first_run=reused,
        alpha_tilde=[level.alpha for level in levels],
    )


def multi_stage(
    oracle: EntropyOracle,
    model: Model | str = Model.ACO,
    ordering: Sequence[UserId] | None = None,
    policy: str | RecipientPolicy | None = None,
) -> SoPlan:
    if parse_model(model) is Model.NCO:
        return multi_stage_nco(oracle, ordering, policy)
    return multi_stage_aco(oracle, ordering, policy)


def stage_partitions(plan: SoPlan) -> list[Partition]:
    """Each stage's targets completed with singletons into a partition of V."""
    result = []
    for stage in plan.stages:
        covered = stage.union
        singles = [[u] for u in sorted_users(plan.users - covered)]
        result.append(Partition.of([*stage.targets, *singles]))
    return result
