"""Parametric Dilworth truncation: one sweep over the users, all α at once.

The running state is a list of α-segments. On each segment the partition of the
processed prefix is fixed and every rate coordinate is affine in α. Adding user
φ_i means, per segment, taking the lower envelope of the fusion costs of every
family of current blocks joined with {φ_i}; each envelope piece fixes which
blocks merge and by how much r_{φ_i} is raised.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

from coso.common.config import get_settings
from coso.common.errors import CosoError, LimitExceededError
from coso.common.ids import UserId, sorted_users
from coso.common.rationals import parse_rational
from coso.entropy.service import EntropyOracle, validate_oracle
from coso.partitions.service import Partition, enumerate_partitions, meet_all
from coso.pwl.service import (
    Affine,
    PwlFn,
    SegmentedValue,
    TieResolutionError,
    affine,
    canonical,
    combine,
    lower_envelope_with_witnesses,
    resolve_witnesses,
)

logger = logging.getLogger(__name__)


class ParConsistencyError(CosoError):
    """Raised when the sweep produces a state its own invariants forbid."""


class InvalidOrderingError(CosoError, ValueError):
    """Raised when an ordering is not a permutation of the ground set."""


class InvalidOracleError(CosoError, ValueError):
    """Raised when the oracle is not a polymatroid rank function."""


class InvalidFamilyError(CosoError, ValueError):
    """Raised when a fusion family does not contain the newcomer's singleton."""


def alpha_domain(oracle: EntropyOracle) -> tuple[Fraction, Fraction]:
    """[0, ⌈H(V)⌉]: wide enough to evaluate at R_NCO even for fractional H(V)."""
    return Fraction(0), Fraction(math.ceil(oracle.full_entropy))


class ResidualEntropy:
    """F_α(X) = α − H(V) + H(X), affine in α for each X."""

    def __init__(self, oracle: EntropyOracle) -> None:
        self.oracle = oracle
        self.domain = alpha_domain(oracle)

    def line(self, subset: Iterable[UserId]) -> Affine:
        return Affine(Fraction(1), self.oracle.entropy(subset) - self.oracle.full_entropy)

    def __call__(self, subset: Iterable[UserId]) -> PwlFn:
        f = self.line(subset)
        return affine(f.slope, f.intercept, self.domain)

    def at(self, subset: Iterable[UserId], alpha: Fraction) -> Fraction:
        return self.line(subset).at(alpha)


def residual(oracle: EntropyOracle, subset: Iterable[UserId]) -> PwlFn:
    return ResidualEntropy(oracle)(subset)


def fusion_cost(
    oracle: EntropyOracle,
    current_rates: Mapping[UserId, PwlFn],
    family: Iterable[Iterable[UserId]],
    newcomer: UserId,
) -> PwlFn:
    """F_α(X̃) − r_α(X̃): how far r_newcomer can rise while X̃ stays feasible.

    The newcomer's coordinate counts at its starting line α − H(V).
    """
    blocks = [frozenset(b) for b in family]
    if frozenset({newcomer}) not in blocks:
        raise InvalidFamilyError(f"family must contain {{{newcomer}}}")
    union = frozenset().union(*blocks)
    start = _starting_line(oracle)
    others = [current_rates[u] for u in sorted_users(union) if u != newcomer]
    return combine([residual(oracle, union), *others], lambda parts: _fusion_line(parts[0], start, parts[1:]))


def _starting_line(oracle: EntropyOracle) -> Affine:
    return Affine(Fraction(1), -oracle.full_entropy)


def _fusion_line(capacity: Affine, start: Affine, paid: Iterable[Affine]) -> Affine:
    """Fusion cost on one affine piece: capacity minus the newcomer at its start line and the rates already paid."""
    cost = capacity - start
    for rate in paid:
        cost = cost - rate
    return cost


@dataclass(frozen=True)
class _Segment:
    lo: Fraction
    hi: Fraction
    partition: Partition
    rates: Mapping[UserId, Affine]


@dataclass(frozen=True)
class PrefixSnapshot:
    """Q_α(V_i) and r_{α,V_i} after processing the first i users."""

    users: tuple[UserId, ...]
    segments: tuple[_Segment, ...]

    @cached_property
    def partition(self) -> SegmentedValue[Partition]:
        return SegmentedValue.from_segments((s.lo, s.hi, s.partition) for s in self.segments)

    @cached_property
    def rate_profile(self) -> dict[UserId, PwlFn]:
        bps = [self.segments[0].lo] + [s.hi for s in self.segments]
        return {u: canonical(bps, [s.rates[u] for s in self.segments]) for u in self.users}

    def partition_at(self, alpha: Fraction | int | str) -> Partition:
        return self.partition.at(alpha)

    def rates_at(self, alpha: Fraction | int | str) -> dict[UserId, Fraction]:
        alpha = parse_rational(alpha)
        return {u: f(alpha) for u, f in self.rate_profile.items()}


@dataclass
class ParStats:
    envelope_calls: int = 0
    candidates: int = 0
    envelope_calls_per_prefix: list[int] = field(default_factory=list)


@dataclass
class ParOutput:
    oracle: EntropyOracle
    ordering: tuple[UserId, ...]
    domain: tuple[Fraction, Fraction]
    snapshots: list[PrefixSnapshot]
    stats: ParStats

    def prefix(self, i: int) -> PrefixSnapshot:
        """Snapshot for V_i, 1-based."""
        return self.snapshots[i - 1]

    @property
    def final(self) -> PrefixSnapshot:
        return self.snapshots[-1]

    @property
    def rate_profile(self) -> dict[UserId, PwlFn]:
        return self.final.rate_profile

    @property
    def segmented_partition(self) -> SegmentedValue[Partition]:
        return self.final.partition

    def rates_at(self, alpha: Fraction | int | str) -> dict[UserId, Fraction]:
        return self.final.rates_at(alpha)

    def partition_at(self, alpha: Fraction | int | str) -> Partition:
        return self.final.partition_at(alpha)


@dataclass(frozen=True)
class Psp:
    """Critical points ascending (α^(p), ..., α^(1)) and partitions finest first, ending at {V}."""

    critical_points: tuple[Fraction, ...]
    partitions: tuple[Partition, ...]
    full_entropy: Fraction

    @property
    def p(self) -> int:
        return len(self.critical_points)

    def alpha(self, j: int) -> Fraction:
        """α^(j); α^(0) is H(V)."""
        if j == 0:
            return self.full_entropy
        return self.critical_points[self.p - j]

    def partition(self, j: int) -> Partition:
        """P^(j); P^(0) is {V}."""
        return self.partitions[self.p - j]

    @property
    def min_sum_rate(self) -> Fraction:
        return self.alpha(1)

    @property
    def fundamental_partition(self) -> Partition:
        return self.partition(1)


def _check_ordering(oracle: EntropyOracle, ordering: Sequence[UserId] | None) -> tuple[UserId, ...]:
    if ordering is None:
        return tuple(oracle.ground_set)
    ordering = tuple(ordering)
    if len(ordering) != len(oracle.ground_set) or set(ordering) != oracle.members:
        raise InvalidOrderingError(f"{list(ordering)} is not a permutation of {list(oracle.ground_set)}")
    return ordering


def _union(family: frozenset) -> frozenset:
    return frozenset().union(*family)


def _minimal_family(witnesses: frozenset) -> frozenset:
    """The witness whose union is contained in every other witness's union."""
    ranked = sorted(witnesses, key=lambda fam: len(_union(fam)))
    best = ranked[0]
    best_union = _union(best)
    for other in ranked[1:]:
        if not best_union <= _union(other):
            raise TieResolutionError(
                f"minimizers {sorted_users(best_union)} and {sorted_users(_union(other))} are incomparable"
            )
    return best


def _merge(segments: list[_Segment]) -> list[_Segment]:
    out: list[_Segment] = []
    for seg in segments:
        if out and out[-1].partition == seg.partition and out[-1].rates == seg.rates:
            out[-1] = replace(out[-1], hi=seg.hi)
        else:
            out.append(seg)
    return out


def _sweep(oracle: EntropyOracle, ordering: tuple[UserId, ...], stats: ParStats) -> Iterator[PrefixSnapshot]:
    F = ResidualEntropy(oracle)
    lo, hi = F.domain
    start = _starting_line(oracle)

    first = ordering[0]
    state = [_Segment(lo, hi, Partition.singletons([first]), {first: F.line([first])})]
    stats.envelope_calls_per_prefix.append(0)
    yield PrefixSnapshot(ordering[:1], tuple(state))

    for i in range(1, len(ordering)):
        newcomer = ordering[i]
        own = frozenset({newcomer})
        calls = 0
        new_state: list[_Segment] = []
        for idx, seg in enumerate(state):
            blocks = seg.partition.ordered()
            block_rates = [sum((seg.rates[u] for u in b), Affine(Fraction(0), Fraction(0))) for b in blocks]
            costs: dict[frozenset, Affine] = {}
            candidates = []
            for mask in range(1 << len(blocks)):
                chosen = [k for k in range(len(blocks)) if mask >> k & 1]
                family = frozenset([own, *(blocks[k] for k in chosen)])
                cost = _fusion_line(F.line(_union(family)), start, (block_rates[k] for k in chosen))
                costs[family] = cost
                candidates.append((family, PwlFn((seg.lo, seg.hi), (cost,))))
            calls += 1
            stats.candidates += len(candidates)

            _, pieces = lower_envelope_with_witnesses(candidates)
            try:
                chosen_segments = resolve_witnesses(pieces, _minimal_family, include_head=idx == 0)
            except TieResolutionError as exc:
                raise ParConsistencyError(f"user {newcomer}, α in [{seg.lo}, {seg.hi}]: {exc}") from exc

            for a, b, family in chosen_segments.segments():
                merged = _union(family)
                kept = [blk for blk in blocks if blk not in family]
                rates = dict(seg.rates)
                rates[newcomer] = start + costs[family]
                new_state.append(_Segment(a, b, Partition.of([*kept, merged]), rates))

        state = _merge(new_state)
        stats.envelope_calls += calls
        stats.envelope_calls_per_prefix.append(calls)
        logger.debug("par: user %s processed, %d segments, %d envelope calls", newcomer, len(state), calls)
        yield PrefixSnapshot(ordering[: i + 1], tuple(state))


def _assert_continuous(snapshot: PrefixSnapshot) -> None:
    for user, f in snapshot.rate_profile.items():
        if not f.is_continuous():
            raise ParConsistencyError(f"rate of user {user} jumps: {f}")


def _prepare(oracle: EntropyOracle, ordering: Sequence[UserId] | None, check: bool) -> tuple[UserId, ...]:
    ordering = _check_ordering(oracle, ordering)
    settings = get_settings()
    if len(ordering) > settings.par_max_users:
        raise LimitExceededError(f"|V|={len(ordering)} exceeds the fusion-search limit {settings.par_max_users}")
    if check and len(ordering) <= settings.exhaustive_limit:
        report = validate_oracle(oracle)
        if not report.ok:
            raise InvalidOracleError(f"oracle fails {len(report.violations)} polymatroid checks")
    return ordering


def iter_par(
    oracle: EntropyOracle,
    ordering: Sequence[UserId] | None = None,
    *,
    check: bool = True,
    stats: ParStats | None = None,
) -> Iterator[PrefixSnapshot]:
    """Yield the prefix snapshots one at a time (the two-stage planner stops early)."""
    ordering = _prepare(oracle, ordering, check)
    stats = ParStats() if stats is None else stats
    for snapshot in _sweep(oracle, ordering, stats):
        _assert_continuous(snapshot)
        yield snapshot


def par(oracle: EntropyOracle, ordering: Sequence[UserId] | None = None, *, check: bool = True) -> ParOutput:
    ordering = _prepare(oracle, ordering, check)
    stats = ParStats()
    snapshots = []
    for snapshot in _sweep(oracle, ordering, stats):
        _assert_continuous(snapshot)
        snapshots.append(snapshot)
    output = ParOutput(oracle, ordering, alpha_domain(oracle), snapshots, stats)
    logger.info(
        "par over %d users: %d partition segments, %d envelope calls",
        len(ordering),
        len(output.segmented_partition.values),
        stats.envelope_calls,
    )
    return output


def extract_psp(output: ParOutput) -> Psp:
    """Read the critical points and partition chain off the segmented Q_α(V)."""
    oracle = output.oracle
    whole = Partition.whole(oracle.members)
    points: list[Fraction] = []
    chain: list[Partition] = []
    for _, hi, partition in output.segmented_partition.segments():
        chain.append(partition)
        if partition != whole:
            points.append(min(hi, oracle.full_entropy))
    if chain[-1] != whole:
        chain.append(whole)
    return Psp(tuple(points), tuple(chain), oracle.full_entropy)


def psp(oracle: EntropyOracle, ordering: Sequence[UserId] | None = None) -> Psp:
    return extract_psp(par(oracle, ordering))


def dilworth_truncation_bruteforce(
    oracle: EntropyOracle, subset: Iterable[UserId], alpha: Fraction | int | str
) -> tuple[Fraction, Partition]:
    """min over partitions of Σ F_α(C), and the meet of all minimizers."""
    alpha = parse_rational(alpha)
    subset = oracle.check_subset(subset)
    F = ResidualEntropy(oracle)
    best: Fraction | None = None
    minimizers: list[Partition] = []
    for partition in enumerate_partitions(subset):
        value = sum((F.at(block, alpha) for block in partition.blocks), Fraction(0))
        if best is None or value < best:
            best, minimizers = value, [partition]
        elif value == best:
            minimizers.append(partition)
    return best, meet_all(minimizers)
