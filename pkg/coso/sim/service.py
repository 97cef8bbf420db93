"""Packet-level execution of SO plans.

Every user holds a subspace of GF(q)^(n·m). A stage makes the members of each
target broadcast coded rows from K_i ∩ T_C (T_C spanned by the members'
holdings); every other user overhears them. A target is decoded when each
member's subspace contains T_C.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from typing import Iterable, Sequence

import galois
import numpy as np

from coso.common.config import get_settings
from coso.common.errors import CosoError
from coso.common.ids import UserId, format_subset_key, sorted_users
from coso.common.rationals import format_rational, is_integral
from coso.entropy.schemas import SourceModel
from coso.entropy.service import BitsSource, EntropyOracle, LinearSource, table_oracle
from coso.omniscience.service import Model, RateVector, parse_model
from coso.planner.schemas import SoPlan, Stage
from coso.planner.service import two_stage
from coso.sim import gf
from coso.sim.schemas import (
    RecursiveTrace,
    RoundRecord,
    SimReport,
    StageReport,
    Transmission,
)

logger = logging.getLogger(__name__)

CODINGS = ("deterministic", "random")


class NotRealizableError(CosoError, ValueError):
    """Raised when an oracle has no packet realization (table model, too few users, n < 1)."""


class NonIntegralRateError(CosoError, ValueError):
    """Raised when n·r is not an integer for some planned rate."""


class NotOmniscientError(CosoError):
    """Raised when fusing a subset whose members have not all decoded it."""


@dataclass
class PacketSystem:
    field_type: type[galois.FieldArray]
    block_length: int
    dim: int
    users: list[UserId]
    knowledge: dict[UserId, galois.FieldArray]
    holdings: dict[UserId, galois.FieldArray]
    transcript: list[Transmission] = dataclass_field(default_factory=list)

    @property
    def field_order(self) -> int:
        return int(self.field_type.order)

    def copy(self) -> "PacketSystem":
        return PacketSystem(
            self.field_type,
            self.block_length,
            self.dim,
            list(self.users),
            {u: k.copy() for u, k in self.knowledge.items()},
            {u: h.copy() for u, h in self.holdings.items()},
            list(self.transcript),
        )

    def rank(self, user: UserId) -> int:
        return gf.rank(self.knowledge[user])

    def span(self, users: Iterable[UserId], source: str = "knowledge") -> galois.FieldArray:
        table = self.knowledge if source == "knowledge" else self.holdings
        return gf.basis(gf.stack(self.field_type, self.dim, [table[u] for u in users]))

    def target_span(self, users: Iterable[UserId]) -> galois.FieldArray:
        """T_C: what the members of C held before the current round."""
        return self.span(users, source="holdings")

    def knows(self, user: UserId, space: galois.FieldArray) -> bool:
        return gf.contains(self.knowledge[user], space)

    def is_omniscient(self, users: Iterable[UserId] | None = None) -> bool:
        users = list(self.users if users is None else users)
        target = self.target_span(users)
        return all(self.knows(u, target) for u in users)

    def ranks(self) -> dict[UserId, int]:
        return {u: self.rank(u) for u in self.users}

    def receive(self, user: UserId, row: galois.FieldArray) -> None:
        stacked = gf.stack(self.field_type, self.dim, [self.knowledge[user], row.reshape(1, -1)])
        self.knowledge[user] = gf.basis(stacked)

    def derived_oracle(self) -> EntropyOracle:
        """H(S) = rank(∪ K_i, i ∈ S) / n over the current nodes."""
        n = self.block_length
        table: dict[frozenset, Fraction] = {}
        for size in range(len(self.users) + 1):
            for combo in itertools.combinations(self.users, size):
                table[frozenset(combo)] = Fraction(gf.rank(self.span(combo)), n)
        fractional = [k for k, v in table.items() if not is_integral(v)]
        if fractional:
            logger.warning("derived entropies are not integral for %d subsets (n=%d)", len(fractional), n)
        return table_oracle(self.users, table)


def _replicate(rows: np.ndarray, width: int, n: int) -> np.ndarray:
    """n parallel copies of each source row, copy t on columns [t·w, (t+1)·w)."""
    out = np.zeros((rows.shape[0] * n, width * n), dtype=np.int64)
    for t in range(n):
        out[t * rows.shape[0] : (t + 1) * rows.shape[0], t * width : (t + 1) * width] = rows
    return out


def _simulation_field(source: BitsSource | LinearSource) -> int:
    settings = get_settings()
    sim_order = settings.sim_field
    if isinstance(source, BitsSource):
        return sim_order
    # 0/1 matrices keep their rank in any extension of GF(2).
    if source.field == 2 and sim_order & (sim_order - 1) == 0:
        return sim_order
    return source.field


def instantiate(oracle: EntropyOracle, block_length: int = 1) -> PacketSystem:
    """Realize a bits or linear oracle as packets over a block of n source symbols."""
    if block_length < 1:
        raise NotRealizableError(f"block length must be at least 1, got {block_length}")
    if len(oracle.ground_set) < 2:
        raise NotRealizableError("a packet system needs at least two users")
    source = oracle.source
    if oracle.model is SourceModel.BITS:
        labels = [label for label in source.labels if any(label in source.holdings[u] for u in oracle.ground_set)]
        index = {label: j for j, label in enumerate(labels)}
        width = len(labels)
        rows = {}
        for user in oracle.ground_set:
            unit = np.zeros((len(source.holdings[user]), width), dtype=np.int64)
            for r, label in enumerate(sorted(source.holdings[user])):
                unit[r, index[label]] = 1
            rows[user] = unit
    elif oracle.model is SourceModel.LINEAR:
        width = source.width
        rows = {
            u: source.matrices[u].reshape(-1, width) if source.matrices[u].size else np.zeros((0, width), dtype=np.int64)
            for u in oracle.ground_set
        }
    else:
        raise NotRealizableError(f"{oracle.model.value} oracles have no packet realization")

    field_type = gf.field(_simulation_field(source))
    dim = width * block_length
    knowledge = {u: gf.basis(field_type(_replicate(rows[u], width, block_length))) for u in oracle.ground_set}
    system = PacketSystem(
        field_type,
        block_length,
        dim,
        list(oracle.ground_set),
        knowledge,
        {u: k.copy() for u, k in knowledge.items()},
    )
    logger.info("packet system: %d users, dimension %d over GF(%d)", len(system.users), dim, system.field_order)
    return system


def _scaled(value: Fraction, n: int, what: str) -> int:
    scaled = value * n
    if not is_integral(scaled):
        raise NonIntegralRateError(f"{what}: n·r = {format_rational(scaled)} is not an integer (n={n})")
    return int(scaled)


@dataclass
class _Plan:
    targets: list[frozenset]
    sends: dict[UserId, int]


def _stage_sends(system: PacketSystem, stage: Stage, previous: RateVector | None) -> _Plan:
    n = system.block_length
    sends: dict[UserId, int] = {}
    for target in stage.target_sets:
        for user in sorted_users(target):
            before = previous[user] if previous is not None else Fraction(0)
            count = _scaled(stage.cumulative_rates[user] - before, n, f"stage {stage.index}, user {user}")
            if count > 0:
                sends[user] = count
    return _Plan(stage.target_sets, sends)


def _candidates(space: galois.FieldArray, rng: np.random.Generator, budget: int, coding: str):
    if coding == "deterministic":
        for row in space:
            yield row
    for _ in range(budget):
        yield gf.random_combination(space, rng)


def _pick(
    system: PacketSystem,
    sender: UserId,
    space: galois.FieldArray,
    members: Sequence[UserId],
    rng: np.random.Generator,
    coding: str,
) -> galois.FieldArray:
    budget = get_settings().sim_candidate_budget
    if coding == "random":
        return gf.random_combination(space, rng)
    needing = [u for u in members if u != sender and not system.knows(u, space)]
    others = [u for u in system.users if u not in members and not system.knows(u, space)]
    best, best_score = None, (-1, -1)
    for row in _candidates(space, rng, budget, coding):
        if not np.any(np.asarray(row)):
            continue
        hits = sum(gf.innovative(system.knowledge[u], row) for u in needing)
        heard = sum(gf.innovative(system.knowledge[u], row) for u in others)
        score = (hits, heard)
        if score > best_score:
            best, best_score = row, score
        if hits == len(needing) and heard == len(others):
            break
    if best is None:
        return space[0]
    return best


def _run_stage(
    system: PacketSystem, stage: Stage, plan: _Plan, coding: str, seed: int
) -> tuple[int, list[Transmission]]:
    rng = np.random.default_rng(seed)
    spaces = {}
    for target in plan.targets:
        span = system.target_span(target)
        for user in target:
            if user in plan.sends:
                spaces[user] = (target, span)
    remaining = dict(plan.sends)
    sent: list[Transmission] = []
    while any(remaining.values()):
        for sender in sorted_users(remaining):
            if remaining[sender] == 0:
                continue
            target, span = spaces[sender]
            space = gf.intersect(system.knowledge[sender], span)
            if space.shape[0] == 0:
                space = system.knowledge[sender]
            row = _pick(system, sender, space, sorted_users(target), rng, coding)
            for user in system.users:
                if user != sender:
                    system.receive(user, row)
            sent.append(Transmission(stage=stage.index, sender=sender, row=gf.to_rows(row.reshape(1, -1))[0]))
            remaining[sender] -= 1
    return len(sent), sent


def simulate_plan(
    system: PacketSystem,
    plan: SoPlan,
    coding: str = "deterministic",
    seed: int = 0,
    *,
    in_place: bool = False,
    keep_transcript: bool = False,
) -> SimReport:
    """Broadcast every stage at its planned integer rates and check local omniscience by rank."""
    if coding not in CODINGS:
        raise NotRealizableError(f"Unknown coding {coding!r}; expected one of {', '.join(CODINGS)}")
    if set(plan.ordering) != set(system.users):
        raise NotRealizableError(f"plan users {sorted_users(plan.ordering)} differ from {sorted_users(system.users)}")
    work = system if in_place else system.copy()
    n = work.block_length
    attempts_allowed = get_settings().sim_stage_attempts if coding == "deterministic" else 1

    plans = []
    previous: RateVector | None = None
    for stage in plan.stages:
        plans.append(_stage_sends(work, stage, previous))
        previous = stage.rates

    report = SimReport(
        coding=coding,
        seed=seed,
        block_length=n,
        field=work.field_order,
        expected_transmissions=plan.final_rates.total * n,
    )
    transcript: list[Transmission] = []
    for stage, stage_plan in zip(plan.stages, plans):
        snapshot = work.copy()
        for attempt in range(1, attempts_allowed + 1):
            rows_sent, sent = _run_stage(work, stage, stage_plan, coding, seed + 1000 * stage.index + attempt)
            decoded = all(work.is_omniscient(t) for t in stage_plan.targets)
            if decoded or attempt == attempts_allowed:
                break
            logger.warning("stage %d did not decode on attempt %d, re-seeding", stage.index, attempt)
            work.knowledge = {u: k.copy() for u, k in snapshot.knowledge.items()}
        transcript.extend(sent)
        report.stages.append(
            StageReport(
                index=stage.index,
                targets=[sorted_users(t) for t in stage_plan.targets],
                senders=dict(stage_plan.sends),
                rows_sent=rows_sent,
                decoded=decoded,
                attempts=attempt,
                per_user_rank=work.ranks(),
            )
        )
        report.total_transmissions += rows_sent
        logger.info("stage %d: %d rows, decoded=%s", stage.index, rows_sent, decoded)
    work.transcript.extend(transcript)
    if keep_transcript:
        report.transcript = transcript
    return report


def fuse_name(users: Iterable[UserId]) -> str:
    return "+".join(str(u) for u in sorted_users(users))


def fuse_superuser(
    system: PacketSystem, subset: Iterable[UserId], transcripts: Sequence[Transmission] | None = None
) -> PacketSystem:
    """Replace an omniscient subset by one node holding span(Z_X); everyone's holdings absorb what they heard."""
    subset = frozenset(subset)
    stray = subset - set(system.users)
    if stray:
        raise NotRealizableError(f"{sorted_users(stray)} are not nodes of this system")
    fused = system.copy()
    for record in transcripts or []:
        row = fused.field_type(np.asarray(record.row, dtype=np.int64))
        for user in fused.users:
            if user != record.sender and user not in subset:
                fused.receive(user, row)
    if len(subset) <= 1:
        return fused
    if not fused.is_omniscient(subset):
        raise NotOmniscientError(f"{format_subset_key(subset)} has not attained local omniscience")

    node = fuse_name(subset)
    merged = fused.span(subset)
    users: list[UserId] = []
    for user in fused.users:
        if user in subset:
            if node not in users:
                users.append(node)
            continue
        users.append(user)
    knowledge = {u: fused.knowledge[u] for u in users if u != node}
    knowledge[node] = merged
    return PacketSystem(
        fused.field_type,
        fused.block_length,
        fused.dim,
        users,
        knowledge,
        {u: k.copy() for u, k in knowledge.items()},
        list(fused.transcript),
    )


def _single_stage_plan(
    system: PacketSystem, model: Model, target: frozenset, alpha: Fraction, rates: RateVector
) -> SoPlan:
    cumulative = {u: rates.rates.get(u, Fraction(0)) for u in sorted_users(system.users)}
    stage = Stage(index=1, alpha=alpha, targets=[sorted_users(target)], cumulative_rates=cumulative)
    return SoPlan(model=model, stages=[stage], ordering=list(system.users), policy="two-stage")


def recursive_two_stage(
    system: PacketSystem,
    model: Model | str = Model.ACO,
    coding: str = "deterministic",
    seed: int = 0,
) -> tuple[RecursiveTrace, PacketSystem]:
    """Find a complimentary subset, make it omniscient, fuse it, and repeat until V is omniscient."""
    model = parse_model(model)
    n = system.block_length
    trace = RecursiveTrace(block_length=n)
    work = system.copy()
    round_no = 0
    while not work.is_omniscient():
        round_no += 1
        oracle = work.derived_oracle()
        result = two_stage(oracle, sorted_users(work.users), model)
        if result.found:
            target, alpha, rates = result.subset, result.alpha_hat, result.rates
        else:
            target, alpha, rates = frozenset(work.users), result.global_min_sum_rate, result.global_rates
        plan = _single_stage_plan(work, model, target, alpha, rates)
        report = simulate_plan(work, plan, coding, seed + round_no, in_place=True)
        report.raise_for_failure()
        if result.found:
            work = fuse_superuser(work, target)
        trace.rounds.append(
            RoundRecord(
                round=round_no,
                found=result.found,
                subset=sorted_users(target),
                alpha_hat=alpha,
                rates=dict(rates.rates),
                transmissions=report.total_transmissions,
                decoded=report.success,
                users_after=list(work.users),
                derived_entropy=oracle.full_entropy,
            )
        )
        trace.total_transmissions += report.total_transmissions
        logger.info(
            "round %d: %s %s, %d rows",
            round_no,
            "fused" if result.found else "global stage",
            format_subset_key(target),
            report.total_transmissions,
        )
        if not result.found:
            break
    trace.omniscient = work.is_omniscient()
    return trace, work
