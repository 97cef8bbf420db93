"""Set-partition algebra over subsets of the ground set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from coso.common.config import get_settings
from coso.common.errors import CosoError, LimitExceededError
from coso.common.ids import UserId, sorted_users, user_sort_key


class CarrierMismatchError(CosoError, ValueError):
    """Raised when two partitions are over different carriers."""


class NotAUnionOfBlocksError(CosoError, ValueError):
    """Raised when a set cuts through a block of the partition."""


class InvalidPartitionError(CosoError, ValueError):
    """Raised when blocks overlap or are empty."""


def _block_key(block: frozenset) -> tuple:
    return user_sort_key(min(block, key=user_sort_key))


@dataclass(frozen=True)
class Partition:
    blocks: frozenset  # frozenset of frozensets
    carrier: frozenset

    @classmethod
    def of(cls, blocks: Iterable[Iterable[UserId]]) -> "Partition":
        parts = [frozenset(b) for b in blocks]
        if any(not b for b in parts):
            raise InvalidPartitionError("blocks must be nonempty")
        carrier = frozenset().union(*parts) if parts else frozenset()
        if sum(len(b) for b in parts) != len(carrier):
            raise InvalidPartitionError("blocks must be pairwise disjoint")
        return cls(frozenset(parts), carrier)

    @classmethod
    def singletons(cls, carrier: Iterable[UserId]) -> "Partition":
        return cls.of([u] for u in carrier)

    @classmethod
    def whole(cls, carrier: Iterable[UserId]) -> "Partition":
        return cls.of([carrier])

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[frozenset]:
        return iter(self.ordered())

    def __str__(self) -> str:
        return "{" + ", ".join("{" + ",".join(str(u) for u in b) + "}" for b in self.as_lists()) + "}"

    def ordered(self) -> list[frozenset]:
        """Blocks sorted by least element."""
        return sorted(self.blocks, key=_block_key)

    def as_lists(self) -> list[list[UserId]]:
        return [sorted_users(b) for b in self.ordered()]

    def block_of(self, user: UserId) -> frozenset:
        for block in self.blocks:
            if user in block:
                return block
        raise KeyError(user)

    @property
    def is_singletons(self) -> bool:
        return len(self.blocks) == len(self.carrier)

    def nonsingleton_blocks(self) -> list[frozenset]:
        return [b for b in self.ordered() if len(b) > 1]

    def refines(self, other: "Partition") -> bool:
        """True when every block lies inside a block of *other* (finer or equal)."""
        _check_carriers(self, other)
        return all(any(b <= c for c in other.blocks) for b in self.blocks)


def _check_carriers(p: Partition, q: Partition) -> None:
    if p.carrier != q.carrier:
        raise CarrierMismatchError(f"carriers differ: {sorted_users(p.carrier)} vs {sorted_users(q.carrier)}")


def meet(p: Partition, q: Partition) -> Partition:
    """Coarsest common refinement."""
    _check_carriers(p, q)
    return Partition.of(b & c for b in p.blocks for c in q.blocks if b & c)


def meet_all(partitions: Iterable[Partition]) -> Partition:
    result: Partition | None = None
    for partition in partitions:
        result = partition if result is None else meet(result, partition)
    if result is None:
        raise ValueError("meet of no partitions")
    return result


def is_strictly_finer(p: Partition, q: Partition) -> bool:
    return p.refines(q) and p != q


def restrict_blocks(subset: Iterable[UserId], partition: Partition) -> list[frozenset]:
    """Blocks of *partition* inside *subset*, which must be a union of blocks."""
    subset = frozenset(subset)
    inside = [b for b in partition.ordered() if b <= subset]
    covered = frozenset().union(*inside) if inside else frozenset()
    if covered != subset:
        raise NotAUnionOfBlocksError(
            f"{sorted_users(subset)} is not a union of blocks of {partition.as_lists()}"
        )
    return inside


def enumerate_partitions(carrier: Iterable[UserId], limit: int | None = None) -> Iterator[Partition]:
    """Every partition exactly once, in restricted-growth-string order ({X} first)."""
    items = sorted_users(carrier)
    cap = get_settings().exhaustive_limit if limit is None else limit
    if len(items) > cap:
        raise LimitExceededError(f"|X|={len(items)} exceeds exhaustive limit {cap}")
    if not items:
        yield Partition.of([])
        return

    n = len(items)
    labels = [0] * n

    def emit() -> Partition:
        groups: dict[int, list[UserId]] = {}
        for item, label in zip(items, labels):
            groups.setdefault(label, []).append(item)
        return Partition.of(groups.values())

    def grow(pos: int, top: int) -> Iterator[Partition]:
        if pos == n:
            yield emit()
            return
        for label in range(top + 2):
            labels[pos] = label
            yield from grow(pos + 1, max(top, label))

    labels[0] = 0
    yield from grow(1, 0)


def bell_number(n: int) -> int:
    """Bell numbers by the triangle recurrence."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[0]
