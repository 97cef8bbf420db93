import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from coso.common.errors import LimitExceededError  # noqa: E402
from coso.partitions.service import (  # noqa: E402
    CarrierMismatchError,
    InvalidPartitionError,
    NotAUnionOfBlocksError,
    Partition,
    bell_number,
    enumerate_partitions,
    is_strictly_finer,
    meet,
    meet_all,
    restrict_blocks,
)


def test_bell_numbers():
    assert [bell_number(n) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_enumeration_is_complete_and_unique(n):
    parts = list(enumerate_partitions(range(1, n + 1)))
    assert len(parts) == bell_number(n)
    assert len(set(parts)) == len(parts)
    assert parts[0] == Partition.whole(range(1, n + 1))


def test_enumeration_respects_limit():
    with pytest.raises(LimitExceededError):
        list(enumerate_partitions(range(5), limit=4))


def test_meet_is_coarsest_common_refinement():
    p = Partition.of([[1, 4, 5], [2, 3]])
    q = Partition.of([[1, 2], [3, 4, 5]])
    assert meet(p, q) == Partition.of([[1], [2], [3], [4, 5]])
    assert meet_all([p, q, Partition.whole([1, 2, 3, 4, 5])]) == meet(p, q)


def test_meet_requires_same_carrier():
    with pytest.raises(CarrierMismatchError):
        meet(Partition.of([[1, 2]]), Partition.of([[1], [3]]))


def test_refinement_order():
    fine = Partition.of([[4, 5], [1], [2], [3]])
    coarse = Partition.of([[1, 4, 5], [2], [3]])
    assert fine.refines(coarse)
    assert is_strictly_finer(fine, coarse)
    assert not coarse.refines(fine)
    assert not is_strictly_finer(fine, fine)


def test_restrict_blocks():
    partition = Partition.of([[4, 5], [1], [2], [3]])
    assert restrict_blocks({1, 4, 5}, partition) == [frozenset({1}), frozenset({4, 5})]
    with pytest.raises(NotAUnionOfBlocksError):
        restrict_blocks({1, 4}, partition)


def test_invalid_blocks():
    with pytest.raises(InvalidPartitionError):
        Partition.of([[1, 2], [2, 3]])
    with pytest.raises(InvalidPartitionError):
        Partition.of([[1], []])


def test_rendering_and_block_lookup():
    partition = Partition.of([[5, 4], [3], [1]])
    assert partition.as_lists() == [[1], [3], [4, 5]]
    assert str(partition) == "{{1}, {3}, {4,5}}"
    assert partition.block_of(5) == frozenset({4, 5})
    assert partition.nonsingleton_blocks() == [frozenset({4, 5})]
    assert not partition.is_singletons


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_meet_laws_on_every_pair(n):
    carrier = range(1, n + 1)
    parts = list(enumerate_partitions(carrier))
    bottom, top = Partition.singletons(carrier), Partition.whole(carrier)
    for p in parts:
        assert meet(p, p) == p
        assert bottom.refines(p) and p.refines(top)
        assert meet(p, bottom) == bottom
        assert meet(p, top) == p
        for q in parts:
            m = meet(p, q)
            assert m == meet(q, p)
            assert m.refines(p) and m.refines(q)
            assert (m == p) == p.refines(q)


@pytest.mark.parametrize("n", [3, 4])
def test_meet_is_associative_and_greatest(n):
    parts = list(enumerate_partitions(range(1, n + 1)))
    for p in parts:
        for q in parts:
            pq = meet(p, q)
            for r in parts:
                assert meet(pq, r) == meet(p, meet(q, r))
                if r.refines(p) and r.refines(q):
                    assert r.refines(pq)
