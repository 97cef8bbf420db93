"""Shared builders for the test suite: the five-user worked example and seeded random instances."""

import random
import sys
from fractions import Fraction
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from coso.entropy.service import EntropyOracle, bits_oracle, table_oracle  # noqa: E402

DATA_DIR = PROJECT_ROOT / "data"

EXAMPLE1_BITS = {
    1: ["b", "c", "d", "h", "i"],
    2: ["e", "f", "h", "i"],
    3: ["b", "c", "e", "j"],
    4: ["a", "b", "c", "d", "f", "g", "i", "j"],
    5: ["a", "b", "c", "f", "i", "j"],
}

ORDER_42531 = (4, 5, 2, 3, 1)
ORDER_45123 = (4, 5, 1, 2, 3)
ORDER_51423 = (5, 1, 4, 2, 3)

EXAMPLE1_ACO_COMPLIMENTARY = {
    frozenset({4, 5}),
    frozenset({1, 4}),
    frozenset({1, 4, 5}),
    frozenset({1, 2, 3, 4}),
}

EXAMPLE1_NCO_COMPLIMENTARY = {
    frozenset(s)
    for s in [
        {1, 4}, {1, 5}, {3, 4}, {3, 5}, {4, 5},
        {1, 2, 4}, {1, 2, 5}, {1, 3, 4}, {1, 3, 5}, {1, 4, 5}, {2, 3, 4}, {2, 3, 5}, {3, 4, 5},
        {1, 2, 3, 4}, {1, 2, 3, 5}, {1, 2, 4, 5}, {1, 3, 4, 5}, {2, 3, 4, 5},
    ]
}


def q(value) -> Fraction:
    return Fraction(value)


def example1() -> EntropyOracle:
    return bits_oracle(EXAMPLE1_BITS, name="example1")


def independent(n: int = 3, bits_each: int = 1) -> EntropyOracle:
    """Users with disjoint holdings."""
    return bits_oracle({u: [f"x{u}_{k}" for k in range(bits_each)] for u in range(1, n + 1)})


def identical(n: int = 3) -> EntropyOracle:
    return bits_oracle({u: ["a", "b"] for u in range(1, n + 1)})


def rational_table() -> EntropyOracle:
    """Three users with a half-bit entropy: critical points 2 and 5/2, so R_NCO = 3 > H(V)."""
    half = Fraction(1, 2)
    return table_oracle(
        [1, 2, 3],
        {
            frozenset({1}): 1,
            frozenset({2}): 1,
            frozenset({3}): 1,
            frozenset({1, 2}): 1 + half,
            frozenset({1, 3}): 2,
            frozenset({2, 3}): 2,
            frozenset({1, 2, 3}): 2 + half,
        },
    )


def random_bits(rng: random.Random, min_users: int = 3, max_users: int = 6, labels: int = 7) -> EntropyOracle:
    """A bit-union instance; every user holds at least one label."""
    n = rng.randint(min_users, max_users)
    pool = [f"w{k}" for k in range(labels)]
    holdings = {u: rng.sample(pool, rng.randint(1, labels)) for u in range(1, n + 1)}
    return bits_oracle(holdings)


def random_instances(count: int, seed: int, **kwargs) -> list[EntropyOracle]:
    rng = random.Random(seed)
    return [random_bits(rng, **kwargs) for _ in range(count)]
