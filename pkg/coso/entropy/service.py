"""Entropy oracles over a finite ground set of users.

Three source models are supported: an explicit rational table, the bit-union
model (each label is an independent uniform bit) and the linear model (each
user observes rows of a matrix over GF(q); entropy is the rank of the stacked
rows in units of log q). Oracles are immutable; evaluations are memoized in the
shared memo table so concurrent readers see identical values.
"""

from __future__ import annotations

import itertools
import json
import logging
import weakref
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

import galois
import numpy as np
from pydantic import ValidationError

from coso.common.cache import clear_memo, get_memo, set_memo
from coso.common.config import get_settings
from coso.common.errors import CosoError, LimitExceededError
from coso.common.ids import (
    UserId,
    format_subset_key,
    normalize_user_id,
    parse_subset_key,
    sorted_users,
)
from coso.entropy.schemas import InstanceDocument, OracleReport, OracleViolation, SourceModel

logger = logging.getLogger(__name__)

_namespace_ids = itertools.count(1)


class InvalidInstanceError(CosoError, ValueError):
    """Raised when an instance document is malformed or incomplete."""


class SubsetError(CosoError, ValueError):
    """Raised when a set is not a subset of the oracle's ground set."""


class _Source:
    """Shared plumbing: a memo namespace released with the source."""

    model: SourceModel

    def __init__(self) -> None:
        self.namespace = f"entropy:{next(_namespace_ids)}"
        weakref.finalize(self, clear_memo, self.namespace)

    def rank(self, subset: frozenset) -> Fraction:
        raise NotImplementedError


class TableSource(_Source):
    model = SourceModel.TABLE

    def __init__(self, table: Mapping[frozenset, Fraction]) -> None:
        super().__init__()
        self.table = dict(table)

    def rank(self, subset: frozenset) -> Fraction:
        return self.table[subset]


class BitsSource(_Source):
    model = SourceModel.BITS

    def __init__(self, holdings: Mapping[UserId, Iterable[str]]) -> None:
        super().__init__()
        self.holdings = {user: frozenset(labels) for user, labels in holdings.items()}
        self.labels = sorted(set().union(*self.holdings.values())) if self.holdings else []

    def rank(self, subset: frozenset) -> Fraction:
        covered: set[str] = set()
        for user in subset:
            covered |= self.holdings[user]
        return Fraction(len(covered))


class LinearSource(_Source):
    model = SourceModel.LINEAR

    def __init__(self, matrices: Mapping[UserId, np.ndarray], field: int) -> None:
        super().__init__()
        try:
            self.gf = galois.GF(field)
        except (ValueError, TypeError) as exc:
            raise InvalidInstanceError(f"field must be a prime power, got {field!r}") from exc
        self.field = field
        self.matrices = {user: np.asarray(m, dtype=np.int64) for user, m in matrices.items()}
        widths = {m.shape[1] for m in self.matrices.values() if m.size}
        if len(widths) > 1:
            raise InvalidInstanceError(f"linear rows have inconsistent widths {sorted(widths)}")
        self.width = widths.pop() if widths else 0
        for user, matrix in self.matrices.items():
            if matrix.size and (matrix.min() < 0 or matrix.max() >= field):
                raise InvalidInstanceError(f"user {user}: entries must lie in [0, {field})")

    def stacked(self, subset: Iterable[UserId]) -> np.ndarray:
        blocks = [self.matrices[u] for u in sorted_users(subset) if self.matrices[u].size]
        if not blocks:
            return np.zeros((0, self.width), dtype=np.int64)
        return np.vstack(blocks)

    def rank(self, subset: frozenset) -> Fraction:
        rows = self.stacked(subset)
        if rows.shape[0] == 0:
            return Fraction(0)
        return Fraction(int(np.linalg.matrix_rank(self.gf(rows))))


class EntropyOracle:
    """Exact-rational entropy H over subsets of an ordered ground set."""

    def __init__(self, ground_set: Sequence[UserId], source: _Source, name: str | None = None) -> None:
        self.ground_set: tuple[UserId, ...] = tuple(ground_set)
        self.source = source
        self.name = name
        self._members = frozenset(self.ground_set)
        self._full: Fraction | None = None

    def __repr__(self) -> str:
        return f"EntropyOracle(model={self.model.value}, ground_set={list(self.ground_set)})"

    @property
    def model(self) -> SourceModel:
        return self.source.model

    @property
    def members(self) -> frozenset:
        return self._members

    def check_subset(self, subset: Iterable[UserId]) -> frozenset:
        subset = frozenset(subset)
        stray = subset - self._members
        if stray:
            raise SubsetError(f"{sorted_users(stray)} not in ground set {list(self.ground_set)}")
        return subset

    def entropy(self, subset: Iterable[UserId]) -> Fraction:
        subset = self.check_subset(subset)
        if not subset:
            return Fraction(0)
        cached = get_memo(self.source.namespace, subset)
        if cached is not None:
            return cached
        value = self.source.rank(subset)
        set_memo(self.source.namespace, subset, value)
        return value

    @property
    def full_entropy(self) -> Fraction:
        """H(V), computed once."""
        if self._full is None:
            self._full = self.entropy(self._members)
        return self._full

    def subsets(self, min_size: int = 0) -> Iterator[frozenset]:
        """All subsets of the ground set, by size then ground-set order."""
        for size in range(min_size, len(self.ground_set) + 1):
            for combo in itertools.combinations(self.ground_set, size):
                yield frozenset(combo)

    def restrict(self, subset: Iterable[UserId]) -> "EntropyOracle":
        subset = self.check_subset(subset)
        ground = [u for u in self.ground_set if u in subset]
        return EntropyOracle(ground, self.source, name=self.name)


def entropy(oracle: EntropyOracle, subset: Iterable[UserId]) -> Fraction:
    return oracle.entropy(subset)


def conditional_entropy(oracle: EntropyOracle, subset: Iterable[UserId], given: Iterable[UserId]) -> Fraction:
    """H(C | Y) = H(C ∪ Y) − H(Y)."""
    subset = oracle.check_subset(subset)
    given = oracle.check_subset(given)
    return oracle.entropy(subset | given) - oracle.entropy(given)


def restrict(oracle: EntropyOracle, subset: Iterable[UserId]) -> EntropyOracle:
    return oracle.restrict(subset)


def _read_document(document: Any) -> InstanceDocument:
    try:
        if isinstance(document, InstanceDocument):
            return document
        if isinstance(document, Path):
            return InstanceDocument.model_validate_json(document.read_text(encoding="utf-8"))
        if isinstance(document, (str, bytes)):
            return InstanceDocument.model_validate_json(document)
        if isinstance(document, Mapping):
            return InstanceDocument.model_validate(dict(document))
    except ValidationError as exc:
        raise InvalidInstanceError(f"Malformed instance document: {exc}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInstanceError(f"Unreadable instance document: {exc}") from exc
    raise InvalidInstanceError(f"Unsupported instance document type {type(document).__name__}")


def _keyed_by_user(section: Mapping[str, Any], users: Sequence[UserId], what: str) -> dict:
    out = {}
    for raw_key, value in section.items():
        user = normalize_user_id(raw_key)
        if user not in users:
            raise InvalidInstanceError(f"{what}: unknown user {raw_key!r}")
        out[user] = value
    missing = [u for u in users if u not in out]
    if missing:
        raise InvalidInstanceError(f"{what}: no entry for users {missing}")
    return out


def _table_source(doc: InstanceDocument) -> TableSource:
    if doc.partial:
        raise InvalidInstanceError("Partial tables are not accepted; list every subset")
    users = set(doc.users)
    limit = get_settings().exhaustive_limit
    if len(users) > limit:
        raise LimitExceededError(f"table model with {len(users)} users exceeds limit {limit}")
    table: dict[frozenset, Fraction] = {}
    for raw_key, value in doc.table.items():
        try:
            subset = parse_subset_key(raw_key)
        except ValueError as exc:
            raise InvalidInstanceError(f"table key {raw_key!r} is not a subset") from exc
        if not subset <= users:
            raise InvalidInstanceError(f"table key {raw_key!r} names unknown users")
        if subset in table:
            raise InvalidInstanceError(f"table key {raw_key!r} listed twice")
        table[subset] = value
    table.setdefault(frozenset(), Fraction(0))
    missing = [
        frozenset(combo)
        for size in range(1, len(doc.users) + 1)
        for combo in itertools.combinations(doc.users, size)
        if frozenset(combo) not in table
    ]
    if missing:
        shown = ", ".join(format_subset_key(s) for s in missing[:5])
        raise InvalidInstanceError(f"table misses {len(missing)} subsets, e.g. {shown}")
    return TableSource(table)


def _linear_source(doc: InstanceDocument) -> LinearSource:
    section = dict(doc.linear)
    field = section.pop("field", get_settings().default_field)
    if isinstance(field, bool) or not isinstance(field, int):
        raise InvalidInstanceError(f"linear field must be an integer, got {field!r}")
    rows = _keyed_by_user(section, doc.users, "linear")
    matrices = {}
    for user, matrix in rows.items():
        if not isinstance(matrix, list) or any(not isinstance(r, list) for r in matrix):
            raise InvalidInstanceError(f"linear: user {user} must map to a list of rows")
        if any(isinstance(x, bool) or not isinstance(x, int) for r in matrix for x in r):
            raise InvalidInstanceError(f"linear: user {user} rows must hold integers")
        width = len(matrix[0]) if matrix else 0
        matrices[user] = np.array(matrix, dtype=np.int64).reshape(len(matrix), width)
    return LinearSource(matrices, field)


def load_instance(document: Any) -> EntropyOracle:
    """Build an oracle from instance text, a parsed mapping, or a path."""
    doc = _read_document(document)
    if len(doc.users) < 2:
        raise InvalidInstanceError("At least two users are required")
    if doc.model is SourceModel.TABLE:
        source = _table_source(doc)
    elif doc.model is SourceModel.BITS:
        source = BitsSource(_keyed_by_user(doc.bits, doc.users, "bits"))
    else:
        source = _linear_source(doc)
    oracle = EntropyOracle(doc.users, source, name=doc.name)
    logger.info("Loaded %s instance with %d users, H(V)=%s", doc.model.value, len(doc.users), oracle.full_entropy)
    return oracle


def load_instance_file(path: str | Path) -> EntropyOracle:
    return load_instance(Path(path))


def bits_oracle(holdings: Mapping[UserId, Iterable[str]], name: str | None = None) -> EntropyOracle:
    """Convenience constructor for the bit-union model."""
    users = sorted_users(holdings)
    return EntropyOracle(users, BitsSource(holdings), name=name)


def table_oracle(users: Sequence[UserId], table: Mapping[frozenset, Fraction | int]) -> EntropyOracle:
    """Convenience constructor for a complete table (the empty set may be omitted)."""
    full = {frozenset(k): Fraction(v) for k, v in table.items()}
    full.setdefault(frozenset(), Fraction(0))
    expected = 2 ** len(users)
    if len(full) != expected:
        raise InvalidInstanceError(f"table has {len(full)} of {expected} subsets")
    return EntropyOracle(list(users), TableSource(full))


def validate_oracle(oracle: EntropyOracle) -> OracleReport:
    """Exhaustively check normalization, monotonicity and submodularity.

    Monotonicity is checked on single-element extensions and submodularity as
    diminishing returns on pairs; both are equivalent to the general statements.
    """
    limit = get_settings().exhaustive_limit
    if len(oracle.ground_set) > limit:
        raise LimitExceededError(f"|V|={len(oracle.ground_set)} exceeds exhaustive limit {limit}")

    report = OracleReport(ground_set=list(oracle.ground_set))
    users = oracle.ground_set

    def listed(*sets: Iterable[UserId]) -> list:
        return [sorted_users(s) for s in sets]

    empty = oracle.entropy(frozenset())
    if empty != 0:
        report.violations.append(OracleViolation(kind="normalization", sets=[[]], detail=f"H(∅)={empty}"))

    for subset in oracle.subsets():
        report.checked_subsets += 1
        value = oracle.entropy(subset)
        if value < 0:
            report.violations.append(
                OracleViolation(kind="normalization", sets=listed(subset), detail=f"H={value} < 0")
            )
        outside = [u for u in users if u not in subset]
        for i in outside:
            grown = subset | {i}
            if oracle.entropy(grown) < value:
                report.violations.append(
                    OracleViolation(
                        kind="monotonicity",
                        sets=listed(subset, grown),
                        detail=f"H({format_subset_key(grown)})={oracle.entropy(grown)} < {value}",
                    )
                )
        for i, j in itertools.combinations(outside, 2):
            left = oracle.entropy(subset | {i}) + oracle.entropy(subset | {j})
            right = oracle.entropy(subset | {i, j}) + value
            if left < right:
                report.violations.append(
                    OracleViolation(
                        kind="submodularity",
                        sets=listed(subset | {i}, subset | {j}, subset | {i, j}, subset),
                        detail=f"{left} < {right}",
                    )
                )
    if report.violations:
        logger.warning("Oracle check found %d violations", len(report.violations))
    return report
