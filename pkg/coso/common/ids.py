"""User id normalization and deterministic ordering."""

from __future__ import annotations

from typing import Iterable, Union

from coso.common.errors import CosoError

UserId = Union[int, str]


class InvalidUserIdError(CosoError, ValueError):
    """Raised when a user id is empty or of an unsupported type."""


def normalize_user_id(raw: object) -> UserId:
    """Integers and digit strings become ints; other strings are kept stripped."""
    if isinstance(raw, bool):
        raise InvalidUserIdError(f"Invalid user id: {raw!r}")
    if isinstance(raw, int):
        return raw
    if isinstance(raw, str):
        text = raw.strip().strip('"').strip("'")
        if not text:
            raise InvalidUserIdError("Empty user id")
        if text.lstrip("-").isdigit():
            return int(text)
        return text
    raise InvalidUserIdError(f"Invalid user id: {raw!r}")


def user_sort_key(user: UserId) -> tuple:
    if isinstance(user, int):
        return (0, user, "")
    return (1, 0, user)


def sorted_users(users: Iterable[UserId]) -> list[UserId]:
    return sorted(users, key=user_sort_key)


def subset_sort_key(subset: Iterable[UserId]) -> tuple:
    """Order subsets by size, then by their sorted members."""
    members = sorted_users(subset)
    return (len(members), [user_sort_key(u) for u in members])


def parse_subset_key(text: str) -> frozenset:
    """Read a table key such as "[1,2]", "{1, 2}", "1,2" or "[]" as a subset."""
    inner = text.strip()
    if inner[:1] in "[{(" and inner[-1:] in "]})":
        inner = inner[1:-1]
    inner = inner.strip()
    if not inner or inner == "∅":
        return frozenset()
    return frozenset(normalize_user_id(part) for part in inner.split(","))


def format_subset_key(subset: Iterable[UserId]) -> str:
    return "[" + ",".join(str(u) for u in sorted_users(subset)) + "]"


def parse_id_list(text: str) -> list[UserId]:
    """Parse a CLI list like "4,5,2,3,1"."""
    parts = [part for part in text.split(",") if part.strip()]
    if not parts:
        raise InvalidUserIdError("Empty id list")
    return [normalize_user_id(part) for part in parts]
