"""Process-wide memo table for pure, expensive evaluations (entropy ranks).

Entries are grouped by namespace so one source's values can be dropped at once
when that source is garbage collected. Values never go stale: everything stored
here is a pure function of its key.
"""

import threading
from typing import Any, Dict, Hashable, Optional


_memo: Dict[str, Dict[Hashable, Any]] = {}
_lock = threading.Lock()


def get_memo(namespace: str, key: Hashable) -> Optional[Any]:
    """Return the memoized value, or None if absent."""
    with _lock:
        bucket = _memo.get(namespace)
        if bucket is None:
            return None
        return bucket.get(key)


def set_memo(namespace: str, key: Hashable, value: Any) -> None:
    """Store *value* under *key* in *namespace*."""
    with _lock:
        _memo.setdefault(namespace, {})[key] = value


def clear_memo(namespace: Optional[str] = None) -> None:
    """Drop one namespace (or everything if None)."""
    with _lock:
        if namespace is None:
            _memo.clear()
        else:
            _memo.pop(namespace, None)


def memo_size(namespace: Optional[str] = None) -> int:
    """Return the number of stored entries."""
    with _lock:
        if namespace is not None:
            return len(_memo.get(namespace, {}))
        return sum(len(bucket) for bucket in _memo.values())
