"""Exact piecewise-linear functions of the sum-rate estimate α.

Interval convention everywhere in this module: the first piece is closed
[a0, a1], every later piece is (a_j, a_{j+1}]. A first piece may be the single
point [a0, a0] when the value at a0 differs from the limit from the right.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Generic, Hashable, Iterable, Iterator, Sequence, TypeVar

from coso.common.errors import CosoError
from coso.common.rationals import parse_rational

W = TypeVar("W")
V = TypeVar("V")

Number = Fraction | int | str


class DomainMismatchError(CosoError, ValueError):
    """Raised when two functions do not share a domain."""


class OutsideDomainError(CosoError, ValueError):
    """Raised when α lies outside a function's domain."""


class EmptyCandidatesError(CosoError, ValueError):
    """Raised when a lower envelope is requested over no candidates."""


class TieResolutionError(CosoError):
    """Raised when a breakpoint's resolved witness disagrees with the segment ending there."""


def _q(value: Number) -> Fraction:
    return parse_rational(value)


@dataclass(frozen=True)
class Affine:
    slope: Fraction
    intercept: Fraction

    def at(self, alpha: Fraction) -> Fraction:
        return self.slope * alpha + self.intercept

    def __add__(self, other: "Affine") -> "Affine":
        return Affine(self.slope + other.slope, self.intercept + other.intercept)

    def __sub__(self, other: "Affine") -> "Affine":
        return Affine(self.slope - other.slope, self.intercept - other.intercept)

    def __neg__(self) -> "Affine":
        return Affine(-self.slope, -self.intercept)

    def __str__(self) -> str:
        return render_affine(self)


ZERO = Affine(Fraction(0), Fraction(0))


def line(slope: Number, intercept: Number) -> Affine:
    return Affine(_q(slope), _q(intercept))


def render_affine(f: Affine, var: str = "α") -> str:
    """Display such as "α−2", "14−2α", "1"."""
    slope, intercept = f.slope, f.intercept

    def num(x: Fraction) -> str:
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

    if slope == 0:
        return num(intercept)
    if slope == 1:
        term = var
    elif slope == -1:
        term = f"−{var}"
    else:
        term = f"{'−' if slope < 0 else ''}{num(abs(slope))}{var}"
    if intercept == 0:
        return term
    if slope < 0:
        return f"{num(intercept)}{term}"
    sign = "+" if intercept > 0 else "−"
    return f"{term}{sign}{num(abs(intercept))}"


@dataclass(frozen=True)
class PwlFn:
    """Piecewise-affine function; breakpoints[j], breakpoints[j+1] bound pieces[j]."""

    breakpoints: tuple[Fraction, ...]
    pieces: tuple[Affine, ...]

    def __post_init__(self) -> None:
        bps, pieces = self.breakpoints, self.pieces
        if len(bps) != len(pieces) + 1 or not pieces:
            raise ValueError("a PwlFn needs k pieces and k+1 breakpoints, k >= 1")
        for j in range(1, len(bps) - 1):
            if not bps[j] < bps[j + 1]:
                raise ValueError(f"breakpoints must increase: {bps}")
        if bps[0] > bps[1]:
            raise ValueError(f"bad leading breakpoints: {bps}")

    @property
    def domain(self) -> tuple[Fraction, Fraction]:
        return self.breakpoints[0], self.breakpoints[-1]

    @property
    def has_point_head(self) -> bool:
        return len(self.pieces) > 1 and self.breakpoints[0] == self.breakpoints[1]

    def piece_index(self, alpha: Fraction) -> int:
        lo, hi = self.domain
        if alpha < lo or alpha > hi:
            raise OutsideDomainError(f"α={alpha} outside [{lo}, {hi}]")
        return bisect.bisect_left(self.breakpoints, alpha, 1, len(self.breakpoints)) - 1

    def affine_at(self, alpha: Fraction) -> Affine:
        return self.pieces[self.piece_index(alpha)]

    def __call__(self, alpha: Number) -> Fraction:
        alpha = _q(alpha)
        return self.affine_at(alpha).at(alpha)

    def intervals(self) -> Iterator[tuple[Fraction, Fraction, Affine]]:
        for j, piece in enumerate(self.pieces):
            yield self.breakpoints[j], self.breakpoints[j + 1], piece

    def is_continuous(self) -> bool:
        for j in range(1, len(self.pieces)):
            at = self.breakpoints[j]
            if self.pieces[j - 1].at(at) != self.pieces[j].at(at):
                return False
        return True

    def __add__(self, other: "PwlFn") -> "PwlFn":
        return add(self, other)

    def __sub__(self, other: "PwlFn") -> "PwlFn":
        return subtract(self, other)


def canonical(breakpoints: Sequence[Fraction], pieces: Sequence[Affine]) -> PwlFn:
    """Merge equal neighbours and drop a point head that agrees with its successor."""
    bps = list(breakpoints)
    parts = list(pieces)
    if len(parts) > 1 and bps[0] == bps[1]:
        if parts[0].at(bps[0]) == parts[1].at(bps[0]):
            del bps[1]
            del parts[0]
        else:
            parts[0] = Affine(Fraction(0), parts[0].at(bps[0]))
    out_bps = [bps[0], bps[1]]
    out_parts = [parts[0]]
    for j in range(1, len(parts)):
        head_point = len(out_parts) == 1 and out_bps[0] == out_bps[1]
        if parts[j] == out_parts[-1] and not head_point:
            out_bps[-1] = bps[j + 1]
        else:
            out_parts.append(parts[j])
            out_bps.append(bps[j + 1])
    return PwlFn(tuple(out_bps), tuple(out_parts))


def affine(slope: Number, intercept: Number, domain: tuple[Number, Number]) -> PwlFn:
    lo, hi = _q(domain[0]), _q(domain[1])
    if lo > hi:
        raise ValueError(f"empty domain [{lo}, {hi}]")
    return PwlFn((lo, hi), (line(slope, intercept),))


def constant(value: Number, domain: tuple[Number, Number]) -> PwlFn:
    return affine(0, value, domain)


def _check_domains(fns: Sequence[PwlFn]) -> tuple[Fraction, Fraction]:
    domain = fns[0].domain
    for f in fns[1:]:
        if f.domain != domain:
            raise DomainMismatchError(f"domains differ: {domain} vs {f.domain}")
    return domain


def _edges(fns: Sequence[PwlFn]) -> tuple[bool, list[Fraction]]:
    lo, hi = fns[0].domain
    cuts = {b for f in fns for b in f.breakpoints[1:-1] if lo < b < hi}
    head = any(f.has_point_head for f in fns)
    return head, [lo, *sorted(cuts), hi]


def combine(fns: Sequence[PwlFn], op: Callable[[list[Affine]], Affine]) -> PwlFn:
    """Apply an affine-preserving pointwise operation to functions on a shared domain."""
    if not fns:
        raise EmptyCandidatesError("nothing to combine")
    lo, hi = _check_domains(fns)
    if lo == hi:
        return PwlFn((lo, hi), (op([f.pieces[-1] for f in fns]),))
    head, edges = _edges(fns)
    bps: list[Fraction] = [lo]
    pieces: list[Affine] = []
    if head:
        value = op([Affine(Fraction(0), f(lo)) for f in fns])
        pieces.append(value)
        bps.append(lo)
    for a, b in zip(edges, edges[1:]):
        mid = (a + b) / 2
        pieces.append(op([f.affine_at(mid) for f in fns]))
        bps.append(b)
    return canonical(bps, pieces)


def add(f: PwlFn, g: PwlFn) -> PwlFn:
    return combine([f, g], lambda parts: parts[0] + parts[1])


def subtract(f: PwlFn, g: PwlFn) -> PwlFn:
    return combine([f, g], lambda parts: parts[0] - parts[1])


def total(fns: Sequence[PwlFn]) -> PwlFn:
    def op(parts: list[Affine]) -> Affine:
        acc = ZERO
        for part in parts:
            acc = acc + part
        return acc

    return combine(fns, op)


def evaluate(f: PwlFn, alpha: Number) -> Fraction:
    return f(alpha)


@dataclass(frozen=True)
class EnvelopePiece(Generic[W]):
    """Either an open interval (lo < hi) or a single point (lo == hi) with its minimizers."""

    lo: Fraction
    hi: Fraction
    witnesses: frozenset

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi


@dataclass(frozen=True)
class SegmentedValue(Generic[V]):
    """Values attached to α-segments: [a0,a1], (a1,a2], ..."""

    breakpoints: tuple[Fraction, ...]
    values: tuple

    def __post_init__(self) -> None:
        if len(self.breakpoints) != len(self.values) + 1 or not self.values:
            raise ValueError("segments need k values and k+1 breakpoints")

    @property
    def domain(self) -> tuple[Fraction, Fraction]:
        return self.breakpoints[0], self.breakpoints[-1]

    def index(self, alpha: Fraction) -> int:
        lo, hi = self.domain
        if alpha < lo or alpha > hi:
            raise OutsideDomainError(f"α={alpha} outside [{lo}, {hi}]")
        return bisect.bisect_left(self.breakpoints, alpha, 1, len(self.breakpoints)) - 1

    def at(self, alpha: Number) -> V:
        return self.values[self.index(_q(alpha))]

    def segments(self) -> Iterator[tuple[Fraction, Fraction, V]]:
        for j, value in enumerate(self.values):
            yield self.breakpoints[j], self.breakpoints[j + 1], value

    def interior_breakpoints(self) -> list[Fraction]:
        """Right ends of every segment but the last."""
        return list(self.breakpoints[1:-1])

    @classmethod
    def from_segments(cls, segments: Iterable[tuple[Fraction, Fraction, V]]) -> "SegmentedValue[V]":
        bps: list[Fraction] = []
        values: list = []
        for lo, hi, value in segments:
            if not bps:
                bps.extend([lo, hi])
                values.append(value)
                continue
            if values[-1] == value:
                bps[-1] = hi
            else:
                bps.append(hi)
                values.append(value)
        return cls(tuple(bps), tuple(values))


def _walk(
    lo: Fraction, hi: Fraction, lines: Sequence[tuple[Hashable, Affine]]
) -> list[tuple[Fraction, Fraction, frozenset, Affine]]:
    """Lower envelope of affine functions on the open interval (lo, hi).

    Returns (start, end, witnesses, line) runs plus, between runs, the crossing
    points as zero-length runs.
    """
    runs: list[tuple[Fraction, Fraction, frozenset, Affine]] = []

    def best_from(x: Fraction) -> Affine:
        values = [(f.at(x), f) for _, f in lines]
        low = min(v for v, _ in values)
        return min((f for v, f in values if v == low), key=lambda f: (f.slope, f.intercept))

    def group(f: Affine) -> frozenset:
        return frozenset(w for w, g in lines if g == f)

    x = lo
    current = best_from(lo)
    while True:
        nxt: Fraction | None = None
        for _, f in lines:
            if f.slope < current.slope:
                cross = (f.intercept - current.intercept) / (current.slope - f.slope)
                if x < cross < hi and (nxt is None or cross < nxt):
                    nxt = cross
        if nxt is None:
            runs.append((x, hi, group(current), current))
            return runs
        runs.append((x, nxt, group(current), current))
        low = current.at(nxt)
        runs.append((nxt, nxt, frozenset(w for w, f in lines if f.at(nxt) == low), current))
        x = nxt
        current = best_from(nxt)


def lower_envelope_with_witnesses(
    candidates: Sequence[tuple[Hashable, PwlFn]],
) -> tuple[PwlFn, list[EnvelopePiece]]:
    """Pointwise minimum of the candidates plus every minimizer on every piece.

    The piece list alternates point, open interval, point, ..., point; tie points
    carry the full witness set and are left for the caller to resolve.
    """
    if not candidates:
        raise EmptyCandidatesError("lower envelope of an empty candidate list")
    fns = [f for _, f in candidates]
    lo, hi = _check_domains(fns)

    def point(x: Fraction) -> EnvelopePiece:
        values = [(w, f(x)) for w, f in candidates]
        low = min(v for _, v in values)
        return EnvelopePiece(x, x, frozenset(w for w, v in values if v == low))

    if lo == hi:
        return PwlFn((lo, hi), (Affine(Fraction(0), min(f(lo) for f in fns)),)), [point(lo)]

    _, edges = _edges(fns)
    raw: list[EnvelopePiece] = [point(lo)]
    env_bps: list[Fraction] = [lo]
    env_pieces: list[Affine] = []
    for a, b in zip(edges, edges[1:]):
        mid = (a + b) / 2
        lines = [(w, f.affine_at(mid)) for w, f in candidates]
        for start, end, witnesses, fn in _walk(a, b, lines):
            if start == end:
                raw.append(EnvelopePiece(start, end, witnesses))
                continue
            raw.append(EnvelopePiece(start, end, witnesses))
            env_bps.append(end)
            env_pieces.append(fn)
        raw.append(point(b))

    head_value = min(f(lo) for f in fns)
    if env_pieces[0].at(lo) != head_value:
        env_bps.insert(0, lo)
        env_pieces.insert(0, Affine(Fraction(0), head_value))
    envelope = canonical(env_bps, env_pieces)
    return envelope, _merge_pieces(raw)


def _merge_pieces(raw: list[EnvelopePiece]) -> list[EnvelopePiece]:
    merged: list[EnvelopePiece] = [raw[0]]
    j = 1
    while j < len(raw):
        opened, closing = raw[j], raw[j + 1]
        last_open = merged[-2] if len(merged) >= 2 else None
        if (
            last_open is not None
            and last_open.witnesses == merged[-1].witnesses == opened.witnesses
        ):
            merged[-2] = EnvelopePiece(last_open.lo, opened.hi, opened.witnesses)
            merged[-1] = closing
        else:
            merged.extend([opened, closing])
        j += 2
    return merged


def resolve_witnesses(
    pieces: Sequence[EnvelopePiece],
    choose: Callable[[frozenset], V],
    *,
    include_head: bool = True,
) -> SegmentedValue[V]:
    """Apply a tie-break to an envelope's witness sets and attach points to the left.

    A breakpoint belongs to the segment ending there, so its resolved value must
    agree with that segment's. The domain's left end becomes a one-point segment
    only when its resolved value differs from the first open piece and
    include_head is set.
    """
    if len(pieces) == 1:
        only = pieces[0]
        return SegmentedValue((only.lo, only.hi), (choose(only.witnesses),))
    segments: list[tuple[Fraction, Fraction, V]] = []
    head = pieces[0]
    head_value = choose(head.witnesses)
    first_value = choose(pieces[1].witnesses)
    if include_head and head_value != first_value:
        segments.append((head.lo, head.lo, head_value))
    for k in range(1, len(pieces), 2):
        opened, closing = pieces[k], pieces[k + 1]
        value = choose(opened.witnesses)
        if choose(closing.witnesses) != value:
            raise TieResolutionError(
                f"tie at α={closing.lo} resolves to a different witness than ({opened.lo}, {opened.hi})"
            )
        segments.append((opened.lo, opened.hi, value))
    return SegmentedValue.from_segments(segments)
