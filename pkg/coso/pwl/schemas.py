from typing import List, Tuple

from coso.common.schemas import CosoModel, Rational
from coso.pwl.service import Affine, PwlFn, canonical


class PwlPiece(CosoModel):
    interval: Tuple[Rational, Rational]
    slope: Rational
    intercept: Rational


def dump_pwl(f: PwlFn) -> List[PwlPiece]:
    """Debug serialization: one entry per piece."""
    return [
        PwlPiece(interval=(lo, hi), slope=piece.slope, intercept=piece.intercept)
        for lo, hi, piece in f.intervals()
    ]


def load_pwl(pieces: List[PwlPiece]) -> PwlFn:
    bps = [pieces[0].interval[0]] + [p.interval[1] for p in pieces]
    return canonical(bps, [Affine(p.slope, p.intercept) for p in pieces])
