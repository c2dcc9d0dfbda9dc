"""Three-valued verdicts for bounded searches.

Bounded searches stand in for quantifiers over a proper class of groups,
so every search-backed answer is True, False, or Unknown.  True and False
are sound; Unknown records the bound that was exhausted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

TRUE = "true"
FALSE = "false"
UNKNOWN = "unknown"


class InvariantError(RuntimeError):
    """An internal invariant was violated; callers should abort loudly."""


@dataclass(frozen=True)
class Verdict:
    status: str
    bound: int | None = None
    proof_backed: bool = False
    evidence: Any = None

    def __post_init__(self):
        if self.status not in (TRUE, FALSE, UNKNOWN):
            raise InvariantError(f"bad verdict status {self.status!r}")
        if self.status == UNKNOWN and self.bound is None:
            raise InvariantError("unknown verdict must carry its bound")
        if self.status != UNKNOWN and self.bound is not None:
            raise InvariantError("resolved verdict must not carry a bound")

    @property
    def is_true(self) -> bool:
        return self.status == TRUE

    @property
    def is_false(self) -> bool:
        return self.status == FALSE

    @property
    def is_unknown(self) -> bool:
        return self.status == UNKNOWN

    @property
    def resolved(self) -> bool:
        return self.status != UNKNOWN


def true(evidence: Any = None, proof_backed: bool = False) -> Verdict:
    return Verdict(TRUE, proof_backed=proof_backed, evidence=evidence)


def false(evidence: Any = None) -> Verdict:
    return Verdict(FALSE, evidence=evidence)


def unknown(bound: int) -> Verdict:
    return Verdict(UNKNOWN, bound=bound)


def negate(v: Verdict) -> Verdict:
    if v.is_true:
        return Verdict(FALSE, evidence=v.evidence)
    if v.is_false:
        return Verdict(TRUE, evidence=v.evidence)
    return v


def all_of(verdicts: Iterable[Verdict], bound: int) -> Verdict:
    """Kleene conjunction; short-circuits on the first False."""
    saw_unknown = False
    for v in verdicts:
        if v.is_false:
            return v
        if v.is_unknown:
            saw_unknown = True
    return unknown(bound) if saw_unknown else true()


def any_of(verdicts: Iterable[Verdict], bound: int) -> Verdict:
    """Kleene disjunction; short-circuits on the first True."""
    saw_unknown = False
    for v in verdicts:
        if v.is_true:
            return v
        if v.is_unknown:
            saw_unknown = True
    return unknown(bound) if saw_unknown else false()


def implies(a: Verdict, b: Verdict, bound: int) -> Verdict:
    return any_of([negate(a), b], bound)
