"""Bounded search over the directed subtyping rules.

Four rewrites turn a type into a more permissive one: adjacent inputs
on distinct ports commute, adjacent outputs on distinct ports commute,
an output may be dropped, and an output may be postponed past an input
(the converse would let a component demand its input early, which is
not sound).  :func:`subtype` searches breadth-first for a rewrite
sequence from one type to the other, up to renaming of bound
variables.  A miss within the bound is reported as ``NoWithinBound``
— inconclusive, not a refutation — unless the whole reachable set was
exhausted first, which still prints the same verdict but happens to be
definitive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .localtypes import (
    LocalType,
    TBranch,
    TChoice,
    TInp,
    TOut,
    TRec,
    alpha,
    contractive,
)


@dataclass(frozen=True)
class SubtypeResult:
    verdict: str  # "Yes" | "NoWithinBound"
    steps: tuple[str, ...] = ()
    explored: int = 0
    bound: int = 0

    @property
    def holds(self) -> bool:
        return self.verdict == "Yes"


def _root_rewrites(t: LocalType) -> Iterator[tuple[str, LocalType]]:
    if isinstance(t, TInp) and isinstance(t.cont, TInp) and t.port != t.cont.port:
        inner = t.cont
        yield "SIShuffle", TInp(inner.port, inner.btype, TInp(t.port, t.btype, inner.cont))
    if isinstance(t, TOut):
        cont = t.cont
        if isinstance(cont, TOut) and t.port != cont.port:
            yield "SOShuffle", TOut(cont.port, cont.btype, TOut(t.port, t.btype, cont.cont))
        yield "SODiscard", cont
        if isinstance(cont, TInp):
            yield "SIBefore", TInp(cont.port, cont.btype, TOut(t.port, t.btype, cont.cont))


def _rewrites(t: LocalType) -> Iterator[tuple[str, LocalType]]:
    """One rewrite step applied at any position of ``t``."""
    yield from _root_rewrites(t)
    match t:
        case TOut(port, btype, cont):
            for rule, c in _rewrites(cont):
                yield rule, TOut(port, btype, c)
        case TInp(port, btype, cont):
            for rule, c in _rewrites(cont):
                yield rule, TInp(port, btype, c)
        case TChoice(port, left, right):
            for rule, sub in _rewrites(left):
                yield rule, TChoice(port, sub, right)
            for rule, sub in _rewrites(right):
                yield rule, TChoice(port, left, sub)
        case TBranch(port, left, right):
            for rule, sub in _rewrites(left):
                yield rule, TBranch(port, sub, right)
            for rule, sub in _rewrites(right):
                yield rule, TBranch(port, left, sub)
        case TRec(var, body):
            for rule, sub in _rewrites(body):
                yield rule, TRec(var, sub)


def subtype(t1: LocalType, t2: LocalType, bound: int = 8) -> SubtypeResult:
    """Is ``t1`` a subtype of ``t2``, within ``bound`` rewrites?"""
    start, goal = alpha(t1), alpha(t2)
    if start == goal:
        return SubtypeResult("Yes", (), 1, bound)
    seen = {start}
    frontier: list[tuple[LocalType, tuple[str, ...]]] = [(start, ())]
    explored = 1
    for _ in range(bound):
        nxt: list[tuple[LocalType, tuple[str, ...]]] = []
        for t, path in frontier:
            for rule, rewritten in _rewrites(t):
                u = alpha(rewritten)
                if u in seen or not contractive(u):
                    continue
                if u == goal:
                    return SubtypeResult("Yes", path + (rule,), explored + 1, bound)
                seen.add(u)
                explored += 1
                nxt.append((u, path + (rule,)))
        frontier = nxt
        if not frontier:
            break
    return SubtypeResult("NoWithinBound", (), explored, bound)
