"""Bounded mechanical checks of the compilation and typing guarantees.

Four checks explore a component's state space up to a configured depth:

* ``check_soundness`` — every source step is matched by the compiled
  process: an internal step by exactly two internal steps to a process
  congruent to the successor's compilation, an input or output by one
  step with the same action.
* ``check_completeness`` — every internal run of the compiled process
  can be extended, within a budget, to land on the compilation of some
  internally reachable source state: the process never wanders off the
  source's state space.
* ``check_preservation`` — typing survives execution: internal steps
  keep the type, visible steps paired with a type transition step the
  type alongside.
* ``check_progress`` — a well-typed component can do everything its
  type promises (outputs up to the emitted value, inputs for every
  domain value), and a component typed ``end`` always carries its
  protocol forward.

Verdicts are ``Pass``, ``Fail`` (with a replayable counterexample
trace) or ``Inconclusive`` (a bound was hit first; never reported as
either of the other two).  All exploration is deterministic, so a
failing report replays exactly.
"""

from __future__ import annotations

import gc
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .encoder import encode_component
from .localtypes import (
    LocalType,
    TBranch,
    TChoice,
    TEnd,
    TInp,
    TOut,
    TRec,
    alpha,
    pretty_type,
    type_step,
    unfold,
)
from .parser import pretty
from .process import (
    PTau,
    canonical_key,
    plabel_action,
    pretty_proc,
    proc_transitions,
)
from .semantics import component_transitions, protocol_transitions
from .syntax import (
    INL,
    INR,
    BaseType,
    BoolV,
    Component,
    Composite,
    HoleV,
    InL,
    IntV,
    OutL,
    RoleOut,
    StrV,
    TauL,
    Value,
    contains_hole,
    instantiate,
    pretty_action,
    type_of,
)
from .typecheck import TypecheckError, TypecheckInconclusive, typecheck

DEFAULT_DOMAINS: Mapping[BaseType, tuple[Value, ...]] = {
    BaseType.INT: (IntV(0), IntV(1), IntV(42)),
    BaseType.STR: (StrV("a"), StrV("b")),
    BaseType.BOOL: (BoolV(True), BoolV(False)),
    BaseType.CHO: (INL, INR),
}


def all_domain_values(domains: Mapping[BaseType, tuple[Value, ...]]) -> tuple[Value, ...]:
    out: list[Value] = []
    for vs in domains.values():
        out.extend(vs)
    return tuple(out)


@dataclass(frozen=True)
class ExplorationConfig:
    max_depth: int = 6
    tau_budget: int = 32
    domains: Mapping[BaseType, tuple[Value, ...]] = field(
        default_factory=lambda: dict(DEFAULT_DOMAINS)
    )
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.tau_budget < 0:
            raise ValueError("tau_budget must not be negative")


@dataclass
class CheckReport:
    prop: str
    verdict: str  # "Pass" | "Fail" | "Inconclusive"
    states: int
    depth: int
    seed: int
    counterexample: Optional[list[dict]] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "Pass"

    def to_json(self) -> dict:
        out = {
            "property": self.prop,
            "verdict": self.verdict,
            "states": self.states,
            "depth": self.depth,
            "seed": self.seed,
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.detail:
            out["detail"] = self.detail
        return out


# ---------------------------------------------------------------------------
# Exploration plumbing
# ---------------------------------------------------------------------------


@contextmanager
def _gc_paused():
    """The explored states are acyclic immutable trees held live by caches;
    generational collection only rescans them, at a painful price."""
    was = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()


@dataclass
class _Node:
    state: object
    depth: int
    parent: Optional["_Node"]
    label: str  # pretty form of the action that reached this state
    rule: str


def _trace(node: _Node, show) -> list[dict]:
    entries = []
    while node is not None:
        entries.append(
            {
                "term": show(node.state),
                "label": node.label,
                "rule": node.rule or "init",
            }
        )
        node = node.parent
    entries.reverse()
    return entries


def _instantiated_steps(
    c: Component, domains: Mapping[BaseType, tuple[Value, ...]]
) -> list[tuple[object, Component, str, Optional[tuple]]]:
    """One-step transitions with symbolic input values made concrete."""
    union = all_domain_values(domains)
    out: list[tuple[object, Component, str, Optional[tuple]]] = []
    for t in component_transitions(c):
        match t.label:
            case InL(port, HoleV(btype)):
                vals = domains.get(btype, union) if btype is not None else union
                for v in vals:
                    out.append((InL(port, v), instantiate(t.target, v),
                                t.rule, t.detail))
            case _:
                out.append((t.label, t.target, t.rule, t.detail))
    return out


def _component_tau_closure(
    c: Component, bound: int
) -> tuple[list[Component], bool]:
    """Internally reachable states, in discovery order, and whether the
    bound cut the search short."""
    seen = {c}
    order = [c]
    frontier = [c]
    for _ in range(bound):
        nxt = []
        for s in frontier:
            for t in component_transitions(s):
                if isinstance(t.label, TauL) and t.target not in seen:
                    seen.add(t.target)
                    order.append(t.target)
                    nxt.append(t.target)
        frontier = nxt
        if not frontier:
            return order, False
    return order, bool(frontier)


def _show_label(lab: object) -> str:
    return "tau" if isinstance(lab, TauL) else pretty_action(lab)


# ---------------------------------------------------------------------------
# Soundness
# ---------------------------------------------------------------------------


def check_soundness(c0: Component, config: ExplorationConfig) -> CheckReport:
    """Every step of ``c0``'s bounded state space is matched by its
    compilation: internal steps by exactly two internal process steps,
    visible steps by one process step with the same action, in both
    cases landing congruent to the successor's compilation."""
    enc: dict[Component, object] = {}

    def encoded(c: Component):
        if c not in enc:
            enc[c] = encode_component(c)
        return enc[c]

    root = _Node(c0, 0, None, "", "")
    seen = {c0}
    frontier = [root]
    states = 1
    with _gc_paused():
        while frontier:
            nxt: list[_Node] = []
            for node in frontier:
                if node.depth >= config.max_depth:
                    continue
                for lab, c2, rule, det in _instantiated_steps(
                        node.state, config.domains):
                    why = _sound_step(encoded(node.state), lab,
                                      encoded(c2), det)
                    if why is not None:
                        bad = _Node(c2, node.depth + 1, node, _show_label(lab), rule)
                        return CheckReport(
                            "soundness",
                            "Fail",
                            states,
                            node.depth + 1,
                            config.seed,
                            _trace(bad, pretty),
                            why,
                        )
                    if c2 not in seen:
                        seen.add(c2)
                        states += 1
                        nxt.append(
                            _Node(c2, node.depth + 1, node, _show_label(lab), rule))
            frontier = nxt
    return CheckReport("soundness", "Pass", states, config.max_depth, config.seed)


def _sound_step(P, lab, wantP, det: Optional[tuple] = None) -> Optional[str]:
    """None if the compiled process matches the step; otherwise why not.

    Candidate targets are compared raw first — the mirrored step usually
    rebuilds the successor's compilation verbatim — and only the
    leftovers pay for canonical forms."""
    if isinstance(lab, TauL):
        # Both halves of the mirrored communication move the same value
        # as the source step, so filtering on it discards almost every
        # candidate pair cheaply.  The unfiltered sweep backs the filter
        # up before we commit to a failure.
        moved = det[4] if det is not None and len(det) == 5 else None
        if _two_tau_hit(P, wantP, moved):
            return None
        if moved is not None and _two_tau_hit(P, wantP, None):
            return None
        return "no two internal process steps reach the successor's compilation"
    cands = []
    if isinstance(lab, OutL):
        for t in proc_transitions(P):
            a = plabel_action(t.label)
            if (
                isinstance(a, OutL)
                and a.port == lab.port
                and a.value == lab.value
            ):
                if t.target == wantP:
                    return None
                cands.append(t.target)
        if _any_congruent(cands, wantP):
            return None
        return f"compiled process cannot match the output {pretty_action(lab)}"
    for t in proc_transitions(P):
        a = plabel_action(t.label)
        if not (isinstance(a, InL) and a.port == lab.port):
            continue
        if isinstance(a.value, HoleV):
            if _eq_under(t.target, lab.value, wantP):
                return None
            cands.append(instantiate(t.target, lab.value))
        elif a.value == lab.value:
            if t.target == wantP:
                return None
            cands.append(t.target)
    if _any_congruent(cands, wantP):
        return None
    return f"compiled process cannot match the input {pretty_action(lab)}"


def _any_congruent(cands, wantP) -> bool:
    if not cands:
        return False
    want = canonical_key(wantP)
    return any(canonical_key(tgt) == want for tgt in cands)


def _two_tau_hit(P, wantP, moved) -> bool:
    cands = []
    for t1 in proc_transitions(P):
        if not isinstance(t1.label, PTau):
            continue
        if moved is not None and t1.label.moved != moved:
            continue
        for t2 in proc_transitions(t1.target):
            if not isinstance(t2.label, PTau):
                continue
            if moved is not None and t2.label.moved != moved:
                continue
            if t2.target == wantP:
                return True
            cands.append(t2.target)
    return _any_congruent(cands, wantP)


def _eq_under(left, v, right) -> bool:
    """Structural equality with every hole on the left read as ``v``.

    Equivalent to ``instantiate(left, v) == right`` without building the
    instantiated tree."""
    if left is right:
        return True
    if isinstance(left, HoleV):
        return right == v
    if not contains_hole(left):
        return left == right
    if type(left) is not type(right):
        return False
    if isinstance(left, tuple):
        return len(left) == len(right) and all(
            _eq_under(a, v, b) for a, b in zip(left, right)
        )
    if hasattr(left, "__dataclass_fields__"):
        return all(
            _eq_under(getattr(left, f.name), v, getattr(right, f.name))
            for f in left.__dataclass_fields__.values()
            if f.name != "span"
        )
    return left == right


# ---------------------------------------------------------------------------
# Completeness
# ---------------------------------------------------------------------------


def check_completeness(c0: Component, config: ExplorationConfig) -> CheckReport:
    """Internal runs of the compiled process stay on course: within the
    budget, every reachable process state can continue to the
    compilation of some internally reachable source state."""
    closure_bound = config.max_depth + (config.tau_budget + 1) // 2 + 2
    with _gc_paused():
        comp_states, comp_truncated = _component_tau_closure(c0, closure_bound)
        targets = {canonical_key(encode_component(cc)) for cc in comp_states}

        P0 = encode_component(c0)
        root = _Node(P0, 0, None, "", "")
        seen = {canonical_key(P0)}
        frontier = [root]
        states = 1
        while frontier:
            nxt: list[_Node] = []
            for node in frontier:
                matched, truncated = _reaches_target(
                    node.state, targets, config.tau_budget)
                if not matched:
                    if truncated or comp_truncated:
                        return CheckReport(
                            "completeness",
                            "Inconclusive",
                            states,
                            node.depth,
                            config.seed,
                            _trace(node, pretty_proc),
                            "budget exhausted before the process state could "
                            "be matched",
                        )
                    return CheckReport(
                        "completeness",
                        "Fail",
                        states,
                        node.depth,
                        config.seed,
                        _trace(node, pretty_proc),
                        "no internal continuation reaches the compilation of any "
                        "internally reachable source state",
                    )
                if node.depth >= config.max_depth:
                    continue
                for t in proc_transitions(node.state):
                    if not isinstance(t.label, PTau):
                        continue
                    k = canonical_key(t.target)
                    if k not in seen:
                        seen.add(k)
                        states += 1
                        nxt.append(
                            _Node(t.target, node.depth + 1, node, "tau", t.rule))
            frontier = nxt
    return CheckReport("completeness", "Pass", states, config.max_depth, config.seed)


def _reaches_target(P, targets: set, budget: int) -> tuple[bool, bool]:
    """Can ``P`` reach a target canonical form by internal steps within
    the budget? Returns (matched, truncated)."""
    if canonical_key(P) in targets:
        return True, False
    seen = {canonical_key(P)}
    frontier = [P]
    for _ in range(budget):
        nxt = []
        for q in frontier:
            for t in proc_transitions(q):
                if not isinstance(t.label, PTau):
                    continue
                k = canonical_key(t.target)
                if k in targets:
                    return True, False
                if k not in seen:
                    seen.add(k)
                    nxt.append(t.target)
        frontier = nxt
        if not frontier:
            return False, False
    return False, bool(frontier)


# ---------------------------------------------------------------------------
# Preservation
# ---------------------------------------------------------------------------


def _pair_show(pair) -> str:
    c, t = pair
    return f"{pretty(c)}  :  {pretty_type(t)}"


def check_preservation(
    c0: Component, t0: LocalType, config: ExplorationConfig
) -> CheckReport:
    """Typing survives execution on the bounded state space.

    The root obligation is that ``c0`` has type ``t0`` at all; every
    internal step must then preserve the type, and every visible step
    the type can follow must lead to a component of the stepped type.
    Visible steps the type does not mention carry no obligation."""
    memo: dict[tuple, Optional[str]] = {}

    def typing_error(c: Component, t: LocalType) -> Optional[str]:
        key = (c, alpha(t))
        if key not in memo:
            try:
                typecheck(c, t)
                memo[key] = None
            except TypecheckError as e:
                memo[key] = str(e)
        return memo[key]

    try:
        with _gc_paused():
            return _preservation_bfs(c0, t0, config, typing_error)
    except TypecheckInconclusive as e:
        return CheckReport(
            "preservation", "Inconclusive", len(memo), config.max_depth,
            config.seed, None, str(e),
        )


def _preservation_bfs(c0, t0, config, typing_error) -> CheckReport:
    err = typing_error(c0, t0)
    if err is not None:
        root = _Node((c0, t0), 0, None, "", "")
        return CheckReport(
            "preservation",
            "Fail",
            1,
            0,
            config.seed,
            _trace(root, _pair_show),
            f"the component does not have the stated type: {err}",
        )

    root = _Node((c0, t0), 0, None, "", "")
    seen = {(c0, alpha(t0))}
    frontier = [root]
    states = 1
    while frontier:
        nxt: list[_Node] = []
        for node in frontier:
            c, t = node.state
            if node.depth >= config.max_depth:
                continue
            for lab, c2, rule, _det in _instantiated_steps(c, config.domains):
                if isinstance(lab, TauL):
                    t2 = t
                else:
                    t2 = type_step(t, lab)
                    if t2 is None:
                        continue
                err = typing_error(c2, t2)
                if err is not None:
                    bad = _Node((c2, t2), node.depth + 1, node, _show_label(lab), rule)
                    return CheckReport(
                        "preservation",
                        "Fail",
                        states,
                        node.depth + 1,
                        config.seed,
                        _trace(bad, _pair_show),
                        f"successor loses the type {pretty_type(t2)}: {err}",
                    )
                key = (c2, alpha(t2))
                if key not in seen:
                    seen.add(key)
                    states += 1
                    nxt.append(
                        _Node((c2, t2), node.depth + 1, node, _show_label(lab), rule)
                    )
        frontier = nxt
    return CheckReport("preservation", "Pass", states, config.max_depth, config.seed)


# ---------------------------------------------------------------------------
# Progress
# ---------------------------------------------------------------------------


def check_progress(
    c0: Component, t0: LocalType, config: ExplorationConfig
) -> CheckReport:
    """A well-typed component honours its type's offers.

    Output offers are matched up to the emitted value (the type fixes
    the sort and, for selections, at least one branch must be
    realisable); input offers must be accepted for every domain value.
    A matching component step may take internal preparation first,
    within the budget.  Components typed ``end`` are additionally
    required to keep their protocol moving: every send or receive the
    protocol offers is realised by some internal step, per label."""
    memo: dict[tuple, Optional[str]] = {}

    def typing_error(c: Component, t: LocalType) -> Optional[str]:
        key = (c, alpha(t))
        if key not in memo:
            try:
                typecheck(c, t)
                memo[key] = None
            except TypecheckError as e:
                memo[key] = str(e)
        return memo[key]

    try:
        with _gc_paused():
            return _progress_bfs(c0, t0, config, typing_error)
    except TypecheckInconclusive as e:
        return CheckReport(
            "progress", "Inconclusive", len(memo), config.max_depth,
            config.seed, None, str(e),
        )


def _progress_bfs(c0, t0, config, typing_error) -> CheckReport:
    if isinstance(c0, Composite) and isinstance(t0, TEnd):
        return _check_protocol_progress(c0, t0, config, typing_error)

    root = _Node((c0, t0), 0, None, "", "")
    seen = {(c0, alpha(t0))}
    frontier = [root]
    states = 1
    while frontier:
        nxt: list[_Node] = []
        for node in frontier:
            c, t = node.state
            if typing_error(c, t) is not None:
                continue  # premise broken; preservation's business
            result = _progress_obligations(c, t, config)
            if isinstance(result, str):
                return CheckReport(
                    "progress",
                    "Fail" if not result.startswith("~") else "Inconclusive",
                    states,
                    node.depth,
                    config.seed,
                    _trace(node, _pair_show),
                    result.lstrip("~"),
                )
            if node.depth >= config.max_depth:
                continue
            for c2, t2, lab, rule in result:
                key = (c2, alpha(t2))
                if key not in seen:
                    seen.add(key)
                    states += 1
                    nxt.append(_Node((c2, t2), node.depth + 1, node, lab, rule))
        frontier = nxt
    return CheckReport("progress", "Pass", states, config.max_depth, config.seed)


def _weak_steps(c: Component, budget: int):
    """(state, visible transitions) along the internal closure of ``c``."""
    closure, truncated = _component_tau_closure(c, budget)
    return closure, truncated


def _progress_obligations(c: Component, t: LocalType, config: ExplorationConfig):
    """Check every offer of ``t`` against ``c``'s weak transitions.

    Returns the successor pairs on success, an error string on failure
    (prefixed with ``~`` when the verdict should be Inconclusive)."""
    u = t
    while isinstance(u, TRec):
        u = unfold(u)
    if isinstance(u, TEnd):
        return []
    closure, truncated = _weak_steps(c, config.tau_budget)

    def find_output(port: str, accept) -> Optional[tuple[Component, Value]]:
        for s in closure:
            for tr in component_transitions(s):
                if (
                    isinstance(tr.label, OutL)
                    and tr.label.port == port
                    and accept(tr.label.value)
                ):
                    return tr.target, tr.label.value
        return None

    def find_input(port: str, v: Value) -> Optional[Component]:
        for s in closure:
            for tr in component_transitions(s):
                if isinstance(tr.label, InL) and tr.label.port == port:
                    if isinstance(tr.label.value, HoleV):
                        return instantiate(tr.target, v)
                    if tr.label.value == v:
                        return tr.target
        return None

    succs: list[tuple[Component, LocalType, str, str]] = []
    if isinstance(u, TOut):
        hit = find_output(u.port, lambda v: type_of(v) == u.btype)
        if hit is None:
            if truncated:
                return f"~budget exhausted searching for an output on {u.port!r}"
            return f"type offers an output on {u.port!r} the component never makes"
        c2, v = hit
        succs.append((c2, u.cont, pretty_action(OutL(u.port, v)), "out"))
    elif isinstance(u, TInp):
        for v in config.domains[u.btype]:
            c2 = find_input(u.port, v)
            if c2 is None:
                if truncated:
                    return f"~budget exhausted searching for an input on {u.port!r}"
                return (
                    f"type offers an input of {pretty_action(InL(u.port, v))} "
                    "the component cannot take"
                )
            succs.append((c2, u.cont, pretty_action(InL(u.port, v)), "in"))
    elif isinstance(u, TChoice):
        realised = False
        for v, branch in ((INL, u.left), (INR, u.right)):
            hit = find_output(u.port, lambda w, v=v: w == v)
            if hit is not None:
                realised = True
                succs.append((hit[0], branch, pretty_action(OutL(u.port, v)), "out"))
        if not realised:
            if truncated:
                return f"~budget exhausted searching for a selection on {u.port!r}"
            return f"type offers a selection on {u.port!r} the component never makes"
    elif isinstance(u, TBranch):
        for v, branch in ((INL, u.left), (INR, u.right)):
            c2 = find_input(u.port, v)
            if c2 is None:
                if truncated:
                    return f"~budget exhausted searching for a branch input on {u.port!r}"
                return (
                    f"type offers the branch input {pretty_action(InL(u.port, v))} "
                    "the component cannot take"
                )
            succs.append((c2, branch, pretty_action(InL(u.port, v)), "in"))
    return succs


def _check_protocol_progress(
    c0: Composite, t0: LocalType, config: ExplorationConfig, typing_error
) -> CheckReport:
    """For components with a spent interface, the protocol itself is the
    promise: at every internally reachable state, each send or receive
    the protocol offers (per label) is realised by an internal step."""
    err = typing_error(c0, t0)
    if err is not None:
        root = _Node(c0, 0, None, "", "")
        return CheckReport(
            "progress",
            "Fail",
            1,
            0,
            config.seed,
            _trace(root, pretty),
            f"the component does not have the stated type: {err}",
        )
    root = _Node(c0, 0, None, "", "")
    seen = {c0}
    frontier = [root]
    states = 1
    while frontier:
        nxt: list[_Node] = []
        for node in frontier:
            comp = node.state
            missing = _unrealised_protocol_family(comp)
            if missing is not None:
                return CheckReport(
                    "progress",
                    "Fail",
                    states,
                    node.depth,
                    config.seed,
                    _trace(node, pretty),
                    missing,
                )
            if node.depth >= config.max_depth:
                continue
            for t in component_transitions(comp):
                if isinstance(t.label, TauL) and t.target not in seen:
                    seen.add(t.target)
                    states += 1
                    nxt.append(_Node(t.target, node.depth + 1, node, "tau", t.rule))
        frontier = nxt
    return CheckReport("progress", "Pass", states, config.max_depth, config.seed)


def _unrealised_protocol_family(c: Composite) -> Optional[str]:
    families = set()
    for lab, _, _ in protocol_transitions(c.protocol):
        if isinstance(lab, RoleOut):
            families.add(("out", lab.role, lab.label))
        else:
            families.add(("in", lab.role, lab.label))
    realised = set()
    for t in component_transitions(c):
        if isinstance(t.label, TauL) and t.rule in ("OutChor", "InpChor") and t.detail:
            realised.add((t.detail[0], t.detail[1], t.detail[2]))
    for fam in sorted(families):
        if fam not in realised:
            kind, role, label = fam
            verb = "send" if kind == "out" else "receive"
            return (
                f"the protocol offers a {verb} of {label!r} at role {role!r} "
                "that no internal step realises"
            )
    return None
