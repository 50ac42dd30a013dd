"""Operational semantics: expressions, binders, protocols, components.

Three layers, each a pure state-to-successors function:

* local binders — constants fire anytime (LConst), parameterised binders fire
  when the head store is complete (LOut); inputs append to the first store
  missing the port (LInpNew/LInpUpd) or are discarded (LInpDisc), and a group
  of binders reacts to an input simultaneously (LInpList);
* protocols — send creates an in-transit term (GSVal/GSChoice), pending
  receivers consume it in any order (GRVal/GRVal2, GRChoice/GRChoice2),
  recursion unfolds (GRec), and continuations run ahead when their subject
  role is not blocked by a prefix (GConc1-5);
* components — base I/O lifts binder steps (OutBase/InpBase); composites
  synchronise a member's I/O with a connection binder and a protocol step
  into a silent move (OutChor/InpChor), pass inner silent moves through
  (Internal), and rename interface-role I/O through forwarders
  (OutComp/InpComp).

Input transitions quantify over all values of a port's type, so they are
returned symbolically: the label and successor contain a value hole, and
`instantiate` substitutes a concrete value uniformly. Everything else is
concrete.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .parser import port_types
from .syntax import (
    Base, BaseType, Binary, BoolV, Choice, Com, Component, Composite, Cond,
    ConnectionBinder, EMPTY_STORE, End, Expr, FnExpr, HoleV, INL, INR, InL,
    IntV, Lit, LocalBinder, Name, OutL, Protocol, ProtoLabel, PVar, Rec,
    RoleIn, RoleOut, Store, TAU, TauL, TransitChoice, TransitCom, Unary,
    Value, ActionLabel, contains_hole, instantiate, store_dom, store_from,
    store_get, store_has, store_set, subst_protocol, type_of,
    value_sort_key,
)


class ContractError(Exception):
    """An internal precondition was violated (non-WF input slipped through)."""


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

def eval_expr(e: Expr, env: dict[str, Value]) -> Value:
    match e:
        case Lit(v):
            return v
        case Name(x):
            if x not in env:
                raise ContractError(f"unbound name {x!r} in expression")
            return env[x]
        case Unary("not", a):
            av = eval_expr(a, env)
            return BoolV(not av.value)
        case Unary("-", a):
            av = eval_expr(a, env)
            return IntV(-av.value)
        case Binary("and", l, r):
            return BoolV(eval_expr(l, env).value and eval_expr(r, env).value)
        case Binary("or", l, r):
            return BoolV(eval_expr(l, env).value or eval_expr(r, env).value)
        case Binary(op, l, r):
            lv, rv = eval_expr(l, env), eval_expr(r, env)
            match op:
                case "+":
                    return IntV(lv.value + rv.value)
                case "-":
                    return IntV(lv.value - rv.value)
                case "*":
                    return IntV(lv.value * rv.value)
                case "<":
                    return BoolV(lv.value < rv.value)
                case "<=":
                    return BoolV(lv.value <= rv.value)
                case ">":
                    return BoolV(lv.value > rv.value)
                case ">=":
                    return BoolV(lv.value >= rv.value)
                case "==":
                    return BoolV(lv == rv)
                case "!=":
                    return BoolV(lv != rv)
            raise ContractError(f"unknown operator {op!r}")
        case Cond(t, a, b):
            return eval_expr(a if eval_expr(t, env) == BoolV(True) else b, env)
    raise ContractError(f"malformed expression: {e!r}")


def eval_fn(fn: FnExpr, args: dict[str, Value]) -> Value:
    """Evaluate fn on args. Raises ContractError on missing or ill-typed
    arguments (declared types only; untyped parameters accept anything)."""
    env: dict[str, Value] = {}
    for p in fn.params:
        if p.name not in args:
            raise ContractError(f"missing argument for parameter {p.name!r}")
        v = args[p.name]
        if contains_hole(v):
            raise ContractError(
                f"cannot evaluate with a symbolic value for {p.name!r}")
        if p.btype is not None and type_of(v) is not p.btype:
            raise ContractError(
                f"argument for {p.name!r} has type {type_of(v)}, "
                f"expected {p.btype}")
        env[p.name] = v
    return eval_expr(fn.body, env)


# ---------------------------------------------------------------------------
# Local binders
# ---------------------------------------------------------------------------

def binder_output(b: LocalBinder) -> Optional[tuple[Value, LocalBinder, str]]:
    """The output b can fire now, if any: (value, successor, rule)."""
    names = b.fn.param_names
    if not names:
        return eval_fn(b.fn, {}), b, "LConst"
    if b.queue:
        head = b.queue[0]
        if store_dom(head) == frozenset(names):
            args = {x: store_get(head, x) for x in names}
            v = eval_fn(b.fn, args)
            succ = LocalBinder(b.target, b.fn, b.queue[1:], span=b.span)
            return v, succ, "LOut"
    return None


def binder_input(b: LocalBinder, x: str, v: Value) -> tuple[LocalBinder, str]:
    """b's unique reaction to receiving v on x: (successor, rule)."""
    if x not in b.fn.param_names:
        return b, "LInpDisc"
    for i, s in enumerate(b.queue):
        if not store_has(s, x):
            q = b.queue[:i] + (store_set(s, x, v),) + b.queue[i + 1:]
            return LocalBinder(b.target, b.fn, q, span=b.span), "LInpUpd"
    q = b.queue + (store_from({x: v}),)
    return LocalBinder(b.target, b.fn, q, span=b.span), "LInpNew"


@dataclass(frozen=True)
class BinderTransition:
    label: ActionLabel
    binders: tuple[LocalBinder, ...]
    rule: str


def binder_transitions(L: tuple[LocalBinder, ...],
                       incoming: Optional[tuple[str, Value]] = None
                       ) -> tuple[BinderTransition, ...]:
    """Transitions of a binder group.

    Without `incoming`: one output transition per binder able to fire.
    With `incoming` = (x, v): the single simultaneous-input successor.
    Rule names are the root of the derivation: the leaf rule when the group
    is a single binder, the lifting rule otherwise.
    """
    if incoming is None:
        out = []
        for i, b in enumerate(L):
            r = binder_output(b)
            if r is None:
                continue
            v, b2, leaf = r
            rule = leaf if len(L) == 1 else "LOutLift"
            out.append(BinderTransition(
                OutL(b.target, v), L[:i] + (b2,) + L[i + 1:], rule))
        return tuple(out)
    x, v = incoming
    succs = [binder_input(b, x, v) for b in L]
    if len(L) == 1:
        rule = succs[0][1]
    else:
        rule = "LInpList"
    return (BinderTransition(InL(x, v), tuple(b for b, _ in succs), rule),)


# ---------------------------------------------------------------------------
# Protocol transitions
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def protocol_transitions(g: Protocol
                         ) -> tuple[tuple[ProtoLabel, Protocol, str], ...]:
    """All one-step derivations (label, successor, root rule).

    Send labels of value communications carry a hole in place of the
    universally quantified value; callers instantiate it. Selection and
    receive labels are concrete.
    """
    return _ptrans(g, frozenset(), {})


def _ptrans(g: Protocol, excluded: frozenset,
            state: dict) -> tuple[tuple[ProtoLabel, Protocol, str], ...]:
    key = (g, excluded)
    if key in state:
        return state[key]
    state[key] = ()  # cycle cut for unguarded descent through GRec
    out: list[tuple[ProtoLabel, Protocol, str]] = []
    match g:
        case Com(p, lbl, qs, cont):
            if p not in excluded:
                hole = HoleV(None)
                out.append((RoleOut(p, lbl, hole),
                            TransitCom(lbl, hole, tuple(sorted(qs)), cont),
                            "GSVal"))
            inner = _ptrans(cont, excluded | {p, *qs}, state)
            for a, t, _ in inner:
                out.append((a, Com(p, lbl, qs, t), "GConc1"))
        case Choice(p, lbl, qs, g1, g2):
            if p not in excluded:
                for v in (INL, INR):
                    out.append((RoleOut(p, lbl, v),
                                TransitChoice(lbl, v, tuple(sorted(qs)),
                                              g1, g2),
                                "GSChoice"))
            ex = excluded | {p, *qs}
            t1 = _ptrans(g1, ex, state)
            t2 = _ptrans(g2, ex, state)
            for a1, u1, _ in t1:
                for a2, u2, _ in t2:
                    if a1 == a2:
                        out.append((a1, Choice(p, lbl, qs, u1, u2), "GConc2"))
        case TransitCom(lbl, v, pend, cont):
            for i, q in enumerate(pend):
                if q in excluded:
                    continue
                rest = pend[:i] + pend[i + 1:]
                if rest:
                    out.append((RoleIn(q, lbl, v),
                                TransitCom(lbl, v, rest, cont), "GRVal"))
                else:
                    out.append((RoleIn(q, lbl, v), cont, "GRVal2"))
            inner = _ptrans(cont, excluded | set(pend), state)
            for a, t, _ in inner:
                out.append((a, TransitCom(lbl, v, pend, t), "GConc3"))
        case TransitChoice(lbl, v, pend, g1, g2):
            for i, q in enumerate(pend):
                if q in excluded:
                    continue
                rest = pend[:i] + pend[i + 1:]
                if rest:
                    out.append((RoleIn(q, lbl, v),
                                TransitChoice(lbl, v, rest, g1, g2),
                                "GRChoice"))
                else:
                    out.append((RoleIn(q, lbl, v),
                                g1 if v == INL else g2, "GRChoice2"))
            ex = excluded | set(pend)
            if v == INL:
                for a, t, _ in _ptrans(g1, ex, state):
                    out.append((a, TransitChoice(lbl, v, pend, t, g2),
                                "GConc4"))
            else:
                for a, t, _ in _ptrans(g2, ex, state):
                    out.append((a, TransitChoice(lbl, v, pend, g1, t),
                                "GConc5"))
        case Rec(x, body):
            unf = subst_protocol(body, x, g)
            for a, t, _ in _ptrans(unf, excluded, state):
                out.append((a, t, "GRec"))
        case PVar(_) | End():
            pass
    seen: set = set()
    res = []
    for item in out:
        k = item[:2]
        if k not in seen:
            seen.add(k)
            res.append(item)
    state[key] = tuple(res)
    return state[key]


def protocol_step(g: Protocol, want: ProtoLabel
                  ) -> tuple[tuple[Protocol, str], ...]:
    """Successors of g under exactly the action `want` (concrete value),
    instantiating symbolic send values."""
    out = []
    for lab, tgt, rule in protocol_transitions(g):
        if type(lab) is not type(want):
            continue
        if lab.role != want.role or lab.label != want.label:
            continue
        if isinstance(lab.value, HoleV):
            out.append((instantiate(tgt, want.value), rule))
        elif lab.value == want.value:
            out.append((tgt, rule))
    return tuple(out)


# ---------------------------------------------------------------------------
# Component transitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    label: ActionLabel
    target: Component
    rule: str
    detail: Optional[tuple] = None


def _label_key(lab: ActionLabel) -> tuple:
    match lab:
        case TauL():
            return (0, "", (0, 0, ""))
        case OutL(p, v):
            return (1, p, value_sort_key(v))
        case InL(p, v):
            return (2, p, value_sort_key(v))
    raise TypeError(f"not an action label: {lab!r}")


def _t_key(t: Transition) -> tuple:
    return (t.rule, _label_key(t.label), repr(t.detail))


def component_transitions(c: Component) -> tuple[Transition, ...]:
    """All transitions of c, input values symbolic, deterministically
    ordered by (rule, port, value)."""
    match c:
        case Base():
            ts = _base_transitions(c)
        case Composite():
            ts = _composite_transitions(c)
        case _:
            raise TypeError(f"not a component: {c!r}")
    seen: set = set()
    out = []
    for t in ts:
        k = (t.label, t.target, t.rule, t.detail)
        if k not in seen:
            seen.add(k)
            out.append(t)
    out.sort(key=_t_key)
    return tuple(out)


def _base_transitions(c: Base) -> list[Transition]:
    out = []
    types: dict[str, Optional[BaseType]] = {}
    for b in c.binders:
        for p in b.fn.params:
            if p.btype is not None:
                types.setdefault(p.name, p.btype)
    for i, b in enumerate(c.binders):
        r = binder_output(b)
        if r is None:
            continue
        v, b2, _ = r
        if b.target not in c.outputs:
            raise ContractError(
                f"binder target {b.target!r} is not an output port")
        nb = c.binders[:i] + (b2,) + c.binders[i + 1:]
        out.append(Transition(OutL(b.target, v),
                              Base(c.inputs, c.outputs, nb, span=c.span),
                              "OutBase"))
    for x in c.inputs:
        hole = HoleV(types.get(x))
        nbs = tuple(binder_input(b, x, hole)[0] for b in c.binders)
        out.append(Transition(InL(x, hole),
                              Base(c.inputs, c.outputs, nbs, span=c.span),
                              "InpBase"))
    return out


def _composite_transitions(c: Composite) -> list[Transition]:
    out = []
    for role, sub in c.assignments:
        for t in component_transitions(sub):
            match t.label:
                case TauL():
                    out.append(Transition(
                        TAU, c.with_assignment(role, t.target), "Internal",
                        t.detail))
                case OutL(u, v):
                    for d in c.connections:
                        if d.send_role != role or d.send_port != u:
                            continue
                        for g2, _ in protocol_step(
                                c.protocol, RoleOut(role, d.label, v)):
                            succ = (c.with_assignment(role, t.target)
                                    .with_protocol(g2))
                            out.append(Transition(
                                TAU, succ, "OutChor",
                                ("out", role, d.label, u, v)))
                    if role == c.interface_role:
                        for f in c.forwarders:
                            if f.direction == "out" and f.internal == u:
                                out.append(Transition(
                                    OutL(f.external, v),
                                    c.with_assignment(role, t.target),
                                    "OutComp"))
                case InL(z, v):
                    for d in c.connections:
                        if d.recv_role != role or d.recv_port != z:
                            continue
                        for lab, g2, _ in protocol_transitions(c.protocol):
                            if (isinstance(lab, RoleIn) and lab.role == role
                                    and lab.label == d.label):
                                sub2 = instantiate(t.target, lab.value)
                                succ = (c.with_assignment(role, sub2)
                                        .with_protocol(g2))
                                out.append(Transition(
                                    TAU, succ, "InpChor",
                                    ("in", role, d.label, z, lab.value)))
                    if role == c.interface_role:
                        for f in c.forwarders:
                            if f.direction == "in" and f.internal == z:
                                out.append(Transition(
                                    InL(f.external, v),
                                    c.with_assignment(role, t.target),
                                    "InpComp"))
    return out


# ---------------------------------------------------------------------------
# Input helpers for schedulers and exploration
# ---------------------------------------------------------------------------

def component_input_ports(c: Component) -> dict[str, Optional[BaseType]]:
    """The component's open input ports with their types where known."""
    types = port_types(c)
    return {x: types.get(x) for x in c.inputs}


def component_apply_input(c: Component, port: str, v: Value) -> Component:
    """The unique successor of c after receiving v on the open port."""
    for t in component_transitions(c):
        if isinstance(t.label, InL) and t.label.port == port:
            return instantiate(t.target, v)
    raise ContractError(f"no input transition on port {port!r}")
