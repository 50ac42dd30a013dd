"""The target process calculus: syntax, transition system, congruence.

A pi-calculus variant where communication is mediated by queues (reusing
local binders as queue boxes) and by forwarders. Output, input and branch
primitives synchronise with queues, never with each other; transition labels
track the origin of an action (queue side vs. primitive side) so that the
synchronisation rule can enforce this.

`canonicalize` computes a normal form for the structural congruence used by
the correspondence checks: parallel composition is flattened to a sorted
multiset modulo inactive terms, restrictions are hoisted along parallel and
forwarder spines and renamed positionally, adjacent forwarders over disjoint
ports are sorted, unfolded recursions are rolled back into their binder, and
bound variables are numbered off. `congruent` compares normal forms. This is sound for the underlying congruence and complete for
the regular shapes the encoder emits (members of a parallel composition
that remain distinguishable after bound-port blinding); it makes no attempt
at full graph canonicalisation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

from . import parser as _surface
from .semantics import binder_input, binder_transitions
from .syntax import (
    ActionLabel, BaseType, Expr, FnExpr, HoleV, InL, IntV, LocalBinder, Name,
    OutL, Param, Store, Value, instantiate, memo_hash, pretty_value,
    store_dom, value_sort_key,
)

# ---------------------------------------------------------------------------
# Syntax
# ---------------------------------------------------------------------------

Obj = Union[Value, str]  # an object is a value or a (bound) variable


@dataclass(frozen=True)
class Nil:
    pass


@memo_hash
@dataclass(frozen=True)
class Par:
    left: "Process"
    right: "Process"


@memo_hash
@dataclass(frozen=True)
class Res:
    port: str
    body: "Process"


@memo_hash
@dataclass(frozen=True)
class RecP:
    var: str
    body: "Process"


@dataclass(frozen=True)
class VarP:
    var: str


@memo_hash
@dataclass(frozen=True)
class Out:
    port: str
    obj: Obj
    cont: "Process"


@memo_hash
@dataclass(frozen=True)
class In:
    port: str
    var: str
    cont: "Process"


@memo_hash
@dataclass(frozen=True)
class Branch:
    port: str
    left: "Process"
    right: "Process"


@memo_hash
@dataclass(frozen=True)
class QueueBox:
    """A delimited group of local binders acting as message queues.

    `receptive` lists extra ports the box accepts (and discards) inputs on,
    beyond the union of the binders' parameters; the encoding of a base
    component uses it to preserve interface receptiveness for input ports no
    binder reads.
    """
    binders: tuple[LocalBinder, ...]
    receptive: frozenset = frozenset()


@memo_hash
@dataclass(frozen=True)
class FwdOut:
    ext: str
    internal: str
    body: "Process"


@memo_hash
@dataclass(frozen=True)
class FwdIn:
    ext: str
    internal: str
    body: "Process"


Process = Union[Nil, Par, Res, RecP, VarP, Out, In, Branch, QueueBox,
                FwdOut, FwdIn]

NIL = Nil()


def par(*ps: Process) -> Process:
    """Right-fold parallel composition, dropping nothing."""
    items = list(ps)
    if not items:
        return NIL
    p = items[-1]
    for q in reversed(items[:-1]):
        p = Par(q, p)
    return p


def res(ports, body: Process) -> Process:
    for z in reversed(list(ports)):
        body = Res(z, body)
    return body


# ---------------------------------------------------------------------------
# Labels and transitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueueSide:
    action: ActionLabel


@dataclass(frozen=True)
class PrimSide:
    action: ActionLabel


@dataclass(frozen=True)
class PTau:
    """Internal step.  The synchronised channel and the value that moved
    are kept as debug payload; they never influence which states are
    reachable, only how cheaply a search can discard candidates."""

    chan: Optional[str] = None
    moved: Optional["Value"] = None


ProcLabel = Union[QueueSide, PrimSide, PTau]
PTAU = PTau()


def plabel_action(l: ProcLabel) -> Optional[ActionLabel]:
    match l:
        case QueueSide(a) | PrimSide(a):
            return a
    return None


def plabel_subject(l: ProcLabel) -> Optional[str]:
    a = plabel_action(l)
    return a.port if a is not None else None


def pretty_plabel(l: ProcLabel) -> str:
    from .syntax import pretty_action
    match l:
        case PTau():
            return "tau"
        case QueueSide(a):
            return pretty_action(a)
        case PrimSide(a):
            return "~" + pretty_action(a)
    raise TypeError(f"not a process label: {l!r}")


@dataclass(frozen=True)
class PTransition:
    label: ProcLabel
    target: Process
    rule: str


def subst_procvar(p: Process, x: str, repl: Process) -> Process:
    match p:
        case VarP(y):
            return repl if y == x else p
        case RecP(y, b):
            return p if y == x else RecP(y, subst_procvar(b, x, repl))
        case Nil() | QueueBox():
            return p
        case Par(l, r):
            return Par(subst_procvar(l, x, repl), subst_procvar(r, x, repl))
        case Res(z, b):
            return Res(z, subst_procvar(b, x, repl))
        case Out(z, o, c):
            return Out(z, o, subst_procvar(c, x, repl))
        case In(z, a, c):
            return In(z, a, subst_procvar(c, x, repl))
        case Branch(z, l, r):
            return Branch(z, subst_procvar(l, x, repl),
                          subst_procvar(r, x, repl))
        case FwdOut(e, w, b):
            return FwdOut(e, w, subst_procvar(b, x, repl))
        case FwdIn(e, w, b):
            return FwdIn(e, w, subst_procvar(b, x, repl))
    raise TypeError(f"not a process: {p!r}")


def subst_obj(p: Process, a: str, v: Obj) -> Process:
    """Substitute v for the variable a in object positions, respecting
    shadowing by inner inputs binding the same variable."""
    match p:
        case Out(z, o, c):
            o2 = v if o == a else o
            return Out(z, o2, subst_obj(c, a, v))
        case In(z, b, c):
            return p if b == a else In(z, b, subst_obj(c, a, v))
        case Par(l, r):
            return Par(subst_obj(l, a, v), subst_obj(r, a, v))
        case Branch(z, l, r):
            return Branch(z, subst_obj(l, a, v), subst_obj(r, a, v))
        case Res(z, b):
            return Res(z, subst_obj(b, a, v))
        case RecP(x, b):
            return RecP(x, subst_obj(b, a, v))
        case FwdOut(e, w, b):
            return FwdOut(e, w, subst_obj(b, a, v))
        case FwdIn(e, w, b):
            return FwdIn(e, w, subst_obj(b, a, v))
        case Nil() | VarP(_) | QueueBox():
            return p
    raise TypeError(f"not a process: {p!r}")


def _box_input_ports(p: QueueBox) -> list[str]:
    ports = set(p.receptive)
    for b in p.binders:
        ports.update(b.fn.param_names)
    return sorted(ports)


def _sync(
    q: PTransition, pr: PTransition
) -> Optional[tuple[Process, Process, PTau]]:
    """Queue side q against primitive side pr: the pair of updated halves if
    the two synchronise (complementary directions, same port, agreeing
    value), instantiating the symbolic input side.  The third slot is the
    tau label recording the channel and the value that moved."""
    if not isinstance(q.label, QueueSide) or not isinstance(pr.label, PrimSide):
        return None
    qa, pa = q.label.action, pr.label.action
    if isinstance(qa, OutL) and isinstance(pa, InL) and qa.port == pa.port:
        if isinstance(pa.value, HoleV):
            return q.target, instantiate(pr.target, qa.value), PTau(qa.port, qa.value)
        if pa.value == qa.value:
            return q.target, pr.target, PTau(qa.port, qa.value)
        return None
    if isinstance(qa, InL) and isinstance(pa, OutL) and qa.port == pa.port:
        if isinstance(qa.value, HoleV):
            return instantiate(q.target, pa.value), pr.target, PTau(qa.port, pa.value)
        if qa.value == pa.value:
            return q.target, pr.target, PTau(qa.port, pa.value)
    return None


@lru_cache(maxsize=1 << 17)
def proc_transitions(p: Process) -> tuple[PTransition, ...]:
    """Complete one-step transition set; input values symbolic."""
    out: list[PTransition] = []
    match p:
        case Nil() | VarP(_):
            pass
        case Out(z, o, cont):
            if not isinstance(o, str):
                out.append(PTransition(PrimSide(OutL(z, o)), cont, "POut"))
        case In(z, a, cont):
            hole = HoleV(None)
            out.append(PTransition(PrimSide(InL(z, hole)),
                                   subst_obj(cont, a, hole), "PInp"))
        case Branch(z, l, r):
            from .syntax import INL, INR
            out.append(PTransition(PrimSide(InL(z, INL)), l, "PChoL"))
            out.append(PTransition(PrimSide(InL(z, INR)), r, "PChoR"))
        case QueueBox(bs, receptive):
            for t in binder_transitions(bs):
                out.append(PTransition(
                    QueueSide(t.label), QueueBox(t.binders, receptive),
                    "PAct"))
            for x in _box_input_ports(p):
                hole = HoleV(None)
                nbs = tuple(binder_input(b, x, hole)[0] for b in bs)
                out.append(PTransition(QueueSide(InL(x, hole)),
                                       QueueBox(nbs, receptive), "PAct"))
        case RecP(x, body):
            for t in proc_transitions(subst_procvar(body, x, p)):
                out.append(PTransition(t.label, t.target, "PRec"))
        case Res(z, body):
            for t in proc_transitions(body):
                if plabel_subject(t.label) != z:
                    out.append(PTransition(t.label, Res(z, t.target), "PRes"))
        case FwdIn(z, w, body):
            for t in proc_transitions(body):
                a = plabel_action(t.label)
                wrapped = FwdIn(z, w, t.target)
                if a is None:
                    out.append(PTransition(t.label, wrapped, "PFwd1"))
                elif isinstance(a, InL) and a.port == w:
                    lab2 = type(t.label)(InL(z, a.value))
                    rule = ("PFwdInp" if isinstance(t.label, QueueSide)
                            else "PFwdInp2")
                    out.append(PTransition(lab2, wrapped, rule))
                elif a.port not in (z, w):
                    out.append(PTransition(t.label, wrapped, "PFwd1"))
        case FwdOut(z, w, body):
            for t in proc_transitions(body):
                a = plabel_action(t.label)
                wrapped = FwdOut(z, w, t.target)
                if a is None:
                    out.append(PTransition(t.label, wrapped, "PFwd2"))
                elif isinstance(a, OutL) and a.port == w:
                    lab2 = type(t.label)(OutL(z, a.value))
                    rule = ("PFwdOut" if isinstance(t.label, QueueSide)
                            else "PFwdOut2")
                    out.append(PTransition(lab2, wrapped, rule))
                elif a.port not in (z, w):
                    out.append(PTransition(t.label, wrapped, "PFwd2"))
        case Par(l, r):
            lt = proc_transitions(l)
            rt = proc_transitions(r)
            for t in lt:
                out.append(PTransition(t.label, Par(t.target, r), "PPar"))
            for t in rt:
                out.append(PTransition(t.label, Par(l, t.target), "PPar"))
            for a in lt:
                for b in rt:
                    s = _sync(a, b)
                    if s is not None:
                        out.append(PTransition(s[2], Par(s[0], s[1]), "PCom"))
                    s = _sync(b, a)
                    if s is not None:
                        out.append(PTransition(s[2], Par(s[1], s[0]), "PCom"))
        case _:
            raise TypeError(f"not a process: {p!r}")
    seen: set = set()
    uniq = []
    for t in out:
        k = (t.label, t.target)
        if k not in seen:
            seen.add(k)
            uniq.append(t)
    return tuple(uniq)


def free_ports(p: Process) -> frozenset:
    match p:
        case Nil() | VarP(_):
            return frozenset()
        case Par(l, r) | Branch(_, l, r):
            f = free_ports(l) | free_ports(r)
            if isinstance(p, Branch):
                f |= {p.port}
            return f
        case Res(z, b):
            return free_ports(b) - {z}
        case RecP(_, b):
            return free_ports(b)
        case Out(z, _, c) | In(z, _, c):
            return {z} | free_ports(c)
        case FwdOut(e, w, b) | FwdIn(e, w, b):
            return {e, w} | free_ports(b)
        case QueueBox(bs, receptive):
            f = set(receptive)
            for b in bs:
                f.add(b.target)
                f.update(b.fn.param_names)
                for s in b.queue:
                    f.update(store_dom(s))
            return frozenset(f)
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# Canonical forms and congruence
# ---------------------------------------------------------------------------

_PLACE = "\x00"


@dataclass(frozen=True)
class _ParN:
    members: tuple


@dataclass(frozen=True)
class _ResBlock:
    ports: tuple
    body: object


def _rename_ports(p, m: dict):
    """Rename ports per m everywhere a port can occur (not variables)."""
    def rn(z):
        return m.get(z, z)

    def rn_expr(e: Expr) -> Expr:
        match e:
            case Name(x):
                return Name(rn(x)) if x in m else e
            case _:
                if hasattr(e, "__dataclass_fields__"):
                    kw = {}
                    for f in e.__dataclass_fields__.values():
                        v = getattr(e, f.name)
                        kw[f.name] = (rn_expr(v) if isinstance(
                            v, tuple(_EXPR_TYPES)) else v)
                    return type(e)(**kw)
                return e

    def rn_binder(b: LocalBinder) -> LocalBinder:
        fn = b.fn
        params = tuple(Param(rn(q.name), q.btype) for q in fn.params)
        fn2 = FnExpr(params, rn_expr(fn.body), fn.return_type, fn.name)
        queue = tuple(
            tuple(sorted((rn(k), v) for k, v in s)) for s in b.queue)
        return LocalBinder(rn(b.target), fn2, queue, span=b.span)

    match p:
        case Nil() | VarP(_):
            return p
        case Par(l, r):
            return Par(_rename_ports(l, m), _rename_ports(r, m))
        case _ParN(ms):
            return _ParN(tuple(_rename_ports(x, m) for x in ms))
        case _ResBlock(ports, body):
            return _ResBlock(tuple(rn(z) for z in ports),
                             _rename_ports(body, m))
        case Res(z, b):
            return Res(rn(z), _rename_ports(b, m))
        case RecP(x, b):
            return RecP(x, _rename_ports(b, m))
        case Out(z, o, c):
            return Out(rn(z), o, _rename_ports(c, m))
        case In(z, a, c):
            return In(rn(z), a, _rename_ports(c, m))
        case Branch(z, l, r):
            return Branch(rn(z), _rename_ports(l, m), _rename_ports(r, m))
        case FwdOut(e, w, b):
            return FwdOut(rn(e), rn(w), _rename_ports(b, m))
        case FwdIn(e, w, b):
            return FwdIn(rn(e), rn(w), _rename_ports(b, m))
        case QueueBox(bs, receptive):
            return QueueBox(tuple(rn_binder(b) for b in bs),
                            frozenset(rn(z) for z in receptive))
    raise TypeError(f"not a process: {p!r}")


from .syntax import Binary, Cond, Lit, Unary  # noqa: E402

_EXPR_TYPES = (Lit, Name, Unary, Binary, Cond)


def _ser(p) -> str:
    """Deterministic structural serialisation used for sort keys."""
    match p:
        case Nil():
            return "0"
        case VarP(x):
            return f"V({x})"
        case RecP(x, b):
            return f"M({x},{_ser(b)})"
        case Par(l, r):
            return f"P({_ser(l)},{_ser(r)})"
        case _ParN(ms):
            return "P[" + ",".join(_ser(x) for x in ms) + "]"
        case _ResBlock(_, body):
            return f"N[{_ser(body)}]"
        case Res(z, b):
            return f"N({z},{_ser(b)})"
        case Out(z, o, c):
            ov = o if isinstance(o, str) else pretty_value(o)
            return f"O({z},{ov},{_ser(c)})"
        case In(z, a, c):
            return f"I({z},{a},{_ser(c)})"
        case Branch(z, l, r):
            return f"B({z},{_ser(l)},{_ser(r)})"
        case FwdOut(e, w, b):
            return f"Fo({e},{w},{_ser(b)})"
        case FwdIn(e, w, b):
            return f"Fi({e},{w},{_ser(b)})"
        case QueueBox(bs, receptive):
            parts = [_surface._pp_binder(b) for b in bs]
            return ("Q[" + ";".join(parts) + "|"
                    + ",".join(sorted(receptive)) + "]")
    raise TypeError(f"not a process: {p!r}")


_BLIND_RE = re.compile("\x00[0-9]+")


def _blind_key(p) -> str:
    return _BLIND_RE.sub(_PLACE, _ser(p))


def _rename_vars(p, counters: list) -> object:
    """Canonical bound-variable names: inputs a#k, recursion vars X#k, in
    traversal order."""
    match p:
        case In(z, a, c):
            nv = f"a#{counters[0]}"
            counters[0] += 1
            c2 = subst_obj(c, a, nv) if a != nv else c
            return In(z, nv, _rename_vars(c2, counters))
        case RecP(x, b):
            nv = f"X#{counters[1]}"
            counters[1] += 1
            b2 = subst_procvar(b, x, VarP(nv)) if x != nv else b
            return RecP(nv, _rename_vars(b2, counters))
        case Out(z, o, c):
            return Out(z, o, _rename_vars(c, counters))
        case Branch(z, l, r):
            return Branch(z, _rename_vars(l, counters),
                          _rename_vars(r, counters))
        case Par(l, r):
            return Par(_rename_vars(l, counters), _rename_vars(r, counters))
        case _ParN(ms):
            return _ParN(tuple(_rename_vars(x, counters) for x in ms))
        case _ResBlock(ports, body):
            return _ResBlock(ports, _rename_vars(body, counters))
        case Res(z, b):
            return Res(z, _rename_vars(b, counters))
        case FwdOut(e, w, b):
            return FwdOut(e, w, _rename_vars(b, counters))
        case FwdIn(e, w, b):
            return FwdIn(e, w, _rename_vars(b, counters))
        case Nil() | VarP(_) | QueueBox():
            return p
    raise TypeError(f"not a process: {p!r}")


def _sort_chain(chain: list) -> list:
    """Canonical order of a forwarder chain: the lexicographically minimal
    arrangement reachable by swapping adjacent wrappers over disjoint ports
    (greedily move the smallest wrapper that commutes past everything before
    it to the front)."""
    items = list(chain)
    result = []
    while items:
        best = 0
        for j in range(1, len(items)):
            ok = all(
                not ({items[j][1], items[j][2]} & {items[k][1], items[k][2]})
                for k in range(j))
            if ok and items[j] < items[best]:
                best = j
        result.append(items.pop(best))
    return result


def _rec_nodes(p, acc: list) -> None:
    match p:
        case RecP(_, b):
            acc.append(p)
            _rec_nodes(b, acc)
        case Out(_, _, c) | In(_, _, c):
            _rec_nodes(c, acc)
        case Branch(_, l, r):
            _rec_nodes(l, acc)
            _rec_nodes(r, acc)


def _roll(p):
    """Fold unfolded recursions back into their binder: a subterm shaped
    B[X := mu X. B] collapses to mu X. B, innermost first.

    A stepped loop leaves the folded residual behind while re-encoding the
    state it reached spells the loop out once (or, with several values in
    flight, several times); rolling lands every spelling of the same loop
    on the folded one. Comparison is blind to bound names, and each fold
    replaces the term by a strict subterm, so this terminates."""
    match p:
        case Out(z, o, c):
            p = Out(z, o, _roll(c))
        case In(z, a, c):
            p = In(z, a, _roll(c))
        case Branch(z, l, r):
            p = Branch(z, _roll(l), _roll(r))
        case RecP(x, b):
            p = RecP(x, _roll(b))
        case _:
            return p
    while True:
        cands: list = []
        _rec_nodes(p, cands)
        here = _rename_vars(p, [0, 0])
        for r in cands:
            if _rename_vars(subst_procvar(r.body, r.var, r), [0, 0]) == here:
                p = r
                break
        else:
            return p


class _Canon:
    def __init__(self):
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"{_PLACE}{self.counter}"

    def root(self, p: Process):
        ports, core = self.strip(p)
        body = self.spine(core)
        used = _collect_spine_ports(body)
        kept = tuple(z for z in ports if z in used)
        return _ResBlock(kept, body) if kept else body

    def strip(self, p: Process):
        """Hoist restrictions along the parallel/forwarder spine, renaming
        each bound port to a unique placeholder.

        The common case (all spine restrictions distinct) peels the whole
        spine first and renames in a single pass; repeated names fall back
        to one rename per restriction, which handles shadowing."""
        mark = self.counter
        pairs: list[tuple[str, str]] = []
        core = self._peel(p, pairs)
        names = [z for z, _ in pairs]
        if len(set(names)) != len(names):
            self.counter = mark
            return self._strip_seq(p)
        if pairs:
            core = _rename_ports(core, dict(pairs))
        return [ph for _, ph in pairs], core

    def _peel(self, p: Process, pairs: list):
        match p:
            case Res(z, b):
                pairs.append((z, self.fresh()))
                return self._peel(b, pairs)
            case Par(l, r):
                return Par(self._peel(l, pairs), self._peel(r, pairs))
            case FwdOut(e, w, b):
                return FwdOut(e, w, self._peel(b, pairs))
            case FwdIn(e, w, b):
                return FwdIn(e, w, self._peel(b, pairs))
            case _:
                return p

    def _strip_seq(self, p: Process):
        match p:
            case Res(z, b):
                ph = self.fresh()
                b2 = _rename_ports(b, {z: ph}) if z != ph else b
                ports, core = self._strip_seq(b2)
                return [ph] + ports, core
            case Par(l, r):
                pl, cl = self._strip_seq(l)
                pr, cr = self._strip_seq(r)
                return pl + pr, Par(cl, cr)
            case FwdOut(e, w, b):
                pb, cb = self._strip_seq(b)
                return pb, FwdOut(e, w, cb)
            case FwdIn(e, w, b):
                pb, cb = self._strip_seq(b)
                return pb, FwdIn(e, w, cb)
            case _:
                return [], p

    def spine(self, p: Process):
        match p:
            case Par(_, _):
                members: list = []
                self._flatten(p, members)
                members = [m for m in members if m != NIL]
                members.sort(key=_blind_key)
                if not members:
                    return NIL
                if len(members) == 1:
                    return members[0]
                return _ParN(tuple(members))
            case FwdOut(_, _, _) | FwdIn(_, _, _):
                chain = []
                core = p
                while isinstance(core, (FwdOut, FwdIn)):
                    kind = "in" if isinstance(core, FwdIn) else "out"
                    chain.append((kind, core.ext, core.internal))
                    core = core.body
                body = self.spine(core)
                for kind, e, w in reversed(_sort_chain(chain)):
                    cls = FwdIn if kind == "in" else FwdOut
                    body = cls(e, w, body)
                return body
            case _:
                return self.member(p)

    def _flatten(self, p: Process, acc: list):
        if isinstance(p, Par):
            self._flatten(p.left, acc)
            self._flatten(p.right, acc)
        else:
            m = self.spine(p)
            if isinstance(m, _ParN):
                acc.extend(m.members)
            else:
                m = _rename_vars(_roll(m), [0, 0])
                acc.append(m)

    def member(self, p: Process):
        match p:
            case Out(z, o, c):
                return Out(z, o, self.root(c))
            case In(z, a, c):
                return In(z, a, self.root(c))
            case Branch(z, l, r):
                return Branch(z, self.root(l), self.root(r))
            case RecP(x, b):
                return RecP(x, self.root(b))
            case QueueBox(bs, receptive):
                ordered = tuple(sorted(
                    bs, key=lambda b: (b.target, b.fn.param_names,
                                       _surface._pp_binder(b))))
                return QueueBox(ordered, receptive)
            case Nil() | VarP(_):
                return p
            case Res(_, _) | Par(_, _) | FwdOut(_, _, _) | FwdIn(_, _, _):
                # a nested root that escaped the spine (e.g. under a prefix)
                return self.root(p)
        raise TypeError(f"not a process: {p!r}")


def _collect_spine_ports(p) -> frozenset:
    """All ports occurring in a canonical skeleton (placeholders included)."""
    match p:
        case _ParN(ms):
            out: set = set()
            for m in ms:
                out |= _collect_spine_ports(m)
            return frozenset(out)
        case _ResBlock(ports, body):
            return _collect_spine_ports(body) | frozenset(ports)
        case Nil() | VarP(_):
            return frozenset()
        case Par(l, r) | Branch(_, l, r):
            f = _collect_spine_ports(l) | _collect_spine_ports(r)
            if isinstance(p, Branch):
                f |= {p.port}
            return f
        case Res(z, b):
            return _collect_spine_ports(b) | {z}
        case RecP(_, b):
            return _collect_spine_ports(b)
        case Out(z, _, c) | In(z, _, c):
            return {z} | _collect_spine_ports(c)
        case FwdOut(e, w, b) | FwdIn(e, w, b):
            return {e, w} | _collect_spine_ports(b)
        case QueueBox():
            return free_ports(p)
    raise TypeError(f"not a process: {p!r}")


def _resort(p):
    """Re-sort parallel multisets with concrete (renamed) keys."""
    match p:
        case _ParN(ms):
            ms2 = [_resort(x) for x in ms]
            ms2.sort(key=_ser)
            return _ParN(tuple(ms2))
        case _ResBlock(ports, body):
            return _ResBlock(ports, _resort(body))
        case Par(l, r):
            return Par(_resort(l), _resort(r))
        case Res(z, b):
            return Res(z, _resort(b))
        case RecP(x, b):
            return RecP(x, _resort(b))
        case Out(z, o, c):
            return Out(z, o, _resort(c))
        case In(z, a, c):
            return In(z, a, _resort(c))
        case Branch(z, l, r):
            return Branch(z, _resort(l), _resort(r))
        case FwdOut(e, w, b):
            return FwdOut(e, w, _resort(b))
        case FwdIn(e, w, b):
            return FwdIn(e, w, _resort(b))
        case _:
            return p


def _materialize(p) -> Process:
    match p:
        case _ParN(ms):
            return par(*[_materialize(x) for x in ms])
        case _ResBlock(ports, body):
            inner = _materialize(body)
            order = sorted(ports, key=lambda z: int(z[1:]))
            return res(order, inner)
        case Par(l, r):
            return Par(_materialize(l), _materialize(r))
        case Res(z, b):
            return Res(z, _materialize(b))
        case RecP(x, b):
            return RecP(x, _materialize(b))
        case Out(z, o, c):
            return Out(z, o, _materialize(c))
        case In(z, a, c):
            return In(z, a, _materialize(c))
        case Branch(z, l, r):
            return Branch(z, _materialize(l), _materialize(r))
        case FwdOut(e, w, b):
            return FwdOut(e, w, _materialize(b))
        case FwdIn(e, w, b):
            return FwdIn(e, w, _materialize(b))
        case _:
            return p


@lru_cache(maxsize=1 << 16)
def canonical_key(p: Process) -> str:
    """Stable string identity of the canonical form, for cheap comparison
    and set membership."""
    return _ser(canonicalize(p))


@lru_cache(maxsize=1 << 16)
def canonicalize(p: Process) -> Process:
    skel = _Canon().root(p)
    skel = _rename_vars(skel, [0, 0])
    text = _ser(skel)
    order: list[str] = []
    seen: set = set()
    for m in _BLIND_RE.finditer(text):
        ph = m.group(0)
        if ph not in seen:
            seen.add(ph)
            order.append(ph)
    mapping = {ph: f"#{i}" for i, ph in enumerate(order)}
    skel = _rename_ports(skel, mapping)
    skel = _resort(skel)
    return _materialize(skel)


def congruent(p: Process, q: Process) -> bool:
    return p == q or canonicalize(p) == canonicalize(q)


# ---------------------------------------------------------------------------
# Debug syntax: printer and parser (tests only)
# ---------------------------------------------------------------------------

def _pp_obj(o: Obj) -> str:
    return o if isinstance(o, str) else pretty_value(o)


def _atomic(p: Process) -> bool:
    return isinstance(p, (Nil, VarP, QueueBox))


def pretty_proc(p: Process) -> str:
    match p:
        case Nil():
            return "0"
        case VarP(x):
            return x
        case RecP(x, b):
            body = pretty_proc(b)
            if isinstance(b, Par):
                body = f"({body})"
            return f"mu {x}. {body}"
        case Res(z, b):
            body = pretty_proc(b)
            if isinstance(b, Par):
                body = f"({body})"
            return f"new {z}. {body}"
        case Par(_, _):
            members = []
            stack = [p]
            while stack:
                q = stack.pop()
                if isinstance(q, Par):
                    stack.append(q.right)
                    stack.append(q.left)
                else:
                    members.append(q)
            parts = []
            for m in members:
                s = pretty_proc(m)
                if isinstance(m, (Res, RecP)):
                    s = f"({s})"
                parts.append(s)
            return " | ".join(parts)
        case Out(z, o, c):
            cont = pretty_proc(c)
            if isinstance(c, (Par, Res, RecP)):
                cont = f"({cont})"
            return f"{z}!({_pp_obj(o)}). {cont}"
        case In(z, a, c):
            cont = pretty_proc(c)
            if isinstance(c, (Par, Res, RecP)):
                cont = f"({cont})"
            return f"{z}?({a}). {cont}"
        case Branch(z, l, r):
            return f"{z}&({pretty_proc(l)}, {pretty_proc(r)})"
        case FwdOut(e, w, b) | FwdIn(e, w, b):
            sep = "/" if isinstance(p, FwdOut) else "\\"
            body = pretty_proc(b)
            if not _atomic(b) and not isinstance(b, (FwdOut, FwdIn)):
                body = f"({body})"
            return f"({e}{sep}{w}) {body}"
        case QueueBox(bs, receptive):
            parts = [_surface._pp_binder(b) for b in bs]
            body = "; ".join(parts)
            if receptive:
                tail = ", ".join(sorted(receptive))
                body = f"{body} | rec: {tail}" if body else f"| rec: {tail}"
            return f"[{body}]"
    raise TypeError(f"not a process: {p!r}")


class ProcParseError(Exception):
    pass


_P_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_#][A-Za-z0-9_'#]*)
  | (?P<punct><=|[{}()\[\];:,.@!?&/\\|=<>+*-])
""", re.VERBOSE)


def _p_tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i = 0
    while i < len(text):
        m = _P_TOKEN_RE.match(text, i)
        if not m:
            raise ProcParseError(f"bad character {text[i]!r} at offset {i}")
        if m.lastgroup != "ws":
            toks.append((m.lastgroup, m.group(0), i))
        i = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _ProcParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _p_tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.pos]
        if t[0] != "eof":
            self.pos += 1
        return t

    def expect(self, text: str):
        t = self.next()
        if t[1] != text:
            raise ProcParseError(f"expected {text!r}, got {t[1]!r}")
        return t

    def at(self, text: str) -> bool:
        return self.peek()[1] == text

    def parse(self) -> Process:
        p = self.parse_par()
        if self.peek()[0] != "eof":
            raise ProcParseError(f"trailing input at {self.peek()[1]!r}")
        return p

    def parse_par(self) -> Process:
        items = [self.parse_seq()]
        while self.at("|"):
            self.next()
            items.append(self.parse_seq())
        return par(*items)

    def parse_value(self) -> Value:
        from .syntax import BoolV, INL, INR, StrV
        k, txt, _ = self.next()
        if k == "int":
            return IntV(int(txt))
        if k == "str":
            body = txt[1:-1]
            body = (body.replace("\\n", "\n").replace('\\"', '"')
                    .replace("\\\\", "\\"))
            return StrV(body)
        if txt == "true":
            return BoolV(True)
        if txt == "false":
            return BoolV(False)
        if txt == "inl":
            return INL
        if txt == "inr":
            return INR
        raise ProcParseError(f"expected a value, got {txt!r}")

    def parse_obj(self) -> Obj:
        k, txt, _ = self.peek()
        if k == "ident" and txt not in ("true", "false", "inl", "inr"):
            self.next()
            return txt
        return self.parse_value()

    def parse_store(self) -> Store:
        self.expect("{")
        entries = []
        while not self.at("}"):
            k, name, _ = self.next()
            if k != "ident":
                raise ProcParseError(f"expected port in store, got {name!r}")
            self.expect("=")
            entries.append((name, self.parse_value()))
            if self.at(","):
                self.next()
        self.expect("}")
        return tuple(sorted(entries))

    def parse_binder(self) -> LocalBinder:
        _, target, _ = self.next()
        self.expect("<=")
        fname = None
        if self.peek()[0] == "ident":
            fname = self.next()[1]
        self.expect("(")
        params = []
        while not self.at(")"):
            params.append(self.next()[1])
            if self.at(","):
                self.next()
        self.expect(")")
        rtype: Optional[BaseType] = None
        ptypes: dict[str, Optional[BaseType]] = {q: None for q in params}
        if self.at(":"):
            self.next()
            k, txt, _ = self.next()
            if txt != "?":
                rtype = _surface._TYPES.get(txt)
                if rtype is None:
                    raise ProcParseError(f"unknown type {txt!r}")
        body: Optional[Expr] = None
        if self.at("="):
            self.next()
            start = self.peek()[2]
            depth = 0
            while True:
                k, txt, off = self.peek()
                if k == "eof":
                    break
                if depth == 0 and txt in (";", "]", "|"):
                    break
                if depth == 0 and txt == "[":
                    break
                if txt in ("(",):
                    depth += 1
                elif txt in (")",):
                    depth -= 1
                self.next()
            end = self.peek()[2]
            sub = _surface._Parser(_surface.tokenize(self.text[start:end]))
            body = sub.parse_expr()
        queue: tuple = ()
        if self.at("["):
            self.next()
            stores = []
            while not self.at("]"):
                stores.append(self.parse_store())
                if self.at(","):
                    self.next()
            self.expect("]")
            queue = tuple(stores)
        if body is None:
            if fname == "id" and len(params) == 1:
                body = Name(params[0])
            else:
                raise ProcParseError(f"binder {target!r} needs a body")
        fn = FnExpr(tuple(Param(q, ptypes[q]) for q in params), body,
                    rtype, fname)
        return LocalBinder(target, fn, queue)

    def parse_box(self) -> QueueBox:
        self.expect("[")
        binders = []
        receptive: frozenset = frozenset()
        while not self.at("]"):
            if self.at("|"):
                self.next()
                t = self.next()
                if t[1] != "rec":
                    raise ProcParseError("expected 'rec' after '|' in box")
                self.expect(":")
                ports = []
                while not self.at("]"):
                    ports.append(self.next()[1])
                    if self.at(","):
                        self.next()
                receptive = frozenset(ports)
                break
            binders.append(self.parse_binder())
            if self.at(";"):
                self.next()
        self.expect("]")
        return QueueBox(tuple(binders), receptive)

    def parse_seq(self) -> Process:
        k, txt, _ = self.peek()
        if txt == "0":
            self.next()
            return NIL
        if txt == "new":
            self.next()
            z = self.next()[1]
            self.expect(".")
            return Res(z, self.parse_seq())
        if txt == "mu":
            self.next()
            x = self.next()[1]
            self.expect(".")
            return RecP(x, self.parse_seq())
        if txt == "[":
            return self.parse_box()
        if txt == "(":
            nxt, nxt2 = self.peek(1), self.peek(2)
            if nxt[0] == "ident" and nxt2[1] in ("/", "\\"):
                self.next()
                e = self.next()[1]
                sep = self.next()[1]
                w = self.next()[1]
                self.expect(")")
                body = self.parse_seq()
                return (FwdOut if sep == "/" else FwdIn)(e, w, body)
            self.next()
            p = self.parse_par()
            self.expect(")")
            return p
        if k == "ident":
            nxt = self.peek(1)[1]
            if nxt == "!":
                z = self.next()[1]
                self.next()
                self.expect("(")
                o = self.parse_obj()
                self.expect(")")
                self.expect(".")
                return Out(z, o, self.parse_seq())
            if nxt == "?":
                z = self.next()[1]
                self.next()
                self.expect("(")
                a = self.next()[1]
                self.expect(")")
                self.expect(".")
                return In(z, a, self.parse_seq())
            if nxt == "&":
                z = self.next()[1]
                self.next()
                self.expect("(")
                l = self.parse_par()
                self.expect(",")
                r = self.parse_par()
                self.expect(")")
                return Branch(z, l, r)
            self.next()
            return VarP(txt)
        raise ProcParseError(f"unexpected token {txt!r}")


def parse_proc(text: str) -> Process:
    return _ProcParser(text).parse()
