"""Compilation of components into the process calculus.

Base components become a restricted queue box behind interface forwarders.
Composite components become the parallel composition of the encodings of
their role assignments, one protocol monitor per protocol role, and a box of
monitor queues (one per connection binder) that carries any in-transit
values, all behind interface forwarders and a restriction of every
internally used port.

The port namespace of an encoding is built by `make_gamma`: an injective,
deterministic renaming of (role, port) and (role, label) pairs, kept
disjoint from every identifier appearing in the source component.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .process import (FwdIn, FwdOut, In, NIL, Out, Par, Branch, Process,
                      QueueBox, RecP, VarP, par, res)
from .process import _rename_ports as _rename_box_ports
from .syntax import (Base, Choice, Com, Component, Composite, End, FnExpr,
                     INL, INR, LocalBinder, Name, Param, Protocol, PVar, Rec,
                     TransitChoice, TransitCom, Value, iter_components,
                     roles as proto_roles, store_from)


class EncodingUndefined(Exception):
    """The encoding side conditions do not hold for this component."""


DUMMY_ROLE = "@self"


@dataclass(frozen=True)
class Gamma:
    mapping: tuple  # of ((role, name), fresh) pairs, in assignment order
    codomain: tuple

    def __call__(self, role: str, name: str) -> str:
        for (r, n), fresh in self.mapping:
            if r == role and n == name:
                return fresh
        raise EncodingUndefined(f"no renaming for ({role}, {name})")

    def has(self, role: str, name: str) -> bool:
        return any(r == role and n == name for (r, n), _ in self.mapping)


def _all_names(c: Component) -> set:
    """Every identifier used anywhere in the component tree."""
    names: set = set()
    for comp in iter_components(c):
        names.update(comp.inputs)
        names.update(comp.outputs)
        match comp:
            case Base():
                for b in comp.binders:
                    names.add(b.target)
                    names.update(b.fn.param_names)
                    for s in b.queue:
                        names.update(k for k, _ in s)
            case Composite():
                for d in comp.connections:
                    names.update((d.label, d.recv_port, d.send_port,
                                  d.recv_role, d.send_role))
                for f in comp.forwarders:
                    names.update((f.internal, f.external))
                names.add(comp.interface_role)
                for role, _ in comp.assignments:
                    names.add(role)
    return names


def make_gamma(c: Component) -> Gamma:
    match c:
        case Base():
            local = set(c.inputs) | set(c.outputs)
            for b in c.binders:
                local.add(b.target)
                local.update(b.fn.param_names)
                for s in b.queue:
                    local.update(k for k, _ in s)
            domain = [(DUMMY_ROLE, n) for n in sorted(local)]
        case Composite():
            pairs: set = set()
            for d in c.connections:
                pairs.add((d.send_role, d.send_port))
                pairs.add((d.recv_role, d.recv_port))
                pairs.add((d.send_role, d.label))
                pairs.add((d.recv_role, d.label))
            for f in c.forwarders:
                pairs.add((c.interface_role, f.internal))
            for role, sub in c.assignments:
                for p in sub.inputs + sub.outputs:
                    pairs.add((role, p))
            domain = sorted(pairs)
        case _:
            raise TypeError(f"not a component: {c!r}")
    taken = _all_names(c)
    mapping = []
    for role, name in domain:
        stem = f"{role}__{name}" if role != DUMMY_ROLE else f"_{name}"
        fresh = stem
        k = 0
        while fresh in taken:
            k += 1
            fresh = f"{stem}__{k}"
        taken.add(fresh)
        mapping.append(((role, name), fresh))
    return Gamma(tuple(mapping), tuple(fresh for _, fresh in mapping))


# ---------------------------------------------------------------------------
# Choreography encoding
# ---------------------------------------------------------------------------

def _binder_for_label(D, label: str):
    for d in D:
        if d.label == label:
            return d
    raise EncodingUndefined(f"no connection binder for label {label!r}")


def _binder_for_receiver(D, label: str, role: str):
    for d in D:
        if d.label == label and d.recv_role == role:
            return d
    raise EncodingUndefined(
        f"no connection binder for label {label!r} at role {role!r}")


def _reset_caches() -> None:
    """Drop every memoised encoding.  Required after swapping one of the
    seam functions below, which the cache keys cannot see."""
    for fn in (_encode_base, _encode_role_assignment, _encode_composite,
               encode_protocol, build_queues, fill_queues):
        fn.cache_clear()


def _com_sender(z_: str, u: str, cont: Process) -> Process:
    return In(z_, "a", Out(u, "a", cont))


def _com_receiver(u: str, w_: str, cont: Process) -> Process:
    return In(u, "a", Out(w_, "a", cont))


def _choice_sender(z_: str, u: str, left: Process, right: Process) -> Process:
    return Branch(z_, Out(u, INL, left), Out(u, INR, right))


def _choice_receiver(u: str, w_: str, left: Process,
                     right: Process) -> Process:
    return Branch(u, Out(w_, INL, left), Out(w_, INR, right))


@lru_cache(maxsize=1 << 14)
def encode_protocol(g: Protocol, role: str, D, gamma: Gamma) -> Process:
    """The monitor for one role of the protocol. Partial: raises
    EncodingUndefined when a side condition fails (e.g. a choice that an
    uninvolved role could observe)."""
    enc = encode_protocol
    match g:
        case Com(p, lbl, qs, cont):
            if role == p:
                d = _binder_for_label(D, lbl)
                return _com_sender(gamma(p, d.send_port), gamma(p, lbl),
                                   enc(cont, role, D, gamma))
            if role in qs:
                d = _binder_for_receiver(D, lbl, role)
                return _com_receiver(gamma(role, lbl),
                                     gamma(role, d.recv_port),
                                     enc(cont, role, D, gamma))
            return enc(cont, role, D, gamma)
        case TransitCom(lbl, _, pend, cont):
            if role in pend:
                d = _binder_for_receiver(D, lbl, role)
                return _com_receiver(gamma(role, lbl),
                                     gamma(role, d.recv_port),
                                     enc(cont, role, D, gamma))
            return enc(cont, role, D, gamma)
        case Choice(p, lbl, qs, g1, g2):
            if role == p:
                d = _binder_for_label(D, lbl)
                return _choice_sender(gamma(p, d.send_port), gamma(p, lbl),
                                      enc(g1, role, D, gamma),
                                      enc(g2, role, D, gamma))
            if role in qs:
                d = _binder_for_receiver(D, lbl, role)
                return _choice_receiver(gamma(role, lbl),
                                        gamma(role, d.recv_port),
                                        enc(g1, role, D, gamma),
                                        enc(g2, role, D, gamma))
            e1 = enc(g1, role, D, gamma)
            e2 = enc(g2, role, D, gamma)
            if e1 != e2:
                raise EncodingUndefined(
                    f"role {role!r} is not involved in the choice on "
                    f"{lbl!r} but the branch encodings differ")
            return e1
        case TransitChoice(lbl, v, pend, g1, g2):
            if role in pend:
                d = _binder_for_receiver(D, lbl, role)
                return _choice_receiver(gamma(role, lbl),
                                        gamma(role, d.recv_port),
                                        enc(g1, role, D, gamma),
                                        enc(g2, role, D, gamma))
            return enc(g1 if v == INL else g2, role, D, gamma)
        case Rec(x, body):
            if role in proto_roles(body):
                return RecP(x, enc(body, role, D, gamma))
            return NIL
        case PVar(x):
            return VarP(x)
        case End():
            return NIL
    raise TypeError(f"not a protocol: {g!r}")


# ---------------------------------------------------------------------------
# Monitor queues
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1 << 14)
def build_queues(D, gamma: Gamma) -> tuple[LocalBinder, ...]:
    """One identity queue per connection binder: reads the sender monitor's
    label port, feeds the receiver monitor's label port."""
    out = []
    for d in _served(D):
        src = gamma(d.send_role, d.label)
        dst = gamma(d.recv_role, d.label)
        fn = FnExpr((Param(src, None),), Name(src), None, "id")
        out.append(LocalBinder(dst, fn, ()))
    return tuple(out)


def _served(entries) -> tuple:
    """Connection entries a monitor queue serves; seam for fault drills."""
    return tuple(entries)


def _fill_append(L: tuple, gamma: Gamma, label: str, pend,
                 v: Value) -> tuple:
    binders = list(L)
    for q in _served(tuple(pend)):
        target = gamma(q, label)
        for i, b in enumerate(binders):
            if b.target == target:
                entry = store_from({b.fn.param_names[0]: v})
                binders[i] = LocalBinder(b.target, b.fn,
                                         b.queue + (entry,), span=b.span)
                break
        else:
            raise EncodingUndefined(
                f"no monitor queue for ({q!r}, {label!r})")
    return tuple(binders)


@lru_cache(maxsize=1 << 14)
def fill_queues(g: Protocol, L: tuple, gamma: Gamma) -> tuple:
    """Place the protocol's in-transit values in the monitor queues,
    outermost first so message order is preserved."""
    match g:
        case Com(_, _, _, cont):
            return fill_queues(cont, L, gamma)
        case TransitCom(lbl, v, pend, cont):
            return fill_queues(cont, _fill_append(L, gamma, lbl, pend, v),
                               gamma)
        case Choice(_, lbl, _, g1, g2):
            r1 = fill_queues(g1, L, gamma)
            r2 = fill_queues(g2, L, gamma)
            if r1 != r2:
                raise EncodingUndefined(
                    f"in-transit values differ between the branches of the "
                    f"choice on {lbl!r}")
            return r1
        case TransitChoice(lbl, v, pend, g1, g2):
            L2 = _fill_append(L, gamma, lbl, pend, v)
            return fill_queues(g1 if v == INL else g2, L2, gamma)
        case Rec(_, body):
            return fill_queues(body, L, gamma)
        case PVar(_) | End():
            return L
    raise TypeError(f"not a protocol: {g!r}")


# ---------------------------------------------------------------------------
# Component encoding
# ---------------------------------------------------------------------------

def encode_component(c: Component, strict_base_roles: bool = False) -> Process:
    match c:
        case Base():
            return _encode_base(c)
        case Composite():
            return _encode_composite(c, strict_base_roles)
    raise TypeError(f"not a component: {c!r}")


@lru_cache(maxsize=1 << 14)
def _encode_base(c: Base) -> Process:
    gamma = make_gamma(c)
    rn = {name: fresh for (_, name), fresh in gamma.mapping}
    box = QueueBox(
        tuple(c.binders),
        frozenset(c.inputs))
    box = _rename_box_ports(box, rn)
    body: Process = box
    for y in reversed(c.outputs):
        body = FwdOut(y, gamma(DUMMY_ROLE, y), body)
    for x in reversed(c.inputs):
        body = FwdIn(x, gamma(DUMMY_ROLE, x), body)
    return res(gamma.codomain, body)


@lru_cache(maxsize=1 << 14)
def _encode_role_assignment(role: str, sub: Component, gamma: Gamma,
                            strict: bool) -> Process:
    if strict and not isinstance(sub, Base):
        raise EncodingUndefined(
            f"role {role!r} is assigned a composite component")
    body = encode_component(sub, strict)
    for y in reversed(sub.outputs):
        body = FwdOut(gamma(role, y), y, body)
    for x in reversed(sub.inputs):
        body = FwdIn(gamma(role, x), x, body)
    return res(sub.inputs + sub.outputs, body)


@lru_cache(maxsize=1 << 14)
def _encode_composite(c: Composite, strict: bool) -> Process:
    gamma = make_gamma(c)
    members: list[Process] = []
    for role, sub in c.assignments:
        members.append(_encode_role_assignment(role, sub, gamma, strict))
    for role in sorted(proto_roles(c.protocol)):
        members.append(encode_protocol(c.protocol, role, c.connections,
                                       gamma))
    queues = fill_queues(c.protocol, build_queues(c.connections, gamma),
                         gamma)
    members.append(QueueBox(queues, frozenset()))
    body: Process = par(*members)
    outs = [f for f in c.forwarders if f.direction == "out"]
    ins = [f for f in c.forwarders if f.direction == "in"]
    for f in reversed(outs):
        body = FwdOut(f.external, gamma(c.interface_role, f.internal), body)
    for f in reversed(ins):
        body = FwdIn(f.external, gamma(c.interface_role, f.internal), body)
    return res(gamma.codomain, body)
