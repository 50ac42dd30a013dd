"""Structural well-formedness for components.

Checks, recursively on every composite and base in the tree:

1.  input and output ports are disjoint (IN_OUT_OVERLAP);
2.  binder targets are defined at most once (DUP_BINDER_TARGET), targets are
    output ports and parameters input ports (UNKNOWN_BINDER_PORT);
3.  protocol senders never appear among their receivers (SENDER_IN_RECEIVERS);
4.  forwarder external ports are distinct (DUP_FORWARDER_EXTERNAL);
5.  connection binders use each receiver port at most once (DUP_RECEIVER_PORT)
    and pair each sender port with a single label (SENDER_PORT_LABEL_CONFLICT);

plus the conditions the rest of the toolchain leans on: every protocol role
is assigned (UNASSIGNED_ROLE) and so is the interface role
(INTERFACE_ROLE_UNASSIGNED); every protocol label has a connection binder
(MISSING_BINDER_FOR_LABEL) and a payload type (MISSING_LABEL_TYPE); labels
name at most one protocol position per composite (DUP_PROTOCOL_LABEL);
protocol recursion is guarded (UNGUARDED_RECURSION); forwarders attach to
real interface-role ports of the right direction (UNKNOWN_FORWARDER_PORT)
and never to ports the protocol wiring also uses
(FORWARDER_CONNECTION_OVERLAP); connection binders attach to real ports of
the right direction on assigned components (UNKNOWN_BINDER_PORT); and the
port types implied by binders, label types, and forwarders agree
(PORT_TYPE_CONFLICT).

Violations come back sorted by source position; an empty list means ok.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .parser import port_types
from .syntax import (
    Base, Choice, Com, Component, Composite, End, Protocol, PVar, Rec, Span,
    TransitChoice, TransitCom, labels, roles,
)


@dataclass(frozen=True)
class WfViolation:
    code: str
    message: str
    span: Optional[Span]

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.code}: {self.message}"


def _sort_key(v: WfViolation):
    if v.span is None:
        return (1 << 30, 1 << 30, v.code)
    return (v.span.line, v.span.col, v.code)


def check_wf(c: Component) -> list[WfViolation]:
    out: list[WfViolation] = []
    _check(c, out)
    out.sort(key=_sort_key)
    return out


def _check(c: Component, out: list[WfViolation]) -> None:
    overlap = frozenset(c.inputs) & frozenset(c.outputs)
    for port in sorted(overlap):
        out.append(WfViolation(
            "IN_OUT_OVERLAP", f"port {port!r} is both an input and an output",
            c.span))

    match c:
        case Base():
            _check_base(c, out)
        case Composite():
            _check_composite(c, out)


def _check_base(c: Base, out: list[WfViolation]) -> None:
    seen: set[str] = set()
    ins, outs = frozenset(c.inputs), frozenset(c.outputs)
    for b in c.binders:
        if b.target in seen:
            out.append(WfViolation(
                "DUP_BINDER_TARGET",
                f"port {b.target!r} is defined by more than one binder",
                b.span))
        seen.add(b.target)
        if b.target not in outs:
            out.append(WfViolation(
                "UNKNOWN_BINDER_PORT",
                f"binder target {b.target!r} is not an output port", b.span))
        for p in b.fn.param_names:
            if p not in ins:
                out.append(WfViolation(
                    "UNKNOWN_BINDER_PORT",
                    f"binder parameter {p!r} is not an input port", b.span))


def _check_composite(c: Composite, out: list[WfViolation]) -> None:
    assigned = {r for r, _ in c.assignments}
    delta = c.label_type_map

    # protocol: senders vs receivers, label positions, guardedness
    _check_protocol(c.protocol, c, out)
    seen_labels: dict[str, int] = {}
    _count_label_positions(c.protocol, seen_labels)
    for lbl, n in sorted(seen_labels.items()):
        if n > 1:
            out.append(WfViolation(
                "DUP_PROTOCOL_LABEL",
                f"label {lbl!r} names {n} protocol positions", c.span))

    for r in sorted(roles(c.protocol) - assigned):
        out.append(WfViolation(
            "UNASSIGNED_ROLE", f"protocol role {r!r} has no component",
            c.span))
    if c.interface_role not in assigned:
        out.append(WfViolation(
            "INTERFACE_ROLE_UNASSIGNED",
            f"interface role {c.interface_role!r} has no component", c.span))

    bound_labels = {d.label for d in c.connections}
    for lbl in sorted(labels(c.protocol)):
        if lbl not in bound_labels:
            out.append(WfViolation(
                "MISSING_BINDER_FOR_LABEL",
                f"label {lbl!r} has no connection binder", c.span))
        if lbl not in delta:
            out.append(WfViolation(
                "MISSING_LABEL_TYPE", f"label {lbl!r} has no payload type",
                c.span))

    # connection binders: receiver ports once, sender port/label pairing,
    # ports present with the right direction
    recv_seen: set[tuple[str, str]] = set()
    send_label: dict[tuple[str, str], str] = {}
    sub = dict(c.assignments)
    for d in c.connections:
        if (d.recv_role, d.recv_port) in recv_seen:
            out.append(WfViolation(
                "DUP_RECEIVER_PORT",
                f"receiver port {d.recv_role}.{d.recv_port} is wired twice",
                d.span))
        recv_seen.add((d.recv_role, d.recv_port))
        key = (d.send_role, d.send_port)
        if key in send_label and send_label[key] != d.label:
            out.append(WfViolation(
                "SENDER_PORT_LABEL_CONFLICT",
                f"sender port {d.send_role}.{d.send_port} carries both "
                f"{send_label[key]!r} and {d.label!r}", d.span))
        send_label.setdefault(key, d.label)
        for role, port, want_in in ((d.recv_role, d.recv_port, True),
                                    (d.send_role, d.send_port, False)):
            comp = sub.get(role)
            if comp is None:
                out.append(WfViolation(
                    "UNASSIGNED_ROLE",
                    f"connection binder names unassigned role {role!r}",
                    d.span))
                continue
            ports = comp.inputs if want_in else comp.outputs
            if port not in ports:
                kind = "input" if want_in else "output"
                out.append(WfViolation(
                    "UNKNOWN_BINDER_PORT",
                    f"{role}.{port} is not an {kind} port", d.span))

    # forwarders
    ext_seen: set[str] = set()
    iface_comp = sub.get(c.interface_role)
    iface_conn_ports = {
        (d.recv_port if d.recv_role == c.interface_role else d.send_port)
        for d in c.connections
        if c.interface_role in (d.recv_role, d.send_role)}
    for f in c.forwarders:
        if f.external in ext_seen:
            out.append(WfViolation(
                "DUP_FORWARDER_EXTERNAL",
                f"external port {f.external!r} is forwarded twice", f.span))
        ext_seen.add(f.external)
        ext_ports = c.inputs if f.direction == "in" else c.outputs
        if f.external not in ext_ports:
            kind = "input" if f.direction == "in" else "output"
            out.append(WfViolation(
                "UNKNOWN_FORWARDER_PORT",
                f"{f.external!r} is not an interface {kind} port", f.span))
        if iface_comp is not None:
            int_ports = (iface_comp.inputs if f.direction == "in"
                         else iface_comp.outputs)
            if f.internal not in int_ports:
                kind = "input" if f.direction == "in" else "output"
                out.append(WfViolation(
                    "UNKNOWN_FORWARDER_PORT",
                    f"{f.internal!r} is not an {kind} port of the "
                    f"{c.interface_role!r} component", f.span))
        if f.internal in iface_conn_ports:
            out.append(WfViolation(
                "FORWARDER_CONNECTION_OVERLAP",
                f"port {f.internal!r} is both forwarded and wired by a "
                f"connection binder", f.span))

    # port types implied by binders vs label types
    for d in c.connections:
        want = delta.get(d.label)
        if want is None:
            continue
        for role, port in ((d.send_role, d.send_port),
                           (d.recv_role, d.recv_port)):
            comp = sub.get(role)
            if comp is None:
                continue
            have = port_types(comp).get(port)
            if have is not None and have is not want:
                out.append(WfViolation(
                    "PORT_TYPE_CONFLICT",
                    f"{role}.{port} has type {have} but label {d.label!r} "
                    f"carries {want}", d.span))

    for _, comp in c.assignments:
        _check(comp, out)


def _check_protocol(g: Protocol, c: Composite,
                    out: list[WfViolation]) -> None:
    match g:
        case Com(p, _, qs, cont):
            if p in qs:
                out.append(WfViolation(
                    "SENDER_IN_RECEIVERS",
                    f"role {p!r} sends to itself", g.span))
            _check_protocol(cont, c, out)
        case TransitCom(_, _, _, cont):
            _check_protocol(cont, c, out)
        case Choice(p, _, qs, l, r):
            if p in qs:
                out.append(WfViolation(
                    "SENDER_IN_RECEIVERS",
                    f"role {p!r} sends to itself", g.span))
            _check_protocol(l, c, out)
            _check_protocol(r, c, out)
        case TransitChoice(_, _, _, l, r):
            _check_protocol(l, c, out)
            _check_protocol(r, c, out)
        case Rec(x, body):
            if not _guarded(body, x):
                out.append(WfViolation(
                    "UNGUARDED_RECURSION",
                    f"recursion variable {x!r} is not guarded by a "
                    f"communication", g.span))
            _check_protocol(body, c, out)
        case PVar(_) | End():
            pass


def _guarded(g: Protocol, var: str) -> bool:
    """Is every occurrence of var in g under a communication prefix?"""
    match g:
        case Com(_, _, _, _) | Choice(_, _, _, _, _):
            return True
        case TransitCom(_, _, _, _) | TransitChoice(_, _, _, _, _):
            return True
        case Rec(x, body):
            return x == var or _guarded(body, var)
        case PVar(x):
            return x != var
        case End():
            return True
    raise TypeError(f"not a protocol: {g!r}")


def _count_label_positions(g: Protocol, acc: dict[str, int]) -> None:
    match g:
        case Com(_, lbl, _, cont) | TransitCom(lbl, _, _, cont):
            acc[lbl] = acc.get(lbl, 0) + 1
            _count_label_positions(cont, acc)
        case Choice(_, lbl, _, l, r) | TransitChoice(lbl, _, _, l, r):
            acc[lbl] = acc.get(lbl, 0) + 1
            _count_label_positions(l, acc)
            _count_label_positions(r, acc)
        case Rec(_, body):
            _count_label_positions(body, acc)
        case PVar(_) | End():
            pass
