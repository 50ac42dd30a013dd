"""Local types for component interfaces.

A local type records the behaviour a component owes on its ports:
outputs ``!y(B)``, inputs ``?x(B)``, selection ``+y(T1, T2)``,
branching ``&x(T1, T2)``, recursion ``mu X. T`` and ``end``.  The type
of a composite's interface role comes in two halves — the projection of
the governing protocol onto that role, and the declared external type
renamed through the forwarders — glued together by the merge relation.

Recursive types are identified up to renaming of bound variables;
:func:`alpha` computes the canonical representative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .syntax import (
    INL,
    INR,
    BaseType,
    Choice,
    Com,
    ConnectionBinder,
    Forwarder,
    InL,
    InlV,
    InrV,
    OutL,
    Protocol,
    PVar,
    Rec,
    TransitChoice,
    TransitCom,
    Value,
    roles,
    type_of,
)


# ---------------------------------------------------------------------------
# Syntax


@dataclass(frozen=True)
class TOut:
    """Output of a base value: ``!y(B).T``."""

    port: str
    btype: BaseType
    cont: "LocalType"


@dataclass(frozen=True)
class TInp:
    """Input of a base value: ``?x(B).T``."""

    port: str
    btype: BaseType
    cont: "LocalType"


@dataclass(frozen=True)
class TChoice:
    """Selection output: ``+y(T1, T2)`` — emit inl and follow T1, or inr and T2."""

    port: str
    left: "LocalType"
    right: "LocalType"


@dataclass(frozen=True)
class TBranch:
    """Branching input: ``&x(T1, T2)`` — offer both continuations."""

    port: str
    left: "LocalType"
    right: "LocalType"


@dataclass(frozen=True)
class TRec:
    var: str
    body: "LocalType"


@dataclass(frozen=True)
class TVar:
    var: str


@dataclass(frozen=True)
class TEnd:
    pass


LocalType = Union[TOut, TInp, TChoice, TBranch, TRec, TVar, TEnd]

TEND = TEnd()


def fv(t: LocalType) -> frozenset[str]:
    """Free recursion variables of ``t``."""
    match t:
        case TOut(_, _, cont) | TInp(_, _, cont):
            return fv(cont)
        case TChoice(_, left, right) | TBranch(_, left, right):
            return fv(left) | fv(right)
        case TRec(var, body):
            return fv(body) - {var}
        case TVar(var):
            return frozenset({var})
        case _:
            return frozenset()


def ports(t: LocalType) -> frozenset[str]:
    """All port names used by ``t``."""
    match t:
        case TOut(port, _, cont) | TInp(port, _, cont):
            return ports(cont) | {port}
        case TChoice(port, left, right) | TBranch(port, left, right):
            return ports(left) | ports(right) | {port}
        case TRec(_, body):
            return ports(body)
        case _:
            return frozenset()


def subst_type(t: LocalType, var: str, repl: LocalType) -> LocalType:
    """Substitute ``repl`` for free occurrences of ``var`` in ``t``."""
    match t:
        case TOut(port, btype, cont):
            return TOut(port, btype, subst_type(cont, var, repl))
        case TInp(port, btype, cont):
            return TInp(port, btype, subst_type(cont, var, repl))
        case TChoice(port, left, right):
            return TChoice(port, subst_type(left, var, repl), subst_type(right, var, repl))
        case TBranch(port, left, right):
            return TBranch(port, subst_type(left, var, repl), subst_type(right, var, repl))
        case TRec(v, body):
            if v == var:
                return t
            return TRec(v, subst_type(body, var, repl))
        case TVar(v):
            return repl if v == var else t
        case _:
            return t


def unfold(t: TRec) -> LocalType:
    return subst_type(t.body, t.var, t)


def alpha(t: LocalType) -> LocalType:
    """Canonical representative of ``t`` up to bound-variable renaming.

    Bound variables become X0, X1, ... in traversal order; free
    variables keep their names.
    """
    counter = 0

    def go(t: LocalType, env: dict[str, str]) -> LocalType:
        nonlocal counter
        match t:
            case TOut(port, btype, cont):
                return TOut(port, btype, go(cont, env))
            case TInp(port, btype, cont):
                return TInp(port, btype, go(cont, env))
            case TChoice(port, left, right):
                return TChoice(port, go(left, env), go(right, env))
            case TBranch(port, left, right):
                return TBranch(port, go(left, env), go(right, env))
            case TRec(var, body):
                fresh = f"X{counter}"
                counter += 1
                return TRec(fresh, go(body, {**env, var: fresh}))
            case TVar(var):
                return TVar(env.get(var, var))
            case _:
                return t

    return go(t, {})


def contractive(t: LocalType) -> bool:
    """True when every recursion variable is guarded by a prefix."""

    def go(t: LocalType, pending: frozenset[str]) -> bool:
        match t:
            case TOut(_, _, cont) | TInp(_, _, cont):
                return go(cont, frozenset())
            case TChoice(_, left, right) | TBranch(_, left, right):
                return go(left, frozenset()) and go(right, frozenset())
            case TRec(var, body):
                return go(body, pending | {var})
            case TVar(var):
                return var not in pending
            case _:
                return True

    return go(t, frozenset())


# ---------------------------------------------------------------------------
# Concrete syntax


def pretty_type(t: LocalType) -> str:
    match t:
        case TOut(port, btype, cont):
            return f"!{port}({btype}).{pretty_type(cont)}"
        case TInp(port, btype, cont):
            return f"?{port}({btype}).{pretty_type(cont)}"
        case TChoice(port, left, right):
            return f"+{port}({pretty_type(left)}, {pretty_type(right)})"
        case TBranch(port, left, right):
            return f"&{port}({pretty_type(left)}, {pretty_type(right)})"
        case TRec(var, body):
            return f"mu {var}. {pretty_type(body)}"
        case TVar(var):
            return var
        case _:
            return "end"


class TypeParseError(ValueError):
    pass


_TYPE_TOKEN = re.compile(r"(mu\b|end\b|[A-Za-z_][A-Za-z0-9_']*|[!?+&().,])|(\s+)|(.)")


def _tokenize_type(text: str) -> list[str]:
    out = []
    for m in _TYPE_TOKEN.finditer(text):
        if m.group(3):
            raise TypeParseError(f"stray character {m.group(3)!r} in type")
        if m.group(1):
            out.append(m.group(1))
    return out


class _TypeParser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise TypeParseError("unexpected end of type")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise TypeParseError(f"expected {tok!r}, found {got!r}")

    def ident(self) -> str:
        tok = self.next()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", tok) or tok in ("mu", "end"):
            raise TypeParseError(f"expected a name, found {tok!r}")
        return tok

    def base(self) -> BaseType:
        tok = self.next()
        try:
            return BaseType(tok)
        except ValueError:
            raise TypeParseError(f"unknown base type {tok!r}") from None

    def type(self) -> LocalType:
        tok = self.next()
        if tok == "end":
            return TEND
        if tok == "mu":
            var = self.ident()
            self.expect(".")
            return TRec(var, self.type())
        if tok in ("!", "?"):
            port = self.ident()
            self.expect("(")
            btype = self.base()
            self.expect(")")
            self.expect(".")
            cont = self.type()
            return TOut(port, btype, cont) if tok == "!" else TInp(port, btype, cont)
        if tok in ("+", "&"):
            port = self.ident()
            self.expect("(")
            left = self.type()
            self.expect(",")
            right = self.type()
            self.expect(")")
            return TChoice(port, left, right) if tok == "+" else TBranch(port, left, right)
        return TVar(tok) if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", tok) else self._bad(tok)

    def _bad(self, tok: str) -> LocalType:
        raise TypeParseError(f"unexpected {tok!r} in type")


def parse_type(text: str) -> LocalType:
    """Parse the written form of a local type.

    Grammar: ``!y(B).T  ?x(B).T  +y(T, T)  &x(T, T)  mu X. T  X  end``
    with base types Int, Str, Bool and Cho.
    """
    p = _TypeParser(_tokenize_type(text))
    t = p.type()
    if p.peek() is not None:
        raise TypeParseError(f"trailing input after type: {p.peek()!r}")
    if not contractive(t):
        raise TypeParseError("unguarded recursion in type")
    if fv(t):
        raise TypeParseError(f"unbound recursion variable {sorted(fv(t))[0]!r}")
    return t


# ---------------------------------------------------------------------------
# Semantics

Domains = Mapping[BaseType, tuple[Value, ...]]


def type_transitions(t: LocalType, domains: Domains) -> tuple[tuple[object, LocalType], ...]:
    """The labelled transitions of ``t``, with values drawn from ``domains``."""
    match t:
        case TOut(port, btype, cont):
            return tuple((OutL(port, v), cont) for v in domains[btype])
        case TInp(port, btype, cont):
            return tuple((InL(port, v), cont) for v in domains[btype])
        case TChoice(port, left, right):
            return ((OutL(port, INL), left), (OutL(port, INR), right))
        case TBranch(port, left, right):
            return ((InL(port, INL), left), (InL(port, INR), right))
        case TRec(_, _):
            return type_transitions(unfold(t), domains)
        case _:
            return ()


def type_step(t: LocalType, label: object) -> Optional[LocalType]:
    """The successor of ``t`` under ``label``, or None if there is none."""
    match t:
        case TOut(port, btype, cont):
            if isinstance(label, OutL) and label.port == port and type_of(label.value) == btype:
                return cont
        case TInp(port, btype, cont):
            if isinstance(label, InL) and label.port == port and type_of(label.value) == btype:
                return cont
        case TChoice(port, left, right):
            if isinstance(label, OutL) and label.port == port:
                if isinstance(label.value, InlV):
                    return left
                if isinstance(label.value, InrV):
                    return right
        case TBranch(port, left, right):
            if isinstance(label, InL) and label.port == port:
                if isinstance(label.value, InlV):
                    return left
                if isinstance(label.value, InrV):
                    return right
        case TRec(_, _):
            return type_step(unfold(t), label)
    return None


# ---------------------------------------------------------------------------
# Projection


class ProjectionUndefined(Exception):
    """The protocol has no projection onto the requested role."""


def _binder_for_label(connections: tuple[ConnectionBinder, ...], label: str) -> ConnectionBinder:
    for cb in connections:
        if cb.label == label:
            return cb
    raise ProjectionUndefined(f"no connection binder for label {label!r}")


def _binder_for_receiver(
    connections: tuple[ConnectionBinder, ...], label: str, role: str
) -> ConnectionBinder:
    for cb in connections:
        if cb.label == label and cb.recv_role == role:
            return cb
    raise ProjectionUndefined(f"no connection binder for label {label!r} towards role {role!r}")


def project(
    g: Protocol,
    role: str,
    connections: tuple[ConnectionBinder, ...],
    label_types: Mapping[str, BaseType],
) -> LocalType:
    """Project protocol ``g`` onto ``role``.

    The connection binders name the ports the role communicates on; the
    label-type map gives the payload sorts.  Raises
    :class:`ProjectionUndefined` when the protocol does not determine a
    single local behaviour for the role.
    """

    def delta(label: str) -> BaseType:
        try:
            return label_types[label]
        except KeyError:
            raise ProjectionUndefined(f"no payload type for label {label!r}") from None

    def go(g: Protocol) -> LocalType:
        match g:
            case Com(sender, label, receivers, cont):
                if role == sender:
                    cb = _binder_for_label(connections, label)
                    return TOut(cb.send_port, delta(label), go(cont))
                if role in receivers:
                    cb = _binder_for_receiver(connections, label, role)
                    return TInp(cb.recv_port, delta(label), go(cont))
                return go(cont)
            case TransitCom(label, value, pending, cont):
                if role in pending:
                    cb = _binder_for_receiver(connections, label, role)
                    return TInp(cb.recv_port, type_of(value), go(cont))
                return go(cont)
            case Choice(sender, label, receivers, left, right):
                if role == sender:
                    cb = _binder_for_label(connections, label)
                    return TChoice(cb.send_port, go(left), go(right))
                if role in receivers:
                    cb = _binder_for_receiver(connections, label, role)
                    return TBranch(cb.recv_port, go(left), go(right))
                tl, tr = go(left), go(right)
                if alpha(tl) != alpha(tr):
                    raise ProjectionUndefined(
                        f"role {role!r} is not told the outcome of label {label!r} "
                        "but behaves differently in the two branches"
                    )
                return tl
            case TransitChoice(label, value, pending, left, right):
                if role in pending:
                    if not isinstance(value, (InlV, InrV)):
                        raise ProjectionUndefined(
                            f"pending choice on label {label!r} carries a non-selection value"
                        )
                    cb = _binder_for_receiver(connections, label, role)
                    return TBranch(cb.recv_port, go(left), go(right))
                return go(left if isinstance(value, InlV) else right)
            case Rec(var, body):
                if role in roles(body):
                    return TRec(var, go(body))
                return TEND
            case PVar(var):
                return TVar(var)
            case _:
                return TEND

    return go(g)


# ---------------------------------------------------------------------------
# Merge


class MergeCapExceeded(Exception):
    """The merge produced more candidates than the configured cap."""


def _var_names(t: LocalType) -> frozenset[str]:
    match t:
        case TOut(_, _, cont) | TInp(_, _, cont):
            return _var_names(cont)
        case TChoice(_, left, right) | TBranch(_, left, right):
            return _var_names(left) | _var_names(right)
        case TRec(var, body):
            return _var_names(body) | {var}
        case TVar(var):
            return frozenset({var})
        case _:
            return frozenset()


def _avoid_var(t: LocalType, name: str) -> LocalType:
    """Rename bound variables of ``t`` so none is called ``name``."""
    if name not in _var_names(t):
        return t
    taken = _var_names(t) | {name}

    def go(t: LocalType) -> LocalType:
        match t:
            case TOut(port, btype, cont):
                return TOut(port, btype, go(cont))
            case TInp(port, btype, cont):
                return TInp(port, btype, go(cont))
            case TChoice(port, left, right):
                return TChoice(port, go(left), go(right))
            case TBranch(port, left, right):
                return TBranch(port, go(left), go(right))
            case TRec(var, body):
                if var == name:
                    fresh = var + "'"
                    while fresh in taken:
                        fresh += "'"
                    return TRec(fresh, go(subst_type(body, var, TVar(fresh))))
                return TRec(var, go(body))
            case _:
                return t

    return go(t)


def merge_all(
    t1: LocalType, t2: LocalType, cap: int = 4096, unfolds: int = 1
) -> frozenset[LocalType]:
    """All merges of ``t1`` and ``t2``.

    The merge interleaves the two behaviours; a branching on one side
    absorbs the other side into both continuations, and ``end`` is the
    unit on closed types.  Two recursions merge by aligning their loops
    directly; a recursion may also be unfolded, at most ``unfolds``
    times per side, with the unfolded round flushed ahead of the other
    side, so that loops knocked out of phase by an already-consumed
    prefix can realign.  Only defined when the two types use disjoint
    ports — otherwise the set is empty.  Raises
    :class:`MergeCapExceeded` when an intermediate result set grows
    past ``cap``.
    """
    if ports(t1) & ports(t2):
        return frozenset()
    memo: dict[
        tuple[LocalType, LocalType, int, int], frozenset[LocalType]
    ] = {}
    unfoldable = (TOut, TInp, TChoice, TBranch, TRec)

    def graft(t: LocalType, at_leaf) -> frozenset[LocalType]:
        # Copy one unfolded round verbatim, merging only past its leaves.
        if isinstance(t, TOut):
            return frozenset(
                TOut(t.port, t.btype, m) for m in graft(t.cont, at_leaf)
            )
        if isinstance(t, TInp):
            return frozenset(
                TInp(t.port, t.btype, m) for m in graft(t.cont, at_leaf)
            )
        if isinstance(t, TChoice):
            return frozenset(
                TChoice(t.port, ml, mr)
                for ml in graft(t.left, at_leaf)
                for mr in graft(t.right, at_leaf)
            )
        if isinstance(t, TBranch):
            return frozenset(
                TBranch(t.port, ml, mr)
                for ml in graft(t.left, at_leaf)
                for mr in graft(t.right, at_leaf)
            )
        return at_leaf(t)

    def go(a: LocalType, b: LocalType, ka: int, kb: int) -> frozenset[LocalType]:
        # Terminates: every recursion either spends unfold budget or
        # strictly shrinks a/b while keeping the budget.
        key = (a, b, ka, kb)
        if key in memo:
            return memo[key]
        out: set[LocalType] = set()
        if isinstance(a, TEnd) and not fv(b):
            out.add(b)
        if isinstance(b, TEnd) and not fv(a):
            out.add(a)
        if isinstance(a, TOut):
            out |= {TOut(a.port, a.btype, m) for m in go(a.cont, b, ka, kb)}
        if isinstance(b, TOut):
            out |= {TOut(b.port, b.btype, m) for m in go(a, b.cont, ka, kb)}
        if isinstance(a, TInp):
            out |= {TInp(a.port, a.btype, m) for m in go(a.cont, b, ka, kb)}
        if isinstance(b, TInp):
            out |= {TInp(b.port, b.btype, m) for m in go(a, b.cont, ka, kb)}
        if isinstance(a, TChoice):
            out |= {
                TChoice(a.port, ml, mr)
                for ml in go(a.left, b, ka, kb)
                for mr in go(a.right, b, ka, kb)
            }
        if isinstance(b, TChoice):
            out |= {
                TChoice(b.port, ml, mr)
                for ml in go(a, b.left, ka, kb)
                for mr in go(a, b.right, ka, kb)
            }
        if isinstance(a, TBranch):
            out |= {
                TBranch(a.port, ml, mr)
                for ml in go(a.left, b, ka, kb)
                for mr in go(a.right, b, ka, kb)
            }
        if isinstance(b, TBranch):
            out |= {
                TBranch(b.port, ml, mr)
                for ml in go(a, b.left, ka, kb)
                for mr in go(a, b.right, ka, kb)
            }
        if isinstance(a, TRec) and isinstance(b, TRec):
            if a.var == b.var:
                body2 = b.body
            else:
                body2 = subst_type(_avoid_var(b.body, a.var), b.var, TVar(a.var))
            out |= {TRec(a.var, m) for m in go(a.body, body2, ka, kb)}
        if isinstance(a, TRec) and isinstance(b, unfoldable) and ka > 0:
            out |= graft(unfold(a), lambda t: go(t, b, ka - 1, kb))
        if isinstance(b, TRec) and isinstance(a, unfoldable) and kb > 0:
            out |= graft(unfold(b), lambda t: go(a, t, ka, kb - 1))
        if isinstance(a, TVar) and isinstance(b, TVar) and a.var == b.var:
            out.add(a)
        if len(out) > cap:
            raise MergeCapExceeded(
                f"merge produced more than {cap} candidates"
            )
        result = frozenset(out)
        memo[key] = result
        return result

    return go(t1, t2, unfolds, unfolds)


# ---------------------------------------------------------------------------
# Forwarder renaming and the interface check


class RenameUndefined(Exception):
    """The declared external type does not fit the forwarders."""


def rename_forward(
    t: LocalType,
    forwarders: tuple[Forwarder, ...],
    inputs: tuple[str, ...],
    outputs: tuple[str, ...],
) -> LocalType:
    """Rename the external ports of ``t`` to the interface role's own.

    Each input port of ``t`` must be a composite input with an inward
    forwarder, and dually for outputs; the result speaks about the
    internal ports those forwarders connect to.
    """
    fin = {f.external: f.internal for f in forwarders if f.direction == "in"}
    fout = {f.external: f.internal for f in forwarders if f.direction == "out"}

    def inward(port: str) -> str:
        if port not in inputs:
            raise RenameUndefined(f"{port!r} is not a composite input")
        if port not in fin:
            raise RenameUndefined(f"no inward forwarder for {port!r}")
        return fin[port]

    def outward(port: str) -> str:
        if port not in outputs:
            raise RenameUndefined(f"{port!r} is not a composite output")
        if port not in fout:
            raise RenameUndefined(f"no outward forwarder for {port!r}")
        return fout[port]

    def go(t: LocalType) -> LocalType:
        match t:
            case TOut(port, btype, cont):
                return TOut(outward(port), btype, go(cont))
            case TInp(port, btype, cont):
                return TInp(inward(port), btype, go(cont))
            case TChoice(port, left, right):
                return TChoice(outward(port), go(left), go(right))
            case TBranch(port, left, right):
                return TBranch(inward(port), go(left), go(right))
            case TRec(var, body):
                return TRec(var, go(body))
            case _:
                return t

    return go(t)


def interface_check(
    inputs: tuple[str, ...], outputs: tuple[str, ...], t: LocalType
) -> bool:
    """True when ``t`` only inputs on ``inputs`` and outputs on ``outputs``."""
    match t:
        case TOut(port, _, cont):
            return port in outputs and interface_check(inputs, outputs, cont)
        case TInp(port, _, cont):
            return port in inputs and interface_check(inputs, outputs, cont)
        case TChoice(port, left, right):
            return (
                port in outputs
                and interface_check(inputs, outputs, left)
                and interface_check(inputs, outputs, right)
            )
        case TBranch(port, left, right):
            return (
                port in inputs
                and interface_check(inputs, outputs, left)
                and interface_check(inputs, outputs, right)
            )
        case TRec(_, body):
            return interface_check(inputs, outputs, body)
        case _:
            return True
