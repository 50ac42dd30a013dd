"""Abstract syntax for GC: values, expressions, components, protocols.

Components are either *base* (an interface plus a list of local binders, each
carrying a runtime queue of partial stores) or *composite* (an interface, a set
of sub-components assigned to protocol roles, connection binders wiring ports
to message labels, and forwarders linking the interface to one distinguished
interface role).

All nodes are immutable and hashable so that semantic states can live in
visited sets. Source spans are carried for diagnostics but never participate
in equality or hashing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Optional, Union


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _span_field() -> object:
    return field(default=None, compare=False, repr=False)


def memo_hash(cls):
    """Cache structural hashes per node.

    States are deep trees that land in visited sets and memo tables
    constantly; the generated dataclass hash walks the whole tree on
    every call, which dominates exploration otherwise."""
    gen = cls.__hash__

    def __hash__(self):
        h = self.__dict__.get("_hashmemo")
        if h is None:
            h = gen(self)
            object.__setattr__(self, "_hashmemo", h)
        return h

    cls.__hash__ = __hash__
    return cls


# ---------------------------------------------------------------------------
# Base types and values
# ---------------------------------------------------------------------------

class BaseType(enum.Enum):
    INT = "Int"
    STR = "Str"
    BOOL = "Bool"
    CHO = "Cho"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class IntV:
    value: int


@dataclass(frozen=True)
class StrV:
    value: str


@dataclass(frozen=True)
class BoolV:
    value: bool


@dataclass(frozen=True)
class InlV:
    pass


@dataclass(frozen=True)
class InrV:
    pass


@dataclass(frozen=True)
class HoleV:
    """Placeholder for the value slot of a symbolic transition.

    A transition whose label quantifies over an incoming value is returned
    with every occurrence of the value replaced by a hole; `instantiate`
    substitutes a concrete value uniformly. Holes never occur in source
    programs or in explored states.
    """

    btype: Optional[BaseType]


Value = Union[IntV, StrV, BoolV, InlV, InrV, HoleV]

INL = InlV()
INR = InrV()


def type_of(v: Value) -> BaseType:
    match v:
        case IntV():
            return BaseType.INT
        case StrV():
            return BaseType.STR
        case BoolV():
            return BaseType.BOOL
        case InlV() | InrV():
            return BaseType.CHO
        case HoleV(btype):
            raise ValueError("symbolic hole has no ground type" if btype is None
                             else f"symbolic hole of type {btype} is not a ground value")
    raise TypeError(f"not a value: {v!r}")


def pretty_value(v: Value) -> str:
    match v:
        case IntV(n):
            return str(n)
        case StrV(s):
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'
        case BoolV(b):
            return "true" if b else "false"
        case InlV():
            return "inl"
        case InrV():
            return "inr"
        case HoleV(t):
            return f"?{t}" if t is not None else "?"
    raise TypeError(f"not a value: {v!r}")


def value_sort_key(v: Value) -> tuple:
    """A total order on values, used for deterministic scheduling."""
    match v:
        case IntV(n):
            return (0, n, "")
        case StrV(s):
            return (1, 0, s)
        case BoolV(b):
            return (2, int(b), "")
        case InlV():
            return (3, 0, "")
        case InrV():
            return (3, 1, "")
        case HoleV(_):
            return (4, 0, "")
    raise TypeError(f"not a value: {v!r}")


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class ExprTypeError(Exception):
    pass


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Unary:
    op: str  # "not" | "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * < <= > >= == != and or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Cond:
    test: "Expr"
    then: "Expr"
    orelse: "Expr"


Expr = Union[Lit, Name, Unary, Binary, Cond]

_ARITH = {"+", "-", "*"}
_CMP = {"<", "<=", ">", ">="}
_EQ = {"==", "!="}
_BOOL = {"and", "or"}


def expr_type(e: Expr, env: Mapping[str, BaseType]) -> BaseType:
    """Type of a closed, fully annotated expression. Raises ExprTypeError."""
    match e:
        case Lit(v):
            return type_of(v)
        case Name(x):
            if x not in env:
                raise ExprTypeError(f"unbound name {x!r} in expression")
            return env[x]
        case Unary("not", a):
            if expr_type(a, env) is not BaseType.BOOL:
                raise ExprTypeError("'not' expects a Bool operand")
            return BaseType.BOOL
        case Unary("-", a):
            if expr_type(a, env) is not BaseType.INT:
                raise ExprTypeError("unary '-' expects an Int operand")
            return BaseType.INT
        case Binary(op, l, r) if op in _ARITH:
            if expr_type(l, env) is not BaseType.INT or expr_type(r, env) is not BaseType.INT:
                raise ExprTypeError(f"'{op}' expects Int operands")
            return BaseType.INT
        case Binary(op, l, r) if op in _CMP:
            if expr_type(l, env) is not BaseType.INT or expr_type(r, env) is not BaseType.INT:
                raise ExprTypeError(f"'{op}' expects Int operands")
            return BaseType.BOOL
        case Binary(op, l, r) if op in _EQ:
            tl, tr = expr_type(l, env), expr_type(r, env)
            if tl is not tr:
                raise ExprTypeError(f"'{op}' expects operands of one type, got {tl} and {tr}")
            return BaseType.BOOL
        case Binary(op, l, r) if op in _BOOL:
            if expr_type(l, env) is not BaseType.BOOL or expr_type(r, env) is not BaseType.BOOL:
                raise ExprTypeError(f"'{op}' expects Bool operands")
            return BaseType.BOOL
        case Cond(c, t, o):
            if expr_type(c, env) is not BaseType.BOOL:
                raise ExprTypeError("conditional test must be Bool")
            tt, to = expr_type(t, env), expr_type(o, env)
            if tt is not to:
                raise ExprTypeError(f"conditional branches disagree: {tt} vs {to}")
            return tt
    raise ExprTypeError(f"malformed expression: {e!r}")


def expr_names(e: Expr) -> frozenset[str]:
    match e:
        case Lit(_):
            return frozenset()
        case Name(x):
            return frozenset((x,))
        case Unary(_, a):
            return expr_names(a)
        case Binary(_, l, r):
            return expr_names(l) | expr_names(r)
        case Cond(c, t, o):
            return expr_names(c) | expr_names(t) | expr_names(o)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Local binders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    name: str
    btype: Optional[BaseType]  # None only for internal dynamically-typed binders


@memo_hash
@dataclass(frozen=True)
class FnExpr:
    """A first-order function: ordered parameters, a total body, a return type.

    Parsed binders always carry concrete parameter and return types; the body
    has been checked against them. A return type of None marks an internal
    identity used for coordination queues, which is never surface syntax.
    """

    params: tuple[Param, ...]
    body: Expr
    return_type: Optional[BaseType]
    name: Optional[str] = None

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)


# A store is a partial map from ports to values, kept sorted by port so that
# equal stores are structurally equal.
Store = tuple[tuple[str, Value], ...]

EMPTY_STORE: Store = ()


def store_from(m: Mapping[str, Value]) -> Store:
    return tuple(sorted(m.items()))


def store_get(s: Store, port: str) -> Optional[Value]:
    for k, v in s:
        if k == port:
            return v
    return None


def store_has(s: Store, port: str) -> bool:
    return any(k == port for k, _ in s)


def store_set(s: Store, port: str, v: Value) -> Store:
    out = [(k, u) for k, u in s if k != port]
    out.append((port, v))
    return tuple(sorted(out))


def store_dom(s: Store) -> frozenset[str]:
    return frozenset(k for k, _ in s)


@memo_hash
@dataclass(frozen=True)
class LocalBinder:
    """`target <= fn(params)` together with its runtime queue of stores.

    Queue discipline: for every port x, the set of queue positions whose store
    defines x is a prefix of the queue. The earliest store is the head; outputs
    evaluate and pop the head once it defines every parameter.
    """

    target: str
    fn: FnExpr
    queue: tuple[Store, ...] = ()
    span: Optional[Span] = _span_field()


def binder_queue_wellformed(b: LocalBinder) -> bool:
    for x in b.fn.param_names:
        seen_gap = False
        for s in b.queue:
            if store_has(s, x):
                if seen_gap:
                    return False
            else:
                seen_gap = True
    return True


def binder_ports(b: LocalBinder) -> frozenset[str]:
    return frozenset((b.target, *b.fn.param_names))


# ---------------------------------------------------------------------------
# Protocols
# ---------------------------------------------------------------------------

@memo_hash
@dataclass(frozen=True)
class Com:
    sender: str
    label: str
    receivers: tuple[str, ...]
    cont: "Protocol"
    span: Optional[Span] = _span_field()


@memo_hash
@dataclass(frozen=True)
class Choice:
    sender: str
    label: str
    receivers: tuple[str, ...]
    left: "Protocol"
    right: "Protocol"
    span: Optional[Span] = _span_field()


@memo_hash
@dataclass(frozen=True)
class Rec:
    var: str
    body: "Protocol"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class PVar:
    var: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class End:
    span: Optional[Span] = _span_field()


@memo_hash
@dataclass(frozen=True)
class TransitCom:
    """A value in transit: sent, not yet consumed by every pending receiver."""

    label: str
    value: Value
    pending: tuple[str, ...]
    cont: "Protocol"


@memo_hash
@dataclass(frozen=True)
class TransitChoice:
    """A selection in transit; `value` is inl or inr and commits the branch."""

    label: str
    value: Value
    pending: tuple[str, ...]
    left: "Protocol"
    right: "Protocol"


Protocol = Union[Com, Choice, Rec, PVar, End, TransitCom, TransitChoice]

END = End()


def roles(g: Protocol) -> frozenset[str]:
    """Roles occurring in g (senders, receivers, pending receivers)."""
    match g:
        case Com(p, _, qs, cont):
            return frozenset((p, *qs)) | roles(cont)
        case Choice(p, _, qs, l, r):
            return frozenset((p, *qs)) | roles(l) | roles(r)
        case Rec(_, body):
            return roles(body)
        case PVar(_) | End():
            return frozenset()
        case TransitCom(_, _, pend, cont):
            return frozenset(pend) | roles(cont)
        case TransitChoice(_, _, pend, l, r):
            return frozenset(pend) | roles(l) | roles(r)
    raise TypeError(f"not a protocol: {g!r}")


def labels(g: Protocol) -> frozenset[str]:
    match g:
        case Com(_, lbl, _, cont):
            return frozenset((lbl,)) | labels(cont)
        case Choice(_, lbl, _, l, r):
            return frozenset((lbl,)) | labels(l) | labels(r)
        case Rec(_, body):
            return labels(body)
        case PVar(_) | End():
            return frozenset()
        case TransitCom(lbl, _, _, cont):
            return frozenset((lbl,)) | labels(cont)
        case TransitChoice(lbl, _, _, l, r):
            return frozenset((lbl,)) | labels(l) | labels(r)
    raise TypeError(f"not a protocol: {g!r}")


def protocol_is_surface(g: Protocol) -> bool:
    """True when g contains no in-transit runtime forms."""
    match g:
        case Com(_, _, _, cont):
            return protocol_is_surface(cont)
        case Choice(_, _, _, l, r):
            return protocol_is_surface(l) and protocol_is_surface(r)
        case Rec(_, body):
            return protocol_is_surface(body)
        case PVar(_) | End():
            return True
        case TransitCom(_, _, _, _) | TransitChoice(_, _, _, _, _):
            return False
    raise TypeError(f"not a protocol: {g!r}")


def subst_protocol(g: Protocol, var: str, repl: Protocol) -> Protocol:
    match g:
        case Com(p, lbl, qs, cont):
            return Com(p, lbl, qs, subst_protocol(cont, var, repl))
        case Choice(p, lbl, qs, l, r):
            return Choice(p, lbl, qs, subst_protocol(l, var, repl),
                          subst_protocol(r, var, repl))
        case Rec(x, body):
            if x == var:
                return g
            return Rec(x, subst_protocol(body, var, repl))
        case PVar(x):
            return repl if x == var else g
        case End():
            return g
        case TransitCom(lbl, v, pend, cont):
            return TransitCom(lbl, v, pend, subst_protocol(cont, var, repl))
        case TransitChoice(lbl, v, pend, l, r):
            return TransitChoice(lbl, v, pend, subst_protocol(l, var, repl),
                                 subst_protocol(r, var, repl))
    raise TypeError(f"not a protocol: {g!r}")


def normalize_protocol_vars(g: Protocol) -> Protocol:
    """Rename recursion binders to X0, X1, ... in traversal order.

    Equality on protocols is structural; parsing normalizes binder names so
    alpha-variants coincide.
    """
    counter = [0]

    def walk(t: Protocol, env: dict[str, str]) -> Protocol:
        match t:
            case Com(p, lbl, qs, cont):
                return Com(p, lbl, qs, walk(cont, env), span=t.span)
            case Choice(p, lbl, qs, l, r):
                return Choice(p, lbl, qs, walk(l, env), walk(r, env),
                              span=t.span)
            case Rec(x, body):
                fresh = f"X{counter[0]}"
                counter[0] += 1
                return Rec(fresh, walk(body, {**env, x: fresh}), span=t.span)
            case PVar(x):
                return PVar(env.get(x, x), span=t.span)
            case End():
                return t
            case TransitCom(lbl, v, pend, cont):
                return TransitCom(lbl, v, pend, walk(cont, env))
            case TransitChoice(lbl, v, pend, l, r):
                return TransitChoice(lbl, v, pend, walk(l, env), walk(r, env))
        raise TypeError(f"not a protocol: {t!r}")

    return walk(g, {})


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionBinder:
    """`label @ recv_role.recv_port <- send_role.send_port`"""

    label: str
    recv_role: str
    recv_port: str
    send_role: str
    send_port: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Forwarder:
    """Interface forwarder on the interface role.

    direction "in":  values arriving on external flow to internal
    direction "out": values produced on internal flow to external
    """

    internal: str
    external: str
    direction: str  # "in" | "out"
    span: Optional[Span] = _span_field()


@memo_hash
@dataclass(frozen=True)
class Base:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    binders: tuple[LocalBinder, ...]
    span: Optional[Span] = _span_field()


@memo_hash
@dataclass(frozen=True)
class Composite:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    protocol: Protocol
    label_types: tuple[tuple[str, BaseType], ...]  # sorted by label
    assignments: tuple[tuple[str, "Component"], ...]  # sorted by role
    connections: tuple[ConnectionBinder, ...]
    interface_role: str
    forwarders: tuple[Forwarder, ...]
    span: Optional[Span] = _span_field()

    def assignment(self, role: str) -> "Component":
        for r, c in self.assignments:
            if r == role:
                return c
        raise KeyError(role)

    def with_assignment(self, role: str, c: "Component") -> "Composite":
        new = tuple((r, (c if r == role else old)) for r, old in self.assignments)
        return Composite(self.inputs, self.outputs, self.protocol,
                         self.label_types, new, self.connections,
                         self.interface_role, self.forwarders)

    def with_protocol(self, g: Protocol) -> "Composite":
        return Composite(self.inputs, self.outputs, g, self.label_types,
                         self.assignments, self.connections,
                         self.interface_role, self.forwarders)

    @property
    def label_type_map(self) -> dict[str, BaseType]:
        return dict(self.label_types)


Component = Union[Base, Composite]


def component_ports(c: Component) -> frozenset[str]:
    """Every port name syntactically present in c (recursively)."""
    match c:
        case Base(ins, outs, binders):
            acc = frozenset(ins) | frozenset(outs)
            for b in binders:
                acc |= binder_ports(b)
            return acc
        case Composite():
            acc = frozenset(c.inputs) | frozenset(c.outputs)
            for d in c.connections:
                acc |= {d.recv_port, d.send_port}
            for f in c.forwarders:
                acc |= {f.internal, f.external}
            for _, sub in c.assignments:
                acc |= component_ports(sub)
            return acc
    raise TypeError(f"not a component: {c!r}")


def component_is_surface(c: Component) -> bool:
    """True when no queue holds values and the protocol has no in-transit forms."""
    match c:
        case Base(_, _, binders):
            return all(b.queue == () for b in binders)
        case Composite():
            return (protocol_is_surface(c.protocol)
                    and all(component_is_surface(sub) for _, sub in c.assignments))
    raise TypeError(f"not a component: {c!r}")


def iter_components(c: Component) -> Iterator[Component]:
    yield c
    if isinstance(c, Composite):
        for _, sub in c.assignments:
            yield from iter_components(sub)


# ---------------------------------------------------------------------------
# Transition labels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutL:
    port: str
    value: Value


@dataclass(frozen=True)
class InL:
    port: str
    value: Value


@dataclass(frozen=True)
class TauL:
    pass


ActionLabel = Union[OutL, InL, TauL]
TAU = TauL()


@dataclass(frozen=True)
class RoleOut:
    role: str
    label: str
    value: Value


@dataclass(frozen=True)
class RoleIn:
    role: str
    label: str
    value: Value


ProtoLabel = Union[RoleOut, RoleIn]


def pretty_action(a: ActionLabel) -> str:
    match a:
        case OutL(p, v):
            return f"{p}!{pretty_value(v)}"
        case InL(p, v):
            return f"{p}?{pretty_value(v)}"
        case TauL():
            return "tau"
    raise TypeError(f"not an action label: {a!r}")


def pretty_proto_label(a: ProtoLabel) -> str:
    match a:
        case RoleOut(r, lbl, v):
            return f"{r}!{lbl}({pretty_value(v)})"
        case RoleIn(r, lbl, v):
            return f"{r}?{lbl}({pretty_value(v)})"
    raise TypeError(f"not a protocol label: {a!r}")


# ---------------------------------------------------------------------------
# Symbolic-value instantiation
# ---------------------------------------------------------------------------

def instantiate(obj, v: Value):
    """Replace every HoleV in obj by v, rebuilding only changed spines.

    Works uniformly over the AST families in this package: frozen dataclasses,
    tuples, and atoms.
    """
    if isinstance(obj, HoleV):
        return v
    if not contains_hole(obj):
        return obj
    if isinstance(obj, tuple):
        new = tuple(instantiate(x, v) for x in obj)
        return obj if new == obj else new
    if hasattr(obj, "__dataclass_fields__"):
        changed = False
        kwargs = {}
        for f in obj.__dataclass_fields__.values():
            old = getattr(obj, f.name)
            if f.name == "span":
                kwargs[f.name] = old
                continue
            new = instantiate(old, v)
            kwargs[f.name] = new
            if new is not old and new != old:
                changed = True
        return type(obj)(**kwargs) if changed else obj
    return obj


@lru_cache(maxsize=None)
def contains_hole(obj) -> bool:
    if isinstance(obj, HoleV):
        return True
    if isinstance(obj, tuple):
        return any(contains_hole(x) for x in obj)
    if hasattr(obj, "__dataclass_fields__"):
        return any(contains_hole(getattr(obj, f.name))
                   for f in obj.__dataclass_fields__.values() if f.name != "span")
    return False
