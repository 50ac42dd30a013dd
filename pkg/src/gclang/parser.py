"""Parser and pretty-printer for the `.gc` surface syntax.

The grammar, in sketch form::

    component := base | composite
    base      := "base" iface "{" binder* "}"
    iface     := "(" "in" ports ";" "out" ports ")"
    binder    := PORT "<=" NAME? "(" ports ")" ":" TYPE ("=" expr)?
    composite := "composite" iface "{"
                   "protocol" proto
                   "labels" "{" (LBL ":" TYPE) % "," "}"
                   "roles" "{" (ROLE "=" component) % "," "}"
                   "binders" "{" (LBL "@" ROLE "." PORT "<-" ROLE "." PORT) % "," "}"
                   "interface" ROLE "[" fwd % "," "]"
                 "}"
    fwd       := PORT "<-" PORT | PORT "->" PORT
    proto     := ROLE "->" ROLE % "," ":" LBL (";" proto | "(" proto "," proto ")")
               | "mu" VAR "." proto | VAR | "end"

A binder may omit its body only in the identity sugar `y <= id(x): T`.
Binder parameter types are not written; they are inferred from the bodies
(and must be inferable uniquely, or the parse is rejected). `//` starts a
line comment. Primes are ordinary identifier characters, so `x1''` is a
single name.

Pretty-printing inverts parsing on surface forms: parse(pretty(c)) == c.
Runtime forms (non-empty binder queues, in-transit protocol states) print
in a debug notation that the parser does not read back.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Base, BaseType, Binary, BoolV, Choice, Com, Component, Composite, Cond,
    ConnectionBinder, End, Expr, ExprTypeError, FnExpr, Forwarder, IntV, InlV,
    InrV, Lit, LocalBinder, Name, Param, Protocol, PVar, Rec, Span, StrV,
    TransitChoice, TransitCom, Unary, Value, expr_names, expr_type,
    normalize_protocol_vars, pretty_value,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "string" | "punct" | "eof"
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>//[^\n]*)
    | (?P<string>"(?:[^"\\\n]|\\.)*")
    | (?P<int>[0-9]+)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
    | (?P<punct><=|==|!=|>=|->|[{}()\[\];:,.@<>=+\-*])
    """,
    re.VERBOSE,
)

# NB: there is deliberately no `<-` token. A connection arrow lexes as `<`
# then `-`, which keeps `x < -1` meaning what it should inside expressions.

KEYWORDS = frozenset({
    "base", "composite", "in", "out", "protocol", "labels", "roles",
    "binders", "interface", "mu", "end", "if", "then", "else",
    "true", "false", "inl", "inr", "not", "and", "or",
})

_TYPES = {
    "Int": BaseType.INT,
    "Str": BaseType.STR,
    "Bool": BaseType.BOOL,
    "Cho": BaseType.CHO,
}


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "comment"):
            toks.append(Token(kind, lexeme, line, col))
        nl = lexeme.count("\n")
        if nl:
            line += nl
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    toks.append(Token("eof", "", line, col))
    return toks


def _unescape(raw: str, line: int, col: int) -> str:
    # raw includes the surrounding quotes
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            i += 1
            esc = body[i]
            if esc == "n":
                out.append("\n")
            elif esc in ('"', "\\"):
                out.append(esc)
            else:
                raise ParseError(f"unknown escape \\{esc} in string", line, col)
        else:
            out.append(ch)
        i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, message: str, tok: Optional[Token] = None):
        t = tok or self.peek()
        raise ParseError(message, t.line, t.col)

    def at_punct(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == text

    def at_kw(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == word

    def expect_punct(self, text: str) -> Token:
        if not self.at_punct(text):
            self.fail(f"expected {text!r}")
        return self.next()

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            self.fail(f"expected keyword {word!r}")
        return self.next()

    def expect_name(self, what: str = "name") -> Token:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            self.fail(f"expected {what}")
        return self.next()

    def span(self) -> Span:
        t = self.peek()
        return Span(t.line, t.col)

    # -- components --------------------------------------------------------

    def parse_component(self) -> Component:
        if self.at_kw("base"):
            return self.parse_base()
        if self.at_kw("composite"):
            return self.parse_composite()
        self.fail("expected 'base' or 'composite'")

    def parse_iface(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        self.expect_punct("(")
        self.expect_kw("in")
        ins = self.parse_port_list(stop=";")
        self.expect_punct(";")
        self.expect_kw("out")
        outs = self.parse_port_list(stop=")")
        self.expect_punct(")")
        return ins, outs

    def parse_port_list(self, stop: str) -> tuple[str, ...]:
        ports: list[str] = []
        if self.at_punct(stop):
            return ()
        ports.append(self.expect_name("port name").text)
        while self.at_punct(","):
            self.next()
            ports.append(self.expect_name("port name").text)
        return tuple(ports)

    def parse_base(self) -> Base:
        sp = self.span()
        self.expect_kw("base")
        ins, outs = self.parse_iface()
        self.expect_punct("{")
        binders: list[LocalBinder] = []
        while not self.at_punct("}"):
            binders.append(self.parse_binder())
            while self.at_punct(";"):
                self.next()
        self.expect_punct("}")
        return Base(ins, outs, tuple(binders), span=sp)

    def parse_binder(self) -> LocalBinder:
        sp = self.span()
        target = self.expect_name("binder target port").text
        self.expect_punct("<=")
        name: Optional[str] = None
        if not self.at_punct("("):
            name = self.expect_name("function name").text
        self.expect_punct("(")
        params = self.parse_port_list(stop=")")
        self.expect_punct(")")
        self.expect_punct(":")
        rtype = self.parse_type()
        if self.at_punct("="):
            self.next()
            body = self.parse_expr()
        elif name == "id" and len(params) == 1:
            body = Name(params[0])
        else:
            self.fail("binder needs a body ('= expr'); only 'id' with one "
                      "parameter may omit it")
        fn = FnExpr(tuple(Param(p, None) for p in params), body, rtype, name)
        return LocalBinder(target, fn, (), span=sp)

    def parse_type(self) -> BaseType:
        t = self.peek()
        if t.kind == "ident" and t.text in _TYPES:
            self.next()
            return _TYPES[t.text]
        self.fail("expected a type (Int, Str, Bool, Cho)")

    def parse_composite(self) -> Composite:
        sp = self.span()
        self.expect_kw("composite")
        ins, outs = self.parse_iface()
        self.expect_punct("{")

        self.expect_kw("protocol")
        proto = normalize_protocol_vars(self.parse_protocol())

        self.expect_kw("labels")
        self.expect_punct("{")
        label_types: dict[str, BaseType] = {}
        while not self.at_punct("}"):
            lt = self.peek()
            lbl = self.expect_name("label").text
            self.expect_punct(":")
            ty = self.parse_type()
            if lbl in label_types:
                self.fail(f"label {lbl!r} typed twice", lt)
            label_types[lbl] = ty
            if not self.at_punct(","):
                break
            self.next()
        self.expect_punct("}")

        self.expect_kw("roles")
        self.expect_punct("{")
        assignments: dict[str, Component] = {}
        while not self.at_punct("}"):
            rt = self.peek()
            role = self.expect_name("role").text
            self.expect_punct("=")
            comp = self.parse_component()
            if role in assignments:
                self.fail(f"role {role!r} assigned twice", rt)
            assignments[role] = comp
            if not self.at_punct(","):
                break
            self.next()
        self.expect_punct("}")

        self.expect_kw("binders")
        self.expect_punct("{")
        connections: list[ConnectionBinder] = []
        while not self.at_punct("}"):
            connections.append(self.parse_connection())
            if not self.at_punct(","):
                break
            self.next()
        self.expect_punct("}")

        self.expect_kw("interface")
        iface_role = self.expect_name("interface role").text
        self.expect_punct("[")
        forwarders: list[Forwarder] = []
        while not self.at_punct("]"):
            forwarders.append(self.parse_forwarder())
            if not self.at_punct(","):
                break
            self.next()
        self.expect_punct("]")

        self.expect_punct("}")
        return Composite(
            ins, outs, proto,
            tuple(sorted(label_types.items())),
            tuple(sorted(assignments.items())),
            tuple(connections), iface_role, tuple(forwarders), span=sp,
        )

    def parse_connection(self) -> ConnectionBinder:
        sp = self.span()
        lbl = self.expect_name("label").text
        self.expect_punct("@")
        recv_role = self.expect_name("role").text
        self.expect_punct(".")
        recv_port = self.expect_name("port").text
        self.expect_punct("<")
        self.expect_punct("-")
        send_role = self.expect_name("role").text
        self.expect_punct(".")
        send_port = self.expect_name("port").text
        return ConnectionBinder(lbl, recv_role, recv_port, send_role,
                                send_port, span=sp)

    def parse_forwarder(self) -> Forwarder:
        sp = self.span()
        internal = self.expect_name("port").text
        if self.at_punct("->"):
            self.next()
            direction = "out"
        elif self.at_punct("<"):
            self.next()
            self.expect_punct("-")
            direction = "in"
        else:
            self.fail("expected '<-' or '->' in forwarder")
        external = self.expect_name("port").text
        return Forwarder(internal, external, direction, span=sp)

    # -- protocols ---------------------------------------------------------

    def parse_protocol(self) -> Protocol:
        sp = self.span()
        if self.at_kw("end"):
            self.next()
            return End(span=sp)
        if self.at_kw("mu"):
            self.next()
            var = self.expect_name("recursion variable").text
            self.expect_punct(".")
            body = self.parse_protocol()
            return Rec(var, body, span=sp)
        t = self.peek()
        if t.kind == "ident" and t.text not in KEYWORDS:
            if self.peek(1).kind == "punct" and self.peek(1).text == "->":
                sender = self.next().text
                self.next()  # ->
                receivers = [self.expect_name("receiver role").text]
                while self.at_punct(","):
                    self.next()
                    receivers.append(self.expect_name("receiver role").text)
                self.expect_punct(":")
                label = self.expect_name("label").text
                if self.at_punct(";"):
                    self.next()
                    cont = self.parse_protocol()
                    return Com(sender, label, tuple(receivers), cont, span=sp)
                if self.at_punct("("):
                    self.next()
                    left = self.parse_protocol()
                    self.expect_punct(",")
                    right = self.parse_protocol()
                    self.expect_punct(")")
                    return Choice(sender, label, tuple(receivers), left,
                                  right, span=sp)
                self.fail("expected ';' or '(' after protocol label")
            var = self.next().text
            return PVar(var, span=sp)
        self.fail("expected a protocol")

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        if self.at_kw("if"):
            self.next()
            test = self.parse_expr()
            self.expect_kw("then")
            then = self.parse_expr()
            self.expect_kw("else")
            orelse = self.parse_expr()
            return Cond(test, then, orelse)
        return self.parse_or()

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at_kw("or"):
            self.next()
            e = Binary("or", e, self.parse_and())
        return e

    def parse_and(self) -> Expr:
        e = self.parse_cmp()
        while self.at_kw("and"):
            self.next()
            e = Binary("and", e, self.parse_cmp())
        return e

    _CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")

    def parse_cmp(self) -> Expr:
        e = self.parse_add()
        t = self.peek()
        if t.kind == "punct" and t.text in self._CMP_OPS:
            self.next()
            return Binary(t.text, e, self.parse_add())
        return e

    def parse_add(self) -> Expr:
        e = self.parse_mul()
        while True:
            t = self.peek()
            if t.kind == "punct" and t.text in ("+", "-"):
                self.next()
                e = Binary(t.text, e, self.parse_mul())
            else:
                return e

    def parse_mul(self) -> Expr:
        e = self.parse_unary()
        while self.at_punct("*"):
            self.next()
            e = Binary("*", e, self.parse_unary())
        return e

    def parse_unary(self) -> Expr:
        if self.at_kw("not"):
            self.next()
            return Unary("not", self.parse_unary())
        if self.at_punct("-"):
            self.next()
            return Unary("-", self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Lit(IntV(int(t.text)))
        if t.kind == "string":
            self.next()
            return Lit(StrV(_unescape(t.text, t.line, t.col)))
        if t.kind == "ident":
            if t.text == "true":
                self.next()
                return Lit(BoolV(True))
            if t.text == "false":
                self.next()
                return Lit(BoolV(False))
            if t.text == "inl":
                self.next()
                return Lit(InlV())
            if t.text == "inr":
                self.next()
                return Lit(InrV())
            if t.text not in KEYWORDS:
                self.next()
                return Name(t.text)
        if self.at_punct("("):
            self.next()
            e = self.parse_expr()
            self.expect_punct(")")
            return e
        self.fail("expected an expression")


# ---------------------------------------------------------------------------
# Binder parameter inference
# ---------------------------------------------------------------------------

_ALL_TYPES = (BaseType.INT, BaseType.STR, BaseType.BOOL, BaseType.CHO)


def _type_base(b: Base) -> Base:
    """Fill in parameter types by inference; reject untypable binders.

    Each parameter's type must be uniquely determined by the bodies it appears
    in (jointly across the component's binders). Iterates to a fixpoint,
    narrowing one binder at a time.
    """
    for lb in b.binders:
        extra = expr_names(lb.fn.body) - set(lb.fn.param_names)
        if extra:
            sp = lb.span or Span(0, 0)
            raise ParseError(
                f"binder {lb.target!r} uses {min(extra)!r}, which is not a "
                f"parameter", sp.line, sp.col)

    known: dict[str, BaseType] = {}
    changed = True
    while changed:
        changed = False
        for lb in b.binders:
            unknown = [p for p in lb.fn.param_names if p not in known]
            if not unknown:
                continue
            if 4 ** len(unknown) > 4096:
                sp = lb.span or Span(0, 0)
                raise ParseError(
                    f"binder {lb.target!r} has too many parameters of "
                    f"undetermined type", sp.line, sp.col)
            valid: list[tuple[BaseType, ...]] = []
            for combo in itertools.product(_ALL_TYPES, repeat=len(unknown)):
                env = dict(known)
                env.update(zip(unknown, combo))
                try:
                    t = expr_type(lb.fn.body, env)
                except ExprTypeError:
                    continue
                if t is lb.fn.return_type:
                    valid.append(combo)
            if not valid:
                sp = lb.span or Span(0, 0)
                raise ParseError(
                    f"body of binder {lb.target!r} cannot have type "
                    f"{lb.fn.return_type}", sp.line, sp.col)
            for idx, name in enumerate(unknown):
                cands = {combo[idx] for combo in valid}
                if len(cands) == 1:
                    known[name] = cands.pop()
                    changed = True

    new_binders = []
    for lb in b.binders:
        missing = [p for p in lb.fn.param_names if p not in known]
        if missing:
            sp = lb.span or Span(0, 0)
            raise ParseError(
                f"cannot infer a unique type for parameter {missing[0]!r} of "
                f"binder {lb.target!r}", sp.line, sp.col)
        env = {p: known[p] for p in lb.fn.param_names}
        t = expr_type(lb.fn.body, env)
        if t is not lb.fn.return_type:
            sp = lb.span or Span(0, 0)
            raise ParseError(
                f"body of binder {lb.target!r} has type {t}, declared "
                f"{lb.fn.return_type}", sp.line, sp.col)
        fn = FnExpr(tuple(Param(p, known[p]) for p in lb.fn.param_names),
                    lb.fn.body, lb.fn.return_type, lb.fn.name)
        new_binders.append(LocalBinder(lb.target, fn, lb.queue, span=lb.span))
    return Base(b.inputs, b.outputs, tuple(new_binders), span=b.span)


def _type_component(c: Component) -> Component:
    match c:
        case Base():
            return _type_base(c)
        case Composite():
            assignments = tuple((r, _type_component(sub))
                                for r, sub in c.assignments)
            return Composite(c.inputs, c.outputs, c.protocol, c.label_types,
                             assignments, c.connections, c.interface_role,
                             c.forwarders, span=c.span)
    raise TypeError(f"not a component: {c!r}")


def parse(text: str) -> Component:
    p = _Parser(tokenize(text))
    c = p.parse_component()
    if p.peek().kind != "eof":
        p.fail("trailing input after component")
    return _type_component(c)


def parse_protocol_text(text: str) -> Protocol:
    """Parse a bare protocol term (used by tests and the CLI)."""
    p = _Parser(tokenize(text))
    g = p.parse_protocol()
    if p.peek().kind != "eof":
        p.fail("trailing input after protocol")
    return normalize_protocol_vars(g)


# ---------------------------------------------------------------------------
# Port typing across a whole component
# ---------------------------------------------------------------------------

def port_types(c: Component) -> dict[str, BaseType]:
    """Best-effort types for the component's interface ports.

    Base: binder targets carry their return type, parameters their inferred
    type. Composite: each forwarder's external port takes the type of the
    internal port it connects, looked up on the interface-role component or,
    failing that, through the connection binders' label types. Ports whose
    type is not determined are absent.
    """
    match c:
        case Base():
            out: dict[str, BaseType] = {}
            for lb in c.binders:
                if lb.fn.return_type is not None:
                    out.setdefault(lb.target, lb.fn.return_type)
                for p in lb.fn.params:
                    if p.btype is not None:
                        out.setdefault(p.name, p.btype)
            return out
        case Composite():
            delta = c.label_type_map
            sub: dict[str, BaseType] = {}
            for role, comp in c.assignments:
                if role == c.interface_role:
                    sub = port_types(comp)

            def internal_type(port: str) -> Optional[BaseType]:
                if port in sub:
                    return sub[port]
                for d in c.connections:
                    if d.recv_role == c.interface_role and d.recv_port == port:
                        return delta.get(d.label)
                    if d.send_role == c.interface_role and d.send_port == port:
                        return delta.get(d.label)
                return None

            out = {}
            for f in c.forwarders:
                t = internal_type(f.internal)
                if t is not None:
                    out[f.external] = t
            return out
    raise TypeError(f"not a component: {c!r}")


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3,
         ">=": 3, "+": 4, "-": 4, "*": 5}
_NONASSOC = frozenset({"==", "!=", "<", "<=", ">", ">="})


def pretty_expr(e: Expr, prec: int = 0) -> str:
    match e:
        case Lit(v):
            return pretty_value(v)
        case Name(x):
            return x
        case Unary(op, a):
            inner = pretty_expr(a, 6)
            s = f"not {inner}" if op == "not" else f"-{inner}"
            return f"({s})" if prec > 6 else s
        case Binary(op, l, r):
            p = _PREC[op]
            lp = p + 1 if op in _NONASSOC else p
            s = f"{pretty_expr(l, lp)} {op} {pretty_expr(r, p + 1)}"
            return f"({s})" if prec > p else s
        case Cond(c, t, o):
            s = (f"if {pretty_expr(c)} then {pretty_expr(t)} "
                 f"else {pretty_expr(o)}")
            return f"({s})" if prec > 0 else s
    raise TypeError(f"not an expression: {e!r}")


def pretty_protocol(g: Protocol) -> str:
    match g:
        case Com(p, lbl, qs, cont):
            return f"{p} -> {', '.join(qs)} : {lbl} ; {pretty_protocol(cont)}"
        case Choice(p, lbl, qs, l, r):
            return (f"{p} -> {', '.join(qs)} : {lbl} "
                    f"({pretty_protocol(l)}, {pretty_protocol(r)})")
        case Rec(x, body):
            return f"mu {x}. {pretty_protocol(body)}"
        case PVar(x):
            return x
        case End():
            return "end"
        case TransitCom(lbl, v, pend, cont):
            heads = ",".join(pend)
            return (f"~>{{{heads}}}:({lbl},{pretty_value(v)}) ; "
                    f"{pretty_protocol(cont)}")
        case TransitChoice(lbl, v, pend, l, r):
            heads = ",".join(pend)
            return (f"~>{{{heads}}}:({lbl},{pretty_value(v)}) "
                    f"({pretty_protocol(l)}, {pretty_protocol(r)})")
    raise TypeError(f"not a protocol: {g!r}")


def _pp_store(s) -> str:
    return "{" + ", ".join(f"{k}={pretty_value(v)}" for k, v in s) + "}"


def _pp_binder(b: LocalBinder) -> str:
    fn = b.fn
    head = f"{b.target} <= {fn.name or ''}({', '.join(fn.param_names)})"
    rt = str(fn.return_type) if fn.return_type is not None else "?"
    if (fn.name == "id" and len(fn.params) == 1
            and fn.body == Name(fn.params[0].name)):
        s = f"{head}: {rt}"
    else:
        s = f"{head}: {rt} = {pretty_expr(fn.body)}"
    if b.queue:
        s += " [" + ", ".join(_pp_store(st) for st in b.queue) + "]"
    return s


def _pp_iface(ins: tuple[str, ...], outs: tuple[str, ...]) -> str:
    return f"(in {', '.join(ins)}; out {', '.join(outs)})"


def _pp_component(c: Component, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    match c:
        case Base():
            if not c.binders:
                return f"base {_pp_iface(c.inputs, c.outputs)} {{}}"
            lines = [f"base {_pp_iface(c.inputs, c.outputs)} {{"]
            for b in c.binders:
                lines.append(f"{inner}{_pp_binder(b)};")
            lines.append(pad + "}")
            return "\n".join(lines)
        case Composite():
            lines = [f"composite {_pp_iface(c.inputs, c.outputs)} {{"]
            lines.append(f"{inner}protocol {pretty_protocol(c.protocol)}")
            entries = ", ".join(f"{l}: {t}" for l, t in c.label_types)
            lines.append(f"{inner}labels {{{entries}}}" if not entries
                         else f"{inner}labels {{ {entries} }}")
            lines.append(f"{inner}roles {{")
            for idx, (role, sub) in enumerate(c.assignments):
                tail = "," if idx < len(c.assignments) - 1 else ""
                lines.append(f"{inner}  {role} = "
                             f"{_pp_component(sub, indent + 2)}{tail}")
            lines.append(f"{inner}}}")
            if c.connections:
                lines.append(f"{inner}binders {{")
                for idx, d in enumerate(c.connections):
                    tail = "," if idx < len(c.connections) - 1 else ""
                    lines.append(
                        f"{inner}  {d.label} @ {d.recv_role}.{d.recv_port} "
                        f"<- {d.send_role}.{d.send_port}{tail}")
                lines.append(f"{inner}}}")
            else:
                lines.append(f"{inner}binders {{}}")
            fwds = ", ".join(
                (f"{f.internal} -> {f.external}" if f.direction == "out"
                 else f"{f.internal} <- {f.external}")
                for f in c.forwarders)
            lines.append(f"{inner}interface {c.interface_role} [{fwds}]")
            lines.append(pad + "}")
            return "\n".join(lines)
    raise TypeError(f"not a component: {c!r}")


def pretty(c: Component) -> str:
    return _pp_component(c, 0) + "\n"
