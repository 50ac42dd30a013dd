"""Abstract binder semantics and conformance to a local type.

To check a base component against a local type we run its binders on
abstract stores: a received base value is represented by its sort, and
only the selection values ``inl``/``inr`` are kept concrete, because
they steer choices.  A binder whose arguments are abstract emits its
declared return sort; one whose arguments happen to be concrete (a
propagated selection, a parameterless literal) emits the value itself.

On this abstract transition system conformance is a straight recursive
walk over the type: there is at most one output step per port and
inputs are deterministic, so no backtracking is ever needed.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Union

from .localtypes import LocalType, TBranch, TChoice, TInp, TOut, TRec, TVar
from .semantics import ContractError, eval_fn
from .syntax import (
    INL,
    INR,
    BaseType,
    HoleV,
    InlV,
    InrV,
    LocalBinder,
    Value,
    store_dom,
    store_from,
    store_get,
    store_has,
    store_set,
    type_of,
)

Eta = Union[Value, BaseType]
State = tuple[LocalBinder, ...]
Env = dict[str, State]


def _abs(v: Eta) -> Eta:
    if isinstance(v, (InlV, InrV, BaseType)):
        return v
    if isinstance(v, HoleV):
        if v.btype is None:
            raise ValueError("cannot abstract an unsorted hole")
        return v.btype
    return type_of(v)


def abstract_binders(binders: tuple[LocalBinder, ...]) -> State:
    """Replace every queued value by its sort, keeping selections."""
    out = []
    for b in binders:
        queue = tuple(
            tuple((x, _abs(v)) for x, v in store) for store in b.queue
        )
        out.append(replace(b, queue=queue))
    return tuple(out)


def abinder_output(b: LocalBinder) -> Optional[tuple[Eta, LocalBinder, str]]:
    """The unique abstract output step of ``b``, if any.

    A parameterless binder emits its declared return sort without
    touching its body (rule AConst).  A binder whose head store covers
    its parameters emits the evaluated value when evaluation is
    possible (AOutVal) and its declared return sort otherwise
    (AOutType); either way the head store is consumed.
    """
    names = b.fn.param_names
    if not names:
        if b.fn.return_type is not None:
            return b.fn.return_type, b, "AConst"
        try:
            v = eval_fn(b.fn, {})
        except ContractError:
            return None
        return _abs(v), b, "AConst"
    if not b.queue:
        return None
    head = b.queue[0]
    if not set(names) <= store_dom(head):
        return None
    popped = replace(b, queue=b.queue[1:])
    args = {x: store_get(head, x) for x in names}
    if all(not isinstance(v, BaseType) for v in args.values()):
        try:
            return eval_fn(b.fn, args), popped, "AOutVal"
        except ContractError:
            pass
    if b.fn.return_type is not None:
        return b.fn.return_type, popped, "AOutType"
    return None


def abinder_input(b: LocalBinder, x: str, eta: Eta) -> tuple[LocalBinder, str]:
    """Feed ``eta`` on port ``x``: discard, update or start a store."""
    if x not in b.fn.param_names:
        return b, "AInpDisc"
    for i, store in enumerate(b.queue):
        if not store_has(store, x):
            queue = b.queue[:i] + (store_set(store, x, eta),) + b.queue[i + 1 :]
            return replace(b, queue=queue), "AInpUpd"
    return replace(b, queue=b.queue + (store_from({x: eta}),)), "AInpNew"


def ainput(binders: State, x: str, eta: Eta) -> State:
    """All binders react to an input at once."""
    return tuple(abinder_input(b, x, eta)[0] for b in binders)


def aoutput_on(binders: State, port: str) -> Optional[tuple[Eta, State, str]]:
    """The output step on ``port``, lifting the other binders unchanged."""
    for i, b in enumerate(binders):
        if b.target == port:
            step = abinder_output(b)
            if step is None:
                return None
            eta, b2, rule = step
            return eta, binders[:i] + (b2,) + binders[i + 1 :], rule
    return None


def aoutputs(binders: State) -> list[tuple[str, Eta, State, str]]:
    """Every available abstract output, one per able port."""
    out = []
    for i, b in enumerate(binders):
        step = abinder_output(b)
        if step is not None:
            eta, b2, rule = step
            out.append((b.target, eta, binders[:i] + (b2,) + binders[i + 1 :], rule))
    return out


def _conform_choice(env: Env, binders: State, t: TChoice) -> bool:
    # A selection output either is already decided — the binder emits a
    # concrete inl/inr, fixing the branch — or is abstract (sort Cho),
    # in which case both branches must be honoured from the same state.
    step = aoutput_on(binders, t.port)
    if step is None:
        return False
    eta, succ, _ = step
    if eta == INL:
        return conforms(env, succ, t.left)
    if eta == INR:
        return conforms(env, succ, t.right)
    if eta == BaseType.CHO:
        return conforms(env, succ, t.left) and conforms(env, succ, t.right)
    return False


def conforms(env: Env, binders: State, t: LocalType) -> bool:
    """Do the abstract binders follow ``t``?

    ``env`` maps recursion variables to the state they were opened at;
    a variable conforms exactly when the current state has come back to
    that snapshot.
    """
    match t:
        case TOut(port, btype, cont):
            step = aoutput_on(binders, port)
            if step is None:
                return False
            eta, succ, _ = step
            return eta == btype and conforms(env, succ, cont)
        case TInp(port, btype, cont):
            return conforms(env, ainput(binders, port, btype), cont)
        case TChoice():
            return _conform_choice(env, binders, t)
        case TBranch(port, left, right):
            return conforms(env, ainput(binders, port, INL), left) and conforms(
                env, ainput(binders, port, INR), right
            )
        case TRec(var, body):
            return conforms({**env, var: binders}, binders, body)
        case TVar(var):
            return env.get(var) == binders
        case _:
            return True
