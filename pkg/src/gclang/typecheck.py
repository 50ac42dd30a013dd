"""The typing judgment for components.

A base component is typed by running its binders abstractly along the
type.  A composite is typed role by role: every inner component must
follow the projection of the governing protocol onto its role, and the
interface role must follow some merge of its projection with the
declared external type, renamed through the forwarders.  The merge is
searched existentially; the chosen candidate is recorded in the
returned derivation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .conformance import abstract_binders, conforms
from .localtypes import (
    LocalType,
    MergeCapExceeded,
    ProjectionUndefined,
    RenameUndefined,
    interface_check,
    merge_all,
    pretty_type,
    project,
    rename_forward,
)
from .syntax import Base, Component, Composite, roles


class TypecheckError(Exception):
    """The component does not have the stated type."""


class TypecheckInconclusive(Exception):
    """A resource cap was hit before reaching a verdict."""


@dataclass(frozen=True)
class Derivation:
    """A record of how a component was typed.

    ``merged`` is the merge candidate chosen for the interface role of
    a composite; ``children`` are the subderivations, interface role
    first.
    """

    rule: str
    role: Optional[str]
    ltype: LocalType
    merged: Optional[LocalType] = None
    children: tuple["Derivation", ...] = ()


def typecheck(c: Component, t: LocalType) -> Derivation:
    """Check ``c`` against ``t``; raises :class:`TypecheckError` if it fails."""
    if isinstance(c, Base):
        if not interface_check(c.inputs, c.outputs, t):
            raise TypecheckError(
                f"type {pretty_type(t)} uses ports outside the interface"
            )
        if not conforms({}, abstract_binders(c.binders), t):
            raise TypecheckError(f"binders do not conform to {pretty_type(t)}")
        return Derivation("TBaseC", None, t)
    return _typecheck_composite(c, t)


def _typecheck_composite(c: Composite, t: LocalType) -> Derivation:
    assigned = {role for role, _ in c.assignments}
    missing = roles(c.protocol) - assigned
    if missing:
        raise TypecheckError(
            f"protocol role {sorted(missing)[0]!r} has no component"
        )
    if c.interface_role not in assigned:
        raise TypecheckError(f"interface role {c.interface_role!r} has no component")
    delta = dict(c.label_type_map)

    try:
        t_ext = rename_forward(t, c.forwarders, c.inputs, c.outputs)
    except RenameUndefined as e:
        raise TypecheckError(f"external type does not fit the interface: {e}") from e

    def projection(role: str) -> LocalType:
        try:
            return project(c.protocol, role, c.connections, delta)
        except ProjectionUndefined as e:
            raise TypecheckError(f"no projection onto role {role!r}: {e}") from e

    inner = []
    for role, sub in c.assignments:
        if role == c.interface_role:
            continue
        try:
            d = typecheck(sub, projection(role))
        except TypecheckError as e:
            raise TypecheckError(f"role {role!r}: {e}") from e
        inner.append(replace(d, role=role))

    proj_r = projection(c.interface_role)
    try:
        candidates = merge_all(proj_r, t_ext)
    except MergeCapExceeded as e:
        raise TypecheckInconclusive(str(e)) from e
    if not candidates:
        raise TypecheckError(
            f"projection {pretty_type(proj_r)} and external type "
            f"{pretty_type(t_ext)} have no merge"
        )

    last: Optional[TypecheckError] = None
    for cand in sorted(candidates, key=pretty_type):
        try:
            d = typecheck(c.assignment(c.interface_role), cand)
        except TypecheckError as e:
            last = e
            continue
        head = replace(d, role=c.interface_role)
        return Derivation("TCompC", None, t, merged=cand, children=(head, *inner))
    raise TypecheckError(
        f"no merge of {pretty_type(proj_r)} and {pretty_type(t_ext)} types "
        f"the {c.interface_role!r} component (last failure: {last})"
    )
