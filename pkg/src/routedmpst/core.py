"""Core intermediate representation: roles, message labels, global and local
type grammars (including routed and in-transit constructs), LTS action labels,
and the canonicalisation / substitution machinery shared by every other module.

All values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")

# Binder names produced by canonicalize; '%' cannot occur in a source identifier,
# so canonical binders never capture user-written recursion variables.
_CANON_VAR_PREFIX = "%"


class InvalidType(ValueError):
    """A type value violates a structural invariant."""


class NotRecursive(ValueError):
    """unfold_once applied to a non-recursive type."""


@dataclass(frozen=True, slots=True, order=True)
class Role:
    """A protocol participant, identified by a case-sensitive name."""

    name: str

    def __post_init__(self) -> None:
        if not _IDENT_RE.match(self.name):
            raise InvalidType(f"invalid role name: {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True, order=True)
class MsgLabel:
    """A message label plus its (inert) payload sorts.

    Payload sorts are carried verbatim from the source and never inspected by
    the transition semantics.
    """

    name: str
    payload_sorts: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not _IDENT_RE.match(self.name):
            raise InvalidType(f"invalid message label: {self.name!r}")

    def __str__(self) -> str:
        if self.payload_sorts:
            return f"{self.name}({', '.join(self.payload_sorts)})"
        return self.name


# ---------------------------------------------------------------------------
# Global types
# ---------------------------------------------------------------------------


class GlobalType:
    """Base class of the global type grammar."""

    __slots__ = ()


GBranches = tuple[tuple[MsgLabel, GlobalType], ...]


@dataclass(frozen=True, slots=True)
class GEnd(GlobalType):
    pass


@dataclass(frozen=True, slots=True)
class GVar(GlobalType):
    var: str


@dataclass(frozen=True, slots=True)
class GRec(GlobalType):
    var: str
    body: GlobalType


@dataclass(frozen=True, slots=True)
class GComm(GlobalType):
    """Direct communication: sender offers receiver a choice of labels."""

    sender: Role
    receiver: Role
    branches: GBranches


@dataclass(frozen=True, slots=True)
class GRouted(GlobalType):
    """Routed communication: the selection travels through the router role."""

    sender: Role
    receiver: Role
    router: Role
    branches: GBranches


@dataclass(frozen=True, slots=True)
class GTransit(GlobalType):
    """A direct message sent but not yet received (asynchrony marker)."""

    sender: Role
    receiver: Role
    chosen: MsgLabel
    branches: GBranches


@dataclass(frozen=True, slots=True)
class GRoutedTransit(GlobalType):
    """A routed message handed to the router but not yet delivered."""

    sender: Role
    receiver: Role
    router: Role
    chosen: MsgLabel
    branches: GBranches


# ---------------------------------------------------------------------------
# Local types
# ---------------------------------------------------------------------------


class LocalType:
    """Base class of the local (endpoint) type grammar."""

    __slots__ = ()


LBranches = tuple[tuple[MsgLabel, LocalType], ...]


@dataclass(frozen=True, slots=True)
class LEnd(LocalType):
    pass


@dataclass(frozen=True, slots=True)
class LVar(LocalType):
    var: str


@dataclass(frozen=True, slots=True)
class LRec(LocalType):
    var: str
    body: LocalType


@dataclass(frozen=True, slots=True)
class LSelect(LocalType):
    """Internal choice: send one of the labels to `peer`."""

    peer: Role
    branches: LBranches


@dataclass(frozen=True, slots=True)
class LBranch(LocalType):
    """External choice: receive one of the labels from `peer`."""

    peer: Role
    branches: LBranches


@dataclass(frozen=True, slots=True)
class LRoutedSelect(LocalType):
    """Send a selection intended for `peer`, delivered through `via`."""

    peer: Role
    via: Role
    branches: LBranches


@dataclass(frozen=True, slots=True)
class LRoutedBranch(LocalType):
    """Receive a selection made by `peer`, delivered through `via`."""

    peer: Role
    via: Role
    branches: LBranches


@dataclass(frozen=True, slots=True)
class LRouter(LocalType):
    """The router's view of forwarding a selection from sender to receiver."""

    sender: Role
    receiver: Role
    branches: LBranches


@dataclass(frozen=True, slots=True)
class LRouterTransit(LocalType):
    """Router holds a message accepted from sender, not yet delivered."""

    sender: Role
    receiver: Role
    chosen: MsgLabel
    branches: LBranches


AnyType = Union[GlobalType, LocalType]


def gbranches(items: Iterable[tuple[MsgLabel, GlobalType]] | dict) -> GBranches:
    """Normalise a branch mapping into the tuple form used by the IR."""
    if isinstance(items, dict):
        items = items.items()
    return tuple((lbl if isinstance(lbl, MsgLabel) else MsgLabel(lbl), g) for lbl, g in items)


def lbranches(items: Iterable[tuple[MsgLabel, LocalType]] | dict) -> LBranches:
    if isinstance(items, dict):
        items = items.items()
    return tuple((lbl if isinstance(lbl, MsgLabel) else MsgLabel(lbl), t) for lbl, t in items)


def branch_for(branches, label: MsgLabel):
    for lbl, cont in branches:
        if lbl == label:
            return cont
    raise KeyError(label)


# ---------------------------------------------------------------------------
# Action labels
# ---------------------------------------------------------------------------

SEND = "!"
RECV = "?"


@dataclass(frozen=True, slots=True)
class ActionLabel:
    """One LTS action: a send or receive, direct or through a router.

    `via` is present exactly for routed actions.  The subject (the role that
    initiates the action) is the sender for sends and the receiver for
    receives, whether or not the action is routed.
    """

    direction: str  # SEND or RECV
    sender: Role
    receiver: Role
    msg: MsgLabel
    via: Role | None = None

    def __post_init__(self) -> None:
        if self.direction not in (SEND, RECV):
            raise InvalidType(f"bad action direction: {self.direction!r}")
        if self.sender == self.receiver:
            raise InvalidType("action sender and receiver must differ")
        if self.via is not None and self.via in (self.sender, self.receiver):
            raise InvalidType("router of a routed action must differ from both endpoints")

    @property
    def routed(self) -> bool:
        return self.via is not None

    @property
    def subject(self) -> Role:
        return self.sender if self.direction == SEND else self.receiver

    def sort_key(self):
        kind = (0 if self.direction == SEND else 1) + (2 if self.routed else 0)
        return (kind, self.sender.name, self.receiver.name,
                self.via.name if self.via else "", self.msg.name)

    def __str__(self) -> str:
        base = f"{self.sender}->{self.receiver}{self.direction}{self.msg.name}"
        return f"{base} via {self.via}" if self.via else base


def direct_send(p: Role, q: Role, m: MsgLabel) -> ActionLabel:
    return ActionLabel(SEND, p, q, m)


def direct_recv(p: Role, q: Role, m: MsgLabel) -> ActionLabel:
    return ActionLabel(RECV, p, q, m)


def routed_send(p: Role, q: Role, s: Role, m: MsgLabel) -> ActionLabel:
    return ActionLabel(SEND, p, q, m, via=s)


def routed_recv(p: Role, q: Role, s: Role, m: MsgLabel) -> ActionLabel:
    return ActionLabel(RECV, p, q, m, via=s)


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------


def _node_branches(t: AnyType):
    """Branches of a node, or None for leaf/recursion nodes."""
    if isinstance(t, (GComm, GRouted, GTransit, GRoutedTransit,
                      LSelect, LBranch, LRoutedSelect, LRoutedBranch,
                      LRouter, LRouterTransit)):
        return t.branches
    return None


def _with_branches(t: AnyType, branches):
    """Rebuild a branching node with replaced branch tuple."""
    if isinstance(t, GComm):
        return GComm(t.sender, t.receiver, branches)
    if isinstance(t, LRouter):
        return LRouter(t.sender, t.receiver, branches)
    if isinstance(t, GRouted):
        return GRouted(t.sender, t.receiver, t.router, branches)
    if isinstance(t, GTransit):
        return GTransit(t.sender, t.receiver, t.chosen, branches)
    if isinstance(t, GRoutedTransit):
        return GRoutedTransit(t.sender, t.receiver, t.router, t.chosen, branches)
    if isinstance(t, LSelect):
        return LSelect(t.peer, branches)
    if isinstance(t, LBranch):
        return LBranch(t.peer, branches)
    if isinstance(t, LRoutedSelect):
        return LRoutedSelect(t.peer, t.via, branches)
    if isinstance(t, LRoutedBranch):
        return LRoutedBranch(t.peer, t.via, branches)
    if isinstance(t, LRouterTransit):
        return LRouterTransit(t.sender, t.receiver, t.chosen, branches)
    raise TypeError(type(t))


def validate(t: AnyType, *, allow_free: bool = False) -> None:
    """Check the structural invariants; raise InvalidType on violation.

    With allow_free=True unbound recursion variables are tolerated (needed
    when manipulating open subterms, e.g. under substitution).
    """

    def go(u: AnyType, bound: frozenset[str]) -> None:
        if isinstance(u, (GEnd, LEnd)):
            return
        if isinstance(u, (GVar, LVar)):
            if not allow_free and u.var not in bound:
                raise InvalidType(f"unbound recursion variable {u.var!r}")
            return
        if isinstance(u, (GRec, LRec)):
            body = u.body
            # Contractiveness: stripping nested binders must not expose a bare
            # variable (rules out degenerate loops with no communication).
            probe = body
            while isinstance(probe, (GRec, LRec)):
                probe = probe.body
            if isinstance(probe, (GVar, LVar)):
                raise InvalidType(f"non-contractive recursion at binder {u.var!r}")
            go(body, bound | {u.var})
            return
        branches = _node_branches(u)
        if branches is None:
            raise InvalidType(f"unknown node {type(u).__name__}")
        if not branches:
            raise InvalidType(f"{type(u).__name__} with empty branch set")
        names = [lbl.name for lbl, _ in branches]
        if len(set(names)) != len(names):
            raise InvalidType(f"duplicate branch labels in {type(u).__name__}: {names}")
        if isinstance(u, (GComm, GTransit)):
            if u.sender == u.receiver:
                raise InvalidType("communication endpoints must differ")
        if isinstance(u, (GRouted, GRoutedTransit)):
            if len({u.sender, u.receiver, u.router}) != 3:
                raise InvalidType("routed communication roles must be pairwise distinct")
        if isinstance(u, (LRoutedSelect, LRoutedBranch)):
            if u.peer == u.via:
                raise InvalidType("routed endpoint and router must differ")
        if isinstance(u, (LRouter, LRouterTransit)):
            if u.sender == u.receiver:
                raise InvalidType("routed endpoints must differ")
        if isinstance(u, (GTransit, GRoutedTransit, LRouterTransit)):
            if u.chosen.name not in names:
                raise InvalidType(f"chosen label {u.chosen.name!r} not among branches")
        for _, cont in branches:
            go(cont, bound)

    go(t, frozenset())


def free_vars(t: AnyType) -> frozenset[str]:
    if isinstance(t, (GEnd, LEnd)):
        return frozenset()
    if isinstance(t, (GVar, LVar)):
        return frozenset((t.var,))
    if isinstance(t, (GRec, LRec)):
        return free_vars(t.body) - {t.var}
    return frozenset().union(*(free_vars(c) for _, c in _node_branches(t)))


def is_closed(t: AnyType) -> bool:
    return not free_vars(t)


def substitute(t: AnyType, var: str, replacement: AnyType) -> AnyType:
    """Substitute `replacement` for free occurrences of `var` in `t`.

    Shadowing binders are respected; the replacement is expected to be closed
    (always the case for recursion unfolding), so no capture can occur.
    """
    if isinstance(t, (GEnd, LEnd)):
        return t
    if isinstance(t, (GVar, LVar)):
        return replacement if t.var == var else t
    if isinstance(t, (GRec, LRec)):
        if t.var == var:
            return t
        return type(t)(t.var, substitute(t.body, var, replacement))
    branches = tuple((lbl, substitute(c, var, replacement)) for lbl, c in _node_branches(t))
    return _with_branches(t, branches)


def unfold_once(t: AnyType) -> AnyType:
    """One step of recursion unfolding: body with the binder substituted in."""
    if isinstance(t, (GRec, LRec)):
        return substitute(t.body, t.var, t)
    raise NotRecursive(f"cannot unfold non-recursive {type(t).__name__}")


def canonicalize(t: AnyType) -> AnyType:
    """Alpha-rename binders to depth indices, drop unused binders and order
    branch maps lexicographically by label name.

    Two types are structurally equal exactly when their canonical forms are
    equal; the output is idempotent under re-canonicalisation.
    """
    validate(t, allow_free=True)
    # Free variables keep their names, so depth-indexed binder names must
    # avoid them (relevant only when re-canonicalising open subterms whose
    # free variables already carry canonical names).
    reserved = free_vars(t)

    def binder_name(depth: int) -> str:
        name = f"{_CANON_VAR_PREFIX}{depth}"
        while name in reserved:
            name = _CANON_VAR_PREFIX + name
        return name

    def go(u: AnyType, env: dict[str, str], depth: int) -> AnyType:
        if isinstance(u, (GEnd, LEnd)):
            return u
        if isinstance(u, (GVar, LVar)):
            return type(u)(env.get(u.var, u.var))
        if isinstance(u, (GRec, LRec)):
            if u.var not in free_vars(u.body):
                return go(u.body, env, depth)
            name = binder_name(depth)
            inner = dict(env)
            inner[u.var] = name
            return type(u)(name, go(u.body, inner, depth + 1))
        branches = tuple(sorted(((lbl, go(c, env, depth)) for lbl, c in _node_branches(u)),
                                key=lambda item: item[0].name))
        return _with_branches(u, branches)

    return go(t, {}, 0)


def canonically_equal(a: AnyType, b: AnyType) -> bool:
    return canonicalize(a) == canonicalize(b)


def participants(g: GlobalType) -> frozenset[Role]:
    """The set of roles taking part in a global type."""
    if isinstance(g, (GEnd, GVar)):
        return frozenset()
    if isinstance(g, GRec):
        return participants(g.body)
    if isinstance(g, (GComm, GTransit)):
        base = frozenset((g.sender, g.receiver))
    elif isinstance(g, (GRouted, GRoutedTransit)):
        base = frozenset((g.sender, g.receiver, g.router))
    else:
        raise InvalidType(f"not a global type: {type(g).__name__}")
    return base.union(*(participants(c) for _, c in g.branches))


def is_canonical_mpst(g: GlobalType) -> bool:
    """True when g uses only the plain grammar (no routed or transit nodes)."""
    if isinstance(g, (GEnd, GVar)):
        return True
    if isinstance(g, GRec):
        return is_canonical_mpst(g.body)
    if isinstance(g, GComm):
        return all(is_canonical_mpst(c) for _, c in g.branches)
    return False


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------


def _fmt_branches(branches, show, indent: int) -> str:
    if len(branches) == 1:
        lbl, cont = branches[0]
        return f"{lbl} . {show(cont, indent)}"
    pad = "  " * (indent + 1)
    inner = ",\n".join(f"{pad}{lbl}: {show(cont, indent + 1)}" for lbl, cont in branches)
    return "{\n" + inner + "\n" + "  " * indent + "}"


def pretty_global(g: GlobalType, indent: int = 0) -> str:
    def show(u: GlobalType, ind: int) -> str:
        if isinstance(u, GEnd):
            return "end"
        if isinstance(u, GVar):
            return u.var
        if isinstance(u, GRec):
            return f"rec {u.var} . {show(u.body, ind)}"
        if isinstance(u, GComm):
            return f"{u.sender}->{u.receiver} " + _fmt_branches(u.branches, show, ind)
        if isinstance(u, GRouted):
            return f"{u.sender}->{u.receiver} via {u.router} " + _fmt_branches(u.branches, show, ind)
        if isinstance(u, GTransit):
            return (f"{u.sender}->{u.receiver} [{u.chosen.name} in flight] "
                    + _fmt_branches(u.branches, show, ind))
        if isinstance(u, GRoutedTransit):
            return (f"{u.sender}->{u.receiver} via {u.router} [{u.chosen.name} in flight] "
                    + _fmt_branches(u.branches, show, ind))
        raise InvalidType(type(u).__name__)

    return show(g, indent)


def pretty_local(t: LocalType, indent: int = 0) -> str:
    def show(u: LocalType, ind: int) -> str:
        if isinstance(u, LEnd):
            return "end"
        if isinstance(u, LVar):
            return u.var
        if isinstance(u, LRec):
            return f"rec {u.var} . {show(u.body, ind)}"
        if isinstance(u, LSelect):
            return f"{u.peer}!" + _fmt_branches(u.branches, show, ind)
        if isinstance(u, LBranch):
            return f"{u.peer}?" + _fmt_branches(u.branches, show, ind)
        if isinstance(u, LRoutedSelect):
            return f"{u.peer}(via {u.via})!" + _fmt_branches(u.branches, show, ind)
        if isinstance(u, LRoutedBranch):
            return f"{u.peer}(via {u.via})?" + _fmt_branches(u.branches, show, ind)
        if isinstance(u, LRouter):
            return f"route {u.sender}->{u.receiver} " + _fmt_branches(u.branches, show, ind)
        if isinstance(u, LRouterTransit):
            return (f"route {u.sender}->{u.receiver} [{u.chosen.name} in flight] "
                    + _fmt_branches(u.branches, show, ind))
        raise InvalidType(type(u).__name__)

    return show(t, indent)
