"""Executable transition semantics: the labelled transition systems over
global types, local types and configurations (local types plus FIFO buffers),
buffer projection, and the subtyping relations used by the trace-equivalence
checker.

Global rules are named Gr1..Gr9 and local rules Lr1..Lr11 throughout; the
`disabled` parameter of global_steps exists solely for mutation testing of the
checkers and must stay empty in production use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .core import (
    ActionLabel, GComm, GEnd, GRec, GRouted, GRoutedTransit, GTransit, GVar,
    GlobalType, InvalidType, LBranch, LEnd, LRec, LRouter, LRouterTransit,
    LRoutedBranch, LRoutedSelect, LSelect, LVar, LocalType, MsgLabel, Role,
    branch_for, canonicalize, direct_recv, direct_send, participants,
    routed_recv, routed_send, unfold_once,
)
from .projection import project

_log = logging.getLogger(__name__)

Steps = list[tuple[ActionLabel, GlobalType]]
LocalSteps = list[tuple[ActionLabel, LocalType]]

GLOBAL_RULES = frozenset({f"Gr{i}" for i in range(1, 10)})


def _sorted_steps(steps):
    return sorted(steps, key=lambda pair: pair[0].sort_key())


# ---------------------------------------------------------------------------
# Global LTS (Gr1..Gr9)
# ---------------------------------------------------------------------------


def global_steps(g: GlobalType, disabled: frozenset[str] = frozenset()) -> Steps:
    """All one-step successors of a closed global type, in deterministic
    label order.  The relation is label-deterministic, so each label appears
    at most once."""
    bad = disabled - GLOBAL_RULES
    if bad:
        raise ValueError(f"unknown global rules: {sorted(bad)}")
    return _sorted_steps(_gsteps(g, disabled, frozenset()))


def _gsteps(g: GlobalType, disabled, stack: frozenset) -> Steps:
    if isinstance(g, (GEnd, GVar)):
        return []
    if isinstance(g, GRec):
        if "Gr3" in disabled:
            return []
        # Cut at canonical repeats: the prefix rules propagate one label
        # downward, so a derivable step never needs to unfold the same
        # recursive state twice along one derivation path.
        key = canonicalize(g)
        if key in stack:
            return []
        return _gsteps(unfold_once(g), disabled, stack | {key})

    out: Steps = []
    if isinstance(g, GComm):
        if "Gr1" not in disabled:
            for lbl, _ in g.branches:
                out.append((direct_send(g.sender, g.receiver, lbl),
                            GTransit(g.sender, g.receiver, lbl, g.branches)))
        if "Gr4" not in disabled:
            out.extend(_prefix_steps_all(g, (g.sender, g.receiver), disabled, stack))
        return out
    if isinstance(g, GTransit):
        if "Gr2" not in disabled:
            out.append((direct_recv(g.sender, g.receiver, g.chosen),
                        branch_for(g.branches, g.chosen)))
        if "Gr5" not in disabled:
            out.extend(_prefix_steps_chosen(g, disabled, stack))
        return out
    if isinstance(g, GRouted):
        if "Gr6" not in disabled:
            for lbl, _ in g.branches:
                out.append((routed_send(g.sender, g.receiver, g.router, lbl),
                            GRoutedTransit(g.sender, g.receiver, g.router, lbl, g.branches)))
        if "Gr8" not in disabled:
            out.extend(_prefix_steps_all(g, (g.sender, g.receiver), disabled, stack))
        return out
    if isinstance(g, GRoutedTransit):
        if "Gr7" not in disabled:
            out.append((routed_recv(g.sender, g.receiver, g.router, g.chosen),
                        branch_for(g.branches, g.chosen)))
        if "Gr9" not in disabled:
            out.extend(_prefix_steps_chosen(g, disabled, stack))
        return out
    raise InvalidType(f"not a global type: {type(g).__name__}")


def _prefix_steps_all(g, excluded_subjects, disabled, stack) -> Steps:
    """Gr4/Gr8: an action causally unrelated to the prefix fires in every
    branch; its subject must not be an endpoint of the prefix."""
    per_branch = [dict_of_steps(_gsteps(cont, disabled, stack)) for _, cont in g.branches]
    out = []
    for label in per_branch[0]:
        if label.subject in excluded_subjects:
            continue
        if all(label in steps for steps in per_branch[1:]):
            branches = tuple(
                (lbl, per_branch[i][label]) for i, (lbl, _) in enumerate(g.branches))
            out.append((label, _replace_branches(g, branches)))
    return out


def _prefix_steps_chosen(g, disabled, stack) -> Steps:
    """Gr5/Gr9: under a transit prefix only the chosen branch evolves, and the
    receiver of the pending message must not be the subject."""
    out = []
    chosen_cont = branch_for(g.branches, g.chosen)
    for label, succ in _gsteps(chosen_cont, disabled, stack):
        if label.subject == g.receiver:
            continue
        branches = tuple((lbl, succ if lbl == g.chosen else cont)
                         for lbl, cont in g.branches)
        out.append((label, _replace_branches(g, branches)))
    return out


def _replace_branches(g, branches):
    if isinstance(g, GComm):
        return GComm(g.sender, g.receiver, branches)
    if isinstance(g, GRouted):
        return GRouted(g.sender, g.receiver, g.router, branches)
    if isinstance(g, GTransit):
        return GTransit(g.sender, g.receiver, g.chosen, branches)
    if isinstance(g, GRoutedTransit):
        return GRoutedTransit(g.sender, g.receiver, g.router, g.chosen, branches)
    raise TypeError(type(g).__name__)


def dict_of_steps(steps):
    out = {}
    for label, succ in steps:
        assert label not in out or out[label] == succ, f"duplicate label {label}"
        out[label] = succ
    return out


# ---------------------------------------------------------------------------
# Local LTS (Lr1..Lr11)
# ---------------------------------------------------------------------------


def local_steps(t: LocalType, self_role: Role) -> LocalSteps:
    """All one-step successors of a local type, labelled from the point of
    view of `self_role` (which fills in the endpoint the syntax leaves
    implicit)."""
    return _sorted_steps(_lsteps(t, self_role))


def _lsteps(t: LocalType, me: Role, stack: frozenset = frozenset()) -> LocalSteps:
    if isinstance(t, (LEnd, LVar)):
        return []
    if isinstance(t, LRec):  # Lr3, with the same cycle cut as the global LTS
        key = canonicalize(t)
        if key in stack:
            return []
        return _lsteps(unfold_once(t), me, stack | {key})

    out: LocalSteps = []
    if isinstance(t, LSelect):
        for lbl, cont in t.branches:  # Lr1
            out.append((direct_send(me, t.peer, lbl), cont))
        out.extend(_own_routing_first(t, me, t.peer, stack))  # Lr10
        return out
    if isinstance(t, LBranch):
        for lbl, cont in t.branches:  # Lr2
            out.append((direct_recv(t.peer, me, lbl), cont))
        out.extend(_own_routing_first(t, me, t.peer, stack))  # Lr11
        return out
    if isinstance(t, LRoutedSelect):
        for lbl, cont in t.branches:  # Lr4
            out.append((routed_send(me, t.peer, t.via, lbl), cont))
        return out
    if isinstance(t, LRoutedBranch):
        for lbl, cont in t.branches:  # Lr5
            out.append((routed_recv(t.peer, me, t.via, lbl), cont))
        return out
    if isinstance(t, LRouter):
        for lbl, cont in t.branches:  # Lr6
            out.append((routed_send(t.sender, t.receiver, me, lbl),
                        LRouterTransit(t.sender, t.receiver, lbl, t.branches)))
        # Lr8: causally unrelated actions commute past the routing prefix.
        out.extend(_router_prefix_all(t, me, stack))
        return out
    if isinstance(t, LRouterTransit):
        out.append((routed_recv(t.sender, t.receiver, me, t.chosen),  # Lr7
                    branch_for(t.branches, t.chosen)))
        # Lr9: only the chosen branch evolves; the pending receiver stays ordered.
        chosen_cont = branch_for(t.branches, t.chosen)
        for label, succ in _lsteps(chosen_cont, me, stack):
            if label.subject == t.receiver:
                continue
            branches = tuple((lbl, succ if lbl == t.chosen else cont)
                             for lbl, cont in t.branches)
            out.append((label, LRouterTransit(t.sender, t.receiver, t.chosen, branches)))
        return out
    raise InvalidType(f"not a local type: {type(t).__name__}")


def _router_prefix_all(t: LRouter, me: Role, stack) -> LocalSteps:
    per_branch = [dict_of_steps(_lsteps(cont, me, stack)) for _, cont in t.branches]
    out = []
    for label in per_branch[0]:
        if label.subject in (t.sender, t.receiver):
            continue
        if all(label in steps for steps in per_branch[1:]):
            branches = tuple((lbl, per_branch[i][label])
                             for i, (lbl, _) in enumerate(t.branches))
            out.append((label, LRouter(t.sender, t.receiver, branches)))
    return out


def _own_routing_first(t, me: Role, peer: Role, stack) -> LocalSteps:
    """Lr10/Lr11: a role acting as router for interactions nested behind its
    own direct communication may perform those routing actions first, provided
    the direct peer is not the subject of the routed action."""
    per_branch = [dict_of_steps(_lsteps(cont, me, stack)) for _, cont in t.branches]
    out = []
    for label in per_branch[0]:
        if label.via != me or label.subject == peer:
            continue
        if all(label in steps for steps in per_branch[1:]):
            branches = tuple((lbl, per_branch[i][label])
                             for i, (lbl, _) in enumerate(t.branches))
            node = LSelect(peer, branches) if isinstance(t, LSelect) else LBranch(peer, branches)
            out.append((label, node))
    return out


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


RolePair = tuple[Role, Role]


@dataclass(frozen=True, slots=True)
class Configuration:
    """Joint state of a session: one local type per role plus a FIFO buffer
    for every ordered pair of distinct roles.

    Stored in a normalised (sorted) form so configurations hash and compare
    structurally.
    """

    locals: tuple[tuple[Role, LocalType], ...]
    buffers: tuple[tuple[RolePair, tuple[MsgLabel, ...]], ...]

    @staticmethod
    def make(locals_map: dict[Role, LocalType],
             buffers_map: dict[RolePair, tuple[MsgLabel, ...]] | None = None) -> "Configuration":
        roles = sorted(locals_map)
        buffers_map = dict(buffers_map or {})
        pairs = [(p, q) for p in roles for q in roles if p != q]
        for pair in buffers_map:
            if pair not in pairs:
                raise InvalidType(f"buffer {pair} not between participants")
        return Configuration(
            locals=tuple((r, locals_map[r]) for r in roles),
            buffers=tuple((pair, tuple(buffers_map.get(pair, ()))) for pair in pairs),
        )

    @property
    def roles(self) -> tuple[Role, ...]:
        return tuple(r for r, _ in self.locals)

    def local(self, r: Role) -> LocalType:
        for role, t in self.locals:
            if role == r:
                return t
        raise KeyError(r)

    def buffer(self, p: Role, q: Role) -> tuple[MsgLabel, ...]:
        for pair, content in self.buffers:
            if pair == (p, q):
                return content
        raise KeyError((p, q))

    def _update(self, role_updates: dict[Role, LocalType],
                buffer_updates: dict[RolePair, tuple[MsgLabel, ...]]) -> "Configuration":
        return Configuration(
            locals=tuple((r, role_updates.get(r, t)) for r, t in self.locals),
            buffers=tuple((pair, buffer_updates.get(pair, content))
                          for pair, content in self.buffers),
        )

    def canonical(self) -> "Configuration":
        return Configuration(
            locals=tuple((r, canonicalize(t)) for r, t in self.locals),
            buffers=self.buffers,
        )

    def is_terminal(self) -> bool:
        return all(isinstance(t, LEnd) for _, t in self.locals) and \
            all(not content for _, content in self.buffers)

    def describe(self) -> str:
        from .core import pretty_local
        lines = [f"{r}: {pretty_local(t)}" for r, t in self.locals]
        lines += [f"w[{p}->{q}] = [{', '.join(m.name for m in content)}]"
                  for (p, q), content in self.buffers if content]
        return "\n".join(lines)


def config_steps(c: Configuration) -> list[tuple[ActionLabel, Configuration]]:
    """All one-step successors of a configuration.

    Sends append to the sender->receiver buffer; receives pop its head.
    Routed actions additionally require (and advance) the router's local type.
    """
    steps_by_role = {r: dict_of_steps(_lsteps(t, r)) for r, t in c.locals}
    candidates: dict[ActionLabel, Configuration] = {}

    for r, steps in steps_by_role.items():
        for label, succ in steps.items():
            if label in candidates:
                continue
            nxt = _apply_label(c, label, steps_by_role)
            if nxt is not None:
                candidates[label] = nxt

    return _sorted_steps(candidates.items())


def _apply_label(c: Configuration, label: ActionLabel, steps_by_role):
    p, q, m = label.sender, label.receiver, label.msg
    movers: dict[Role, LocalType] = {}

    initiator = label.subject
    if label not in steps_by_role.get(initiator, {}):
        return None
    movers[initiator] = steps_by_role[initiator][label]
    if label.routed:
        s = label.via
        if s not in steps_by_role or label not in steps_by_role[s]:
            return None
        movers[s] = steps_by_role[s][label]

    try:
        buf = c.buffer(p, q)
    except KeyError:
        return None
    if label.direction == "!":
        return c._update(movers, {(p, q): buf + (m,)})
    if not buf or buf[0] != m:
        return None
    return c._update(movers, {(p, q): buf[1:]})


def project_configuration(g: GlobalType, roles: tuple[Role, ...] | None = None) -> Configuration:
    """The projected configuration of a global type: every role's projection
    plus the buffer contents induced by in-transit markers.

    `roles` widens the participant set (dropped-out roles project to end),
    which keeps mid-trace configurations comparable with the initial one.
    """
    parts = sorted(set(roles) if roles else participants(g))
    locals_map = {r: project(g, r) for r in parts}
    buffers: dict[RolePair, tuple[MsgLabel, ...]] = {}

    def fill(u: GlobalType) -> None:
        if isinstance(u, (GEnd, GVar)):
            return
        if isinstance(u, GRec):
            fill(u.body)
            return
        if isinstance(u, (GTransit, GRoutedTransit)):
            key = (u.sender, u.receiver)
            buffers[key] = buffers.get(key, ()) + (u.chosen,)
            fill(branch_for(u.branches, u.chosen))
            return
        if isinstance(u, (GComm, GRouted)):
            # All branches agree on buffer contents for projectable types.
            fill(u.branches[0][1])
            return
        raise InvalidType(type(u).__name__)

    fill(g)
    return Configuration.make(locals_map, buffers)


# ---------------------------------------------------------------------------
# Subtyping
# ---------------------------------------------------------------------------

SUBTYPE_UNFOLD_FUEL = 8


def subtype_local(a: LocalType, b: LocalType, fuel: int = SUBTYPE_UNFOLD_FUEL) -> bool:
    """Structural subtyping: wider branch offers are subtypes of narrower
    ones; selections are invariant.  Recursion is compared coinductively,
    assuming pairs already on the proof path, with a bounded unfolding
    budget."""
    path: set[tuple[LocalType, LocalType]] = set()

    def go(x: LocalType, y: LocalType, budget: int) -> bool:
        if x == y:
            return True
        key = (x, y)
        if key in path:
            return True
        path.add(key)
        try:
            return body(x, y, budget)
        finally:
            path.discard(key)

    def body(x: LocalType, y: LocalType, budget: int) -> bool:
        if isinstance(x, LRec) or isinstance(y, LRec):
            if budget <= 0:
                _log.warning("subtype_local: unfolding budget exhausted, returning False")
                return False
            if isinstance(x, LRec):
                x = unfold_once(x)
            if isinstance(y, LRec):
                y = unfold_once(y)
            return go(x, y, budget - 1)
        if isinstance(x, LEnd) and isinstance(y, LEnd):
            return True
        if isinstance(x, LVar) and isinstance(y, LVar):
            return x.var == y.var
        if isinstance(x, LBranch) and isinstance(y, LBranch) and x.peer == y.peer:
            return _branches_wider(x.branches, y.branches, budget)
        if (isinstance(x, LRoutedBranch) and isinstance(y, LRoutedBranch)
                and x.peer == y.peer and x.via == y.via):
            return _branches_wider(x.branches, y.branches, budget)
        if isinstance(x, LSelect) and isinstance(y, LSelect) and x.peer == y.peer:
            return _branches_equal(x.branches, y.branches, budget)
        if (isinstance(x, LRoutedSelect) and isinstance(y, LRoutedSelect)
                and x.peer == y.peer and x.via == y.via):
            return _branches_equal(x.branches, y.branches, budget)
        if (isinstance(x, LRouter) and isinstance(y, LRouter)
                and x.sender == y.sender and x.receiver == y.receiver):
            return _branches_equal(x.branches, y.branches, budget)
        if (isinstance(x, LRouterTransit) and isinstance(y, LRouterTransit)
                and x.sender == y.sender and x.receiver == y.receiver
                and x.chosen == y.chosen):
            return _branches_equal(x.branches, y.branches, budget)
        return False

    def _branches_wider(xs, ys, budget) -> bool:
        by_name = {lbl.name: (lbl, cont) for lbl, cont in xs}
        for lbl, cont in ys:
            if lbl.name not in by_name:
                return False
            xlbl, xcont = by_name[lbl.name]
            if xlbl != lbl or not go(xcont, cont, budget):
                return False
        return True

    def _branches_equal(xs, ys, budget) -> bool:
        if {lbl.name for lbl, _ in xs} != {lbl.name for lbl, _ in ys}:
            return False
        return _branches_wider(xs, ys, budget)

    return go(a, b, fuel)


def subtype_config(a: Configuration, b: Configuration) -> bool:
    """Pointwise subtyping of configurations with identical buffers."""
    if a.roles != b.roles:
        return False
    if a.buffers != b.buffers:
        return False
    return all(subtype_local(ta, tb) for (_, ta), (_, tb) in zip(a.locals, b.locals))
