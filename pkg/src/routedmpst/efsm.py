"""Endpoint finite state machines: build the explicit state/transition graph
of a local type, render it as DOT, and serialise a machine-readable IR.

States are the distinct canonical subterms reached by structural traversal,
with recursion resolved to back-edges.  Numbering is breadth-first from the
initial state (branches in source order), which keeps diagram numbering
and golden files stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import (
    ActionLabel, LBranch, LEnd, LRec, LRouter, LRouterTransit, LRoutedBranch,
    LRoutedSelect, LSelect, LocalType, Role, SEND, canonicalize, direct_recv,
    direct_send, is_closed, routed_recv, routed_send, unfold_once, validate,
)

STATE_SEND = "send"
STATE_RECEIVE = "receive"
STATE_TERMINAL = "terminal"


@dataclass(frozen=True)
class EfsmState:
    id: int
    kind: str
    local_type: LocalType  # closed form of the subterm this state stands for


@dataclass(frozen=True)
class EfsmTransition:
    source: int
    target: int
    action: ActionLabel

    @property
    def direction(self) -> str:
        return self.action.direction

    @property
    def via(self) -> Role | None:
        return self.action.via

    def display(self, self_role: Role) -> str:
        """Diagram edge label, e.g. "B?Suggest" or "B!Quote (via S)"."""
        act = self.action
        if self_role in (act.sender, act.receiver):
            peer = act.receiver if act.sender == self_role else act.sender
            base = f"{peer}{act.direction}{act.msg.name}"
        else:
            base = f"{act.sender}->{act.receiver}{act.direction}{act.msg.name}"
        if act.via is not None:
            base += f" (via {act.via})"
        return base


@dataclass(frozen=True)
class Efsm:
    role: Role
    states: tuple[EfsmState, ...]
    transitions: tuple[EfsmTransition, ...]
    initial: int = 1

    def state(self, sid: int) -> EfsmState:
        return self.states[sid - 1]

    def outgoing(self, sid: int) -> tuple[EfsmTransition, ...]:
        return tuple(t for t in self.transitions if t.source == sid)

    @property
    def terminal_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.states if s.kind == STATE_TERMINAL)


def _unwrap(t: LocalType) -> LocalType:
    """Unfold top-level recursion until a structural node appears."""
    while isinstance(t, LRec):
        t = unfold_once(t)
    return t


def _node_actions(node: LocalType, me: Role):
    """The syntactic actions of one structural node, in source branch order.

    Router nodes expose their forwarding accept; the synthetic in-transit
    state then carries the matching delivery."""
    if isinstance(node, LEnd):
        return []
    if isinstance(node, LSelect):
        return [(direct_send(me, node.peer, lbl), cont) for lbl, cont in node.branches]
    if isinstance(node, LBranch):
        return [(direct_recv(node.peer, me, lbl), cont) for lbl, cont in node.branches]
    if isinstance(node, LRoutedSelect):
        return [(routed_send(me, node.peer, node.via, lbl), cont)
                for lbl, cont in node.branches]
    if isinstance(node, LRoutedBranch):
        return [(routed_recv(node.peer, me, node.via, lbl), cont)
                for lbl, cont in node.branches]
    if isinstance(node, LRouter):
        return [(routed_send(node.sender, node.receiver, me, lbl),
                 LRouterTransit(node.sender, node.receiver, lbl, node.branches))
                for lbl, _ in node.branches]
    if isinstance(node, LRouterTransit):
        for lbl, cont in node.branches:
            if lbl == node.chosen:
                return [(routed_recv(node.sender, node.receiver, me, node.chosen), cont)]
        raise KeyError(node.chosen)
    raise TypeError(type(node).__name__)


def _kind_of(actions) -> str:
    if not actions:
        return STATE_TERMINAL
    dirs = {a.direction for a, _ in actions}
    assert len(dirs) == 1, "mixed send/receive state cannot arise from the local grammar"
    return STATE_SEND if dirs == {SEND} else STATE_RECEIVE


def build_efsm(t: LocalType, self_role: Role) -> Efsm:
    """Construct the endpoint state machine of a closed local type."""
    validate(t)
    if not is_closed(t):
        raise ValueError("EFSM construction requires a closed local type")

    ids: dict[LocalType, int] = {}
    order: list[LocalType] = []

    def state_id(closed: LocalType) -> int:
        key = canonicalize(_unwrap(closed))
        if key not in ids:
            ids[key] = len(order) + 1
            order.append(closed)
        return ids[key]

    transitions: list[EfsmTransition] = []
    states: list[EfsmState] = []
    state_id(t)
    visited = 0
    while visited < len(order):
        closed = order[visited]
        visited += 1
        node = _unwrap(closed)
        actions = _node_actions(node, self_role)
        sid = visited
        states.append(EfsmState(sid, _kind_of(actions), node))
        for action, cont in actions:
            transitions.append(EfsmTransition(sid, state_id(cont), action))

    return Efsm(self_role, tuple(states), tuple(transitions))


def render_dot(e: Efsm) -> str:
    """Valid DOT digraph; node ids are the stable state indices."""
    lines = [f"digraph {e.role.name} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for st in e.states:
        shape = "doublecircle" if st.kind == STATE_TERMINAL else "circle"
        lines.append(f"  {st.id} [shape={shape}];")
    lines.append(f"  __start -> {e.initial};")
    for tr in sorted(e.transitions, key=lambda t: (t.source, t.action.sort_key())):
        lines.append(f'  {tr.source} -> {tr.target} [label="{tr.display(e.role)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def efsm_ir(e: Efsm) -> str:
    """Stable JSON IR: {states, transitions, initial, role}, sorted keys."""
    payload = {
        "role": e.role.name,
        "initial": e.initial,
        "states": [{"id": st.id, "kind": st.kind} for st in e.states],
        "transitions": [_transition_ir(tr, e.role) for tr in
                        sorted(e.transitions, key=lambda t: (t.source, t.action.sort_key()))],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _transition_ir(tr: EfsmTransition, me: Role) -> dict:
    act = tr.action
    if me in (act.sender, act.receiver):
        peer = act.receiver if act.sender == me else act.sender
    else:
        peer = act.receiver  # router forwarding: the delivery target
    out = {
        "from": tr.source,
        "to": tr.target,
        "peer": peer.name,
        "dir": act.direction,
        "label": act.msg.name,
        "payloads": list(act.msg.payload_sorts),
    }
    if act.via is not None:
        out["via"] = act.via.name
    if me not in (act.sender, act.receiver):
        out["from_role"] = act.sender.name  # router machines need both endpoints
    return out
