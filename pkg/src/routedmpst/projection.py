"""Endpoint projection and the merge operator.

Projection maps a global type and a role to that role's local type; when a
communication does not involve the role, the branch projections must be
reconciled by the merge operator, which is partial.
"""

from __future__ import annotations

from .core import (
    GComm, GEnd, GRec, GRouted, GRoutedTransit, GTransit, GVar, GlobalType,
    LBranch, LEnd, LRec, LRouter, LRouterTransit, LRoutedBranch, LRoutedSelect,
    LSelect, LVar, LocalType, MsgLabel, Role, canonically_equal, free_vars,
    participants, pretty_local,
)


class MergeFailure(Exception):
    """The merge operator is undefined on the given pair of local types."""

    def __init__(self, left: LocalType, right: LocalType, reason: str = ""):
        self.left = left
        self.right = right
        self.reason = reason
        detail = f" ({reason})" if reason else ""
        super().__init__(
            f"cannot merge{detail}:\n  {pretty_local(left)}\n  {pretty_local(right)}"
        )


def merge(a: LocalType, b: LocalType) -> LocalType:
    """Merge two local types; raises MergeFailure when undefined.

    Branch-like types from the same peer (and router, for routed branching)
    merge labelwise: disjoint labels union, shared labels merge recursively.
    Selections, routers and everything else merge only when identical.
    """
    if canonically_equal(a, b):
        return a
    if isinstance(a, LBranch) and isinstance(b, LBranch) and a.peer == b.peer:
        return LBranch(a.peer, _merge_branches(a, b))
    if (isinstance(a, LRoutedBranch) and isinstance(b, LRoutedBranch)
            and a.peer == b.peer and a.via == b.via):
        return LRoutedBranch(a.peer, a.via, _merge_branches(a, b))
    if isinstance(a, LRec) and isinstance(b, LRec) and a.var == b.var:
        return LRec(a.var, merge(a.body, b.body))
    raise MergeFailure(a, b)


def _merge_branches(a, b):
    out = []
    b_by_name = {lbl.name: (lbl, cont) for lbl, cont in b.branches}
    seen = set()
    for lbl, cont in a.branches:
        seen.add(lbl.name)
        if lbl.name in b_by_name:
            other_lbl, other_cont = b_by_name[lbl.name]
            if other_lbl != lbl:
                raise MergeFailure(a, b, f"payload sorts differ on label {lbl.name}")
            out.append((lbl, merge(cont, other_cont)))
        else:
            out.append((lbl, cont))
    for lbl, cont in b.branches:
        if lbl.name not in seen:
            out.append((lbl, cont))
    return tuple(out)


def merge_all(parts):
    acc = parts[0]
    for nxt in parts[1:]:
        acc = merge(acc, nxt)
    return acc


def project(g: GlobalType, r: Role) -> LocalType:
    """Project a closed global type onto one role.

    Raises MergeFailure when a communication not involving `r` has
    incompatible branch projections.
    """
    if isinstance(g, GEnd):
        return LEnd()
    if isinstance(g, GVar):
        return LVar(g.var)
    if isinstance(g, GRec):
        if r not in participants(g.body):
            # A role outside the loop contributes nothing to it; projecting
            # the body would otherwise strand its back-edge variables in
            # merges.  This keeps projection total on non-participants.
            return LEnd()
        body = project(g.body, r)
        if isinstance(body, LVar):
            return LEnd()
        if g.var not in free_vars(body):
            return body
        return LRec(g.var, body)

    conts = tuple((lbl, project(cont, r)) for lbl, cont in g.branches)

    if isinstance(g, GComm):
        if r == g.sender:
            return LSelect(g.receiver, conts)
        if r == g.receiver:
            return LBranch(g.sender, conts)
        return merge_all([c for _, c in conts])
    if isinstance(g, GRouted):
        if r == g.sender:
            return LRoutedSelect(g.receiver, g.router, conts)
        if r == g.receiver:
            return LRoutedBranch(g.sender, g.router, conts)
        if r == g.router:
            return LRouter(g.sender, g.receiver, conts)
        return merge_all([c for _, c in conts])
    if isinstance(g, GTransit):
        if r == g.receiver:
            return LBranch(g.sender, conts)
        return _chosen_cont(conts, g.chosen)
    if isinstance(g, GRoutedTransit):
        if r == g.receiver:
            return LRoutedBranch(g.sender, g.router, conts)
        if r == g.router:
            return LRouterTransit(g.sender, g.receiver, g.chosen, conts)
        return _chosen_cont(conts, g.chosen)
    raise TypeError(type(g).__name__)


def _chosen_cont(conts, chosen: MsgLabel) -> LocalType:
    for lbl, cont in conts:
        if lbl == chosen:
            return cont
    raise KeyError(chosen)
