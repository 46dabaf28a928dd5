"""Independent brute-force trace enumerator used as an oracle.

This is a direct, unoptimised transcription of the nine global transition
rules as recursive functions over the shared IR: no memoisation, no canonical
state dedup, its own substitution.  It exists so the engine's trace sets can
be checked against an implementation that shares nothing with the engine's
exploration machinery.
"""

from routedmpst.core import (
    ActionLabel, GComm, GEnd, GRec, GRouted, GRoutedTransit, GTransit, GVar,
    RECV, SEND,
)


def subst(term, var, replacement):
    if isinstance(term, GEnd):
        return term
    if isinstance(term, GVar):
        return replacement if term.var == var else term
    if isinstance(term, GRec):
        if term.var == var:
            return term
        return GRec(term.var, subst(term.body, var, replacement))
    branches = tuple((lbl, subst(cont, var, replacement)) for lbl, cont in term.branches)
    if isinstance(term, GComm):
        return GComm(term.sender, term.receiver, branches)
    if isinstance(term, GRouted):
        return GRouted(term.sender, term.receiver, term.router, branches)
    if isinstance(term, GTransit):
        return GTransit(term.sender, term.receiver, term.chosen, branches)
    if isinstance(term, GRoutedTransit):
        return GRoutedTransit(term.sender, term.receiver, term.router,
                              term.chosen, branches)
    raise TypeError(type(term).__name__)


# Plain memo tables keyed on raw terms; purely a speedup, the recursion is
# unchanged and shares nothing with the engine's canonical-form exploration.
_steps_memo = {}
_traces_memo = {}


def steps(g, fuel=64):
    """All (label, successor) pairs derivable for g; `fuel` bounds recursion
    unfolding depth, far above anything a finite derivation needs here."""
    key = (g, fuel)
    if key in _steps_memo:
        return _steps_memo[key]
    out = _steps_uncached(g, fuel)
    _steps_memo[key] = out
    return out


def _steps_uncached(g, fuel):
    if fuel <= 0 or isinstance(g, (GEnd, GVar)):
        return []
    out = []
    if isinstance(g, GRec):
        return steps(subst(g.body, g.var, g), fuel - 1)
    if isinstance(g, GComm):
        for lbl, _ in g.branches:
            out.append((ActionLabel(SEND, g.sender, g.receiver, lbl),
                        GTransit(g.sender, g.receiver, lbl, g.branches)))
        out.extend(_under_prefix(g, {g.sender, g.receiver}, fuel))
    elif isinstance(g, GTransit):
        for lbl, cont in g.branches:
            if lbl == g.chosen:
                out.append((ActionLabel(RECV, g.sender, g.receiver, lbl), cont))
        out.extend(_under_transit(g, fuel))
    elif isinstance(g, GRouted):
        for lbl, _ in g.branches:
            out.append((ActionLabel(SEND, g.sender, g.receiver, lbl, via=g.router),
                        GRoutedTransit(g.sender, g.receiver, g.router, lbl, g.branches)))
        out.extend(_under_prefix(g, {g.sender, g.receiver}, fuel))
    elif isinstance(g, GRoutedTransit):
        for lbl, cont in g.branches:
            if lbl == g.chosen:
                out.append((ActionLabel(RECV, g.sender, g.receiver, lbl, via=g.router), cont))
        out.extend(_under_transit(g, fuel))
    else:
        raise TypeError(type(g).__name__)
    # Drop duplicates while keeping first occurrences.
    seen = set()
    unique = []
    for pair in out:
        if pair not in seen:
            seen.add(pair)
            unique.append(pair)
    return unique


def _rebuild(g, branches):
    if isinstance(g, GComm):
        return GComm(g.sender, g.receiver, branches)
    if isinstance(g, GRouted):
        return GRouted(g.sender, g.receiver, g.router, branches)
    if isinstance(g, GTransit):
        return GTransit(g.sender, g.receiver, g.chosen, branches)
    return GRoutedTransit(g.sender, g.receiver, g.router, g.chosen, branches)


def _under_prefix(g, endpoints, fuel):
    branch_steps = [steps(cont, fuel - 1) for _, cont in g.branches]
    candidates = {label for label, _ in branch_steps[0] if label.subject not in endpoints}
    out = []
    for label in candidates:
        succs = []
        for pairs in branch_steps:
            match = [nxt for l, nxt in pairs if l == label]
            if not match:
                break
            succs.append(match[0])
        else:
            branches = tuple((lbl, succs[i]) for i, (lbl, _) in enumerate(g.branches))
            out.append((label, _rebuild(g, branches)))
    return out


def _under_transit(g, fuel):
    out = []
    for lbl, cont in g.branches:
        if lbl != g.chosen:
            continue
        for label, nxt in steps(cont, fuel - 1):
            if label.subject == g.receiver:
                continue
            branches = tuple((l, nxt if l == g.chosen else c) for l, c in g.branches)
            out.append((label, _rebuild(g, branches)))
    return out


def traces(g, depth):
    """The prefix-closed set of traces of length <= depth, by plain recursion."""
    key = (g, depth)
    if key in _traces_memo:
        return _traces_memo[key]
    acc = {()}
    if depth > 0:
        for label, succ in steps(g):
            for tail in traces(succ, depth - 1):
                acc.add((label,) + tail)
    result = frozenset(acc)
    _traces_memo[key] = result
    return result
