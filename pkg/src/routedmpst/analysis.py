"""Bounded exploration and the theorem checkers: trace sets, trace
equivalence between a global type and its projected configuration, deadlock
freedom over reachable states, and the bisimulation between a canonical type
and its routed encoding.

All checks are depth- or state-bounded: they verify concrete instances of the
metatheory rather than proving it.  Resource exhaustion is reported as an
`inconclusive` verdict, never as a pass.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    ActionLabel, GEnd, GlobalType, Role, canonicalize, pretty_global,
)
from .encoding import encode_global_extended, encode_label
from .semantics import (
    Configuration, config_steps, global_steps, project_configuration,
)
from .wellformed import check_wf, check_wf_routed

DEFAULT_STATE_CAP = 10 ** 6

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


class StateBudgetExceeded(RuntimeError):
    """Exploration hit the configured state cap before finishing."""

    def __init__(self, cap: int, states: int):
        self.cap = cap
        self.states = states
        super().__init__(f"state budget exceeded: {states} >= {cap}")


class PreconditionError(ValueError):
    """A checker was invoked on input violating its stated precondition."""


@dataclass(frozen=True)
class TraceSet:
    """A prefix-closed set of action sequences up to a bounded depth."""

    depth: int
    traces: frozenset[tuple[ActionLabel, ...]]

    def __contains__(self, trace) -> bool:
        return tuple(trace) in self.traces

    def is_prefix_closed(self) -> bool:
        return all(trace[:-1] in self.traces for trace in self.traces if trace)


@dataclass(frozen=True)
class Counterexample:
    trace: tuple[ActionLabel, ...]
    detail: str

    def __str__(self) -> str:
        shown = " . ".join(str(a) for a in self.trace) or "<empty>"
        return f"{shown} -- {self.detail}"


@dataclass(frozen=True)
class ExplorationReport:
    check: str
    verdict: str
    states_visited: int
    depth_reached: int
    counterexample: Counterexample | None = None

    def __post_init__(self):
        assert (self.counterexample is not None) == (self.verdict == FAIL)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def lines(self) -> list[str]:
        out = [f"check={self.check}",
               f"verdict={self.verdict}",
               f"states={self.states_visited}",
               f"depth={self.depth_reached}"]
        if self.counterexample is not None:
            out.append(f"counterexample={self.counterexample}")
        return out


# ---------------------------------------------------------------------------
# Trace enumeration
# ---------------------------------------------------------------------------


class _Explorer:
    """Memoised successor expansion over canonical states."""

    def __init__(self, step_fn, state_cap: int):
        self.step_fn = step_fn
        self.state_cap = state_cap
        self.succs: dict = {}

    def successors(self, state):
        if state not in self.succs:
            if len(self.succs) >= self.state_cap:
                raise StateBudgetExceeded(self.state_cap, len(self.succs))
            self.succs[state] = tuple((label, self._canon(nxt))
                                      for label, nxt in self.step_fn(state))
        return self.succs[state]

    @staticmethod
    def _canon(state):
        if isinstance(state, Configuration):
            return state.canonical()
        return canonicalize(state)

    @property
    def states_visited(self) -> int:
        return len(self.succs)


def _trace_set(initial, step_fn, depth: int, state_cap: int):
    explorer = _Explorer(step_fn, state_cap)
    start = explorer._canon(initial)
    memo: dict[tuple[object, int], frozenset] = {}

    def traces_from(state, d: int) -> frozenset:
        if d == 0:
            return frozenset({()})
        key = (state, d)
        if key not in memo:
            acc = {()}
            for label, nxt in explorer.successors(state):
                for tail in traces_from(nxt, d - 1):
                    acc.add((label,) + tail)
            memo[key] = frozenset(acc)
        return memo[key]

    result = traces_from(start, depth)
    return TraceSet(depth, result), explorer.states_visited


def global_traces(g: GlobalType, depth: int,
                  state_cap: int = DEFAULT_STATE_CAP,
                  disabled: frozenset[str] = frozenset()) -> TraceSet:
    """Exact prefix-closed trace set of the global LTS up to `depth`."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    ts, _ = _trace_set(g, lambda s: global_steps(s, disabled), depth, state_cap)
    return ts


def config_traces(g: GlobalType, depth: int,
                  state_cap: int = DEFAULT_STATE_CAP) -> TraceSet:
    """Trace set of the configuration LTS started from the projected
    configuration of `g`."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    initial = project_configuration(g)
    ts, _ = _trace_set(initial, config_steps, depth, state_cap)
    return ts


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------


def _shortest_difference(a: frozenset, b: frozenset) -> tuple[ActionLabel, ...]:
    return min(a.symmetric_difference(b),
               key=lambda tr: (len(tr), tuple(x.sort_key() for x in tr)))


def check_trace_equivalence(g: GlobalType, depth: int,
                            state_cap: int = DEFAULT_STATE_CAP,
                            disabled: frozenset[str] = frozenset()) -> ExplorationReport:
    """Compare the global LTS against the configuration LTS of the projected
    initial configuration, up to `depth`."""
    name = "trace_equivalence"
    try:
        gset, g_states = _trace_set(g, lambda s: global_steps(s, disabled), depth, state_cap)
        cset, c_states = _trace_set(project_configuration(g), config_steps, depth, state_cap)
    except StateBudgetExceeded as exc:
        return ExplorationReport(name, INCONCLUSIVE, exc.states, depth)
    states = g_states + c_states
    if gset.traces == cset.traces:
        return ExplorationReport(name, PASS, states, depth)
    witness = _shortest_difference(gset.traces, cset.traces)
    side = "global-only" if witness in gset.traces else "configuration-only"
    return ExplorationReport(name, FAIL, states, depth,
                             Counterexample(witness, f"trace is {side}"))


def check_deadlock_freedom(g: GlobalType, router: Role,
                           state_cap: int = DEFAULT_STATE_CAP,
                           disabled: frozenset[str] = frozenset()) -> ExplorationReport:
    """Every reachable state of a routed-well-formed type is terminal or can
    step.  Exploration is exhaustive over canonical states (finite for the
    corpus), bounded by `state_cap`."""
    name = "deadlock_freedom"
    wf = check_wf_routed(g, router)
    if not wf.ok:
        raise PreconditionError(f"type not well-formed for router {router}: {wf.describe()}")

    start = canonicalize(g)
    seen = {start: ()}  # state -> shortest trace reaching it (BFS order)
    frontier = [start]
    depth = 0
    while frontier:
        nxt_frontier = []
        for state in frontier:
            if len(seen) > state_cap:
                return ExplorationReport(name, INCONCLUSIVE, len(seen), depth)
            succs = global_steps(state, disabled)
            if not succs and not isinstance(state, GEnd):
                return ExplorationReport(
                    name, FAIL, len(seen), depth,
                    Counterexample(seen[state],
                                   f"stuck non-terminal state:\n{pretty_global(state)}"))
            for label, succ in succs:
                key = canonicalize(succ)
                if key not in seen:
                    seen[key] = seen[state] + (label,)
                    nxt_frontier.append(key)
        frontier = nxt_frontier
        depth += 1
    return ExplorationReport(name, PASS, len(seen), depth)


def check_encoding_bisim(g: GlobalType, s: Role, depth: int,
                         state_cap: int = DEFAULT_STATE_CAP,
                         disabled: frozenset[str] = frozenset()) -> ExplorationReport:
    """Check, over all states reachable from `g` within `depth`, that the
    encoding maps transitions one-to-one: l is enabled at G' exactly when its
    encoding is enabled at the encoding of G', with successors related by the
    encoding again."""
    name = "encoding_bisim"
    wf = check_wf(g)
    if not wf.ok:
        raise PreconditionError(f"type not well-formed: {wf.describe()}")

    start = canonicalize(g)
    seen = {start: ()}
    frontier = [start]
    level = 0
    while frontier and level < depth:
        nxt_frontier = []
        for state in frontier:
            if len(seen) > state_cap:
                return ExplorationReport(name, INCONCLUSIVE, len(seen), level)
            enc_state = encode_global_extended(state, s)
            plain = global_steps(state, disabled)
            encoded = dict(global_steps(enc_state, disabled))
            if len(plain) != len(encoded):
                extra = set(encoded) - {encode_label(l, s) for l, _ in plain}
                return ExplorationReport(
                    name, FAIL, len(seen), level,
                    Counterexample(seen[state],
                                   f"enabled-set mismatch, encoded side has {sorted(map(str, extra))}"))
            for label, succ in plain:
                enc_lbl = encode_label(label, s)
                if enc_lbl not in encoded:
                    return ExplorationReport(
                        name, FAIL, len(seen), level,
                        Counterexample(seen[state] + (label,),
                                       f"{enc_lbl} not enabled on encoded state"))
                expected = canonicalize(encode_global_extended(succ, s))
                if canonicalize(encoded[enc_lbl]) != expected:
                    return ExplorationReport(
                        name, FAIL, len(seen), level,
                        Counterexample(seen[state] + (label,),
                                       "encoded successor differs from encoding of successor"))
                key = canonicalize(succ)
                if key not in seen:
                    seen[key] = seen[state] + (label,)
                    nxt_frontier.append(key)
        frontier = nxt_frontier
        level += 1
    return ExplorationReport(name, PASS, len(seen), level)


def reachable_states(g: GlobalType, depth: int,
                     state_cap: int = DEFAULT_STATE_CAP) -> list[GlobalType]:
    """Canonical states reachable from g within `depth` steps (BFS order)."""
    start = canonicalize(g)
    seen = [start]
    index = {start}
    frontier = [start]
    for _ in range(depth):
        nxt = []
        for state in frontier:
            if len(seen) > state_cap:
                raise StateBudgetExceeded(state_cap, len(seen))
            for _, succ in global_steps(state):
                key = canonicalize(succ)
                if key not in index:
                    index.add(key)
                    seen.append(key)
                    nxt.append(key)
        frontier = nxt
    return seen
