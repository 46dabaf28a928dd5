"""Deterministic in-process session execution.

One logical endpoint per role is driven by the state machine of its canonical
projection; the wire layer routes client-to-client traffic through the router
endpoint, which inspects envelope metadata and forwards anything not
addressed to itself.  Cancellation by any endpoint travels to the router and
is propagated to every other role, after which no data is delivered.

Observable behaviour (delivery order, payload bytes, observations) is a pure
function of the protocol, the scripts and the configuration seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import (
    GComm, GEnd, GRec, GRouted, GVar, GlobalType, LEnd, MsgLabel, RECV, Role,
    SEND, participants,
)
from .analysis import StateBudgetExceeded
from .efsm import Efsm, STATE_RECEIVE, STATE_SEND, STATE_TERMINAL, build_efsm
from .encoding import encode_global
from .projection import project
from .semantics import ActionLabel, config_steps, project_configuration
from .wellformed import check_wf_routed

DATA = "data"
CANCEL = "cancel"


class SimulatorError(Exception):
    pass


class ConformanceViolation(SimulatorError):
    """An endpoint attempted an action its machine does not enable (engine bug)."""


class MaxStepsExceeded(SimulatorError):
    pass


class NotEncodable(SimulatorError):
    """The input type routes through a role other than the designated router."""


@dataclass(frozen=True)
class Envelope:
    sender: Role
    receiver: Role
    msg: MsgLabel | None
    payload: bytes
    kind: str = DATA
    reason: str = ""

    def __post_init__(self):
        assert self.sender != self.receiver
        assert self.kind in (DATA, CANCEL)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    scheduler: str = "round-robin"  # or "seeded-random"
    max_steps: int = 100_000
    cancel_injection: tuple[Role, int] | None = None

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.scheduler not in ("round-robin", "seeded-random"):
            raise ValueError(f"unknown scheduler {self.scheduler!r}")


@dataclass(frozen=True)
class LogRecord:
    step: int
    envelope: Envelope

    def line(self) -> str:
        env = self.envelope
        label = env.msg.name if env.msg is not None else env.reason.replace(",", ";")
        return f"{self.step},{env.sender},{env.receiver},{env.kind},{label}"


@dataclass(frozen=True)
class CancellationRecord:
    initiator: Role
    notified: frozenset[Role]


@dataclass(frozen=True)
class SessionLog:
    records: tuple[LogRecord, ...]
    cancellation: CancellationRecord | None
    # per-role sequence of (direction, peer name, label name) machine events
    observations: tuple[tuple[Role, tuple[tuple[str, str, str], ...]], ...]

    @property
    def data_records(self) -> tuple[LogRecord, ...]:
        return tuple(r for r in self.records if r.envelope.kind == DATA)

    def observed(self, role: Role) -> tuple[tuple[str, str, str], ...]:
        for r, events in self.observations:
            if r == role:
                return events
        raise KeyError(role)

    def serialize(self) -> str:
        return "\n".join(r.line() for r in self.records) + ("\n" if self.records else "")


# ---------------------------------------------------------------------------
# Choice policies
# ---------------------------------------------------------------------------


class ChoicePolicy:
    """Resolves which label an endpoint selects at a send state.

    Policies may carry per-session state (visit counters, script cursors);
    use a fresh instance per run_session call.
    """

    def choose(self, state_id: int, labels: tuple[MsgLabel, ...],
               rng: random.Random) -> MsgLabel:
        raise NotImplementedError


class FixedScript(ChoicePolicy):
    """Selects labels from a fixed list, by name, in order."""

    def __init__(self, labels):
        self._labels = list(labels)
        self._next = 0

    def choose(self, state_id, labels, rng):
        if self._next >= len(self._labels):
            raise ConformanceViolation("fixed script exhausted")
        want = self._labels[self._next]
        self._next += 1
        for lbl in labels:
            if lbl.name == want:
                return lbl
        raise ConformanceViolation(f"scripted label {want!r} not enabled")


class RoundRobinPolicy(ChoicePolicy):
    """Cycles through the enabled labels of each state across visits."""

    def __init__(self):
        self._visits: dict[int, int] = {}

    def choose(self, state_id, labels, rng):
        n = self._visits.get(state_id, 0)
        self._visits[state_id] = n + 1
        return labels[n % len(labels)]


class SeededRandomPolicy(ChoicePolicy):
    def choose(self, state_id, labels, rng):
        return labels[rng.randrange(len(labels))]


class BoundedLoopPolicy(ChoicePolicy):
    """Takes looping branches a fixed number of times, then escapes.

    A branch loops when its target can reach the current state again; the
    first non-looping branch is the escape.  Keeps recursive protocols
    terminating without a per-protocol script.
    """

    def __init__(self, rounds: int = 2):
        self.rounds = rounds
        self._visits: dict[int, int] = {}
        self._efsm: Efsm | None = None
        self._reach: dict[int, frozenset[int]] = {}

    def bind(self, e: Efsm) -> "BoundedLoopPolicy":
        self._efsm = e
        adj: dict[int, set[int]] = {s.id: set() for s in e.states}
        for tr in e.transitions:
            adj[tr.source].add(tr.target)
        for sid in adj:
            seen = set()
            stack = [sid]
            while stack:
                cur = stack.pop()
                for nxt in adj[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            self._reach[sid] = frozenset(seen)
        return self

    def choose(self, state_id, labels, rng):
        assert self._efsm is not None, "policy not bound to a machine"
        n = self._visits.get(state_id, 0)
        self._visits[state_id] = n + 1
        by_label = {tr.action.msg: tr.target for tr in self._efsm.outgoing(state_id)}
        looping = [lbl for lbl in labels if state_id in self._reach[by_label[lbl]]]
        escaping = [lbl for lbl in labels if state_id not in self._reach[by_label[lbl]]]
        if n < self.rounds - 1 and looping:
            return looping[0]
        return (escaping or labels)[0]


# ---------------------------------------------------------------------------
# Session runner
# ---------------------------------------------------------------------------


def _decode_routed(g: GlobalType, router: Role) -> GlobalType:
    """Strip routing annotations, requiring the designated router everywhere."""
    if isinstance(g, (GEnd, GVar)):
        return g
    if isinstance(g, GRec):
        return GRec(g.var, _decode_routed(g.body, router))
    branches = tuple((lbl, _decode_routed(c, router)) for lbl, c in g.branches)
    if isinstance(g, GComm):
        return GComm(g.sender, g.receiver, branches)
    if isinstance(g, GRouted):
        if g.router != router:
            raise NotEncodable(f"interaction routed via {g.router}, expected {router}")
        return GComm(g.sender, g.receiver, branches)
    raise NotEncodable(f"cannot run sessions from transit state {type(g).__name__}")


def _has_routing(g: GlobalType) -> bool:
    if isinstance(g, (GEnd, GVar)):
        return False
    if isinstance(g, GRec):
        return _has_routing(g.body)
    if isinstance(g, GRouted):
        return True
    return any(_has_routing(c) for _, c in g.branches)


class _Endpoint:
    def __init__(self, role: Role, machine: Efsm):
        self.role = role
        self.machine = machine
        self.state = machine.initial
        self.observations: list[tuple[str, str, str]] = []

    @property
    def kind(self) -> str:
        return self.machine.state(self.state).kind

    def expected_receives(self):
        return [(tr.action.sender, tr.action.msg, tr.target)
                for tr in self.machine.outgoing(self.state)]

    def send_options(self):
        outs = self.machine.outgoing(self.state)
        return outs[0].action.receiver, tuple(tr.action.msg for tr in outs), \
            {tr.action.msg: tr.target for tr in outs}

    def advance(self, direction: str, peer: Role, msg: MsgLabel, target: int):
        self.observations.append((direction, peer.name, msg.name))
        self.state = target


def run_session(g: GlobalType, router: Role,
                scripts: dict[Role, ChoicePolicy] | None = None,
                cfg: SimConfig = SimConfig()) -> SessionLog:
    """Execute one session deterministically and return its delivery log.

    `g` may be the canonical protocol (messages delivered directly) or its
    routed encoding (client-to-client messages forwarded by the router); the
    machines driving the endpoints are identical either way, so client
    observations do not depend on the mode.
    """
    routed_mode = _has_routing(g)
    canonical = _decode_routed(g, router)
    wf = check_wf_routed(encode_global(canonical, router), router)
    if not wf.ok:
        raise SimulatorError(f"protocol not realisable through {router}: {wf.describe()}")

    roles = sorted(participants(canonical))
    endpoints = {r: _Endpoint(r, build_efsm(project(canonical, r), r)) for r in roles}
    if router not in endpoints and roles:
        # A router with no interactions of its own still forwards and
        # propagates cancellations; give it an empty machine and a slot in
        # the schedule.
        endpoints[router] = _Endpoint(router, build_efsm(LEnd(), router))
        roles = sorted(endpoints)
    scripts = dict(scripts or {})
    for r in roles:
        if r not in scripts:
            scripts[r] = BoundedLoopPolicy()
        policy = scripts[r]
        if isinstance(policy, BoundedLoopPolicy):
            policy.bind(endpoints[r].machine)

    rng = random.Random(cfg.seed)
    queues: dict[tuple[Role, Role], list[Envelope]] = \
        {(p, q): [] for p in roles for q in roles if p != q}
    staging: list[Envelope] = []  # router hop for client-to-client traffic
    control: list[Envelope] = []  # cancellations travel to the router
    payload_counters: dict[str, int] = {}
    records: list[LogRecord] = []
    cancellation: CancellationRecord | None = None
    cancel_sent = False
    step = 0
    rr_index = 0

    def payload_for(msg: MsgLabel) -> bytes:
        # Content is semantically inert: a seeded counter per sort keeps
        # payloads deterministic and distinguishable across runs.
        parts = []
        for sort in msg.payload_sorts:
            n = payload_counters.get(sort, 0)
            payload_counters[sort] = n + 1
            parts.append(f"{sort}#{cfg.seed}.{n}")
        return ",".join(parts).encode()

    def wants_cancel(role: Role) -> bool:
        return (cfg.cancel_injection is not None and not cancel_sent
                and role == cfg.cancel_injection[0]
                and step >= cfg.cancel_injection[1]
                and endpoints[role].kind != STATE_TERMINAL)

    def ready_action(role: Role):
        """The micro action `role` could take now, or None."""
        ep = endpoints[role]
        if role == router and (control or staging):
            return ("route",)
        if wants_cancel(role):
            return ("cancel",)
        if ep.kind == STATE_SEND:
            return ("send",)
        if ep.kind == STATE_RECEIVE:
            for peer, msg, target in ep.expected_receives():
                q = queues[(peer, role)]
                if q and q[0].kind == DATA and q[0].msg == msg:
                    return ("recv", peer, msg, target)
        return None

    def propagate_cancel(initiator: Role, reason: str):
        nonlocal cancellation, step
        notified = []
        for r in roles:
            if r in (initiator, router):
                continue
            env = Envelope(router, r, None, reason.encode(), CANCEL, reason)
            records.append(LogRecord(step, env))
            step += 1
            notified.append(r)
        if router != initiator:
            notified.append(router)
        cancellation = CancellationRecord(initiator, frozenset(notified))

    while step < cfg.max_steps:
        if cancellation is not None:
            break
        ready = [r for r in roles if ready_action(r) is not None]
        if not ready:
            if all(ep.kind == STATE_TERMINAL for ep in endpoints.values()) \
                    and not staging and not control \
                    and all(not q for q in queues.values()):
                break
            raise ConformanceViolation("session stuck with endpoints mid-protocol")

        if cfg.scheduler == "seeded-random":
            actor = ready[rng.randrange(len(ready))]
        else:
            while roles[rr_index % len(roles)] not in ready:
                rr_index += 1
            actor = roles[rr_index % len(roles)]
            rr_index += 1

        action = ready_action(actor)
        ep = endpoints[actor]
        if action[0] == "route":
            if control:
                env = control.pop(0)
                records.append(LogRecord(step, env))
                step += 1
                propagate_cancel(env.sender, env.reason)
                continue
            env = staging.pop(0)
            queues[(env.sender, env.receiver)].append(env)
            step += 1
        elif action[0] == "cancel":
            reason = f"cancelled by {actor}"
            cancel_sent = True
            step += 1
            if actor == router:
                # The router handles its own cancellation without a hop.
                propagate_cancel(actor, reason)
            else:
                control.append(Envelope(actor, router, None, reason.encode(), CANCEL, reason))
        elif action[0] == "send":
            receiver, labels, targets = ep.send_options()
            msg = scripts[actor].choose(ep.state, labels, rng)
            env = Envelope(actor, receiver, msg, payload_for(msg))
            if routed_mode and router not in (actor, receiver):
                staging.append(env)
            else:
                queues[(actor, receiver)].append(env)
            ep.advance(SEND, receiver, msg, targets[msg])
            step += 1
        else:
            _, peer, msg, target = action
            env = queues[(peer, actor)].pop(0)
            ep.advance(RECV, peer, msg, target)
            records.append(LogRecord(step, env))
            step += 1
    else:
        raise MaxStepsExceeded(f"no termination within {cfg.max_steps} steps")

    observations = tuple((r, tuple(endpoints[r].observations)) for r in roles)
    return SessionLog(tuple(records), cancellation, observations)


# ---------------------------------------------------------------------------
# Log validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    index: int
    detail: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"violation at envelope {self.index}: {self.detail}"


VALIDATION_STATE_CAP = 50_000


def parse_session_log(text: str) -> SessionLog:
    """Rebuild a SessionLog from its line serialisation.

    The wire format does not carry payload sorts or bytes, so parsed
    envelopes have bare labels and empty payloads; validate_log compares
    labels by name.
    """
    records = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        step, sender, receiver, kind, label = line.split(",")
        if kind == DATA:
            env = Envelope(Role(sender), Role(receiver), MsgLabel(label), b"")
        else:
            env = Envelope(Role(sender), Role(receiver), None, b"", CANCEL, label)
        records.append(LogRecord(int(step), env))
    return SessionLog(tuple(records), None, ())


def _delivery_key(label: ActionLabel):
    # Payload sorts are inert metadata; conformance compares labels by name.
    via = label.via.name if label.via else ""
    return (label.direction, label.sender.name, label.receiver.name, via,
            label.msg.name)


def validate_log(g: GlobalType, router: Role, log: SessionLog,
                 state_cap: int = VALIDATION_STATE_CAP) -> Violation | bool:
    """Check that the log's data-envelope prefix is realisable: there must be
    an interleaving of sends under which the configuration LTS of the encoded
    type performs exactly these deliveries, in order.

    Returns True on success, otherwise the first offending envelope index.
    """
    canonical = _decode_routed(g, router)
    encoded = encode_global(canonical, router)
    deliveries: list[Envelope] = []
    for rec in log.records:
        if rec.envelope.kind != DATA:
            break
        deliveries.append(rec.envelope)

    targets = []
    for env in deliveries:
        via = router if router not in (env.sender, env.receiver) else None
        targets.append(_delivery_key(
            ActionLabel(RECV, env.sender, env.receiver, env.msg, via=via)))

    remaining: dict[tuple[Role, Role], int] = {}
    pair_counts: list[dict[tuple[Role, Role], int]] = []
    for env in reversed(deliveries):
        remaining = dict(remaining)
        key = (env.sender, env.receiver)
        remaining[key] = remaining.get(key, 0) + 1
        pair_counts.append(remaining)
    pair_counts.reverse()
    pair_counts.append({})

    frontier = {project_configuration(encoded).canonical()}
    explored = 0
    for i, target in enumerate(targets):
        needed = pair_counts[i]
        next_frontier = set()
        seen = set(frontier)
        stack = list(frontier)
        while stack:
            conf = stack.pop()
            explored += 1
            if explored > state_cap:
                raise StateBudgetExceeded(state_cap, explored)
            for label, succ in config_steps(conf):
                if _delivery_key(label) == target:
                    next_frontier.add(succ.canonical())
                elif label.direction == SEND:
                    pair = (label.sender, label.receiver)
                    if len(conf.buffer(*pair)) >= needed.get(pair, 0):
                        continue  # nothing left in the log could consume it
                    key = succ.canonical()
                    if key not in seen:
                        seen.add(key)
                        stack.append(key)
        if not next_frontier:
            return Violation(i, f"delivery {deliveries[i].sender}->"
                                f"{deliveries[i].receiver} "
                                f"{deliveries[i].msg.name} not realisable here")
        frontier = next_frontier
    return True
