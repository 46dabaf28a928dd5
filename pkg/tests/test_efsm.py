import json
import re

from routedmpst.core import LEnd, Role, canonicalize
from routedmpst.efsm import (
    STATE_RECEIVE, STATE_SEND, STATE_TERMINAL, build_efsm, efsm_ir, render_dot,
)
from routedmpst.encoding import encode_global
from routedmpst.projection import project
from routedmpst.semantics import local_steps

from corpus import A, B, G_TRAVEL, S, load

TRAVEL_A_MACHINE = {
    (1, "B?Suggest", 2),
    (2, "S!Query", 3),
    (3, "S?Full", 4),
    (4, "B!Full", 1),
    (3, "S?Available", 5),
    (5, "B!Quote", 6),
    (6, "B?Ok", 7),
    (6, "B?No", 8),
    (7, "S!Confirm", 9),
    (8, "S!Reject", 9),
}


def travel_machine(role=A, source=None):
    g = source if source is not None else load("TravelAgency")
    return build_efsm(project(g, role), role)


def test_travel_agency_role_a_matches_reference_machine():
    e = travel_machine()
    assert len(e.states) == 9
    assert len(e.transitions) == 10
    got = {(t.source, t.display(A), t.target) for t in e.transitions}
    assert got == TRAVEL_A_MACHINE
    assert e.initial == 1
    assert e.terminal_ids == (9,)


def test_states_partition_into_send_receive_terminal():
    e = travel_machine()
    kinds = {s.id: s.kind for s in e.states}
    assert kinds[1] == STATE_RECEIVE and kinds[2] == STATE_SEND
    assert kinds[9] == STATE_TERMINAL
    for tr in e.transitions:
        if kinds[tr.source] == STATE_SEND:
            assert tr.direction == "!"
        else:
            assert tr.direction == "?"


def test_end_machine():
    e = build_efsm(LEnd(), A)
    assert len(e.states) == 1
    assert e.states[0].kind == STATE_TERMINAL
    assert e.transitions == ()


def test_pingpong_client_machine():
    C = Role("C")
    e = build_efsm(project(load("PingPong"), C), C)
    assert len(e.states) == 3
    got = {(t.source, t.display(C), t.target) for t in e.transitions}
    assert got == {(1, "S!PING", 2), (2, "S?PONG", 1), (2, "S?BYE", 3)}


def test_routed_transitions_carry_via():
    g = encode_global(G_TRAVEL, S)
    e = build_efsm(project(g, A), A)
    assert len(e.states) == 9
    vias = {t.display(A) for t in e.transitions if t.via is not None}
    assert "B?Suggest (via S)" in vias
    assert "B!Quote (via S)" in vias
    assert {t.display(A) for t in e.transitions if t.via is None} == \
        {"S!Query", "S?Full", "S?Available", "S!Confirm", "S!Reject"}


def test_router_machine_includes_forwarding_states():
    g = encode_global(G_TRAVEL, S)
    e = build_efsm(project(g, S), S)
    routed = [t for t in e.transitions if t.via == S]
    assert routed, "router machine should expose forwarding transitions"
    # Forwarding accept and delivery alternate through in-transit states.
    for tr in routed:
        assert tr.action.sender != S and tr.action.receiver != S


def test_machine_agrees_with_local_lts_on_every_state():
    for role in (A, B, S):
        e = travel_machine(role)
        by_key = {canonicalize(s.local_type): s.id for s in e.states}
        for st in e.states:
            machine_steps = {(tr.action, by_key[_target_key(e, tr)])
                             for tr in e.outgoing(st.id)}
            lts = {(label, by_key[canonicalize(_unfold(succ))])
                   for label, succ in local_steps(st.local_type, role)}
            assert machine_steps == lts, (role, st.id)


def _unfold(t):
    from routedmpst.core import LRec, unfold_once
    while isinstance(t, LRec):
        t = unfold_once(t)
    return t


def _target_key(e, tr):
    return canonicalize(e.state(tr.target).local_type)


def test_state_count_equals_distinct_canonical_subterms():
    e = travel_machine()
    keys = {canonicalize(s.local_type) for s in e.states}
    assert len(keys) == len(e.states)


DOT_EDGE = re.compile(r'^\s*(\w+) -> (\w+)(?: \[label="([^"]*)"\])?;$')
DOT_NODE = re.compile(r'^\s*(\w+) \[shape=(\w+)(?:, label="")?\];$')


def parse_dot(text: str):
    """Tiny DOT reader covering the shapes render_dot emits."""
    lines = text.strip().splitlines()
    assert lines[0].startswith("digraph ") and lines[0].endswith("{")
    assert lines[-1] == "}"
    nodes, edges = {}, []
    for line in lines[1:-1]:
        if line.strip() in ("rankdir=LR;",):
            continue
        node = DOT_NODE.match(line)
        if node:
            nodes[node.group(1)] = node.group(2)
            continue
        edge = DOT_EDGE.match(line)
        if edge:
            edges.append((edge.group(1), edge.group(2), edge.group(3)))
            continue
        raise AssertionError(f"unparseable DOT line: {line!r}")
    return nodes, edges


def test_dot_round_trips_through_grammar_checker():
    e = travel_machine()
    nodes, edges = parse_dot(render_dot(e))
    assert set(nodes) == {"__start"} | {str(i) for i in range(1, 10)}
    assert nodes["9"] == "doublecircle"
    labelled = {(int(s), lbl, int(t)) for s, t, lbl in edges if s != "__start"}
    assert labelled == TRAVEL_A_MACHINE
    assert ("__start", "1", None) in edges


def test_dot_end_machine_single_doublecircle():
    nodes, edges = parse_dot(render_dot(build_efsm(LEnd(), A)))
    assert nodes == {"__start": "point", "1": "doublecircle"}
    assert edges == [("__start", "1", None)]


def test_ir_is_stable_json():
    e = travel_machine()
    first = efsm_ir(e)
    second = efsm_ir(travel_machine())
    assert first == second
    payload = json.loads(first)
    assert payload["role"] == "A"
    assert payload["initial"] == 1
    assert len(payload["states"]) == 9
    assert len(payload["transitions"]) == 10
    suggest = payload["transitions"][0]
    assert suggest == {"from": 1, "to": 2, "peer": "B", "dir": "?",
                       "label": "Suggest", "payloads": ["string"]}


def test_router_machine_ir_names_both_endpoints():
    g = encode_global(G_TRAVEL, S)
    machine = build_efsm(project(g, S), S)
    payload = json.loads(efsm_ir(machine))
    forwarding = [t for t in payload["transitions"] if "from_role" in t]
    assert forwarding, "router forwarding transitions must carry the sender"
    first = forwarding[0]
    assert first["via"] == "S"
    assert {first["from_role"], first["peer"]} <= {"A", "B"}
