from routedmpst.core import GEnd, Role
from routedmpst.encoding import encode_global
from routedmpst.wellformed import check_wf, check_wf_routed, is_centroid

from corpus import A, B, C, G1_MERGE, G2_MERGE, G_TRAVEL, G_TRAVEL_ROUTED, S


def test_centroid_of_encoded_travel_agency():
    assert is_centroid(G_TRAVEL_ROUTED, S).ok
    assert is_centroid(encode_global(G_TRAVEL, S), S).ok


def test_centroid_fails_on_plain_travel_agency_with_witness():
    result = is_centroid(G_TRAVEL, S)
    assert not result.ok
    # The outermost violation is the opening interaction between B and A.
    assert result.witness_path == ()
    assert "B->A" in result.witness


def test_centroid_end_axiom():
    assert is_centroid(GEnd(), Role("anyone")).ok


def test_check_wf_travel_agency():
    assert check_wf(G_TRAVEL).ok


def test_check_wf_merge_counterexample_names_role():
    report = check_wf(G2_MERGE)
    assert not report.ok
    assert [name for name, _ in report.projection_failures] == ["C"]
    assert check_wf(G1_MERGE).ok


def test_check_wf_end():
    assert check_wf(GEnd()).ok


def test_check_wf_routed_encoded_travel_agency():
    assert check_wf_routed(encode_global(G_TRAVEL, S), S).ok


def test_check_wf_routed_fails_without_centroid():
    report = check_wf_routed(G_TRAVEL, S)
    assert not report.ok
    assert report.centroid is not None and not report.centroid.ok
    assert not report.projection_failures  # projections all exist


def test_check_wf_routed_end():
    assert check_wf_routed(GEnd(), Role("any")).ok


def test_wf_report_describe_mentions_causes():
    report = check_wf_routed(G2_MERGE, S)
    text = report.describe()
    assert "projection undefined for C" in text
    assert "centroid" in text


def test_known_gap_routed_wf_does_not_imply_plain_wf():
    # Pinned counterexample to the reverse direction of the well-formedness
    # equivalence: C cannot project the plain protocol (it would have to
    # merge `end` with a branch), but as the router of the encoded protocol
    # it forwards both branches without any merge, so the routed check
    # succeeds.  Found by the generator suites; kept so the gap stays
    # visible.
    from routedmpst.core import GComm, GEnd, MsgLabel
    from routedmpst.encoding import encode_global
    m1, m2 = MsgLabel("m1"), MsgLabel("m2")
    g = GComm(A, B, ((m1, GComm(A, B, (
        (m1, GEnd()),
        (m2, GComm(A, C, ((m1, GEnd()),))),
    ))),))
    assert not check_wf(g).ok
    assert check_wf_routed(encode_global(g, C), C).ok
