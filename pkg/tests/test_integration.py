from __future__ import annotations

from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depwarden.catalog import AttributeGroup
from depwarden.dsl import DependabilityModel, load_model, parse_model
from depwarden.integration import (
    MergeConflict,
    RowClass,
    classify,
    integrate,
    tradeoff_matrix,
)
from depwarden.sig import CycleDetected, path_effect

from model_gen import random_source

AR = AttributeGroup.AVAILABILITY_RELIABILITY
MA = AttributeGroup.MAINTAINABILITY
SE = AttributeGroup.SECURITY
FIG7 = resources.files("depwarden") / "data" / "fig7.dwm"
FRAG = "dw.optimization.fragmentation"


@pytest.fixture(scope="module")
def fig7():
    return integrate(load_model(FIG7))


def model(text):
    m, diags = parse_model(text)
    assert m is not None, [d.format() for d in diags]
    return m


def test_shared_reference_merges_with_full_provenance(fig7):
    assert fig7.provenance[FRAG] == (AR, MA, SE)
    assert [orig for _, orig in fig7.origins[FRAG]] == ["fragmentation"] * 3
    node = fig7.graph.node(FRAG)
    assert node.catalog_ref.slug == FRAG


def test_roots_are_never_merged(fig7):
    assert sorted(fig7.graph.roots) == ["availability_reliability", "maintainability", "security"]
    for root in fig7.graph.roots:
        assert len(fig7.provenance[root]) == 1


def test_fig7_matrix(fig7):
    m = tradeoff_matrix(fig7)
    assert m.columns == ("availability_reliability", "maintainability", "security")
    assert m.by_attribute(FRAG) == {AR: 1, MA: -1, SE: -1}
    assert m.classification(FRAG) is RowClass.CONFLICTING
    assert m.row("dw.replication") == {"availability_reliability": 2, "maintainability": 0, "security": 0}
    assert m.classification("dw.replication") is RowClass.HARMONIOUS
    assert m.classification("dw.support.encryption") is RowClass.INERT


def test_cells_equal_path_effect(fig7):
    m = tradeoff_matrix(fig7)
    for op in m.rows:
        for col in m.columns:
            assert m.cells[(op, col)] == path_effect(fig7.graph, op, col)


def test_disjoint_refs_give_disjoint_union():
    m = model("""model d
sig availability_reliability { goal ar; op a ref dw.replication; a -make-> ar }
sig security { goal se; op b ref dw.support.encryption; b -help-> se }
""")
    merged = integrate(m)
    assert sorted(merged.graph.ids) == ["ar", "dw.replication", "dw.support.encryption", "se"]
    assert len(merged.graph.links) == 2


def test_clashing_local_ids_are_qualified():
    m = model("""model d
sig availability_reliability { goal root; op tuning; tuning -help-> root }
sig maintainability { goal root; op tuning; tuning -hurt-> root }
""")
    ids = integrate(m).graph.ids
    assert "availability_reliability.root" in ids and "maintainability.tuning" in ids


def test_same_reference_with_different_kinds_conflicts():
    m = model("""model d
sig availability_reliability { goal ar; op x ref dw.replication; x -make-> ar }
sig security { goal se; goal y ref dw.replication; y -help-> se }
""")
    with pytest.raises(MergeConflict):
        integrate(m)


def test_merge_creating_a_cycle_is_detected():
    m = model("""model d
sig availability_reliability {
  goal ar; op a ref dw.replication; op b ref dw.support.hard_disc
  a -help-> b; b -help-> ar
}
sig maintainability {
  goal ma; op a ref dw.replication; op b ref dw.support.hard_disc
  b -help-> a; a -help-> ma
}
""")
    with pytest.raises(CycleDetected) as info:
        integrate(m)
    # oracle: the two opposing links are the only edges between the merged nodes
    assert set(info.value.cycle) == {"dw.replication", "dw.support.hard_disc"}


def test_disconnected_operationalization_is_inert():
    m = model("model d\nsig security { goal se; op idle ref dw.replication; op x; x -help-> se }\n")
    matrix = tradeoff_matrix(integrate(m))
    assert matrix.row("dw.replication") == {"se": 0}
    assert matrix.classification("dw.replication") is RowClass.INERT


@pytest.mark.parametrize("values,expected", [
    ([1, -1], RowClass.CONFLICTING),
    ([2, 0], RowClass.HARMONIOUS),
    ([0, -1], RowClass.ADVERSE),
    ([0, 0], RowClass.INERT),
    ([], RowClass.INERT),
])
def test_classify(values, expected):
    assert classify(values) is expected


def test_to_dict_and_text(fig7):
    m = tradeoff_matrix(fig7)
    doc = m.to_dict()
    assert [c["attribute"] for c in doc["columns"]] == ["availability_reliability", "maintainability", "security"]
    assert [r["id"] for r in doc["rows"]] == sorted(r["id"] for r in doc["rows"])
    frag = next(r for r in doc["rows"] if r["id"] == FRAG)
    assert frag["class"] == "conflicting"
    lines = m.format_text().splitlines()
    assert lines[0].startswith("operationalization")
    assert any(l.startswith(FRAG) and "+1" in l and "-1" in l for l in lines)


def test_integration_is_idempotent_on_single_sig_models():
    m = model("""model d
sig security { goal se; op a ref dw.support.encryption; op b; a -help-> se; b -hurt-> se }
""")
    once = integrate(m)
    again = integrate(DependabilityModel("d", m.target_layers, {SE: once.graph}))
    assert again.graph == once.graph
    assert again.provenance == once.provenance


@settings(max_examples=60)
@given(st.randoms(use_true_random=False))
def test_matrix_stable_under_sig_order(rnd):
    text = random_source(rnd)
    m = model(text)
    try:
        base = integrate(m)
    except (MergeConflict, CycleDetected):
        return
    blocks = text.split("sig ")
    head, sigs = blocks[0], ["sig " + b for b in blocks[1:]]
    rnd.shuffle(sigs)
    permuted = integrate(model(head + "\n".join(s.rstrip() for s in sigs) + "\n"))
    assert tradeoff_matrix(permuted) == tradeoff_matrix(base)
    assert permuted.provenance == base.provenance


@settings(max_examples=60)
@given(st.randoms(use_true_random=False))
def test_provenance_counts_citing_sigs(rnd):
    m = model(random_source(rnd))
    try:
        merged = integrate(m)
    except (MergeConflict, CycleDetected):
        return
    for node_id, groups in merged.provenance.items():
        node = merged.graph.node(node_id)
        if node.catalog_ref is None or node_id in merged.graph.roots:
            continue
        citing = [g for g, graph in m.sigs.items()
                  if any(s.catalog_ref == node.catalog_ref and s.kind is node.kind for s in graph.softgoals)]
        if node.kind.value == "op":
            assert len(groups) == len(citing)


def test_integration_is_deterministic():
    assert integrate(load_model(FIG7)) == integrate(load_model(FIG7))
