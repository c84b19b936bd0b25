import math

import numpy as np
import pytest

from miarec.errors import MissingEdgeError, NumericDomainError, UnknownIdError
from miarec.hetnet import RelationGraph, RelationKind, build_network
from miarec.influence import (
    academic_distance,
    build_table,
    build_tables,
    dump_table,
    gravity_force,
    influence_factor,
)

from conftest import corpus_from, make_paper


def star_graph(weights):
    """Hub 'h' connected to named leaves with given co-occurrence weights."""
    nodes = tuple(sorted(["h"] + list(weights)))
    edges = {(min("h", leaf), max("h", leaf)): w for leaf, w in weights.items()}
    return RelationGraph(RelationKind.COLLABORATION, nodes, edges)


def test_academic_distance_reciprocal():
    graph = star_graph({"a": 2, "b": 1})
    assert academic_distance(graph, "h", "a") == 0.5
    assert academic_distance(graph, "h", "b") == 1.0
    assert academic_distance(graph, "a", "h") == academic_distance(graph, "h", "a")


def test_academic_distance_missing_edge():
    graph = star_graph({"a": 1, "b": 1})
    with pytest.raises(MissingEdgeError):
        academic_distance(graph, "a", "b")


def test_influence_factor_hand_value():
    assert influence_factor(100, 0.5, constant=1.0) == 400.0
    assert influence_factor(0, 0.25) == 0.0


def test_influence_factor_domain_error():
    with pytest.raises(NumericDomainError):
        influence_factor(10, 0.0)


def test_gravity_force_over_own_mass_equals_influence_factor():
    for m_i, m_j, r in [(2, 5, 0.5), (7, 3, 1.0), (1, 9, 0.25)]:
        assert gravity_force(m_i, m_j, r) / m_i == pytest.approx(influence_factor(m_j, r))


def test_softmax_equal_influences():
    graph = star_graph({"a": 1, "b": 1})
    table = build_table(graph, {"h": 0, "a": 5, "b": 5})
    assert table.coeff[("h", "a")] == pytest.approx(0.5)
    assert table.coeff[("h", "b")] == pytest.approx(0.5)


def test_softmax_hand_value_one_zero():
    # influences (1, 0) -> (e/(e+1), 1/(e+1))
    graph = star_graph({"a": 1, "b": 1})
    table = build_table(graph, {"h": 0, "a": 1, "b": 0})
    e = math.e
    assert table.influence[("h", "a")] == 1.0
    assert table.influence[("h", "b")] == 0.0
    assert table.coeff[("h", "a")] == pytest.approx(e / (e + 1), abs=1e-12)
    assert table.coeff[("h", "b")] == pytest.approx(1 / (e + 1), abs=1e-12)


def test_single_neighbor_coefficient_is_one():
    graph = star_graph({"a": 3})
    table = build_table(graph, {"h": 1, "a": 7})
    assert table.coeff[("h", "a")] == 1.0
    assert table.coeff[("a", "h")] == 1.0


def test_rows_stochastic_on_synthetic(medium_synthetic):
    # Influence gaps here reach the thousands, so softmax tails may underflow
    # to exactly 0.0 in float64; rows must still sum to one.
    network = build_network(medium_synthetic)
    for table, graph in zip(build_tables(network, medium_synthetic.citation_mass), network.graphs):
        for node in graph.nodes:
            nbrs = graph.adjacency[node]
            if not nbrs:
                continue
            row = [table.coeff[(node, j)] for j in nbrs]
            assert abs(sum(row) - 1.0) <= 1e-9
            assert all(c >= 0 for c in row)
            assert max(row) > 0


def test_coefficients_positive_when_representable():
    graph = star_graph({"a": 1, "b": 2, "c": 3})
    table = build_table(graph, {"h": 2, "a": 3, "b": 1, "c": 0})
    for j in ("a", "b", "c"):
        assert table.coeff[("h", j)] > 0


def test_asymmetry_ratio_matches_masses(medium_synthetic):
    network = build_network(medium_synthetic)
    mass = medium_synthetic.citation_mass
    tables = build_tables(network, mass)
    checked = 0
    for table, graph in zip(tables, network.graphs):
        for (a, b) in graph.edge_weights:
            if mass[a] > 0 and mass[b] > 0:
                ratio = table.influence[(a, b)] / table.influence[(b, a)]
                assert ratio == pytest.approx(mass[b] / mass[a], abs=1e-9)
                checked += 1
    assert checked > 0


def test_shift_invariance_of_coefficients():
    # adding a constant to every influence in a row must not move the softmax
    from miarec.numkernel import softmax_vec

    row = np.array([3.0, 1.0, 0.5, 7.0])
    assert np.allclose(softmax_vec(row), softmax_vec(row + 123.456), atol=1e-12)


def test_scaling_constant_changes_unequal_rows_only():
    # h's influences with weights (1, 2) and equal masses: (2, 8) -> unequal,
    # so the gravitational constant acts as a softmax temperature there.
    graph = star_graph({"a": 1, "b": 2})
    unequal_g1 = build_table(graph, {"h": 0, "a": 2, "b": 2}, constant=1.0)
    unequal_g2 = build_table(graph, {"h": 0, "a": 2, "b": 2}, constant=2.0)
    assert unequal_g1.coeff[("h", "b")] != pytest.approx(unequal_g2.coeff[("h", "b")])
    # equal-influence row: scaling the constant cannot move it
    eq_graph = star_graph({"a": 1, "b": 1})
    eq1 = build_table(eq_graph, {"h": 0, "a": 3, "b": 3}, constant=1.0)
    eq2 = build_table(eq_graph, {"h": 0, "a": 3, "b": 3}, constant=5.0)
    assert eq1.coeff[("h", "a")] == pytest.approx(0.5, abs=1e-12)
    assert eq1.coeff[("h", "a")] == pytest.approx(eq2.coeff[("h", "a")], abs=1e-12)


def test_no_overflow_for_huge_influences():
    graph = star_graph({"a": 1000, "b": 1})
    table = build_table(graph, {"h": 0, "a": 1000, "b": 1})
    # influence of a on h is 1000 * 1000^2 = 1e9; softmax must stay finite
    values = [table.coeff[("h", "a")], table.coeff[("h", "b")]]
    assert all(np.isfinite(values))
    assert abs(sum(values) - 1.0) <= 1e-9


def test_isolated_nodes_get_empty_rows():
    graph = RelationGraph(RelationKind.CO_TOPIC, ("a", "b", "c"), {("a", "b"): 3})
    table = build_table(graph, {"a": 1, "b": 2, "c": 3})
    assert ("c", "a") not in table.coeff
    assert table.row(graph, "c") == {}
    with pytest.raises(UnknownIdError):
        table.row(graph, "zz")


def test_missing_mass_is_an_error():
    graph = star_graph({"a": 1})
    with pytest.raises(UnknownIdError):
        build_table(graph, {"h": 1})


def test_collaboration_distance_source():
    corpus = corpus_from(
        [
            make_paper("A", ["s1", "s2"], keywords=["a", "b", "c"], venue="V1"),
            make_paper("B", ["s2"], references=["A"], keywords=["a", "b", "c"], venue="V1"),
            make_paper("C", ["s3"], references=["A"], keywords=["a", "b", "c"], venue="V1"),
        ]
    )
    network = build_network(corpus)
    tables = build_tables(
        network, corpus.citation_mass, distance_source="collaboration", corpus=corpus
    )
    topic = next(t for t, g in zip(tables, network.graphs) if g.kind is RelationKind.CO_TOPIC)
    # s1-s3 never collaborated: zero influence on the co-topic edge
    assert topic.influence[("s1", "s3")] == 0.0
    # s1-s2 collaborated once and s2 has mass 2 (A cited twice)
    assert topic.influence[("s1", "s2")] == pytest.approx(2.0)
    # rows still stochastic
    row = topic.row(network.graphs[1], "s1")
    assert abs(sum(row.values()) - 1.0) <= 1e-9


def test_distance_source_validation(medium_synthetic):
    network = build_network(medium_synthetic)
    with pytest.raises(NumericDomainError):
        build_tables(network, medium_synthetic.citation_mass, distance_source="nope")
    with pytest.raises(NumericDomainError):
        build_tables(network, medium_synthetic.citation_mass, distance_source="collaboration")


def test_dump_table_sorted():
    graph = star_graph({"a": 1, "b": 2})
    table = build_table(graph, {"h": 1, "a": 2, "b": 3})
    lines = dump_table(graph, table).strip().splitlines()
    assert lines == sorted(lines)
    assert all(len(line.split()) == 5 for line in lines)
