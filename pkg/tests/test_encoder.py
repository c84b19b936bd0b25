import random
from types import SimpleNamespace

import numpy as np
import pytest

from miarec import tape
from miarec.encoder import (
    EncoderConfig,
    ModelParams,
    aggregate,
    attention_fuse,
    channel_forward,
    draw_plan,
    encode,
    encode_traced,
    interdependent_forward,
    layer_forward,
    parameter_group,
)
from miarec.hetnet import RelationGraph, RelationKind, build_network, sample_neighbors
from miarec.influence import build_table, build_tables
from miarec.numkernel import finite_difference_gradient, relative_gradient_error, xavier_init


def graph_from_edges(edges, nodes=None, kind=RelationKind.COLLABORATION):
    edge_weights = {}
    for e in edges:
        a, b = sorted(e[:2])
        edge_weights[(a, b)] = e[2] if len(e) > 2 else 1
    if nodes is None:
        nodes = sorted({n for e in edges for n in e[:2]})
    return RelationGraph(kind, tuple(sorted(nodes)), edge_weights)


def uniform_table(graph):
    """Influence table with equal masses: every coefficient is 1/degree."""
    return build_table(graph, {n: 1 for n in graph.nodes})


def random_graph(rng, n_nodes, p_edge):
    ids = [f"n{i:02d}" for i in range(n_nodes)]
    edges = [
        (a, b, rng.randint(1, 4))
        for i, a in enumerate(ids)
        for b in ids[i + 1 :]
        if rng.random() < p_edge
    ]
    return graph_from_edges(edges, nodes=ids)


def reference_symmetric_aggregate(graph, node, prev, node_index, sampled):
    """Independent symmetric-normalized sample-and-aggregate kernel."""
    width = prev.shape[1]
    if not sampled:
        return np.zeros(width)
    acc = np.zeros(width)
    deg_i = len(graph.adjacency[node])
    for j in sampled:
        deg_j = len(graph.adjacency[j])
        acc += prev[node_index[j]] / (np.sqrt(deg_i) * np.sqrt(deg_j))
    return np.maximum(acc / len(sampled), 0.0)


def test_aggregate_single_neighbor_hand_value():
    graph = graph_from_edges([("i", "j")])
    prev = np.array([[0.0, 0.0], [2.0, -2.0]])  # nodes sorted: i, j
    out = aggregate(graph, "i", prev, sample_size=5, rng_state=0, influence_mode="uniform")
    assert np.allclose(out, [2.0, 0.0], atol=1e-15)


def test_aggregate_zero_neighbors_give_zero_vector():
    graph = graph_from_edges([("i", "j")])
    prev = np.zeros((2, 3))
    out = aggregate(graph, "i", prev, sample_size=4, rng_state=0, influence_mode="uniform")
    assert np.array_equal(out, np.zeros(3))


def test_aggregate_isolated_node_zero_vector():
    graph = graph_from_edges([("a", "b")], nodes=["a", "b", "z"])
    prev = np.ones((3, 4))
    out = aggregate(graph, "z", prev, sample_size=3, rng_state=1, influence_mode="uniform")
    assert np.array_equal(out, np.zeros(4))


def test_aggregate_regular_graph_uniform_mode():
    # 4-cycle: every degree is 2; equal neighbor embeddings u -> ReLU(u / 2)
    graph = graph_from_edges([("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")])
    u = np.array([3.0, -1.5, 0.5])
    prev = np.tile(u, (4, 1))
    out = aggregate(graph, "b", prev, sample_size=10, rng_state=0, influence_mode="uniform")
    assert np.allclose(out, np.maximum(u / 2.0, 0.0), atol=1e-15)


def test_aggregate_gravity_uses_coefficients():
    graph = graph_from_edges([("i", "a"), ("i", "b")])
    table = build_table(graph, {"i": 0, "a": 5, "b": 0})
    prev = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])  # rows: a, b, i
    out = aggregate(
        graph, "i", prev, sample_size=5, rng_state=0, influence_table=table, influence_mode="gravity"
    )
    # coefficient of a dominates; both entries scaled by 1/(2*sqrt(2)*sqrt(1))
    w = 1.0 / (2.0 * np.sqrt(2.0))
    assert out[0] == pytest.approx(table.coeff[("i", "a")] * w)
    assert out[1] == pytest.approx(table.coeff[("i", "b")] * w)


def test_uniform_mode_matches_reference_kernel_on_random_graphs():
    rng = random.Random(99)
    for trial in range(100):
        graph = random_graph(rng, rng.randint(4, 12), 0.4)
        node_index = {n: i for i, n in enumerate(graph.nodes)}
        prev = np.asarray(
            xavier_init(len(graph.nodes), 5, trial) * 3.0
        )
        s = rng.randint(1, 5)
        for node in graph.nodes:
            got = aggregate(
                graph, node, prev, sample_size=s, rng_state=trial, influence_mode="uniform"
            )
            sampled = sample_neighbors(graph, node, s, trial)
            want = reference_symmetric_aggregate(graph, node, prev, node_index, sampled)
            assert np.allclose(got, want, atol=1e-12)


def test_layer_forward_zero_weight_gives_zero():
    graph = graph_from_edges([("a", "b"), ("b", "c")])
    prev = np.ones((3, 4))
    out = layer_forward(graph, np.zeros((4, 8)), prev, 2, 0, influence_mode="uniform")
    assert np.array_equal(out, np.zeros((3, 4)))


def test_layer_forward_identity_on_self_half():
    graph = graph_from_edges([("a", "b"), ("b", "c")])
    rng = np.random.default_rng(3)
    prev = rng.normal(size=(3, 4))
    weight = np.concatenate([np.eye(4), np.zeros((4, 4))], axis=1)  # [I | 0]
    out = layer_forward(graph, weight, prev, 2, 0, influence_mode="uniform")
    assert np.allclose(out, np.maximum(prev, 0.0), atol=1e-12)


def test_layer_forward_output_shape():
    graph = graph_from_edges([("a", "b"), ("b", "c"), ("c", "d")])
    out = layer_forward(graph, np.ones((6, 8)), np.ones((4, 4)), 2, 0, influence_mode="uniform")
    assert out.shape == (4, 6)


def test_layer_forward_matches_per_node_aggregate():
    # the vectorized layer and the public per-node aggregate share samples
    graph = graph_from_edges([("a", "b"), ("b", "c"), ("c", "d"), ("a", "d"), ("a", "c")])
    node_index = {n: i for i, n in enumerate(graph.nodes)}
    rng = np.random.default_rng(8)
    prev = rng.normal(size=(4, 3))
    weight = rng.normal(size=(3, 6))
    table = build_table(graph, {n: i + 1 for i, n in enumerate(graph.nodes)})
    out = layer_forward(
        graph, weight, prev, 2, 17, influence_table=table, influence_mode="gravity", salt="x"
    )
    for node in graph.nodes:
        agg = aggregate(
            graph, node, prev, 2, 17, influence_table=table, influence_mode="gravity", salt="x"
        )
        want = np.maximum(weight @ np.concatenate([prev[node_index[node]], agg]), 0.0)
        assert np.allclose(out[node_index[node]], want, atol=1e-12)


def test_channel_forward_single_layer_reduces_to_layer_forward():
    graph = graph_from_edges([("a", "b"), ("b", "c")])
    rng = np.random.default_rng(5)
    features = rng.normal(size=(3, 4))
    weight = rng.normal(size=(4, 8))
    config = EncoderConfig(layers=1, sample_sizes=(2,), dim=4, influence_mode="uniform")
    via_channel = channel_forward(graph, [weight], features, config, rng_state=9)
    via_layer = layer_forward(
        graph, weight, features, 2, 9, influence_mode="uniform",
        salt=f"indep|{graph.kind.value}|layer0",
    )
    assert np.allclose(via_channel, via_layer, atol=1e-14)


def test_channel_forward_deterministic(small_synthetic, small_network):
    # the co-venue graph has degrees above the sample size, so the seed matters
    graph = next(g for g in small_network.graphs if g.kind.value == "co_venue")
    assert max(graph.degree(n) for n in graph.nodes) > 2
    config = EncoderConfig(layers=2, sample_sizes=(2, 2), dim=6, influence_mode="uniform")
    rng = np.random.default_rng(0)
    weights = [rng.normal(size=(6, 12)) for _ in range(2)]
    features = rng.normal(size=(len(graph.nodes), 6))
    a = channel_forward(graph, weights, features, config, rng_state=42)
    b = channel_forward(graph, weights, features, config, rng_state=42)
    assert np.array_equal(a, b)
    c = channel_forward(graph, weights, features, config, rng_state=43)
    assert not np.array_equal(a, c)


def test_channel_forward_permutation_equivariance():
    rng = random.Random(4)
    graph = random_graph(rng, 10, 0.5)
    ids = list(graph.nodes)
    relabel = {old: f"z{rng.random():.12f}" for old in ids}  # random new ids
    inverse = {new: old for old, new in relabel.items()}
    permuted = graph_from_edges(
        [(relabel[a], relabel[b], w) for (a, b), w in graph.edge_weights.items()],
        nodes=[relabel[n] for n in ids],
    )
    config = EncoderConfig(layers=2, sample_sizes=(3, 3), dim=5, influence_mode="uniform")
    nprng = np.random.default_rng(6)
    weights = [nprng.normal(size=(5, 10)) for _ in range(2)]
    features = nprng.normal(size=(10, 5))
    index1 = {n: i for i, n in enumerate(graph.nodes)}
    index2 = {n: i for i, n in enumerate(permuted.nodes)}
    features2 = np.zeros_like(features)
    for old in ids:
        features2[index2[relabel[old]]] = features[index1[old]]
    out1 = channel_forward(graph, weights, features, config, rng_state=7)
    out2 = channel_forward(
        permuted, weights, features2, config, rng_state=7, node_key=lambda n: inverse[n]
    )
    for old in ids:
        assert np.allclose(out1[index1[old]], out2[index2[relabel[old]]], atol=1e-12)


def test_interdependent_identical_graphs_mean_equals_single():
    edges = [("a", "b"), ("b", "c"), ("a", "c")]
    g1 = graph_from_edges(edges, kind=RelationKind.COLLABORATION)
    g2 = graph_from_edges(edges, kind=RelationKind.CO_TOPIC)
    network = SimpleNamespace(graphs=[g1, g2], k=2, nodes=g1.nodes)
    rng = np.random.default_rng(1)
    weights = [rng.normal(size=(4, 8))]
    features = rng.normal(size=(3, 4))
    # sample size covers every degree, so both graphs aggregate identically
    config = EncoderConfig(layers=1, sample_sizes=(5,), dim=4, influence_mode="uniform")
    combined, per_graph = interdependent_forward(network, weights, features, config, rng_state=3)
    assert np.allclose(per_graph[0], per_graph[1], atol=1e-15)
    assert np.allclose(combined, per_graph[0], atol=1e-15)


def test_interdependent_single_graph_mean_is_identity():
    graph = graph_from_edges([("a", "b")])
    network = SimpleNamespace(graphs=[graph], k=1, nodes=graph.nodes)
    rng = np.random.default_rng(2)
    weights = [rng.normal(size=(3, 6))]
    features = rng.normal(size=(2, 3))
    config = EncoderConfig(layers=1, sample_sizes=(2,), dim=3, influence_mode="uniform")
    combined, per_graph = interdependent_forward(network, weights, features, config, rng_state=0)
    assert np.array_equal(combined, per_graph[0])


def test_interdependent_gradient_is_sum_of_per_graph_contributions(small_synthetic):
    # loss = sum(U'); the shared-weight gradient must equal the sum of the
    # gradients obtained by running each graph alone, scaled by 1/k
    network = build_network(small_synthetic)
    config = EncoderConfig(layers=1, sample_sizes=(3,), dim=4, influence_mode="uniform")
    n = len(network.nodes)
    rng = np.random.default_rng(12)
    weight = rng.normal(size=(4, 8))
    features = rng.normal(size=(n, 4))
    plan = draw_plan(network, config, rng_state=5)

    from miarec.encoder import _channel_traced

    def shared_pass(graph, weight_var, features_var):
        node_order = list(network.nodes)
        node_index = {m: i for i, m in enumerate(node_order)}
        return _channel_traced(
            graph, node_order, node_index, [weight_var], features_var, plan, "shared",
            "uniform", None, None,
        )

    w_all = tape.param(weight)
    f_all = tape.const(features)
    acc = None
    for graph in network.graphs:
        u = shared_pass(graph, w_all, f_all)
        acc = u if acc is None else tape.add(acc, u)
    tape.backward(tape.sum_all(tape.scale(acc, 1.0 / network.k)))
    full_grad = w_all.grad

    summed = np.zeros_like(weight)
    for graph in network.graphs:
        w_one = tape.param(weight)
        u = shared_pass(graph, w_one, tape.const(features))
        tape.backward(tape.sum_all(tape.scale(u, 1.0 / network.k)))
        summed += w_one.grad
    assert np.allclose(full_grad, summed, atol=1e-12)

    def objective(candidate):
        w_var = tape.const(candidate)
        f_var = tape.const(features)
        acc2 = None
        for graph in network.graphs:
            u = shared_pass(graph, w_var, f_var)
            acc2 = u if acc2 is None else tape.add(acc2, u)
        return float(tape.sum_all(tape.scale(acc2, 1.0 / network.k)).value)

    numeric = finite_difference_gradient(objective, weight.copy())
    assert relative_gradient_error(full_grad, numeric) <= 1e-4


def test_attention_fuse_equal_scores_uniform_weights():
    n, d = 5, 4
    base = np.random.default_rng(0).normal(size=(n, d))
    channels = [base.copy() for _ in range(4)]  # identical -> equal scores
    fuse_w = np.random.default_rng(1).normal(size=(d, d))
    fused, alphas = attention_fuse(channels, fuse_w, np.zeros(d), np.ones(d))
    assert np.allclose(alphas, 0.25, atol=1e-12)
    assert np.allclose(fused, base, atol=1e-12)


def test_attention_fuse_zero_query_uniform_weights():
    rng = np.random.default_rng(7)
    channels = [rng.normal(size=(4, 3)) for _ in range(3)]
    fused, alphas = attention_fuse(channels, rng.normal(size=(3, 3)), rng.normal(size=3), np.zeros(3))
    assert np.allclose(alphas, 1.0 / 3.0, atol=1e-12)
    assert np.allclose(fused, sum(channels) / 3.0, atol=1e-12)


def test_attention_fuse_identical_channels_any_alpha():
    rng = np.random.default_rng(8)
    base = rng.normal(size=(6, 4))
    fused, alphas = attention_fuse(
        [base, base, base], rng.normal(size=(4, 4)), rng.normal(size=4), rng.normal(size=4)
    )
    assert np.allclose(fused, base, atol=1e-12)
    assert np.allclose(alphas.sum(axis=1), 1.0, atol=1e-9)


def fixture_setup(influence_mode="gravity", use_interdependent=True, seed=3):
    from miarec.corpus import generate_synthetic

    corpus = generate_synthetic(2, 6, 3, 0.9, 2)
    network = build_network(corpus)
    tables = build_tables(network, corpus.citation_mass)
    config = EncoderConfig(
        layers=2,
        sample_sizes=(3, 3),
        dim=6,
        attention_dim=6,
        influence_mode=influence_mode,
        use_interdependent=use_interdependent,
    )
    params = ModelParams.initialize(
        n_nodes=len(network.nodes),
        n_relations=network.k,
        config=config,
        align_dim=6,
        seed=seed,
    )
    return network, tables, config, params


def test_encode_alpha_simplex():
    network, tables, config, params = fixture_setup()
    emb = encode(network, tables, params, config, rng_state=1)
    assert emb.alphas.shape == (len(network.nodes), network.k + 1)
    assert np.allclose(emb.alphas.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(emb.alphas >= 0)
    assert emb.channel_labels[-1] == "interdependent"


def test_encode_gravity_differs_from_uniform():
    network, tables, config, params = fixture_setup("gravity")
    uniform_config = EncoderConfig(
        layers=2, sample_sizes=(3, 3), dim=6, attention_dim=6,
        influence_mode="uniform", use_interdependent=True,
    )
    a = encode(network, tables, params, config, rng_state=1)
    b = encode(network, tables, params, uniform_config, rng_state=1)
    assert not np.allclose(a.fused, b.fused, atol=1e-9)


def test_encode_interdependent_toggle_changes_output():
    network, tables, config, params = fixture_setup(use_interdependent=True)
    off_config = EncoderConfig(
        layers=2, sample_sizes=(3, 3), dim=6, attention_dim=6,
        influence_mode="gravity", use_interdependent=False,
    )
    on = encode(network, tables, params, config, rng_state=4)
    off = encode(network, tables, params, off_config, rng_state=4)
    assert off.interdependent is None
    assert off.alphas.shape[1] == network.k
    assert not np.allclose(on.fused, off.fused, atol=1e-9)


def test_encode_attention_mode_runs_and_depends_on_edge_params():
    network, tables, config, params = fixture_setup("attention")
    # pick a channel whose graph has degrees > 1: a singleton softmax is
    # constant no matter the edge parameters
    target = next(
        r for r, g in enumerate(network.graphs)
        if max(g.degree(n) for n in g.nodes) > 1
    )
    emb1 = encode(network, tables, params, config, rng_state=2)
    bumped = params.copy()
    name = f"channel{target}.layer0.edge_a"
    bumped.arrays[name] = bumped.arrays[name] + np.linspace(-1.0, 1.0, bumped.arrays[name].size)
    emb2 = encode(network, tables, bumped, config, rng_state=2)
    assert np.allclose(emb1.alphas.sum(axis=1), 1.0, atol=1e-9)
    assert not np.allclose(emb1.fused, emb2.fused, atol=1e-12)


def test_mass_scaling_leaves_equal_influence_rows_invariant():
    # triangle with equal weights and equal masses: every row has equal
    # influences, so scaling all masses by c > 0 cannot move the softmax
    graph = graph_from_edges([("a", "b"), ("b", "c"), ("a", "c")])
    base = build_table(graph, {"a": 2, "b": 2, "c": 2})
    scaled = build_table(graph, {"a": 6, "b": 6, "c": 6})
    for pair, coeff in base.coeff.items():
        assert coeff == pytest.approx(scaled.coeff[pair], abs=1e-12)
    # unequal masses: scaling is visible through softmax sharpening
    uneq1 = build_table(graph, {"a": 1, "b": 2, "c": 3})
    uneq3 = build_table(graph, {"a": 3, "b": 6, "c": 9})
    assert any(
        abs(uneq1.coeff[p] - uneq3.coeff[p]) > 1e-6 for p in uneq1.coeff
    )


def test_parameter_group_names():
    assert parameter_group("channel0.layer1.weight") == "encoder channels"
    assert parameter_group("channel2.features") == "node features"
    assert parameter_group("shared.layer0.weight") == "shared channel"
    assert parameter_group("shared.features") == "node features"
    assert parameter_group("fuse.query") == "attention"
    assert parameter_group("align.bias") == "alignment"
    assert parameter_group("shared.layer1.edge_a") == "edge attention"
    assert parameter_group("papers.table") == "paper table"
    with pytest.raises(KeyError):
        parameter_group("mystery")


def test_encode_traced_matches_public_encode():
    network, tables, config, params = fixture_setup()
    plan = draw_plan(network, config, rng_state=21)
    vars_by_name = {k: tape.const(v) for k, v in params.arrays.items()}
    traced = encode_traced(network, tables, vars_by_name, config, plan)
    public = encode(network, tables, params, config, rng_state=21)
    assert np.array_equal(traced.fused.value, public.fused)
    assert np.array_equal(traced.alphas.value, public.alphas)
