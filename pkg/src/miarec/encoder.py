"""Multi-channel scholar encoder.

Each relation graph feeds an independent channel of stacked sample-and-
aggregate layers; one extra interdependent channel runs every graph through
a single shared weight stack and averages the results. Per-node attention
over the channel embeddings produces the fused scholar representation.

The neighbor aggregation step weights a sampled neighbor j of node i by

    M_ij / (|SN_i| * sqrt(|AN_i|) * sqrt(|AN_j|))

followed by ReLU, where SN_i is the sampled and AN_i the full neighbor set.
M_ij is the gravity-softmax coefficient (default), the constant 1 (plain
symmetric normalization) or a learned single-head edge attention weight,
selected by ``influence_mode``. Both the 1/|SN_i| mean and the symmetric
sqrt normalization are applied.

Forward passes are built on the reverse-mode tape so training and the
finite-difference gradient harness share one code path; the public
functions return plain arrays.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tape
from .errors import ConfigError, DimensionError, InconsistencyError
from .hetnet import sample_neighbors
from .numkernel import xavier_init
from .validation import check_choice, check_positive

INFLUENCE_MODES = ("gravity", "uniform", "attention")
LEAKY_SLOPE = 0.2
INTERDEPENDENT_LABEL = "interdependent"


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 2
    sample_sizes: tuple = (10, 10)
    dim: int = 64
    attention_dim: int = 64
    influence_mode: str = "gravity"
    use_interdependent: bool = True

    def validate(self):
        check_positive("layers", self.layers)
        check_positive("dim", self.dim)
        check_positive("attention_dim", self.attention_dim)
        check_choice("influence_mode", self.influence_mode, INFLUENCE_MODES)
        if len(self.sample_sizes) != self.layers:
            raise ConfigError(
                f"sample_sizes must list one size per layer, got {self.sample_sizes} for {self.layers} layers"
            )
        for s in self.sample_sizes:
            check_positive("sample size", s)
        return self


def _name_seed(seed, name):
    from hashlib import blake2b

    digest = blake2b(f"{seed}|{name}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass
class ModelParams:
    """All trainable arrays, keyed by dotted names.

    Naming scheme: ``channel{r}.layer{l}.weight``, ``channel{r}.features``,
    ``shared.layer{l}.weight``, ``shared.features``, ``fuse.{weight,bias,query}``,
    ``align.{weight,bias}``, ``*.layer{l}.edge_{p,a}`` (attention mode only)
    and ``papers.table`` (content-free mode only).
    """

    arrays: dict
    n_relations: int
    config: EncoderConfig

    @classmethod
    def initialize(cls, n_nodes, n_relations, config, align_dim, seed, n_papers=None):
        config.validate()
        d, da, L = config.dim, config.attention_dim, config.layers
        shapes = {}
        for r in range(n_relations):
            shapes[f"channel{r}.features"] = (n_nodes, d)
            for l in range(L):
                shapes[f"channel{r}.layer{l}.weight"] = (d, 2 * d)
        if config.use_interdependent:
            shapes["shared.features"] = (n_nodes, d)
            for l in range(L):
                shapes[f"shared.layer{l}.weight"] = (d, 2 * d)
        shapes["fuse.weight"] = (da, d)
        shapes["fuse.bias"] = (1, da)
        shapes["fuse.query"] = (1, da)
        shapes["align.weight"] = (align_dim, d)
        shapes["align.bias"] = (1, align_dim)
        if config.influence_mode == "attention":
            prefixes = [f"channel{r}" for r in range(n_relations)]
            if config.use_interdependent:
                prefixes.append("shared")
            for prefix in prefixes:
                for l in range(L):
                    shapes[f"{prefix}.layer{l}.edge_p"] = (d, d)
                    shapes[f"{prefix}.layer{l}.edge_a"] = (1, 2 * d)
        if n_papers is not None:
            shapes["papers.table"] = (n_papers, align_dim)
        arrays = {}
        for name in sorted(shapes):
            rows, cols = shapes[name]
            mat = xavier_init(rows, cols, _name_seed(seed, name))
            arrays[name] = mat.ravel() if rows == 1 else mat
        return cls(arrays=arrays, n_relations=n_relations, config=config)

    def channel_weights(self, r):
        return [self.arrays[f"channel{r}.layer{l}.weight"] for l in range(self.config.layers)]

    def copy(self):
        return ModelParams(
            arrays={k: v.copy() for k, v in self.arrays.items()},
            n_relations=self.n_relations,
            config=self.config,
        )


def parameter_group(name):
    """Reporting group of a named parameter, for the gradient harness."""
    if ".edge_" in name:
        return "edge attention"
    if name.endswith(".features"):
        return "node features"
    if name.startswith("shared.layer"):
        return "shared channel"
    if name.startswith("channel"):
        return "encoder channels"
    if name.startswith("fuse."):
        return "attention"
    if name.startswith("align."):
        return "alignment"
    if name == "papers.table":
        return "paper table"
    raise KeyError(f"unknown parameter name {name!r}")


def plan_key(tag, kind, layer, node):
    return (tag, kind, layer, node)


def draw_plan(network, config, rng_state, node_key=None, tags=("indep", "shared")):
    """Neighbor samples for every (channel tag, graph, layer, node).

    Deterministic in ``rng_state``; per-node streams are keyed by node id so
    the draw does not depend on iteration order.
    """
    plan = {}
    use_tags = [t for t in tags if t != "shared" or config.use_interdependent]
    for tag in use_tags:
        for graph in network.graphs:
            for layer in range(config.layers):
                size = config.sample_sizes[layer]
                salt = f"{tag}|{graph.kind.value}|layer{layer}"
                for node in graph.nodes:
                    plan[plan_key(tag, graph.kind.value, layer, node)] = tuple(
                        sample_neighbors(graph, node, size, rng_state, salt=salt, node_key=node_key)
                    )
    return plan


def _attention_precompute(prev_var, edge_p, edge_a):
    """Per-layer projections shared by all edge scores of one graph pass."""
    d = edge_p.value.shape[0]
    z = tape.matmul(prev_var, tape.transpose(edge_p))
    a_col = tape.reshape(edge_a, (-1, 1))
    left = tape.gather_rows(a_col, list(range(d)))
    right = tape.gather_rows(a_col, list(range(d, 2 * d)))
    return tape.matmul(z, left), tape.matmul(z, right)


def _aggregate_node(graph, node, prev_var, node_index, sampled, mode, table, att_precomp):
    width = prev_var.value.shape[1]
    if not sampled:
        return tape.zeros((width,))
    idx = [node_index[j] for j in sampled]
    deg_i = graph.degree(node)
    norm = np.array(
        [1.0 / (len(sampled) * np.sqrt(deg_i) * np.sqrt(graph.degree(j))) for j in sampled]
    )
    neighbors_var = tape.gather_rows(prev_var, idx)
    if mode == "attention":
        c_all, d_all = att_precomp
        ordered = sorted(graph.adjacency[node])
        position = {j: p for p, j in enumerate(ordered)}
        an_idx = [node_index[j] for j in ordered]
        scores = tape.add(
            tape.gather_rows(d_all, an_idx), tape.gather_rows(c_all, [node_index[node]])
        )
        energies = tape.leaky_relu(scores, LEAKY_SLOPE)
        att = tape.reshape(tape.softmax_rows(tape.reshape(energies, (1, -1))), (-1, 1))
        picked = tape.gather_rows(att, [position[j] for j in sampled])
        weights = tape.mul(picked, tape.const(norm[:, None]))
    else:
        if mode == "gravity":
            coeffs = np.array([table.coeff[(node, j)] for j in sampled])
        else:
            coeffs = np.ones(len(sampled))
        weights = tape.const((coeffs * norm)[:, None])
    return tape.relu(tape.sum_axis(tape.mul(neighbors_var, weights), axis=0))


def _edge_attention_coeffs(graph, node_order, node_index, prev_var, edge_vars, sampled_edges):
    """Softmax edge-attention weight of every sampled edge, softmaxed over
    the destination node's full neighbor set."""
    c_all, d_all = _attention_precompute(prev_var, *edge_vars)
    an_dst, an_src, position = [], [], {}
    for row, node in enumerate(node_order):
        for j in sorted(graph.adjacency[node]):
            position[(node, j)] = len(an_dst)
            an_dst.append(row)
            an_src.append(node_index[j])
    seg = np.asarray(an_dst, dtype=np.intp)
    scores = tape.leaky_relu(
        tape.add(tape.gather_rows(d_all, an_src), tape.gather_rows(c_all, an_dst)), LEAKY_SLOPE
    )
    # detached per-segment max; softmax is shift invariant so this is exact
    seg_max = np.full(len(node_order), -np.inf)
    np.maximum.at(seg_max, seg, scores.value[:, 0])
    shifted = tape.exp(tape.sub(scores, tape.const(seg_max[seg][:, None])))
    denom = tape.segment_sum(shifted, seg, len(node_order))
    coeff_all = tape.divide(shifted, tape.gather_rows(denom, an_dst))
    return tape.gather_rows(coeff_all, [position[edge] for edge in sampled_edges])


def _layer_traced(graph, node_order, node_index, weight_var, prev_var, samples_by_node, mode, table, edge_vars):
    n = len(node_order)
    width = prev_var.value.shape[1]
    dst_rows, src_rows, sampled_edges, weights = [], [], [], []
    for row, node in enumerate(node_order):
        sampled = samples_by_node[node]
        if not sampled:
            continue
        inv = 1.0 / (len(sampled) * np.sqrt(graph.degree(node)))
        for j in sampled:
            dst_rows.append(row)
            src_rows.append(node_index[j])
            sampled_edges.append((node, j))
            norm = inv / np.sqrt(graph.degree(j))
            if mode == "gravity":
                norm *= table.coeff[(node, j)]
            weights.append(norm)
    if not dst_rows:
        agg = tape.zeros((n, width))
    else:
        weights = np.asarray(weights)[:, None]
        gathered = tape.gather_rows(prev_var, src_rows)
        if mode == "attention":
            coeff = _edge_attention_coeffs(
                graph, node_order, node_index, prev_var, edge_vars, sampled_edges
            )
            weighted = tape.mul(gathered, tape.mul(coeff, tape.const(weights)))
        else:
            weighted = tape.mul(gathered, tape.const(weights))
        agg = tape.relu(tape.segment_sum(weighted, dst_rows, n))
    hidden = tape.concat_cols([prev_var, agg])
    return tape.relu(tape.matmul(hidden, tape.transpose(weight_var)))


def _channel_traced(graph, node_order, node_index, weight_vars, features_var, plan, tag, mode, table, edge_vars_by_layer):
    u = features_var
    for layer, weight_var in enumerate(weight_vars):
        samples = {
            node: plan[plan_key(tag, graph.kind.value, layer, node)] for node in node_order
        }
        edge_vars = edge_vars_by_layer[layer] if edge_vars_by_layer else None
        u = _layer_traced(graph, node_order, node_index, weight_var, u, samples, mode, table, edge_vars)
    return u


def _edge_vars(vars_by_name, prefix, layers):
    if f"{prefix}.layer0.edge_p" not in vars_by_name:
        return None
    return [
        (vars_by_name[f"{prefix}.layer{l}.edge_p"], vars_by_name[f"{prefix}.layer{l}.edge_a"])
        for l in range(layers)
    ]


def _fuse_traced(channel_vars, w_var, b_var, q_var):
    scores = []
    for u in channel_vars:
        hidden = tape.tanh(tape.add(tape.matmul(u, tape.transpose(w_var)), b_var))
        scores.append(tape.matmul(hidden, tape.reshape(q_var, (-1, 1))))
    alphas = tape.softmax_rows(tape.concat_cols(scores))
    fused = None
    for c, u in enumerate(channel_vars):
        term = tape.mul(tape.column(alphas, c), u)
        fused = term if fused is None else tape.add(fused, term)
    return fused, alphas


@dataclass
class EncodedVars:
    """Tape variables of one full encoder pass (training-side view)."""

    fused: tape.Var
    alphas: tape.Var
    channels: list
    interdependent: tape.Var = None
    interdependent_per_graph: list = field(default_factory=list)
    channel_labels: tuple = ()


def encode_traced(network, influence_tables, vars_by_name, config, plan):
    config.validate()
    node_order = list(network.nodes)
    node_index = {n: i for i, n in enumerate(node_order)}
    mode = config.influence_mode
    L = config.layers
    tables = influence_tables if mode == "gravity" else [None] * network.k
    if mode == "gravity" and (influence_tables is None or len(influence_tables) != network.k):
        raise InconsistencyError("gravity mode needs one influence table per relation graph")

    channels = []
    for r, graph in enumerate(network.graphs):
        weight_vars = [vars_by_name[f"channel{r}.layer{l}.weight"] for l in range(L)]
        channels.append(
            _channel_traced(
                graph,
                node_order,
                node_index,
                weight_vars,
                vars_by_name[f"channel{r}.features"],
                plan,
                "indep",
                mode,
                tables[r],
                _edge_vars(vars_by_name, f"channel{r}", L),
            )
        )

    interdependent = None
    per_graph = []
    if config.use_interdependent:
        shared_weights = [vars_by_name[f"shared.layer{l}.weight"] for l in range(L)]
        shared_edges = _edge_vars(vars_by_name, "shared", L)
        for r, graph in enumerate(network.graphs):
            per_graph.append(
                _channel_traced(
                    graph,
                    node_order,
                    node_index,
                    shared_weights,
                    vars_by_name["shared.features"],
                    plan,
                    "shared",
                    mode,
                    tables[r],
                    shared_edges,
                )
            )
        acc = per_graph[0]
        for u in per_graph[1:]:
            acc = tape.add(acc, u)
        interdependent = tape.scale(acc, 1.0 / len(per_graph))

    fusion_inputs = list(channels) + ([interdependent] if interdependent is not None else [])
    fused, alphas = _fuse_traced(
        fusion_inputs,
        vars_by_name["fuse.weight"],
        vars_by_name["fuse.bias"],
        vars_by_name["fuse.query"],
    )
    labels = tuple(g.kind.value for g in network.graphs)
    if interdependent is not None:
        labels = labels + (INTERDEPENDENT_LABEL,)
    return EncodedVars(
        fused=fused,
        alphas=alphas,
        channels=channels,
        interdependent=interdependent,
        interdependent_per_graph=per_graph,
        channel_labels=labels,
    )


@dataclass
class ScholarEmbeddings:
    node_ids: tuple
    fused: np.ndarray
    alphas: np.ndarray
    channel_labels: tuple
    channels: dict
    interdependent: np.ndarray = None
    interdependent_per_graph: dict = None

    def row(self, node):
        return self.fused[self.node_ids.index(node)]


def _const_vars(params):
    return {name: tape.const(arr) for name, arr in params.arrays.items()}


def encode(network, influence_tables, params, config, rng_state, node_key=None):
    """Full encoder pass on plain arrays; draws fresh neighbor samples."""
    plan = draw_plan(network, config, rng_state, node_key=node_key)
    out = encode_traced(network, influence_tables, _const_vars(params), config, plan)
    labels = tuple(g.kind.value for g in network.graphs)
    return ScholarEmbeddings(
        node_ids=tuple(network.nodes),
        fused=out.fused.value.copy(),
        alphas=out.alphas.value.copy(),
        channel_labels=out.channel_labels,
        channels={lab: var.value.copy() for lab, var in zip(labels, out.channels)},
        interdependent=None if out.interdependent is None else out.interdependent.value.copy(),
        interdependent_per_graph=(
            {lab: var.value.copy() for lab, var in zip(labels, out.interdependent_per_graph)}
            if out.interdependent_per_graph
            else None
        ),
    )


def aggregate(
    graph,
    node,
    prev_embeddings,
    sample_size,
    rng_state,
    influence_table=None,
    influence_mode="gravity",
    edge_params=None,
    salt="",
    node_order=None,
):
    """One node's aggregated neighbor vector (ReLU applied), as an array.

    Isolated nodes aggregate to the zero vector. ``edge_params`` is the
    ``(projection, score_vector)`` pair used by attention mode.
    """
    check_choice("influence_mode", influence_mode, INFLUENCE_MODES)
    node_order = list(node_order or graph.nodes)
    node_index = {n: i for i, n in enumerate(node_order)}
    prev_var = tape.const(np.asarray(prev_embeddings, dtype=np.float64))
    if prev_var.value.shape[0] != len(node_order):
        raise DimensionError("prev_embeddings must have one row per node")
    sampled = sample_neighbors(graph, node, sample_size, rng_state, salt=salt)
    att_precomp = None
    if influence_mode == "attention":
        if edge_params is None:
            raise ConfigError("attention mode needs edge_params=(projection, score_vector)")
        att_precomp = _attention_precompute(
            prev_var, tape.const(edge_params[0]), tape.const(edge_params[1])
        )
    out = _aggregate_node(
        graph, node, prev_var, node_index, sampled, influence_mode, influence_table, att_precomp
    )
    return out.value.copy()


def layer_forward(
    graph,
    weight,
    prev_embeddings,
    sample_size,
    rng_state,
    influence_table=None,
    influence_mode="gravity",
    edge_params=None,
    salt="",
):
    """One convolution layer over every node: ReLU(W . [self | aggregate])."""
    node_order = list(graph.nodes)
    node_index = {n: i for i, n in enumerate(node_order)}
    weight = np.asarray(weight, dtype=np.float64)
    prev = np.asarray(prev_embeddings, dtype=np.float64)
    if weight.shape[1] != 2 * prev.shape[1]:
        raise DimensionError(
            f"layer weight must be (d, 2*prev_dim); got {weight.shape} for prev dim {prev.shape[1]}"
        )
    samples = {
        node: tuple(sample_neighbors(graph, node, sample_size, rng_state, salt=salt))
        for node in node_order
    }
    edge_vars = None
    if influence_mode == "attention":
        edge_vars = (tape.const(edge_params[0]), tape.const(edge_params[1]))
    out = _layer_traced(
        graph,
        node_order,
        node_index,
        tape.const(weight),
        tape.const(prev),
        samples,
        influence_mode,
        influence_table,
        edge_vars,
    )
    return out.value.copy()


def channel_forward(
    graph,
    weights,
    features,
    config,
    rng_state,
    influence_table=None,
    tag="indep",
    node_key=None,
    edge_params_by_layer=None,
):
    """L stacked layers over one relation graph; returns the final (n, d)."""
    config.validate()
    node_order = list(graph.nodes)
    node_index = {n: i for i, n in enumerate(node_order)}
    plan = {}
    for layer in range(config.layers):
        salt = f"{tag}|{graph.kind.value}|layer{layer}"
        for node in node_order:
            plan[plan_key(tag, graph.kind.value, layer, node)] = tuple(
                sample_neighbors(
                    graph, node, config.sample_sizes[layer], rng_state, salt=salt, node_key=node_key
                )
            )
    edge_vars = None
    if edge_params_by_layer is not None:
        edge_vars = [(tape.const(p), tape.const(a)) for p, a in edge_params_by_layer]
    out = _channel_traced(
        graph,
        node_order,
        node_index,
        [tape.const(np.asarray(w, dtype=np.float64)) for w in weights],
        tape.const(np.asarray(features, dtype=np.float64)),
        plan,
        tag,
        config.influence_mode,
        influence_table,
        edge_vars,
    )
    return out.value.copy()


def interdependent_forward(
    network, shared_weights, shared_features, config, rng_state, influence_tables=None, node_key=None
):
    """Shared-weight pass over every graph, averaged into one embedding."""
    config.validate()
    tables = influence_tables if config.influence_mode == "gravity" else [None] * network.k
    per_graph = [
        channel_forward(
            graph,
            shared_weights,
            shared_features,
            config,
            rng_state,
            influence_table=tables[r],
            tag="shared",
            node_key=node_key,
        )
        for r, graph in enumerate(network.graphs)
    ]
    return sum(per_graph) / len(per_graph), per_graph


def attention_fuse(channel_embeddings, fuse_weight, fuse_bias, fuse_query):
    """Per-node softmax attention over channel embeddings.

    Returns the fused matrix and the (n, n_channels) attention weights; rows
    of the weights lie on the simplex.
    """
    mats = [np.asarray(u, dtype=np.float64) for u in channel_embeddings]
    shape = mats[0].shape
    for u in mats[1:]:
        if u.shape != shape:
            raise DimensionError("all channel embeddings must share one shape")
    fused, alphas = _fuse_traced(
        [tape.const(u) for u in mats],
        tape.const(np.asarray(fuse_weight, dtype=np.float64)),
        tape.const(np.asarray(fuse_bias, dtype=np.float64)),
        tape.const(np.asarray(fuse_query, dtype=np.float64)),
    )
    return fused.value.copy(), alphas.value.copy()
