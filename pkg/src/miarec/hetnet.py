"""Single-relational scholar graphs extracted from a corpus, plus neighbor
access and fixed-size neighbor sampling.

Four relation kinds are supported: collaboration (number of co-authored
papers), co-topic (distinct shared keywords over each scholar's case-folded
keyword union, at least 3 by default), co-venue (distinct shared venues,
case-folded and trimmed) and co-org (distinct shared organizations).

Neighbor sampling ranks each neighbor by a keyed hash and keeps the ``s``
smallest ranks. This is a uniform sample without replacement that depends
only on (seed, node, neighbor) and not on iteration order, which keeps the
encoder permutation-equivariant and reproducible.
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum
from hashlib import blake2b

from .errors import ConfigError, InconsistencyError, MissingEdgeError, UnknownIdError
from .validation import check_positive


class RelationKind(str, Enum):
    COLLABORATION = "collaboration"
    CO_TOPIC = "co_topic"
    CO_VENUE = "co_venue"
    CO_ORG = "co_org"


DEFAULT_MIN_SHARED = {
    RelationKind.COLLABORATION: 1,
    RelationKind.CO_TOPIC: 3,
    RelationKind.CO_VENUE: 1,
    RelationKind.CO_ORG: 1,
}

DEFAULT_RELATIONS = (RelationKind.COLLABORATION, RelationKind.CO_TOPIC, RelationKind.CO_VENUE)


@dataclass
class RelationGraph:
    kind: RelationKind
    nodes: tuple  # full scholar universe, sorted
    edge_weights: dict  # canonical (a, b) with a < b -> co-occurrence >= 1
    adjacency: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        node_set = set(self.nodes)
        self.adjacency = {n: {} for n in self.nodes}
        for (a, b), w in self.edge_weights.items():
            if a == b:
                raise InconsistencyError(f"self-loop on {a!r}")
            if a not in node_set or b not in node_set:
                raise InconsistencyError(f"edge ({a!r}, {b!r}) outside the node universe")
            self.adjacency[a][b] = w
            self.adjacency[b][a] = w

    @property
    def n_edges(self):
        return len(self.edge_weights)

    def has_node(self, node):
        return node in self.adjacency

    def degree(self, node):
        return len(self.adjacency[node])

    def co_occurrence(self, i, j):
        key = (i, j) if i < j else (j, i)
        if key not in self.edge_weights:
            raise MissingEdgeError(f"no {self.kind.value} edge between {i!r} and {j!r}")
        return self.edge_weights[key]


def canonical_pair(a, b):
    return (a, b) if a < b else (b, a)


def neighbors(graph, node):
    """Exact adjacency set of ``node``; empty for isolated nodes."""
    if not graph.has_node(node):
        raise UnknownIdError(f"unknown node {node!r} in {graph.kind.value} graph")
    return set(graph.adjacency[node])


def sample_rank(rng_state, salt, node_key, neighbor_key):
    material = f"{rng_state}|{salt}|{node_key}|{neighbor_key}".encode("utf-8")
    return int.from_bytes(blake2b(material, digest_size=8).digest(), "big")


def sample_neighbors(graph, node, s, rng_state, salt="", node_key=None):
    """Up to ``s`` neighbors of ``node``, uniform without replacement.

    Returns all neighbors when the degree is at most ``s``. ``node_key``
    remaps ids into the hash material; tests use it to carry sampling
    streams through a node relabeling.
    """
    check_positive("sample size", s)
    if not graph.has_node(node):
        raise UnknownIdError(f"unknown node {node!r} in {graph.kind.value} graph")
    key = node_key or (lambda n: n)
    ranked = sorted(
        graph.adjacency[node],
        key=lambda j: (sample_rank(rng_state, salt, key(node), key(j)), j),
    )
    return ranked[:s]


def _pair_counts_from_groups(membership):
    """Count distinct shared group items per scholar pair.

    ``membership`` maps a group item (keyword, venue, org) to the set of
    scholars carrying it; each item contributes 1 to every pair inside it.
    """
    counts = {}
    for members in membership.values():
        for a, b in itertools.combinations(sorted(members), 2):
            counts[(a, b)] = counts.get((a, b), 0) + 1
    return counts


def _collaboration_counts(corpus):
    counts = {}
    for record in corpus.papers.values():
        for a, b in itertools.combinations(sorted(set(record.author_ids)), 2):
            counts[(a, b)] = counts.get((a, b), 0) + 1
    return counts


def _scholar_keyword_membership(corpus):
    membership = {}
    for record in corpus.papers.values():
        for kw in record.keywords:
            folded = kw.casefold()
            for sid in record.author_ids:
                membership.setdefault(folded, set()).add(sid)
    return membership


def _scholar_venue_membership(corpus):
    membership = {}
    for record in corpus.papers.values():
        venue = record.venue.casefold().strip()
        if not venue:
            continue
        for sid in record.author_ids:
            membership.setdefault(venue, set()).add(sid)
    return membership


def _scholar_org_membership(corpus):
    membership = {}
    for sid, orgs in corpus.scholar_orgs.items():
        for org in orgs:
            membership.setdefault(org.casefold().strip(), set()).add(sid)
    return membership


def extract_relation(corpus, kind, min_shared=None):
    """Build one single-relational graph over the full scholar universe."""
    kind = RelationKind(kind)
    if min_shared is None:
        min_shared = DEFAULT_MIN_SHARED[kind]
    check_positive("min_shared", min_shared)
    if kind is RelationKind.COLLABORATION:
        counts = _collaboration_counts(corpus)
    elif kind is RelationKind.CO_TOPIC:
        counts = _pair_counts_from_groups(_scholar_keyword_membership(corpus))
    elif kind is RelationKind.CO_VENUE:
        counts = _pair_counts_from_groups(_scholar_venue_membership(corpus))
    else:
        counts = _pair_counts_from_groups(_scholar_org_membership(corpus))
    edges = {pair: w for pair, w in counts.items() if w >= min_shared}
    return RelationGraph(kind=kind, nodes=tuple(sorted(corpus.scholars)), edge_weights=edges)


@dataclass
class HeterogeneousNetwork:
    graphs: list

    def __post_init__(self):
        if len(self.graphs) < 2:
            raise ConfigError("a heterogeneous network needs at least 2 relation graphs")
        universe = self.graphs[0].nodes
        for g in self.graphs[1:]:
            if g.nodes != universe:
                raise InconsistencyError("relation graphs must share one node universe")

    @property
    def nodes(self):
        return self.graphs[0].nodes

    @property
    def k(self):
        return len(self.graphs)


def build_network(corpus, relations=DEFAULT_RELATIONS, co_topic_min_shared=None):
    graphs = []
    for rel in relations:
        kind = RelationKind(rel)
        min_shared = co_topic_min_shared if kind is RelationKind.CO_TOPIC else None
        graphs.append(extract_relation(corpus, kind, min_shared))
    return HeterogeneousNetwork(graphs=graphs)


def dump_edges(graphs):
    """One line per edge: '<kind> <a> <b> <co_occurrence>', sorted."""
    if isinstance(graphs, RelationGraph):
        graphs = [graphs]
    lines = []
    for g in graphs:
        for (a, b), w in g.edge_weights.items():
            lines.append(f"{g.kind.value} {a} {b} {w}")
    return "\n".join(sorted(lines)) + ("\n" if lines else "")
