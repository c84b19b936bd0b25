"""Gravity-based asymmetric academic influence.

For an edge (i, j) the academic distance is the reciprocal of the pair's
interaction count, the influence of j on i scales with j's citation mass
divided by the squared distance, and aggregation coefficients are the
softmax of those influence values over i's full neighbor set. Tables are
static corpus statistics and are precomputed once before training.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericDomainError, UnknownIdError
from .hetnet import RelationKind, canonical_pair
from .numkernel import softmax_vec
from .validation import check_positive

DISTANCE_SOURCES = ("relation", "collaboration")


@dataclass
class InfluenceTable:
    kind: RelationKind
    influence: dict  # directed (i, j) -> gravity influence of j on i
    coeff: dict  # directed (i, j) -> softmax weight over i's neighbors
    gravitational_constant: float = 1.0

    def row(self, graph, node):
        """Coefficients of ``node``'s neighbors, keyed by neighbor id."""
        if not graph.has_node(node):
            raise UnknownIdError(f"unknown node {node!r}")
        return {j: self.coeff[(node, j)] for j in graph.adjacency[node]}


def academic_distance(graph, i, j):
    """Reciprocal interaction count; symmetric because edge weights are."""
    return 1.0 / graph.co_occurrence(i, j)


def gravity_force(mass_i, mass_j, r_ij, constant=1.0):
    if r_ij <= 0:
        raise NumericDomainError(f"academic distance must be positive, got {r_ij}")
    return constant * mass_i * mass_j / (r_ij * r_ij)


def influence_factor(mass_j, r_ij, constant=1.0):
    """Directed influence of a neighbor with citation mass ``mass_j``."""
    if r_ij <= 0:
        raise NumericDomainError(f"academic distance must be positive, got {r_ij}")
    return constant * mass_j / (r_ij * r_ij)


def build_table(graph, citation_mass, constant=1.0, interaction_counts=None):
    """Influence factors and softmax coefficients for every directed edge.

    ``interaction_counts`` overrides the distance source: when given, the
    pair's count is looked up there (collaboration counts for the
    paper-faithful mode) and pairs absent from it get zero influence.
    When omitted the graph's own co-occurrence weights are used.
    """
    check_positive("gravitational constant", constant)
    for node in graph.nodes:
        if node not in citation_mass:
            raise UnknownIdError(f"citation mass missing for scholar {node!r}")
    influence, coeff = {}, {}
    for node in graph.nodes:
        nbrs = sorted(graph.adjacency[node])
        if not nbrs:
            continue
        row = []
        for j in nbrs:
            if interaction_counts is None:
                count = graph.co_occurrence(node, j)
            else:
                count = interaction_counts.get(canonical_pair(node, j), 0)
            if count <= 0:
                g = 0.0  # infinite distance: no interaction on the distance source
            else:
                g = influence_factor(citation_mass[j], 1.0 / count, constant)
            influence[(node, j)] = g
            row.append(g)
        weights = softmax_vec(np.asarray(row, dtype=np.float64))
        for j, w in zip(nbrs, weights):
            coeff[(node, j)] = float(w)
    return InfluenceTable(
        kind=graph.kind,
        influence=influence,
        coeff=coeff,
        gravitational_constant=constant,
    )


def build_tables(network, citation_mass, constant=1.0, distance_source="relation", corpus=None):
    """One table per relation graph.

    With ``distance_source='collaboration'`` every graph measures distance by
    collaboration counts (pairs that never collaborated get zero influence),
    which requires the corpus to count from.
    """
    if distance_source not in DISTANCE_SOURCES:
        raise NumericDomainError(f"unknown distance source {distance_source!r}")
    interaction_counts = None
    if distance_source == "collaboration":
        if corpus is None:
            raise NumericDomainError("distance_source='collaboration' needs the corpus")
        from .hetnet import _collaboration_counts

        interaction_counts = _collaboration_counts(corpus)
    return [
        build_table(g, citation_mass, constant, interaction_counts)
        for g in network.graphs
    ]


def dump_table(graph, table):
    """One line per directed edge: '<kind> <i> <j> <influence> <coeff>'."""
    lines = []
    for (i, j), g in table.influence.items():
        lines.append(
            f"{graph.kind.value} {i} {j} {float(g)!r} {float(table.coeff[(i, j)])!r}"
        )
    return "\n".join(sorted(lines)) + ("\n" if lines else "")
