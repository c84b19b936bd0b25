"""Finite-difference verification of every analytic gradient in the model.

A small frozen fixture (6 scholars, 4 papers, fixed neighbor samples and
triples) turns the training loss into a deterministic function of each
parameter matrix; the harness compares the tape's gradients against central
differences and reports the worst relative error per parameter group.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import tape
from .corpus import parse_jsonl
from .encoder import EncoderConfig, ModelParams, draw_plan, parameter_group
from .hetnet import build_network
from .influence import build_tables
from .numkernel import finite_difference_gradient, relative_gradient_error, xavier_init
from .recommender import Triple, derive_seed, traced_batch_loss

FIXTURE_SEED = 11
FIXTURE_DIM = 6
GROUP_ORDER = (
    "encoder channels",
    "shared channel",
    "attention",
    "alignment",
    "node features",
    "edge attention",
)
TOLERANCE = 1e-4

_FIXTURE_PAPERS = [
    {
        "id": "P1",
        "title": "deep graphs",
        "year": 2018,
        "venue": "V1",
        "keywords": ["k1", "k2", "k3"],
        "authors": [{"id": "s1", "name": "s1", "org": "O1"}, {"id": "s2", "name": "s2", "org": "O1"}],
        "references": ["P3"],
    },
    {
        "id": "P2",
        "title": "ranking papers",
        "year": 2019,
        "venue": "V1",
        "keywords": ["k1", "k2", "k3", "k4"],
        "authors": [{"id": "s2", "name": "s2", "org": "O1"}, {"id": "s3", "name": "s3", "org": "O2"}],
        "references": ["P1", "P3"],
    },
    {
        "id": "P3",
        "title": "influence models",
        "year": 2017,
        "venue": "V2",
        "keywords": ["k2", "k3", "k4"],
        "authors": [{"id": "s4", "name": "s4", "org": "O2"}, {"id": "s5", "name": "s5", "org": "O3"}],
        "references": [],
    },
    {
        "id": "P4",
        "title": "scholar networks",
        "year": 2020,
        "venue": "V2",
        "keywords": ["k1", "k2", "k3", "k4", "k5"],
        "authors": [
            {"id": "s1", "name": "s1", "org": "O1"},
            {"id": "s5", "name": "s5", "org": "O3"},
            {"id": "s6", "name": "s6", "org": "O3"},
        ],
        "references": ["P2", "P3"],
    },
]

FIXTURE_TRIPLES = (
    Triple("s1", "P3", "P1"),
    Triple("s2", "P1", "P4"),
    Triple("s5", "P2", "P1"),
    Triple("s6", "P3", "P4"),
)


def fixture_corpus():
    return parse_jsonl(json.dumps(rec) for rec in _FIXTURE_PAPERS)


def fixture_encoder_config(influence_mode):
    return EncoderConfig(
        layers=2,
        sample_sizes=(2, 2),
        dim=FIXTURE_DIM,
        attention_dim=FIXTURE_DIM,
        influence_mode=influence_mode,
        use_interdependent=True,
    )


@dataclass
class FixtureBundle:
    network: object
    tables: list
    encoder_config: EncoderConfig
    params: ModelParams
    plan: dict
    triples: tuple
    item_matrix: np.ndarray
    scholar_index: dict
    paper_index: dict
    reg_weight: float = 0.0005

    def loss(self, arrays):
        loss_var, _ = traced_batch_loss(
            self.network,
            self.tables,
            arrays,
            self.encoder_config,
            self.reg_weight,
            self.plan,
            self.triples,
            self.item_matrix,
            self.scholar_index,
            self.paper_index,
        )
        return float(loss_var.value)

    def analytic_gradients(self):
        loss_var, vars_by_name = traced_batch_loss(
            self.network,
            self.tables,
            self.params.arrays,
            self.encoder_config,
            self.reg_weight,
            self.plan,
            self.triples,
            self.item_matrix,
            self.scholar_index,
            self.paper_index,
        )
        tape.backward(loss_var)
        return {
            name: (var.grad if var.grad is not None else np.zeros_like(var.value))
            for name, var in vars_by_name.items()
        }


def fixture_bundle(influence_mode="gravity", use_content=True, seed=FIXTURE_SEED):
    corpus = fixture_corpus()
    network = build_network(corpus)
    tables = build_tables(network, corpus.citation_mass)
    config = fixture_encoder_config(influence_mode)
    scholars = list(network.nodes)
    papers = sorted(corpus.papers)
    params = ModelParams.initialize(
        n_nodes=len(scholars),
        n_relations=network.k,
        config=config,
        align_dim=FIXTURE_DIM,
        seed=derive_seed(seed, "params", influence_mode),
        n_papers=None if use_content else len(papers),
    )
    item_matrix = None
    if use_content:
        item_matrix = xavier_init(len(papers), FIXTURE_DIM, derive_seed(seed, "docs"))
    return FixtureBundle(
        network=network,
        tables=tables,
        encoder_config=config,
        params=params,
        plan=draw_plan(network, config, derive_seed(seed, "plan")),
        triples=FIXTURE_TRIPLES,
        item_matrix=item_matrix,
        scholar_index={s: i for i, s in enumerate(scholars)},
        paper_index={p: i for i, p in enumerate(papers)},
    )


@dataclass
class GradCheckRow:
    group: str
    max_rel_error: float
    n_coordinates: int

    @property
    def passed(self):
        return self.max_rel_error <= TOLERANCE


def _check_bundle(bundle, eps, corrupt_group=None):
    analytic = bundle.analytic_gradients()
    errors = {}
    for name in sorted(bundle.params.arrays):
        group = parameter_group(name)
        base = bundle.params.arrays[name]

        def objective(candidate, _name=name):
            arrays = dict(bundle.params.arrays)
            arrays[_name] = candidate
            return bundle.loss(arrays)

        numeric = finite_difference_gradient(objective, base.copy(), eps)
        grad = analytic[name]
        if corrupt_group is not None and group == corrupt_group:
            grad = grad.copy()
            grad.reshape(-1)[0] += 1.0  # test hook: deliberately wrong gradient
        err = relative_gradient_error(grad, numeric)
        worst, count = errors.get(group, (0.0, 0))
        errors[group] = (max(worst, err), count + base.size)
    return errors


def gradient_check(eps=1e-5, corrupt_group=None, modes=("gravity", "attention")):
    """Rows of (parameter group, max relative error) across influence modes."""
    merged = {}
    for mode in modes:
        bundle = fixture_bundle(influence_mode=mode)
        for group, (err, count) in _check_bundle(bundle, eps, corrupt_group).items():
            worst, total = merged.get(group, (0.0, 0))
            merged[group] = (max(worst, err), max(total, count))
    rows = []
    for group in GROUP_ORDER:
        if group in merged:
            err, count = merged[group]
            rows.append(GradCheckRow(group=group, max_rel_error=err, n_coordinates=count))
    return rows
