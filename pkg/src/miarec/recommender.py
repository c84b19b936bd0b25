"""End-to-end training and inference.

Scholar embeddings from the encoder are aligned into the paper-vector space
by one tanh layer; a scholar-paper score is the inner product of the aligned
embedding with the paper vector. Training minimizes the pairwise ranking
loss  -sum log sigmoid(score_pos - score_neg) + reg * ||theta||^2  over
sampled (scholar, positive, negative) triples with Adam. Paper vectors are
pretrained by the content module and stay frozen; with ``use_content=False``
they are replaced by a trainable per-paper table.

Checkpoints are self-describing JSON documents (version ``miarec-ckpt-1``)
carrying the config echo, every parameter matrix with shape headers, the
final fused embeddings, the document vectors and the per-scholar training
positives, so ranking needs nothing but the checkpoint file.
"""

import json
import math
import random
from dataclasses import dataclass, field
from hashlib import blake2b
from typing import NamedTuple

import numpy as np

from . import tape
from .content import ContentConfig, DocVectors, train_pvdbow
from .encoder import (
    EncoderConfig,
    ModelParams,
    draw_plan,
    encode_traced,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    DivergenceError,
    EmptySplitError,
    UnknownIdError,
)
from .hetnet import DEFAULT_RELATIONS
from .influence import build_tables
from .numkernel import AdamState, adam_step, l2_norm_sq
from .validation import check_non_negative, check_positive

CHECKPOINT_VERSION = "miarec-ckpt-1"


def derive_seed(*parts):
    """Stable 63-bit stream seed from arbitrary labels."""
    material = "|".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(blake2b(material, digest_size=8).digest(), "big") >> 1


class Triple(NamedTuple):
    scholar: str
    positive: str
    negative: str


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 1024
    dim: int = 64
    learning_rate: float = 0.001
    reg_weight: float = 0.0005
    epochs: int = 100
    seed: int = 7
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    content: ContentConfig = field(default_factory=ContentConfig)
    use_content: bool = True
    relations: tuple = tuple(r.value for r in DEFAULT_RELATIONS)
    co_topic_min_shared: int = 3
    distance_source: str = "relation"
    gravitational_constant: float = 1.0

    def validate(self):
        check_positive("batch_size", self.batch_size)
        check_positive("dim", self.dim)
        check_positive("learning_rate", self.learning_rate)
        check_non_negative("reg_weight", self.reg_weight)
        check_positive("epochs", self.epochs)
        self.encoder.validate()
        self.content.validate()
        if self.encoder.dim != self.dim:
            raise ConfigError(
                f"dim ({self.dim}) and encoder dim ({self.encoder.dim}) must agree"
            )
        if len(self.relations) < 2:
            raise ConfigError("at least two relations are required")
        return self

    def to_flat_dict(self):
        return {
            "batch_size": self.batch_size,
            "dim": self.dim,
            "learning_rate": self.learning_rate,
            "reg_weight": self.reg_weight,
            "epochs": self.epochs,
            "seed": self.seed,
            "layers": self.encoder.layers,
            "sample_sizes": ",".join(str(s) for s in self.encoder.sample_sizes),
            "attention_dim": self.encoder.attention_dim,
            "influence_mode": self.encoder.influence_mode,
            "use_interdependent": self.encoder.use_interdependent,
            "use_content": self.use_content,
            "relations": ",".join(self.relations),
            "co_topic_min_shared": self.co_topic_min_shared,
            "distance_source": self.distance_source,
            "gravitational_constant": self.gravitational_constant,
            "content_dim": self.content.dim,
            "content_epochs": self.content.epochs,
            "content_negatives": self.content.negatives,
            "content_learning_rate": self.content.learning_rate,
            "content_min_count": self.content.min_count,
        }

    @classmethod
    def from_flat_dict(cls, values):
        sizes = values.get("sample_sizes", "10,10")
        if isinstance(sizes, str):
            sizes = tuple(int(s) for s in sizes.split(",") if s.strip())
        relations = values.get("relations", ",".join(r.value for r in DEFAULT_RELATIONS))
        if isinstance(relations, str):
            relations = tuple(r.strip() for r in relations.split(",") if r.strip())
        encoder = EncoderConfig(
            layers=int(values.get("layers", 2)),
            sample_sizes=tuple(sizes),
            dim=int(values.get("dim", 64)),
            attention_dim=int(values.get("attention_dim", 64)),
            influence_mode=values.get("influence_mode", "gravity"),
            use_interdependent=bool(values.get("use_interdependent", True)),
        )
        content = ContentConfig(
            dim=int(values.get("content_dim", 64)),
            epochs=int(values.get("content_epochs", 50)),
            negatives=int(values.get("content_negatives", 5)),
            learning_rate=float(values.get("content_learning_rate", 0.025)),
            min_count=int(values.get("content_min_count", 2)),
        )
        return cls(
            batch_size=int(values.get("batch_size", 1024)),
            dim=int(values.get("dim", 64)),
            learning_rate=float(values.get("learning_rate", 0.001)),
            reg_weight=float(values.get("reg_weight", 0.0005)),
            epochs=int(values.get("epochs", 100)),
            seed=int(values.get("seed", 7)),
            encoder=encoder,
            content=content,
            use_content=bool(values.get("use_content", True)),
            relations=tuple(relations),
            co_topic_min_shared=int(values.get("co_topic_min_shared", 3)),
            distance_source=values.get("distance_source", "relation"),
            gravitational_constant=float(values.get("gravitational_constant", 1.0)),
        )


def align(embeddings, align_weight, align_bias):
    """Map scholar embeddings into the paper-vector space: tanh(U W^T + b).

    The activation must produce signed outputs: paper vectors are signed, so
    a ReLU here would confine scholar profiles to the positive orthant and
    measurably cripple ranking against frozen content vectors.
    """
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    align_weight = np.asarray(align_weight, dtype=np.float64)
    align_bias = np.asarray(align_bias, dtype=np.float64)
    if embeddings.shape[1] != align_weight.shape[1]:
        raise DimensionError(
            f"alignment weight is {align_weight.shape}, embeddings are {embeddings.shape}"
        )
    if align_bias.shape != (align_weight.shape[0],):
        raise DimensionError("alignment bias width must match the weight's rows")
    return np.tanh(embeddings @ align_weight.T + align_bias)


def score(aligned_vec, paper_vec):
    aligned_vec = np.asarray(aligned_vec, dtype=np.float64)
    paper_vec = np.asarray(paper_vec, dtype=np.float64)
    if aligned_vec.shape != paper_vec.shape:
        raise DimensionError(f"score widths differ: {aligned_vec.shape} vs {paper_vec.shape}")
    return float(aligned_vec @ paper_vec)


def _stable_log_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


def bpr_batch_loss(pos_scores, neg_scores, params_arrays=(), reg_weight=0.0):
    """-sum log sigmoid(pos - neg) plus reg_weight * sum of squared params."""
    pos_scores = np.asarray(pos_scores, dtype=np.float64)
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if pos_scores.shape != neg_scores.shape:
        raise DimensionError("positive and negative score lists must align")
    data = -float(np.sum(_stable_log_sigmoid(pos_scores - neg_scores)))
    reg = sum(l2_norm_sq(p) for p in params_arrays)
    return data + reg_weight * reg


def sample_triples(split, corpus, batch_size, rng_state):
    """Uniform training triples: (scholar, train positive) pairs uniformly,
    negatives uniform over papers outside the scholar's positives."""
    check_positive("batch_size", batch_size)
    all_papers = sorted(corpus.papers)
    positives = {
        s: split.train_positives.get(s, set()) | split.test_positives.get(s, set())
        for s in split.train_positives
    }
    pairs = [
        (s, p)
        for s in sorted(split.train_positives)
        if len(positives[s]) < len(all_papers)
        for p in sorted(split.train_positives[s])
    ]
    if not pairs:
        raise EmptySplitError("no trainable scholar-paper pairs in the split")
    rng = rng_state if isinstance(rng_state, random.Random) else random.Random(rng_state)
    triples = []
    for _ in range(batch_size):
        s, j = pairs[rng.randrange(len(pairs))]
        while True:
            k = all_papers[rng.randrange(len(all_papers))]
            if k not in positives[s]:
                break
        triples.append(Triple(s, j, k))
    return triples


def traced_batch_loss(
    network,
    influence_tables,
    arrays,
    encoder_config,
    reg_weight,
    plan,
    triples,
    item_matrix,
    scholar_index,
    paper_index,
):
    """Tape-traced loss of one batch; returns (loss_var, vars_by_name).

    ``item_matrix`` is the frozen doc-vector matrix aligned with
    ``paper_index``; pass None to score against the trainable
    ``papers.table`` parameter instead.
    """
    vars_by_name = {name: tape.param(arr) for name, arr in arrays.items()}
    encoded = encode_traced(network, influence_tables, vars_by_name, encoder_config, plan)
    aligned = tape.tanh(
        tape.add(
            tape.matmul(encoded.fused, tape.transpose(vars_by_name["align.weight"])),
            vars_by_name["align.bias"],
        )
    )
    items = tape.const(item_matrix) if item_matrix is not None else vars_by_name["papers.table"]
    i_idx = [scholar_index[t.scholar] for t in triples]
    j_idx = [paper_index[t.positive] for t in triples]
    k_idx = [paper_index[t.negative] for t in triples]
    scholars = tape.gather_rows(aligned, i_idx)
    pos = tape.sum_axis(tape.mul(scholars, tape.gather_rows(items, j_idx)), axis=1)
    neg = tape.sum_axis(tape.mul(scholars, tape.gather_rows(items, k_idx)), axis=1)
    data = tape.scale(tape.sum_all(tape.log_sigmoid(tape.sub(pos, neg))), -1.0)
    reg = None
    for name in sorted(vars_by_name):
        term = tape.sum_squares(vars_by_name[name])
        reg = term if reg is None else tape.add(reg, term)
    loss = tape.add(data, tape.scale(reg, reg_weight))
    return loss, vars_by_name


@dataclass
class ModelCheckpoint:
    config: dict
    seed: int
    epochs_completed: int
    scholar_ids: tuple
    paper_ids: tuple
    params: ModelParams
    fused_embeddings: np.ndarray
    doc_vectors: DocVectors = None
    train_positives: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def scholar_row(self, scholar):
        if "scholar_index" not in self._cache:
            self._cache["scholar_index"] = {s: i for i, s in enumerate(self.scholar_ids)}
        index = self._cache["scholar_index"]
        if scholar not in index:
            raise UnknownIdError(f"unknown scholar {scholar!r}")
        return index[scholar]

    def paper_row(self, paper):
        if "paper_index" not in self._cache:
            self._cache["paper_index"] = {p: i for i, p in enumerate(self.paper_ids)}
        index = self._cache["paper_index"]
        if paper not in index:
            raise UnknownIdError(f"unknown paper {paper!r}")
        return index[paper]

    def item_matrix(self):
        if "items" not in self._cache:
            if self.doc_vectors is not None:
                self._cache["items"] = self.doc_vectors.aligned_matrix(self.paper_ids)
            else:
                self._cache["items"] = self.params.arrays["papers.table"]
        return self._cache["items"]

    def aligned_embeddings(self):
        if "aligned" not in self._cache:
            self._cache["aligned"] = align(
                self.fused_embeddings,
                self.params.arrays["align.weight"],
                self.params.arrays["align.bias"],
            )
        return self._cache["aligned"]


def train(
    corpus,
    network,
    split,
    config,
    influence_tables=None,
    doc_vectors=None,
    init_params=None,
    progress=None,
):
    """Full training run; deterministic given the config seed.

    Per epoch: redraw neighbor samples, then for each batch encode, align,
    score sampled triples and Adam-update every trainable parameter. Raises
    DivergenceError naming the epoch if the loss stops being finite.
    """
    config.validate()
    graph_kinds = tuple(g.kind.value for g in network.graphs)
    if graph_kinds != tuple(config.relations):
        raise ConfigError(
            f"network graphs {graph_kinds} do not match configured relations {config.relations}"
        )
    scholars = list(network.nodes)
    scholar_index = {s: i for i, s in enumerate(scholars)}
    papers = sorted(corpus.papers)
    paper_index = {p: i for i, p in enumerate(papers)}

    if config.encoder.influence_mode == "gravity" and influence_tables is None:
        influence_tables = build_tables(
            network,
            corpus.citation_mass,
            config.gravitational_constant,
            config.distance_source,
            corpus,
        )

    item_matrix = None
    if config.use_content:
        if doc_vectors is None:
            doc_vectors = train_pvdbow(corpus, config.content, derive_seed(config.seed, "content"))
        item_matrix = doc_vectors.aligned_matrix(papers)
    else:
        doc_vectors = None

    params = init_params.copy() if init_params is not None else ModelParams.initialize(
        n_nodes=len(scholars),
        n_relations=network.k,
        config=config.encoder,
        align_dim=config.content.dim,
        seed=derive_seed(config.seed, "init"),
        n_papers=None if config.use_content else len(papers),
    )
    states = {name: AdamState.for_param(arr) for name, arr in params.arrays.items()}

    n_pairs = sum(len(v) for v in split.train_positives.values())
    if n_pairs == 0:
        raise EmptySplitError("split holds no training positives")
    n_batches = max(1, math.ceil(n_pairs / config.batch_size))

    loss_history = []
    for epoch in range(1, config.epochs + 1):
        plan = draw_plan(network, config.encoder, derive_seed(config.seed, "plan", epoch))
        epoch_loss = 0.0
        for b in range(n_batches):
            triples = sample_triples(
                split, corpus, config.batch_size, derive_seed(config.seed, "triples", epoch, b)
            )
            loss_var, vars_by_name = traced_batch_loss(
                network,
                influence_tables,
                params.arrays,
                config.encoder,
                config.reg_weight,
                plan,
                triples,
                item_matrix,
                scholar_index,
                paper_index,
            )
            loss_value = float(loss_var.value)
            if not np.isfinite(loss_value):
                raise DivergenceError(epoch, loss_value)
            tape.backward(loss_var)
            for name in sorted(params.arrays):
                grad = vars_by_name[name].grad
                if grad is None:
                    grad = np.zeros_like(params.arrays[name])
                params.arrays[name] = adam_step(
                    params.arrays[name], grad, states[name], config.learning_rate
                )
            epoch_loss += loss_value
        epoch_loss /= n_batches
        loss_history.append(epoch_loss)
        if progress is not None:
            progress(epoch, epoch_loss)

    inference_plan = draw_plan(network, config.encoder, derive_seed(config.seed, "inference"))
    const_vars = {name: tape.const(arr) for name, arr in params.arrays.items()}
    encoded = encode_traced(network, influence_tables, const_vars, config.encoder, inference_plan)

    return ModelCheckpoint(
        config=config.to_flat_dict(),
        seed=config.seed,
        epochs_completed=config.epochs,
        scholar_ids=tuple(scholars),
        paper_ids=tuple(papers),
        params=params,
        fused_embeddings=encoded.fused.value.copy(),
        doc_vectors=doc_vectors,
        train_positives={s: sorted(v) for s, v in split.train_positives.items()},
        loss_history=loss_history,
    )


def rank_candidates(scored, k):
    """Sort (id, score) pairs by score desc, ties by ascending id; keep k."""
    check_positive("k", k)
    return sorted(scored, key=lambda t: (-t[1], t[0]))[:k]


def recommend_topk(checkpoint, scholar, candidates=None, k=10):
    """Top-k candidate papers for a scholar, best first.

    Default candidate set: every corpus paper except the scholar's training
    positives. Ties break toward the lexicographically smaller paper id.
    """
    row = checkpoint.scholar_row(scholar)
    if candidates is None:
        seen = set(checkpoint.train_positives.get(scholar, ()))
        candidates = [p for p in checkpoint.paper_ids if p not in seen]
    aligned_vec = checkpoint.aligned_embeddings()[row]
    items = checkpoint.item_matrix()
    cand_rows = [checkpoint.paper_row(p) for p in candidates]
    scores = items[cand_rows] @ aligned_vec
    return rank_candidates(list(zip(candidates, scores.tolist())), k)


def _matrix_to_json(arr):
    return {"shape": list(arr.shape), "values": arr.tolist()}


def _matrix_from_json(obj):
    arr = np.asarray(obj["values"], dtype=np.float64)
    return arr.reshape(obj["shape"])


def checkpoint_to_json(checkpoint):
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": checkpoint.config,
        "seed": checkpoint.seed,
        "epochs_completed": checkpoint.epochs_completed,
        "loss_history": checkpoint.loss_history,
        "scholar_ids": list(checkpoint.scholar_ids),
        "paper_ids": list(checkpoint.paper_ids),
        "train_positives": {s: list(v) for s, v in checkpoint.train_positives.items()},
        "matrices": {
            name: _matrix_to_json(arr) for name, arr in checkpoint.params.arrays.items()
        },
        "fused_embeddings": _matrix_to_json(checkpoint.fused_embeddings),
        "doc_vectors": None,
    }
    if checkpoint.doc_vectors is not None:
        doc["doc_vectors"] = {
            "ids": list(checkpoint.doc_vectors.ids),
            "matrix": _matrix_to_json(checkpoint.doc_vectors.matrix),
        }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def save_checkpoint(checkpoint, path):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(checkpoint_to_json(checkpoint))
        handle.write("\n")


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {doc.get('version')!r}")
    config = doc["config"]
    train_config = TrainConfig.from_flat_dict(config)
    params = ModelParams(
        arrays={name: _matrix_from_json(m) for name, m in doc["matrices"].items()},
        n_relations=len(train_config.relations),
        config=train_config.encoder,
    )
    doc_vectors = None
    if doc.get("doc_vectors") is not None:
        doc_vectors = DocVectors(
            ids=tuple(doc["doc_vectors"]["ids"]),
            matrix=_matrix_from_json(doc["doc_vectors"]["matrix"]),
        )
    return ModelCheckpoint(
        config=config,
        seed=doc["seed"],
        epochs_completed=doc["epochs_completed"],
        scholar_ids=tuple(doc["scholar_ids"]),
        paper_ids=tuple(doc["paper_ids"]),
        params=params,
        fused_embeddings=_matrix_from_json(doc["fused_embeddings"]),
        doc_vectors=doc_vectors,
        train_positives={s: list(v) for s, v in doc["train_positives"].items()},
        loss_history=list(doc["loss_history"]),
    )
