"""MIARec: mutual-influence-aware heterogeneous network embedding for
scientific paper recommendation.

Pipeline: parse a paper corpus, extract single-relational scholar graphs,
precompute gravity-softmax influence coefficients, embed scholars with a
multi-channel sample-and-aggregate encoder fused by attention, embed papers
with PV-DBOW, train the alignment and all encoder weights with a pairwise
ranking loss, and rank candidate papers by inner product.
"""

from .content import ContentConfig, DocVectors, load_vectors, save_vectors, tokenize, train_pvdbow
from .corpus import (
    CorpusStore,
    PaperRecord,
    SplitSpec,
    generate_synthetic,
    leave_one_out_split,
    parse_file,
    parse_jsonl,
    serialize_jsonl,
)
from .encoder import EncoderConfig, ModelParams, ScholarEmbeddings, encode
from .estimator import MIARecRecommender
from .evaluation import MetricsReport, evaluate, ndcg_at_k, precision_recall_at_k
from .hetnet import (
    HeterogeneousNetwork,
    RelationGraph,
    RelationKind,
    build_network,
    extract_relation,
    neighbors,
    sample_neighbors,
)
from .influence import InfluenceTable, academic_distance, build_table, build_tables, influence_factor
from .recommender import (
    ModelCheckpoint,
    TrainConfig,
    Triple,
    bpr_batch_loss,
    load_checkpoint,
    recommend_topk,
    sample_triples,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ContentConfig",
    "CorpusStore",
    "DocVectors",
    "EncoderConfig",
    "HeterogeneousNetwork",
    "InfluenceTable",
    "MIARecRecommender",
    "MetricsReport",
    "ModelCheckpoint",
    "ModelParams",
    "PaperRecord",
    "RelationGraph",
    "RelationKind",
    "ScholarEmbeddings",
    "SplitSpec",
    "TrainConfig",
    "Triple",
    "academic_distance",
    "bpr_batch_loss",
    "build_network",
    "build_table",
    "build_tables",
    "encode",
    "evaluate",
    "extract_relation",
    "generate_synthetic",
    "influence_factor",
    "leave_one_out_split",
    "load_checkpoint",
    "load_vectors",
    "ndcg_at_k",
    "neighbors",
    "parse_file",
    "parse_jsonl",
    "precision_recall_at_k",
    "recommend_topk",
    "sample_neighbors",
    "sample_triples",
    "save_checkpoint",
    "save_vectors",
    "serialize_jsonl",
    "tokenize",
    "train",
    "train_pvdbow",
]
