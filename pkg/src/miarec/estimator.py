"""Scikit-learn style front door.

``MIARecRecommender`` wraps corpus ingestion, graph construction, influence
tables, content vectors and training behind the usual estimator surface:
constructor keywords are hyperparameters (``get_params``/``set_params``
work, ``sklearn.base.clone`` too), ``fit`` trains, ``recommend``/``predict``
rank, ``score`` returns mean nDCG@10 on the held-out split.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .content import ContentConfig
from .corpus import CorpusStore, leave_one_out_split, parse_file
from .encoder import EncoderConfig
from .errors import ConfigError
from .evaluation import evaluate
from .hetnet import build_network
from .recommender import TrainConfig, recommend_topk, train


class MIARecRecommender(BaseEstimator):
    """Gravity-weighted multi-channel graph recommender with a fit/predict API.

    Parameters mirror the flat run-config keys; see the README for the full
    table. ``fit`` accepts a CorpusStore or a JSONL path plus an optional
    precomputed SplitSpec (one is generated from the seed otherwise).
    """

    def __init__(
        self,
        batch_size=1024,
        dim=64,
        learning_rate=0.001,
        reg_weight=0.0005,
        epochs=100,
        seed=7,
        layers=2,
        sample_sizes=(10, 10),
        attention_dim=64,
        influence_mode="gravity",
        use_interdependent=True,
        use_content=True,
        relations=("collaboration", "co_topic", "co_venue"),
        co_topic_min_shared=3,
        distance_source="relation",
        gravitational_constant=1.0,
        content_dim=64,
        content_epochs=50,
        content_negatives=5,
        content_learning_rate=0.025,
        content_min_count=2,
    ):
        self.batch_size = batch_size
        self.dim = dim
        self.learning_rate = learning_rate
        self.reg_weight = reg_weight
        self.epochs = epochs
        self.seed = seed
        self.layers = layers
        self.sample_sizes = sample_sizes
        self.attention_dim = attention_dim
        self.influence_mode = influence_mode
        self.use_interdependent = use_interdependent
        self.use_content = use_content
        self.relations = relations
        self.co_topic_min_shared = co_topic_min_shared
        self.distance_source = distance_source
        self.gravitational_constant = gravitational_constant
        self.content_dim = content_dim
        self.content_epochs = content_epochs
        self.content_negatives = content_negatives
        self.content_learning_rate = content_learning_rate
        self.content_min_count = content_min_count

    def _train_config(self):
        encoder = EncoderConfig(
            layers=self.layers,
            sample_sizes=tuple(self.sample_sizes),
            dim=self.dim,
            attention_dim=self.attention_dim,
            influence_mode=self.influence_mode,
            use_interdependent=self.use_interdependent,
        )
        content = ContentConfig(
            dim=self.content_dim,
            epochs=self.content_epochs,
            negatives=self.content_negatives,
            learning_rate=self.content_learning_rate,
            min_count=self.content_min_count,
        )
        return TrainConfig(
            batch_size=self.batch_size,
            dim=self.dim,
            learning_rate=self.learning_rate,
            reg_weight=self.reg_weight,
            epochs=self.epochs,
            seed=self.seed,
            encoder=encoder,
            content=content,
            use_content=self.use_content,
            relations=tuple(self.relations),
            co_topic_min_shared=self.co_topic_min_shared,
            distance_source=self.distance_source,
            gravitational_constant=self.gravitational_constant,
        ).validate()

    def fit(self, X, y=None, split=None, doc_vectors=None, progress=None):
        """Train on a corpus (CorpusStore or JSONL path); returns self."""
        if isinstance(X, CorpusStore):
            corpus = X
        elif isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
            corpus = parse_file(X)
        else:
            raise ConfigError("fit expects a CorpusStore or a corpus file path")
        config = self._train_config()
        self.corpus_ = corpus
        self.network_ = build_network(corpus, config.relations, config.co_topic_min_shared)
        self.split_ = split if split is not None else leave_one_out_split(corpus, self.seed)
        self.checkpoint_ = train(
            corpus,
            self.network_,
            self.split_,
            config,
            doc_vectors=doc_vectors,
            progress=progress,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "checkpoint_"):
            raise NotFittedError("call fit before using the recommender")

    def predict(self, pairs):
        """Relevance scores for an iterable of (scholar_id, paper_id) pairs."""
        self._check_fitted()
        ckpt = self.checkpoint_
        aligned = ckpt.aligned_embeddings()
        items = ckpt.item_matrix()
        return np.array(
            [
                float(aligned[ckpt.scholar_row(s)] @ items[ckpt.paper_row(p)])
                for s, p in pairs
            ]
        )

    def recommend(self, scholar, k=10, candidates=None):
        self._check_fitted()
        return recommend_topk(self.checkpoint_, scholar, candidates, k)

    def evaluate(self, split=None, ks=(5, 10, 20)):
        self._check_fitted()
        return evaluate(self.checkpoint_, split if split is not None else self.split_, ks)

    def score(self, X=None, y=None):
        """Mean nDCG@10 on the fitted (or given) split; sklearn-compatible."""
        split = X if X is not None and hasattr(X, "test_positives") else None
        report = self.evaluate(split=split, ks=(10,))
        return report.ndcg[10]
