"""Semantic paper vectors.

A small PV-DBOW trainer with negative sampling learns one vector per paper
from its title and abstract: for each (document, word) pair the document
vector is pushed toward the word's context vector and away from noise words
drawn from the unigram^0.75 distribution. A text loader covers the
interoperability case of precomputed vectors.
"""

import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, VectorCoverageError, VectorFormatError
from .numkernel import sigmoid, xavier_init
from .validation import check_positive


def _scalar_sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_NOISE_POWER = 0.75


@dataclass(frozen=True)
class ContentConfig:
    dim: int = 64
    epochs: int = 50
    negatives: int = 5
    learning_rate: float = 0.025
    min_count: int = 2

    def validate(self):
        check_positive("content dim", self.dim)
        check_positive("content epochs", self.epochs)
        check_positive("content negatives", self.negatives)
        check_positive("content learning_rate", self.learning_rate)
        check_positive("content min_count", self.min_count)
        return self


def tokenize(text):
    """Case-folded alphanumeric runs of length >= 2."""
    if not text:
        return []
    return [t for t in _TOKEN_RE.findall(text.casefold()) if len(t) >= 2]


def paper_text(record):
    return record.title + " " + (record.abstract or "")


@dataclass
class Vocabulary:
    index: dict  # token -> dense id
    counts: dict  # kept token -> corpus count
    min_count: int = 2

    def __len__(self):
        return len(self.index)

    @classmethod
    def build(cls, token_lists, min_count=2):
        raw = {}
        for tokens in token_lists:
            for t in tokens:
                raw[t] = raw.get(t, 0) + 1
        kept = {t: c for t, c in sorted(raw.items()) if c >= min_count}
        return cls(index={t: i for i, t in enumerate(kept)}, counts=kept, min_count=min_count)


@dataclass
class DocVectors:
    ids: tuple
    matrix: np.ndarray
    _rows: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self._rows = {pid: i for i, pid in enumerate(self.ids)}

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __contains__(self, paper_id):
        return paper_id in self._rows

    def vector(self, paper_id):
        return self.matrix[self._rows[paper_id]]

    def aligned_matrix(self, paper_ids):
        missing = [p for p in paper_ids if p not in self._rows]
        if missing:
            raise VectorCoverageError(f"vectors missing for paper {missing[0]!r} (+{len(missing) - 1} more)")
        return self.matrix[[self._rows[p] for p in paper_ids]]


def pair_loss(doc_vec, target_vec, noise_vecs):
    """Negative-sampling objective for one (document, word) pair (lower is better)."""
    pos = float(doc_vec @ target_vec)
    loss = -float(np.log(sigmoid(np.array([pos]))[0]))
    for noise in noise_vecs:
        loss -= float(np.log(sigmoid(np.array([-float(doc_vec @ noise)]))[0]))
    return loss


def pair_gradients(doc_vec, target_vec, noise_vecs):
    """Analytic gradients of :func:`pair_loss` w.r.t. (doc, target, noises)."""
    s_pos = sigmoid(np.array([doc_vec @ target_vec]))[0]
    g_doc = (s_pos - 1.0) * target_vec
    g_target = (s_pos - 1.0) * doc_vec
    g_noise = []
    for noise in noise_vecs:
        s_neg = sigmoid(np.array([doc_vec @ noise]))[0]
        g_doc = g_doc + s_neg * noise
        g_noise.append(s_neg * doc_vec)
    return g_doc, g_target, g_noise


def train_pvdbow(corpus, config=None, seed=0, loss_history=None):
    """Train document vectors on tokenize(title + " " + abstract).

    Deterministic given ``seed``. Papers whose text yields no in-vocabulary
    token keep their initial (untrained) vector and are logged.
    """
    config = (config or ContentConfig()).validate()
    paper_ids = sorted(corpus.papers)
    token_lists = [tokenize(paper_text(corpus.papers[pid])) for pid in paper_ids]
    vocab = Vocabulary.build(token_lists, config.min_count)
    if len(vocab) == 0:
        raise ConfigError("content vocabulary is empty; lower min_count or supply text")
    doc_tokens = [
        np.asarray([vocab.index[t] for t in tokens if t in vocab.index], dtype=np.intp)
        for tokens in token_lists
    ]
    for pid, toks in zip(paper_ids, doc_tokens):
        if toks.size == 0:
            logger.warning("paper %s has no in-vocabulary tokens; vector stays untrained", pid)

    rng = np.random.default_rng([seed & 0x7FFFFFFF, 0x9E3779B9])
    docs = xavier_init(len(paper_ids), config.dim, rng)
    contexts = np.zeros((len(vocab), config.dim))

    freqs = np.array([vocab.counts[t] for t in sorted(vocab.index, key=vocab.index.get)])
    noise = freqs.astype(np.float64) ** _NOISE_POWER
    noise_cdf = np.cumsum(noise / noise.sum())

    lr = config.learning_rate
    for _epoch in range(config.epochs):
        order = rng.permutation(len(paper_ids))
        total, pairs = 0.0, 0
        for di in order:
            tokens = doc_tokens[di]
            if tokens.size == 0:
                continue
            v = docs[di]
            for w in tokens:
                draws = np.searchsorted(noise_cdf, rng.random(config.negatives))
                delta_v = np.zeros_like(v)
                for target, label in [(int(w), 1.0)] + [(int(n), 0.0) for n in draws if n != w]:
                    c = contexts[target]
                    s = _scalar_sigmoid(float(v @ c))
                    total += -math.log(max(s if label else 1.0 - s, 1e-12))
                    delta_v += (s - label) * c
                    contexts[target] = c - lr * (s - label) * v
                docs[di] = v - lr * delta_v
                v = docs[di]
                pairs += 1
        if loss_history is not None:
            loss_history.append(total / max(pairs, 1))
    return DocVectors(ids=tuple(paper_ids), matrix=docs)


def save_vectors(doc_vectors, path):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"#dim {doc_vectors.dim}\n")
        for pid in doc_vectors.ids:
            values = " ".join(repr(float(x)) for x in doc_vectors.vector(pid))
            handle.write(f"{pid} {values}\n")


def load_vectors(path, corpus=None):
    """Read a vector file; with ``corpus`` given, require full paper coverage."""
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline()
        parts = header.split()
        if len(parts) != 2 or parts[0] != "#dim":
            raise VectorFormatError('expected header "#dim <width>"', line_number=1)
        try:
            dim = int(parts[1])
        except ValueError as exc:
            raise VectorFormatError(f"bad width {parts[1]!r}", line_number=1) from exc
        ids, rows = [], []
        for line_number, line in enumerate(handle, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise VectorFormatError(
                    f"expected {dim} values, got {len(fields) - 1}", line_number=line_number
                )
            try:
                rows.append([float(x) for x in fields[1:]])
            except ValueError as exc:
                raise VectorFormatError("non-numeric value", line_number=line_number) from exc
            ids.append(fields[0])
    if len(set(ids)) != len(ids):
        raise VectorFormatError("duplicate paper id in vector file")
    vectors = DocVectors(ids=tuple(ids), matrix=np.asarray(rows, dtype=np.float64))
    if corpus is not None:
        missing = [p for p in sorted(corpus.papers) if p not in vectors]
        if missing:
            raise VectorCoverageError(
                f"vector file misses paper {missing[0]!r} (+{len(missing) - 1} more)"
            )
    return vectors
