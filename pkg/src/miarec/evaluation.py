"""Top-k ranking metrics and the test-set evaluation protocol.

Per evaluated scholar the candidate pool is their test positives plus the
split's sampled negatives (a 1:3 ratio); the checkpoint ranks the pool and
precision@k, recall@k and nDCG@k are macro-averaged over scholars.
"""

import math
from dataclasses import dataclass

from .errors import EmptySplitError, UndefinedMetricError
from .recommender import recommend_topk
from .validation import check_positive

DEFAULT_KS = (5, 10, 20)


def precision_recall_at_k(ranked_ids, relevant, k):
    """(P@k, R@k) for a ranked id list against a set of relevant ids.

    P@k divides by the actual prefix length min(k, len(ranked_ids)).
    """
    check_positive("k", k)
    relevant = set(relevant)
    if not relevant:
        raise UndefinedMetricError("no relevant items; scholar should be skipped upstream")
    if not ranked_ids:
        raise UndefinedMetricError("empty ranking")
    top = ranked_ids[:k]
    hits = sum(1 for pid in top if pid in relevant)
    return hits / len(top), hits / len(relevant)


def dcg_at_k(gains, k):
    check_positive("k", k)
    return sum(g / math.log2(i + 1) for i, g in enumerate(gains[:k], start=1))


def ndcg_at_k(gains, total_relevant, k):
    """Binary nDCG@k; the ideal list is min(total_relevant, k) leading ones."""
    check_positive("k", k)
    if total_relevant < 1:
        raise UndefinedMetricError("nDCG undefined without relevant items")
    if any(g not in (0, 1) for g in gains):
        raise UndefinedMetricError(f"gains must be binary, got {gains!r}")
    ideal = dcg_at_k([1] * min(total_relevant, k), k)
    return dcg_at_k(gains, k) / ideal


@dataclass
class MetricsReport:
    precision: dict  # k -> mean P@k
    recall: dict  # k -> mean R@k
    ndcg: dict  # k -> mean N@k
    n_scholars: int

    def to_dict(self, config_echo=None):
        out = {}
        for k in sorted(self.precision):
            out[f"precision@{k}"] = self.precision[k]
            out[f"recall@{k}"] = self.recall[k]
            out[f"ndcg@{k}"] = self.ndcg[k]
        out["n_scholars"] = self.n_scholars
        if config_echo is not None:
            out["config"] = dict(config_echo)
        return out


def evaluate(checkpoint, split, ks=DEFAULT_KS):
    """Rank each scholar's test candidates once and average the metric suite."""
    ks = tuple(sorted(set(int(k) for k in ks)))
    for k in ks:
        check_positive("k", k)
    scholars = split.scholars
    if not scholars:
        raise EmptySplitError("split covers no scholars")
    max_k = max(ks)
    sums = {k: [0.0, 0.0, 0.0] for k in ks}
    counted = 0
    for scholar in scholars:
        relevant = split.test_positives[scholar]
        if not relevant:
            continue  # metrics undefined, silently excluded
        candidates = sorted(set(relevant) | set(split.test_negatives.get(scholar, ())))
        ranked = [pid for pid, _ in recommend_topk(checkpoint, scholar, candidates, max_k)]
        gains = [1 if pid in relevant else 0 for pid in ranked]
        counted += 1
        for k in ks:
            p, r = precision_recall_at_k(ranked, relevant, k)
            n = ndcg_at_k(gains, len(relevant), k)
            sums[k][0] += p
            sums[k][1] += r
            sums[k][2] += n
    if counted == 0:
        raise EmptySplitError("no scholar in the split has test positives")
    return MetricsReport(
        precision={k: sums[k][0] / counted for k in ks},
        recall={k: sums[k][1] / counted for k in ks},
        ndcg={k: sums[k][2] / counted for k in ks},
        n_scholars=counted,
    )
