"""Ranking protocols and metrics.

Three protocols: all-item ranking with consumed-item exclusion, Top-1
among 1 ground truth + 19 sampled negatives, and the 101-candidate
validation protocol (1 + 100). Metrics are the single-relevant-item
forms: HR@k is rank <= k, NDCG@k is 1/log2(rank+1) truncated at k.

Ties break pessimistically: the ground truth sorts after every
equal-scored candidate, so reported numbers are lower bounds.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "RankedResult",
    "MetricsReport",
    "hit_ratio_at_k",
    "ndcg_at_k",
    "ranked_result_from_scores",
    "rank_all_items",
    "rank_k_candidates",
    "negative_pool_rng",
    "run_protocol",
    "write_report",
    "PROTOCOLS",
]

HR_KS = (1, 5, 10, 50, 100)
NDCG_KS = (5, 10, 50, 100)

# protocol name -> number of sampled negatives (None = rank everything)
PROTOCOLS: dict[str, Optional[int]] = {
    "all_items": None,
    "top1of20": 19,
    "val101": 100,
}


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class RankedResult:
    query_id: str
    book_ids: tuple[str, ...]
    scores: tuple[float, ...]
    ground_truth_rank: Optional[int]  # 1-based; None when unranked

    def __post_init__(self):
        for a, b in zip(self.scores, self.scores[1:]):
            if b > a:
                raise EvalError("scores must be non-increasing")


@dataclass
class MetricsReport:
    hr: dict[int, float] = field(default_factory=dict)
    ndcg: dict[int, float] = field(default_factory=dict)
    top1: float = 0.0
    n_queries: int = 0

    def to_dict(self) -> dict:
        return {
            "hr": {str(k): v for k, v in sorted(self.hr.items())},
            "ndcg": {str(k): v for k, v in sorted(self.ndcg.items())},
            "top1": self.top1,
            "n_queries": self.n_queries,
        }


def hit_ratio_at_k(rank: Optional[int], k: int) -> int:
    if rank is None:
        return 0
    if rank < 1:
        raise EvalError(f"rank must be >= 1, got {rank}")
    return 1 if rank <= k else 0


def ndcg_at_k(rank: Optional[int], k: int) -> float:
    if rank is None:
        return 0.0
    if rank < 1:
        raise EvalError(f"rank must be >= 1, got {rank}")
    return 1.0 / math.log2(rank + 1) if rank <= k else 0.0


def ranked_result_from_scores(
    query_id: str,
    book_ids: Sequence[str],
    scores: Sequence[float],
    ground_truth: str,
) -> RankedResult:
    """Sort by descending score; equal scores order by ascending book id
    except that the ground truth loses every tie."""
    if len(book_ids) != len(scores):
        raise EvalError(f"{len(book_ids)} ids vs {len(scores)} scores")
    if list(book_ids).count(ground_truth) != 1:
        raise EvalError(f"ground truth {ground_truth!r} must appear exactly once")
    order = sorted(
        range(len(book_ids)),
        key=lambda i: (-scores[i], book_ids[i] == ground_truth, book_ids[i]),
    )
    ranked_ids = tuple(book_ids[i] for i in order)
    ranked_scores = tuple(float(scores[i]) for i in order)
    gt_rank = ranked_ids.index(ground_truth) + 1
    return RankedResult(query_id, ranked_ids, ranked_scores, gt_rank)


def negative_pool_rng(base_seed: int, user: str, protocol: str) -> np.random.Generator:
    """Candidate pools are seeded per (user, protocol) so every scorer
    faces identical negatives."""
    h = hashlib.blake2b(f"{base_seed}\x00{user}\x00{protocol}".encode("utf-8"), digest_size=8)
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


ScoreFn = Callable[[Sequence[str]], np.ndarray]


def rank_all_items(
    score_fn: ScoreFn,
    query_id: str,
    catalog: Sequence[str],
    consumed: frozenset[str] | set[str],
    ground_truth: str,
) -> RankedResult:
    if ground_truth not in catalog:
        raise EvalError(f"ground truth {ground_truth!r} missing from catalog")
    if ground_truth in consumed:
        raise EvalError(f"ground truth {ground_truth!r} is in the consumed set")
    pool = [b for b in catalog if b not in consumed]
    scores = score_fn(pool)
    return ranked_result_from_scores(query_id, pool, list(map(float, scores)), ground_truth)


def rank_k_candidates(
    score_fn: ScoreFn,
    query_id: str,
    catalog: Sequence[str],
    consumed: frozenset[str] | set[str],
    ground_truth: str,
    n_negatives: int,
    rng: np.random.Generator,
) -> RankedResult:
    if ground_truth in consumed:
        raise EvalError(f"ground truth {ground_truth!r} is in the consumed set")
    pool = [b for b in catalog if b not in consumed and b != ground_truth]
    if len(pool) < n_negatives:
        raise EvalError(f"need {n_negatives} negatives, only {len(pool)} unread books")
    negatives = list(rng.choice(pool, size=n_negatives, replace=False))
    cands = [ground_truth] + negatives
    scores = score_fn(cands)
    return ranked_result_from_scores(query_id, cands, list(map(float, scores)), ground_truth)


def summarize(results: Sequence[RankedResult]) -> MetricsReport:
    report = MetricsReport(n_queries=len(results))
    if not results:
        return report
    for k in HR_KS:
        report.hr[k] = 100.0 * sum(hit_ratio_at_k(r.ground_truth_rank, k) for r in results) / len(results)
    for k in NDCG_KS:
        report.ndcg[k] = 100.0 * sum(ndcg_at_k(r.ground_truth_rank, k) for r in results) / len(results)
    report.top1 = 100.0 * sum(1 for r in results if r.ground_truth_rank == 1) / len(results)
    return report


def run_protocol(
    queries: Sequence[tuple[str, str, frozenset[str]]],
    protocol: str,
    score_fn_for_query: Callable[[str], ScoreFn],
    catalog: Sequence[str],
    base_seed: int = 0,
) -> MetricsReport:
    """Evaluate queries of (query_id, ground_truth, consumed) under a
    named protocol. ``score_fn_for_query`` binds a query id to a
    function scoring candidate book id lists. Query ids follow the
    "user@step" convention; the user part seeds the negative pools so
    every scorer faces identical candidates."""
    if protocol not in PROTOCOLS:
        raise EvalError(f"unknown protocol {protocol!r}; expected one of {sorted(PROTOCOLS)}")
    n_neg = PROTOCOLS[protocol]
    results = []
    for query_id, gt, consumed in queries:
        score_fn = score_fn_for_query(query_id)
        if n_neg is None:
            results.append(rank_all_items(score_fn, query_id, catalog, consumed, gt))
        else:
            user = query_id.split("@", 1)[0]
            rng = negative_pool_rng(base_seed, user, protocol)
            results.append(
                rank_k_candidates(score_fn, query_id, catalog, consumed, gt, n_neg, rng)
            )
    return summarize(results)


def write_report(
    path: str | Path,
    report: MetricsReport,
    protocol: str,
    config_digest: str,
    seed: int,
) -> None:
    payload = {
        "config_digest": config_digest,
        "seed": seed,
        "protocol": protocol,
        "metrics": report.to_dict(),
        "n_queries": report.n_queries,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
