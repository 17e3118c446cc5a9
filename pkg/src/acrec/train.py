"""Pairwise ranking training at batch size 1.

Each update step scores one positive against K freshly sampled unread
negatives, takes the mean -log sigmoid(y_pos - y_k), backpropagates,
and applies one Adam step. The per-user 1/T_u factor is folded into the
step loss by default (``per_user_normalization``); the reported epoch
loss is always the mean over users of each user's mean step loss.
After every epoch the model is scored on the validation split under the
101-candidate protocol and the best-HR@10 parameters are kept.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import evaluation
from .domain import ReadingHistory
from .features import FeatureBank, build_sample_features, candidate_features
from .ingest import UsefulStep
from .model import AcRecModel, CosineScorer, FcnConfig, FcnModel, ModelConfig, SampleFeatures
from .numerics import Adam, CheckpointError, load_blob, save_blob
from .numerics import tensor as T
from .numerics.tensor import Tensor

__all__ = [
    "TrainConfig",
    "TrainSample",
    "TrainingDivergedError",
    "bpr_loss",
    "bpr_loss_value",
    "sample_negatives",
    "build_train_samples",
    "fit",
    "FitResult",
    "save_checkpoint",
    "load_checkpoint",
    "config_digest",
]


class TrainError(RuntimeError):
    pass


class TrainingDivergedError(TrainError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    k_negatives: int = 10
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    per_user_normalization: bool = True
    checkpoint_dir: Optional[str] = None
    log_path: Optional[str] = None
    val_protocol: str = "val101"

    def __post_init__(self):
        if self.k_negatives < 1:
            raise ValueError(f"k_negatives must be >= 1, got {self.k_negatives}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "k_negatives": self.k_negatives,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "per_user_normalization": self.per_user_normalization,
            "val_protocol": self.val_protocol,
        }


@dataclass(frozen=True)
class TrainSample:
    user: str
    step_index: int
    positive: str
    features: SampleFeatures


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    val_hr10: float
    val_ndcg10: float
    wall_ms: float

    def to_record(self) -> dict:
        return {
            "epoch": self.epoch,
            "mean_loss": self.mean_loss,
            "val_hr10": self.val_hr10,
            "val_ndcg10": self.val_ndcg10,
            "wall_ms": self.wall_ms,
        }


@dataclass
class FitResult:
    log: list[EpochRecord]
    best_epoch: int
    best_val_hr10: float
    best_params: dict[str, np.ndarray]
    final_val_hr10: float


def config_digest(payload: Mapping) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def bpr_loss_value(y_pos: float, y_negs: Sequence[float]) -> float:
    """Plain-number reference: -(1/K) sum log sigmoid(y_pos - y_k)."""
    negs = np.asarray(y_negs, dtype=np.float64)
    diffs = y_pos - negs
    # log sigmoid(x) = -softplus(-x), in the overflow-safe form
    softplus = np.maximum(-diffs, 0.0) + np.log1p(np.exp(-np.abs(diffs)))
    return float(softplus.mean())


def bpr_loss(y_pos: Tensor, y_negs: Tensor) -> Tensor:
    """Autodiff BPR step loss; ``y_pos`` has shape (1,), ``y_negs`` (K,)."""
    if y_pos.shape != (1,):
        raise T.ShapeError(f"y_pos must have shape (1,), got {y_pos.shape}")
    k = y_negs.shape[0]
    if k < 1:
        raise T.ShapeError("need at least one negative score")
    scores = T.concat([y_pos, y_negs], axis=0)
    pick = np.zeros((k, k + 1), dtype=scores.data.dtype)
    pick[:, 0] = 1.0
    pick[np.arange(k), np.arange(1, k + 1)] = -1.0
    diffs = T.matmul(T.constant(pick), scores)  # y_pos - y_k
    return T.scale(T.sum_all(T.softplus(T.neg(diffs))), 1.0 / k)


def sample_negatives(
    catalog: Sequence[str],
    consumed: frozenset[str] | set[str],
    k: int,
    rng: np.random.Generator,
) -> list[str]:
    """K distinct unread books, uniform without replacement, fresh per
    update step."""
    pool = [b for b in catalog if b not in consumed]
    if len(pool) < k:
        raise TrainError(f"need {k} negatives but only {len(pool)} unread books exist")
    if len(pool) == k:
        return pool
    return list(rng.choice(pool, size=k, replace=False))


def build_train_samples(
    bank: FeatureBank,
    histories: Mapping[str, ReadingHistory],
    steps: Sequence[UsefulStep],
    m: int,
) -> list[TrainSample]:
    return [
        TrainSample(
            user=s.user,
            step_index=s.step_index,
            positive=s.positive_book,
            features=build_sample_features(bank, histories[s.user], s, m),
        )
        for s in steps
    ]


def evaluate_split(
    scorer,
    samples: Sequence[TrainSample],
    bank: FeatureBank,
    histories: Mapping[str, ReadingHistory],
    protocol: str,
    base_seed: int = 0,
) -> evaluation.MetricsReport:
    """Run an evaluation protocol over prepared samples."""
    with_cosine = isinstance(scorer, CosineScorer) or getattr(
        getattr(scorer, "config", None), "use_cosine", False
    )
    by_query = {f"{s.user}@{s.step_index}": s for s in samples}

    def score_fn_for_query(query_id: str):
        sample = by_query[query_id]

        def score_fn(cand_ids: Sequence[str]) -> np.ndarray:
            cand = candidate_features(bank, cand_ids, sample.features.ac_raw, with_cosine)
            return scorer.score_sample(sample.features, cand, training=False).data

        return score_fn

    queries = [
        (qid, s.positive, histories[s.user].consumed_before(s.step_index))
        for qid, s in by_query.items()
    ]
    return evaluation.run_protocol(
        queries, protocol, score_fn_for_query, bank.scorable_ids, base_seed
    )


def fit(
    scorer,
    train_samples: Sequence[TrainSample],
    val_samples: Sequence[TrainSample],
    bank: FeatureBank,
    histories: Mapping[str, ReadingHistory],
    config: TrainConfig,
) -> FitResult:
    if not train_samples:
        raise TrainError("no training samples")
    params = scorer.parameters()
    if not params:
        raise TrainError(f"scorer {scorer.name!r} has no trainable parameters")
    optimizer = Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    with_cosine = getattr(scorer.config, "use_cosine", False)

    by_user: dict[str, list[TrainSample]] = {}
    for s in train_samples:
        by_user.setdefault(s.user, []).append(s)
    for samples in by_user.values():
        samples.sort(key=lambda s: s.step_index)
    users = sorted(by_user)
    consumed_full = {u: histories[u].book_ids for u in users}

    log: list[EpochRecord] = []
    best_epoch = -1
    best_hr10 = -1.0
    best_params: dict[str, np.ndarray] = {n: p.data.copy() for n, p in params.items()}
    epochs_since_improvement = 0
    final_hr10 = 0.0

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = list(users)
        rng.shuffle(order)
        user_means: list[float] = []
        for user in order:
            samples = by_user[user]
            t_u = len(samples)
            step_losses: list[float] = []
            for sample in samples:
                negatives = sample_negatives(
                    bank.scorable_ids, consumed_full[user], config.k_negatives, rng
                )
                cand = candidate_features(
                    bank, [sample.positive, *negatives], sample.features.ac_raw, with_cosine
                )
                scores = scorer.score_sample(sample.features, cand, training=True, rng=rng)
                loss = bpr_loss(
                    T.slice_vec(scores, 0, 1), T.slice_vec(scores, 1, scores.shape[0])
                )
                step_loss = loss.item()
                if not np.isfinite(step_loss):
                    raise TrainingDivergedError(
                        f"non-finite loss {step_loss} at epoch {epoch}, user {user}, "
                        f"step {sample.step_index}"
                    )
                step_losses.append(step_loss)
                if config.per_user_normalization:
                    loss = T.scale(loss, 1.0 / t_u)
                optimizer.zero_grad()
                T.backward(loss)
                optimizer.step()
            user_means.append(float(np.mean(step_losses)))
        mean_loss = float(np.mean(user_means))

        val_report = evaluate_split(
            scorer, val_samples, bank, histories, config.val_protocol, config.seed
        )
        hr10 = val_report.hr.get(10, 0.0)
        ndcg10 = val_report.ndcg.get(10, 0.0)
        final_hr10 = hr10
        record = EpochRecord(
            epoch=epoch,
            mean_loss=mean_loss,
            val_hr10=hr10,
            val_ndcg10=ndcg10,
            wall_ms=(time.perf_counter() - started) * 1000.0,
        )
        log.append(record)
        if config.log_path:
            _append_log(config.log_path, record, config)

        if hr10 > best_hr10:
            best_hr10 = hr10
            best_epoch = epoch
            best_params = {n: p.data.copy() for n, p in params.items()}
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
        if epochs_since_improvement >= config.patience:
            break

    if config.checkpoint_dir:
        save_checkpoint(scorer, best_params, config, Path(config.checkpoint_dir) / "best")
    return FitResult(
        log=log,
        best_epoch=best_epoch,
        best_val_hr10=best_hr10,
        best_params=best_params,
        final_val_hr10=final_hr10,
    )


def _append_log(path: str, record: EpochRecord, config: TrainConfig) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    if not p.exists():
        meta = {"record": "meta", "config_digest": config_digest(config.to_dict())}
        p.write_text(json.dumps(meta, sort_keys=True) + "\n", "utf-8")
    with p.open("a", encoding="utf-8") as f:
        f.write(json.dumps(record.to_record(), sort_keys=True) + "\n")


def _scorer_config_dict(scorer) -> dict:
    return scorer.config.to_dict()


def save_checkpoint(
    scorer,
    params: Mapping[str, np.ndarray],
    train_config: TrainConfig,
    path: str | Path,
) -> str:
    """Write params plus a manifest carrying the model kind, its config,
    the training config, the seed, and a content digest."""
    model_config = _scorer_config_dict(scorer)
    extra = {
        "model": scorer.name,
        "model_config": model_config,
        "train_config": train_config.to_dict(),
        "seed": train_config.seed,
        "config_digest": config_digest(
            {"model": scorer.name, "model_config": model_config, "train_config": train_config.to_dict()}
        ),
    }
    save_blob(path, dict(params), extra)
    return extra["config_digest"]


def load_checkpoint(path: str | Path, expected_model_config: Optional[Mapping] = None):
    """Rebuild the scorer stored at ``path``. Passing
    ``expected_model_config`` enforces agreement with the manifest."""
    tensors, manifest = load_blob(path)
    extra = manifest.get("extra", {})
    kind = extra.get("model")
    stored = extra.get("model_config", {})
    if expected_model_config is not None and dict(expected_model_config) != dict(stored):
        raise CheckpointError(
            f"checkpoint config disagrees with runtime config:\n"
            f"  stored:  {json.dumps(stored, sort_keys=True)}\n"
            f"  runtime: {json.dumps(dict(expected_model_config), sort_keys=True)}"
        )
    if kind == "acrec":
        scorer = AcRecModel(ModelConfig.from_dict(stored), seed=int(extra.get("seed", 0)))
    elif kind == "fcn":
        scorer = FcnModel(FcnConfig.from_dict(stored), seed=int(extra.get("seed", 0)))
    else:
        raise CheckpointError(f"unknown model kind {kind!r} in checkpoint manifest")
    params = scorer.parameters()
    if set(params) != set(tensors):
        missing = set(params) ^ set(tensors)
        raise CheckpointError(f"checkpoint tensors do not match model parameters: {sorted(missing)[:5]}")
    for name, tensor in params.items():
        if tensor.data.shape != tensors[name].shape:
            raise CheckpointError(
                f"shape mismatch for {name}: {tensors[name].shape} vs {tensor.data.shape}"
            )
        tensor.data[...] = tensors[name]
    return scorer, extra
