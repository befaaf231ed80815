"""Scalar losses and the scenario objectives that combine them.

Three compositions cover the supported scenarios. Generalization: object
cross-entropy on ordered source images plus per-task weighted pretext
cross-entropy, where ordered images count as pretext label 0. Adaptation:
the same plus an entropy penalty on the object posteriors of ordered target
images and a weighted pretext term on target images. Partial adaptation:
source terms are class-weighted by gamma, the source pretext weight is
forced to zero, and a source-vs-target discriminator enters through the
gradient-reversal boundary so the backbone maximizes what the discriminator
minimizes.

Dataset-level normalizations are realized as per-minibatch means. Every log
is floored at 1e-12.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import Batch
from .model import ModelBundle, classify, discriminate_domain, forward_features, pretext_logits

LOG_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Per-task pretext weights (source and target), entropy weight, adversarial ceiling."""

    alpha_s: dict = field(default_factory=dict)
    alpha_t: dict = field(default_factory=dict)
    eta: float = 0.0
    lambda_max: float = 0.0
    schedule_steepness: float = 10.0

    def __post_init__(self):
        for name, mapping in (("alpha_s", self.alpha_s), ("alpha_t", self.alpha_t)):
            for kind, value in mapping.items():
                if value < 0:
                    raise ValueError(f"{name}[{kind}] must be >= 0, got {value}")
        if self.eta < 0 or self.lambda_max < 0:
            raise ValueError("eta and lambda_max must be >= 0")

    def alpha_source(self, kind: str) -> float:
        return float(self.alpha_s.get(kind, 0.0))

    def alpha_target(self, kind: str) -> float:
        return float(self.alpha_t.get(kind, 0.0))


@dataclass(frozen=True)
class ClassWeights:
    """Normalized per-class weights; the largest entry is exactly 1."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64)
        object.__setattr__(self, "gamma", g)
        if g.ndim != 1 or g.size == 0:
            raise ValueError("gamma must be a nonempty vector")
        if g.min() < 0.0 or g.max() > 1.0:
            raise ValueError("gamma entries must lie in [0, 1]")
        if g.max() != 1.0:
            raise ValueError("gamma must be normalized so its maximum is exactly 1")

    @staticmethod
    def uniform(num_classes: int) -> "ClassWeights":
        return ClassWeights(np.ones(num_classes, dtype=np.float64))


def _as_tensor(x, like: torch.Tensor | None = None) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    t = torch.from_numpy(np.asarray(x, dtype=np.float64))
    if like is not None:
        t = t.to(like.dtype)
    return t


def cross_entropy(logits, onehot) -> torch.Tensor:
    """Mean over rows of -log softmax(logits) at the true class, max-stabilized."""
    logits = _as_tensor(logits)
    onehot = _as_tensor(onehot, like=logits)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise ValueError(f"expected a nonempty (N, C) logit matrix, got shape {tuple(logits.shape)}")
    if onehot.shape != logits.shape:
        raise ValueError(f"logits {tuple(logits.shape)} and onehot {tuple(onehot.shape)} differ")
    oh = onehot.detach()
    if oh.min() < 0 or (oh.sum(dim=1) - 1.0).abs().max() > 1e-6:
        raise ValueError("onehot rows must be nonnegative and sum to 1")
    z = logits - logits.max(dim=1, keepdim=True).values
    log_probs = z - torch.log(torch.exp(z).sum(dim=1, keepdim=True))
    return -(onehot * log_probs).sum(dim=1).mean()


def _weighted_cross_entropy(logits: torch.Tensor, onehot: torch.Tensor, row_weights: torch.Tensor) -> torch.Tensor:
    z = logits - logits.max(dim=1, keepdim=True).values
    log_probs = z - torch.log(torch.exp(z).sum(dim=1, keepdim=True))
    per_row = -(onehot * log_probs).sum(dim=1)
    return (row_weights * per_row).mean()


def entropy(probabilities) -> torch.Tensor:
    """Mean Shannon entropy of probability rows, with 0*log(0) treated as 0."""
    probs = _as_tensor(probabilities)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError(f"expected a nonempty (N, C) probability matrix, got {tuple(probs.shape)}")
    check = probs.detach()
    if check.min() < 0:
        raise ValueError("probabilities must be nonnegative")
    if (check.sum(dim=1) - 1.0).abs().max() > 1e-6:
        raise ValueError("probability rows must sum to 1 (within 1e-6)")
    per_row = -(probs * torch.log(probs.clamp_min(LOG_EPS))).sum(dim=1)
    return per_row.mean()


def estimate_class_weights(target_object_probs) -> ClassWeights:
    """Average the target posterior rows and normalize by the maximum entry."""
    probs = target_object_probs
    if isinstance(probs, torch.Tensor):
        probs = probs.detach().cpu().numpy()
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError("need at least one probability row")
    gamma = probs.mean(axis=0)
    return ClassWeights(gamma / gamma.max())


def lambda_schedule(progress: float, lambda_max: float, steepness: float = 10.0) -> float:
    """Adversarial weight ramp: 0 at the start, approaching lambda_max from below."""
    if lambda_max < 0:
        raise ValueError("lambda_max must be >= 0")
    if not 0.0 <= progress <= 1.0:
        warnings.warn(f"training progress {progress} outside [0, 1]; clamping", stacklevel=2)
        progress = min(1.0, max(0.0, progress))
    return lambda_max * (2.0 / (1.0 + math.exp(-steepness * progress)) - 1.0)


# ----------------------------------------------------------------------------
# Scenario objectives. The *_terms variants expose the individual unweighted
# terms so the trainer can log them and name whichever one diverges.
# ----------------------------------------------------------------------------

def _batch_features(batch: Batch, bundle: ModelBundle) -> torch.Tensor:
    images = [item.image for item in batch.ordered] + [tr.sample.image for tr in batch.transformed]
    if not images:
        raise ValueError("batch is empty")
    return forward_features(bundle, np.stack(images))


def _pretext_rows(batch: Batch, task_kind: str) -> tuple[list[int], list[int]]:
    """Row indices (into the batch-order feature matrix) and labels for one task."""
    n_ord = len(batch.ordered)
    rows = list(range(n_ord))
    labels = [0] * n_ord
    for i, tr in enumerate(batch.transformed):
        if tr.sample.task.value == task_kind:
            rows.append(n_ord + i)
            labels.append(tr.sample.pretext_label)
    return rows, labels


def _onehot_rows(labels: list[int], num: int, dtype: torch.dtype) -> torch.Tensor:
    out = torch.zeros(len(labels), num, dtype=dtype)
    out[torch.arange(len(labels)), torch.tensor(labels)] = 1.0
    return out


def _ordered_class_targets(batch: Batch, dtype: torch.dtype) -> tuple[list[int], torch.Tensor]:
    rows = [i for i, item in enumerate(batch.ordered) if item.class_onehot is not None]
    if not rows:
        return [], torch.zeros(0, 0)
    onehot = torch.from_numpy(np.stack([batch.ordered[i].class_onehot for i in rows])).to(dtype)
    return rows, onehot


def dg_terms(
    batch: Batch, bundle: ModelBundle, weights: LossWeights, features: torch.Tensor | None = None
) -> tuple[dict[str, torch.Tensor], torch.Tensor]:
    """Generalization terms on one batch. The object term is present only when
    the batch has ordered labeled items (it is undefined otherwise)."""
    feats = _batch_features(batch, bundle) if features is None else features
    terms: dict[str, torch.Tensor] = {}
    total = feats.new_zeros(())

    class_rows, class_onehot = _ordered_class_targets(batch, feats.dtype)
    if class_rows:
        terms["object_ce"] = cross_entropy(classify(bundle, feats[class_rows]), class_onehot)
        total = total + terms["object_ce"]

    for task in batch.tasks:
        kind = task.kind.value
        rows, labels = _pretext_rows(batch, kind)
        if not rows:
            continue
        logits = pretext_logits(bundle, feats[rows], kind)
        terms[f"pretext_{kind}"] = cross_entropy(logits, _onehot_rows(labels, task.num_labels, feats.dtype))
        total = total + weights.alpha_source(kind) * terms[f"pretext_{kind}"]
    return terms, total


def dg_objective(batch: Batch, bundle: ModelBundle, weights: LossWeights) -> torch.Tensor:
    """Object cross-entropy plus alpha-weighted pretext cross-entropy per task."""
    terms, total = dg_terms(batch, bundle, weights)
    if "object_ce" not in terms:
        raise ValueError("batch has no ordered labeled items; object loss is undefined")
    return total


def _require_unlabeled(batch: Batch, who: str) -> None:
    if any(item.class_onehot is not None for item in batch.ordered):
        raise ValueError(f"{who} must be unlabeled")


def _target_terms(
    target_batch: Batch, bundle: ModelBundle, weights: LossWeights
) -> tuple[dict[str, torch.Tensor], torch.Tensor, torch.Tensor]:
    """Entropy and pretext terms on a target batch; also returns the ordered-target features."""
    feats = _batch_features(target_batch, bundle)
    n_ord = len(target_batch.ordered)
    terms: dict[str, torch.Tensor] = {}
    total = feats.new_zeros(())

    if n_ord > 0:
        probs = torch.softmax(classify(bundle, feats[:n_ord]), dim=1)
        terms["target_entropy"] = entropy(probs)
        total = total + weights.eta * terms["target_entropy"]

    for task in target_batch.tasks:
        kind = task.kind.value
        rows, labels = _pretext_rows(target_batch, kind)
        if not rows:
            continue
        logits = pretext_logits(bundle, feats[rows], kind)
        terms[f"target_pretext_{kind}"] = cross_entropy(logits, _onehot_rows(labels, task.num_labels, feats.dtype))
        total = total + weights.alpha_target(kind) * terms[f"target_pretext_{kind}"]
    return terms, total, feats[:n_ord]


def da_terms(
    source_batch: Batch, target_batch: Batch, bundle: ModelBundle, weights: LossWeights
) -> tuple[dict[str, torch.Tensor], torch.Tensor]:
    _require_unlabeled(target_batch, "target batch")
    terms, total = dg_terms(source_batch, bundle, weights)
    t_terms, t_total, _ = _target_terms(target_batch, bundle, weights)
    terms.update(t_terms)
    return terms, total + t_total


def da_objective(
    source_batch: Batch, target_batch: Batch, bundle: ModelBundle, weights: LossWeights
) -> torch.Tensor:
    """Generalization objective on the source plus entropy and pretext terms on the target."""
    terms, total = da_terms(source_batch, target_batch, bundle, weights)
    if "object_ce" not in terms:
        raise ValueError("source batch has no ordered labeled items; object loss is undefined")
    return total


def pda_terms(
    source_batch: Batch,
    target_batch: Batch,
    bundle: ModelBundle,
    weights: LossWeights,
    gamma: ClassWeights,
    lam: float,
) -> tuple[dict[str, torch.Tensor], torch.Tensor]:
    if any(weights.alpha_source(t.kind.value) != 0.0 for t in source_batch.tasks):
        raise ValueError("partial adaptation requires every source pretext weight to be 0")
    _require_unlabeled(target_batch, "target batch")

    src_feats = _batch_features(source_batch, bundle)
    class_rows, class_onehot = _ordered_class_targets(source_batch, src_feats.dtype)
    if not class_rows:
        raise ValueError("source batch has no ordered labeled items; object loss is undefined")
    labels = [int(np.argmax(source_batch.ordered[i].class_onehot)) for i in class_rows]
    if len(gamma.gamma) != source_batch.ordered[class_rows[0]].class_onehot.shape[0]:
        raise ValueError(
            f"gamma has {len(gamma.gamma)} entries but the label space has "
            f"{source_batch.ordered[class_rows[0]].class_onehot.shape[0]} classes"
        )
    row_w = torch.from_numpy(gamma.gamma[labels]).to(src_feats.dtype)

    terms: dict[str, torch.Tensor] = {}
    terms["object_ce"] = _weighted_cross_entropy(
        classify(bundle, src_feats[class_rows]), class_onehot, row_w
    )
    total = terms["object_ce"]

    t_terms, t_total, tgt_ord_feats = _target_terms(target_batch, bundle, weights)
    terms.update(t_terms)
    total = total + t_total

    if tgt_ord_feats.shape[0] == 0:
        raise ValueError("target batch has no ordered items; the domain discriminator needs them")
    p_src = discriminate_domain(bundle, src_feats[class_rows], lam)
    p_tgt = discriminate_domain(bundle, tgt_ord_feats, lam)
    bce = -(
        (row_w * torch.log(p_src.clamp_min(LOG_EPS))).mean()
        + torch.log((1.0 - p_tgt).clamp_min(LOG_EPS)).mean()
    )
    terms["domain_bce"] = bce
    total = total + bce
    return terms, total


def pda_objective(
    source_batch: Batch,
    target_batch: Batch,
    bundle: ModelBundle,
    weights: LossWeights,
    gamma: ClassWeights,
    lam: float,
) -> torch.Tensor:
    """Partial-adaptation objective of the class-weighted, adversarial variant.

    Minimizing the returned scalar trains the discriminator on its
    source-vs-target cross-entropy while the backbone receives that
    gradient reversed and scaled by lam.
    """
    _, total = pda_terms(source_batch, target_batch, bundle, weights, gamma, lam)
    return total
