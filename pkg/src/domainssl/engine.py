"""Scenario trainers, evaluators, model selection, ablation sweeps, and CAM heatmaps.

Supported scenarios:
  dg    one or more labeled sources, target unseen until test time
  da    labeled sources plus an unlabeled target available during training
  pda   da where the target label space is a subset of the source's; adds
        class weighting and the adversarial domain discriminator
  prda  one labeled source plus unlabeled auxiliary domains standing in for
        the unavailable target

All randomness flows from the single config seed. Two single-threaded runs of
the same config produce bitwise-identical metrics files and checkpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import torch

from .data import (
    TARGET,
    DomainDataset,
    concat_datasets,
    make_batch,
    split_validation,
)
from .errors import ScenarioError, TrainingDiverged, UnsupportedArchitecture
from .model import (
    BackboneSpec,
    ModelBundle,
    ModelSpec,
    TaskHeadSpec,
    classify,
    forward_features,
    images_to_tensor,
    init_parameters,
    load_checkpoint,
    pretext_logits,
)
from .objectives import (
    ClassWeights,
    LossWeights,
    da_terms,
    dg_terms,
    estimate_class_weights,
    lambda_schedule,
    pda_terms,
)
from .permutations import generate_permutation_set
from .transforms import PretextTask, TaskKind, apply_pretext, resize_bilinear

SCENARIOS = ("dg", "da", "pda", "prda")

# per-epoch pretext accuracy is estimated on at most this many images to keep
# epoch overhead flat; the standalone evaluator always uses the whole dataset
PRETEXT_EVAL_CAP = 256

# permutation sets are deterministic in their arguments; rebuilding the 9-tile
# set costs a second, so trainers and evaluators share cached instances
_perm_set = lru_cache(maxsize=64)(generate_permutation_set)


@dataclass
class OptimizerConfig:
    kind: str = "sgd"  # "sgd" | "adam"
    lr: float = 1e-3
    head_lr: float | None = None  # object-head override (used by the prda preset)
    momentum: float = 0.9
    weight_decay: float = 0.0


@dataclass
class TaskConfig:
    kind: str  # "jigsaw" | "rotation"
    grid_n: int = 3
    num_permutations: int = 30
    perm_seed: int = 0


@dataclass
class TrainConfig:
    scenario: str
    tasks: list[TaskConfig]
    weights: LossWeights
    beta: float = 0.6
    epochs: int = 30
    batch_size: int = 128
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    lr_step: float = 0.8  # fraction of epochs after which lr drops x0.1
    seed: int = 0
    val_fraction: float = 0.1
    image_size: int = 32
    channels: int = 3
    arch: str = "small_conv"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ScenarioError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")


def preset(scenario: str, tasks: tuple[str, ...] = ("jigsaw", "rotation")) -> TrainConfig:
    """Default training configuration per scenario."""
    task_cfgs = [TaskConfig(kind=k) for k in tasks]
    jig, rot = "jigsaw", "rotation"
    default_alpha = {jig: 0.7, rot: 0.4}
    alpha_s = {k: default_alpha[k] for k in tasks}
    if scenario == "dg":
        return TrainConfig(
            scenario="dg",
            tasks=task_cfgs,
            weights=LossWeights(alpha_s=alpha_s, alpha_t=dict(alpha_s)),
        )
    if scenario == "da":
        return TrainConfig(
            scenario="da",
            tasks=task_cfgs,
            weights=LossWeights(alpha_s=alpha_s, alpha_t=dict(alpha_s), eta=0.1),
        )
    if scenario == "pda":
        return TrainConfig(
            scenario="pda",
            tasks=task_cfgs,
            weights=LossWeights(
                alpha_s={k: 0.0 for k in tasks},
                alpha_t={k: 1.0 for k in tasks},
                eta=0.2,
                lambda_max=0.1,
            ),
            epochs=24,
            batch_size=64,
            optimizer=OptimizerConfig(kind="sgd", lr=5e-4, momentum=0.9, weight_decay=5e-4),
            lr_step=1.0,
        )
    if scenario == "prda":
        return TrainConfig(
            scenario="prda",
            tasks=task_cfgs,
            weights=LossWeights(alpha_s={k: 0.5 for k in tasks}, alpha_t={k: 0.5 for k in tasks}, eta=0.0),
            epochs=6,
            batch_size=16,
            optimizer=OptimizerConfig(kind="adam", lr=1e-4, head_lr=1e-3, weight_decay=1e-6),
            lr_step=4.0 / 6.0,
        )
    raise ScenarioError(f"unknown scenario {scenario!r}")


def build_tasks(config: TrainConfig) -> list[PretextTask]:
    tasks = []
    for tc in config.tasks:
        kind = TaskKind(tc.kind)
        if kind is TaskKind.ROTATION:
            tasks.append(PretextTask(kind=kind))
        else:
            pset = _perm_set(tc.grid_n**2, tc.num_permutations, tc.perm_seed)
            tasks.append(PretextTask(kind=kind, grid_n=tc.grid_n, permutations=pset))
    if not tasks:
        raise ScenarioError("config declares no pretext tasks")
    return tasks


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    lam: float
    object_loss: float | None
    pretext_losses: dict
    val_accuracy: float
    target_accuracy: float | None
    pretext_accuracies: dict
    gamma: np.ndarray | None


@dataclass
class MetricsRecord:
    rows: list[EpochMetrics]
    config_hash: str = ""

    CSV_COLUMNS = (
        "epoch",
        "lr",
        "lambda",
        "object_loss",
        "jigsaw_loss",
        "rotation_loss",
        "val_accuracy",
        "target_accuracy",
        "jigsaw_accuracy",
        "rotation_accuracy",
        "gamma",
        "config_hash",
    )

    def to_csv(self, path: str | Path) -> None:
        lines = [",".join(self.CSV_COLUMNS)]
        for row in self.rows:
            gamma = ";".join(repr(float(g)) for g in row.gamma) if row.gamma is not None else ""
            cells = [
                str(row.epoch),
                repr(row.lr),
                repr(row.lam),
                repr(row.object_loss) if row.object_loss is not None else "",
                repr(row.pretext_losses["jigsaw"]) if "jigsaw" in row.pretext_losses else "",
                repr(row.pretext_losses["rotation"]) if "rotation" in row.pretext_losses else "",
                repr(row.val_accuracy),
                repr(row.target_accuracy) if row.target_accuracy is not None else "",
                repr(row.pretext_accuracies["jigsaw"]) if "jigsaw" in row.pretext_accuracies else "",
                repr(row.pretext_accuracies["rotation"]) if "rotation" in row.pretext_accuracies else "",
                gamma,
                self.config_hash,
            ]
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n")


def read_metrics(path: str | Path) -> list[dict]:
    """Parse a metrics CSV back into one dict per epoch (string values)."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


class _Stream:
    """Cycles a pool without replacement, reshuffling whenever it runs dry."""

    def __init__(self, pool: DomainDataset, rng: np.random.Generator):
        self.pool = pool
        self.rng = rng
        self.queue: list[int] = []

    def take(self, n: int) -> DomainDataset:
        while len(self.queue) < n:
            self.queue.extend(int(i) for i in self.rng.permutation(len(self.pool)))
        picked, self.queue = self.queue[:n], self.queue[n:]
        return DomainDataset(
            samples=[self.pool.samples[i] for i in picked],
            num_classes=self.pool.num_classes,
            domain_tag=self.pool.domain_tag,
        )


def _build_optimizer(bundle: ModelBundle, cfg: OptimizerConfig):
    head_params = list(bundle.object_head.parameters())
    head_ids = {id(p) for p in head_params}
    rest = [p for p in bundle.parameters() if id(p) not in head_ids]
    groups = [
        {"params": head_params, "lr": cfg.head_lr if cfg.head_lr is not None else cfg.lr},
        {"params": rest, "lr": cfg.lr},
    ]
    base_lrs = [g["lr"] for g in groups]
    if cfg.kind == "sgd":
        opt = torch.optim.SGD(groups, lr=cfg.lr, momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    elif cfg.kind == "adam":
        opt = torch.optim.Adam(groups, lr=cfg.lr, weight_decay=cfg.weight_decay)
    else:
        raise ValueError(f"unknown optimizer kind {cfg.kind!r}")
    return opt, base_lrs


def _lr_switch_epoch(config: TrainConfig) -> int:
    return math.ceil(config.lr_step * config.epochs - 1e-9)


def _validate_inputs(config, source_datasets, target_dataset):
    s = config.scenario
    if not source_datasets:
        raise ScenarioError("no source datasets given")
    if s in ("dg", "prda") and target_dataset is not None:
        raise ScenarioError(f"scenario {s} takes no target dataset")
    if s in ("da", "pda") and target_dataset is None:
        raise ScenarioError(f"scenario {s} requires an unlabeled target dataset")
    if s in ("da", "pda") and target_dataset.is_labeled:
        raise ScenarioError("target dataset must be unlabeled; strip labels explicitly for evaluation sets")
    if s == "prda":
        if len(source_datasets) < 2:
            raise ScenarioError("prda needs a labeled source plus at least one unlabeled auxiliary domain")
        if not source_datasets[0].is_labeled:
            raise ScenarioError("prda: the first source must be labeled")
        if any(ds.is_labeled for ds in source_datasets[1:]):
            raise ScenarioError("prda: auxiliary domains must be unlabeled")
    else:
        if any(not ds.is_labeled for ds in source_datasets):
            raise ScenarioError(f"scenario {s}: every source dataset must be labeled")


def _bundle_from(checkpoint) -> ModelBundle:
    if isinstance(checkpoint, ModelBundle):
        return checkpoint
    bundle, _ = load_checkpoint(checkpoint)
    return bundle


def tasks_from_bundle(bundle: ModelBundle) -> dict[str, PretextTask]:
    """Rebuild the pretext label spaces recorded in a checkpoint's model spec."""
    out = {}
    for spec in bundle.spec.tasks:
        if spec.kind == "rotation":
            out[spec.kind] = PretextTask(kind=TaskKind.ROTATION)
        else:
            pset = _perm_set(spec.grid_n**2, spec.cardinality, spec.perm_seed)
            out[spec.kind] = PretextTask(kind=TaskKind.JIGSAW, grid_n=spec.grid_n, permutations=pset)
    return out


def train(
    config: TrainConfig,
    source_datasets: list[DomainDataset],
    target_dataset: DomainDataset | None = None,
    eval_sets: dict[str, DomainDataset] | None = None,
) -> tuple[ModelBundle, MetricsRecord]:
    """Run one training job and return the trained bundle plus per-epoch metrics.

    ``eval_sets`` may carry a labeled ``"target"`` dataset; its accuracy is then
    recorded every epoch and pretext accuracy is measured on it (otherwise on
    the source validation split).
    """
    eval_sets = eval_sets or {}
    _validate_inputs(config, source_datasets, target_dataset)
    tasks = build_tasks(config)

    labeled_sources = source_datasets if config.scenario != "prda" else source_datasets[:1]
    splits = [split_validation(ds, config.val_fraction, config.seed) for ds in labeled_sources]
    train_pool = concat_datasets([tr for tr, _ in splits])
    val_ds = concat_datasets([va for _, va in splits])

    aux_pool = None
    if config.scenario == "prda":
        aux_pool = concat_datasets([ds for ds in source_datasets[1:]])

    num_classes = train_pool.num_classes
    head_specs = tuple(
        TaskHeadSpec(
            kind=t.kind.value,
            cardinality=t.num_labels,
            grid_n=t.grid_n if t.kind is TaskKind.JIGSAW else 0,
            perm_seed=next(tc.perm_seed for tc in config.tasks if tc.kind == t.kind.value),
        )
        for t in tasks
    )
    model_spec = ModelSpec(
        backbone=BackboneSpec(kind=config.arch, input_size=config.image_size, in_channels=config.channels),
        num_classes=num_classes,
        tasks=head_specs,
    )
    bundle = init_parameters(model_spec, config.seed)
    optimizer, base_lrs = _build_optimizer(bundle, config.optimizer)

    rng = np.random.default_rng(config.seed)
    weights = config.weights
    any_target_weight = weights.eta > 0 or any(weights.alpha_target(t.kind.value) > 0 for t in tasks)
    use_secondary = config.scenario == "pda" or (config.scenario == "da" and any_target_weight)
    secondary_pool = target_dataset if config.scenario in ("da", "pda") else aux_pool
    secondary = _Stream(secondary_pool, rng) if (use_secondary or config.scenario == "prda") else None

    steps = len(train_pool) // config.batch_size
    if steps < 1:
        raise ScenarioError(
            f"training pool of {len(train_pool)} is smaller than batch size {config.batch_size}"
        )

    gamma = ClassWeights.uniform(num_classes) if config.scenario == "pda" else None
    switch = _lr_switch_epoch(config)
    history: list[EpochMetrics] = []

    for epoch in range(config.epochs):
        factor = 0.1 if epoch >= switch else 1.0
        for group, base in zip(optimizer.param_groups, base_lrs):
            group["lr"] = base * factor
        progress = epoch / (config.epochs - 1) if config.epochs > 1 else 1.0
        lam = (
            lambda_schedule(progress, weights.lambda_max, weights.schedule_steepness)
            if config.scenario == "pda"
            else 0.0
        )

        term_sums: dict[str, float] = {}
        term_counts: dict[str, int] = {}
        order = rng.permutation(len(train_pool))
        for step in range(steps):
            idx = order[step * config.batch_size : (step + 1) * config.batch_size]
            src_slice = DomainDataset(
                samples=[train_pool.samples[int(i)] for i in idx],
                num_classes=num_classes,
            )
            src_batch = make_batch(src_slice, None, config.batch_size, config.beta, tasks, rng)

            if config.scenario == "pda":
                tgt_batch = make_batch(
                    secondary.take(config.batch_size), None, config.batch_size, config.beta,
                    tasks, rng, provenance=TARGET,
                )
                terms, total = pda_terms(src_batch, tgt_batch, bundle, weights, gamma, lam)
            elif secondary is not None:
                tgt_batch = make_batch(
                    secondary.take(config.batch_size), None, config.batch_size, config.beta,
                    tasks, rng, provenance=TARGET,
                )
                terms, total = da_terms(src_batch, tgt_batch, bundle, weights)
            else:
                terms, total = dg_terms(src_batch, bundle, weights)

            for name, value in terms.items():
                v = float(value.item())
                if not math.isfinite(v):
                    raise TrainingDiverged(f"loss term '{name}' became non-finite at epoch {epoch} step {step}")
                term_sums[name] = term_sums.get(name, 0.0) + v
                term_counts[name] = term_counts.get(name, 0) + 1
            if not torch.isfinite(total):
                raise TrainingDiverged(f"total loss became non-finite at epoch {epoch} step {step}")

            optimizer.zero_grad()
            total.backward()
            optimizer.step()

        def _mean(name):
            return term_sums[name] / term_counts[name] if name in term_sums else None

        pretext_losses = {}
        for t in tasks:
            kind = t.kind.value
            vals = [v for v in (_mean(f"pretext_{kind}"), _mean(f"target_pretext_{kind}")) if v is not None]
            if vals:
                pretext_losses[kind] = sum(vals) / len(vals)

        val_acc = evaluate_classifier(bundle, val_ds)
        target_acc = evaluate_classifier(bundle, eval_sets["target"]) if "target" in eval_sets else None

        pretext_eval_ds = eval_sets.get("target", val_ds)
        pretext_accs = {}
        for t in tasks:
            sub = _subsample(pretext_eval_ds, PRETEXT_EVAL_CAP, np.random.default_rng([config.seed, 71, epoch]))
            acc_rng = np.random.default_rng([config.seed, 173, epoch, len(pretext_accs)])
            pretext_accs[t.kind.value] = evaluate_pretext(bundle, sub, t.kind.value, acc_rng)

        if config.scenario == "pda":
            gamma = _estimate_gamma(bundle, target_dataset)

        history.append(
            EpochMetrics(
                epoch=epoch,
                lr=config.optimizer.lr * factor,
                lam=lam,
                object_loss=_mean("object_ce"),
                pretext_losses=pretext_losses,
                val_accuracy=val_acc,
                target_accuracy=target_acc,
                pretext_accuracies=pretext_accs,
                gamma=gamma.gamma.copy() if gamma is not None else None,
            )
        )

    return bundle, MetricsRecord(rows=history)


def _subsample(ds: DomainDataset, cap: int, rng: np.random.Generator) -> DomainDataset:
    if len(ds) <= cap:
        return ds
    idx = rng.permutation(len(ds))[:cap]
    return DomainDataset(
        samples=[ds.samples[int(i)] for i in idx], num_classes=ds.num_classes, domain_tag=ds.domain_tag
    )


def _forward_chunks(bundle: ModelBundle, images: np.ndarray, chunk: int = 256):
    outs = []
    with torch.no_grad():
        for start in range(0, len(images), chunk):
            feats = forward_features(bundle, images[start : start + chunk])
            outs.append(feats)
    return torch.cat(outs)


def _estimate_gamma(bundle: ModelBundle, target_dataset: DomainDataset) -> ClassWeights:
    images = np.stack([img for img, _ in target_dataset.samples])
    feats = _forward_chunks(bundle, images)
    with torch.no_grad():
        probs = torch.softmax(classify(bundle, feats), dim=1)
    return estimate_class_weights(probs)


def evaluate_classifier(checkpoint, dataset: DomainDataset) -> float:
    """Argmax accuracy of the object head; no augmentation or pretext transforms."""
    bundle = _bundle_from(checkpoint)
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    if not dataset.is_labeled:
        raise ValueError("evaluation needs a labeled dataset")
    images = np.stack([img for img, _ in dataset.samples])
    labels = np.array([lab for _, lab in dataset.samples])
    feats = _forward_chunks(bundle, images)
    with torch.no_grad():
        pred = classify(bundle, feats).argmax(dim=1).numpy()
    return float((pred == labels).mean())


def evaluate_pretext(checkpoint, dataset: DomainDataset, task, rng: np.random.Generator) -> float:
    """Accuracy of one pretext head on freshly transformed images.

    Every image receives a uniformly drawn nonzero pretext label; grayscale
    jitter and augmentation stay off so the measurement is repeatable given
    the rng.
    """
    bundle = _bundle_from(checkpoint)
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    kind = getattr(task, "kind", task)
    kind = getattr(kind, "value", kind)
    task_map = tasks_from_bundle(bundle)
    if kind not in task_map:
        raise ValueError(f"task {kind!r} not present in checkpoint; available: {list(task_map)}")
    ptask = task_map[kind]

    images = []
    labels = []
    for img, _ in dataset.samples:
        label = int(rng.integers(1, ptask.num_labels))
        sample = apply_pretext(img, ptask, label, rng=None)
        out = sample.image
        if out.shape != img.shape:
            out = resize_bilinear(out, img.shape[0], img.shape[1])
        images.append(out)
        labels.append(label)
    feats = _forward_chunks(bundle, np.stack(images))
    with torch.no_grad():
        pred = pretext_logits(bundle, feats, kind).argmax(dim=1).numpy()
    return float((pred == np.array(labels)).mean())


def model_select(
    grid: list[tuple[float, float]],
    config: TrainConfig,
    source_datasets: list[DomainDataset],
) -> tuple[float, float]:
    """Train once per (alpha, beta) grid point and pick the best source-val accuracy.

    Ties go to the smaller alpha, then the larger beta (closer to the plain
    supervised baseline). The selected model is not retrained on train+val.
    """
    if not grid:
        raise ValueError("empty model-selection grid")
    results = []
    for alpha, beta in grid:
        cfg = replace(
            config,
            beta=beta,
            weights=replace(
                config.weights,
                alpha_s={tc.kind: alpha for tc in config.tasks},
                alpha_t={tc.kind: alpha for tc in config.tasks},
            ),
        )
        _, metrics = train(cfg, source_datasets)
        results.append((metrics.rows[-1].val_accuracy, alpha, beta))
    results.sort(key=lambda r: (-r[0], r[1], -r[2]))
    _, alpha, beta = results[0]
    return alpha, beta


SWEEPABLE = ("alpha", "beta", "P", "grid_n", "alpha_t")


@dataclass
class SweepRow:
    param: str
    value: float
    mean_accuracy: float
    std_accuracy: float
    per_seed: list[float]


def _sweep_config(config: TrainConfig, param: str, value) -> TrainConfig:
    if param == "alpha":
        return replace(
            config,
            weights=replace(
                config.weights,
                alpha_s={tc.kind: float(value) for tc in config.tasks},
                alpha_t={tc.kind: float(value) for tc in config.tasks},
            ),
        )
    if param == "alpha_t":
        return replace(
            config,
            weights=replace(config.weights, alpha_t={tc.kind: float(value) for tc in config.tasks}),
        )
    if param == "beta":
        return replace(config, beta=float(value))
    if param == "P":
        tasks = [replace(tc, num_permutations=int(value)) if tc.kind == "jigsaw" else tc for tc in config.tasks]
        return replace(config, tasks=tasks)
    if param == "grid_n":
        tasks = [replace(tc, grid_n=int(value)) if tc.kind == "jigsaw" else tc for tc in config.tasks]
        return replace(config, tasks=tasks)
    raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEPABLE}")


def ablation_sweep(
    param: str,
    values,
    config: TrainConfig,
    source_datasets: list[DomainDataset],
    target_dataset: DomainDataset | None = None,
    eval_target: DomainDataset | None = None,
    seeds: tuple[int, ...] = (0, 1, 2),
) -> list[SweepRow]:
    """One full train/eval per (value, seed); accuracy is measured on eval_target
    when given, else on the source validation split."""
    if param not in SWEEPABLE:
        raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEPABLE}")
    rows = []
    for value in values:
        accs = []
        for seed in seeds:
            cfg = replace(_sweep_config(config, param, value), seed=seed)
            eval_map = {"target": eval_target} if eval_target is not None else {}
            bundle, metrics = train(cfg, source_datasets, target_dataset, eval_sets=eval_map)
            if eval_target is not None:
                accs.append(evaluate_classifier(bundle, eval_target))
            else:
                accs.append(metrics.rows[-1].val_accuracy)
        rows.append(
            SweepRow(
                param=param,
                value=float(value),
                mean_accuracy=float(np.mean(accs)),
                std_accuracy=float(np.std(accs)),
                per_seed=accs,
            )
        )
    return rows


def write_sweep(rows: list[SweepRow], path: str | Path) -> None:
    lines = ["param,value,mean_accuracy,std_accuracy,per_seed"]
    for r in rows:
        lines.append(
            f"{r.param},{r.value!r},{r.mean_accuracy!r},{r.std_accuracy!r},"
            + ";".join(repr(a) for a in r.per_seed)
        )
    Path(path).write_text("\n".join(lines) + "\n")


def cam_map(checkpoint, image: np.ndarray, class_index: int) -> np.ndarray:
    """Class activation map: head-weighted sum of the final spatial feature maps,
    min-max normalized and upsampled to the image size."""
    bundle = _bundle_from(checkpoint)
    backbone = bundle.backbone
    if not hasattr(backbone, "spatial_maps"):
        raise UnsupportedArchitecture(
            f"backbone {bundle.spec.backbone.kind!r} does not expose spatial feature maps; "
            "use the 'small_conv_gap' architecture"
        )
    if not 0 <= class_index < bundle.spec.num_classes:
        raise ValueError(f"class index {class_index} outside 0..{bundle.spec.num_classes - 1}")
    x = np.asarray(image)[None]
    with torch.no_grad():
        maps = backbone.spatial_maps(images_to_tensor(bundle, x))[0]  # (K, h, w)
        w = bundle.object_head.weight[class_index]  # (K,)
        heat = (w[:, None, None] * maps).sum(dim=0).numpy()
    lo, hi = float(heat.min()), float(heat.max())
    norm = np.zeros_like(heat) if hi == lo else (heat - lo) / (hi - lo)
    resized = resize_bilinear(norm[:, :, None].astype(np.float64), image.shape[0], image.shape[1])
    return resized[:, :, 0]
