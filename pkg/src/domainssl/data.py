"""Datasets, validation splitting, batch assembly, and a synthetic multi-domain generator.

A batch mixes ordered images (kept upright, carrying their class label and
pretext label 0 for every active task) with transformed images (rotated or
shuffled, carrying only a nonzero pretext label). The data-bias parameter
beta fixes the ordered fraction: round(beta * B) items, half-up.

The synthetic generator renders ten fixed glyph shapes under interchangeable
styles. Glyph geometry depends only on (seed, class, instance), never on the
style, so class identity is style-invariant by construction.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .transforms import PretextTask, SelfSupSample, apply_pretext, augment, resize_bilinear

SOURCE = "source"
TARGET = "target"

STYLE_NAMES = ("plain", "inverted", "colored", "textured", "sketch")


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass
class DomainDataset:
    """Images from one domain; either fully labeled or fully unlabeled."""

    samples: list[tuple[np.ndarray, int | None]]
    num_classes: int
    domain_tag: str | None = None

    def __post_init__(self):
        labels = [lab for _, lab in self.samples if lab is not None]
        if labels and len(labels) != len(self.samples):
            raise ValueError("dataset mixes labeled and unlabeled samples")
        for lab in labels:
            if not 0 <= lab < self.num_classes:
                raise ValueError(f"class label {lab} outside 0..{self.num_classes - 1}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def is_labeled(self) -> bool:
        return bool(self.samples) and self.samples[0][1] is not None

    def without_labels(self) -> "DomainDataset":
        return DomainDataset(
            samples=[(img, None) for img, _ in self.samples],
            num_classes=self.num_classes,
            domain_tag=self.domain_tag,
        )


def concat_datasets(datasets: list[DomainDataset]) -> DomainDataset:
    """Pool several domains; domain identity is dropped deliberately."""
    if not datasets:
        raise ValueError("no datasets to pool")
    num_classes = datasets[0].num_classes
    if any(ds.num_classes != num_classes for ds in datasets):
        raise ValueError("datasets disagree on num_classes")
    samples = [s for ds in datasets for s in ds.samples]
    return DomainDataset(samples=samples, num_classes=num_classes, domain_tag=None)


@dataclass(frozen=True)
class OrderedItem:
    """An augmented but untransformed image; pretext label 0 for every active task."""

    image: np.ndarray
    class_onehot: np.ndarray | None
    provenance: str


@dataclass(frozen=True)
class TransformedItem:
    sample: SelfSupSample
    provenance: str


@dataclass
class Batch:
    ordered: list[OrderedItem]
    transformed: list[TransformedItem]
    tasks: tuple[PretextTask, ...]

    @property
    def size(self) -> int:
        return len(self.ordered) + len(self.transformed)


def _onehot(label: int, num_classes: int) -> np.ndarray:
    v = np.zeros(num_classes, dtype=np.float64)
    v[label] = 1.0
    return v


def split_validation(ds: DomainDataset, fraction: float, seed: int) -> tuple[DomainDataset, DomainDataset]:
    """Deterministic stratified partition; per class round(fraction * count) half-up to val."""
    if not ds.is_labeled:
        raise ValueError("validation split needs a labeled dataset")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    by_class: dict[int, list[int]] = {}
    for idx, (_, lab) in enumerate(ds.samples):
        by_class.setdefault(lab, []).append(idx)
    for lab, idxs in by_class.items():
        if len(idxs) < 2:
            raise ValueError(f"class {lab} has {len(idxs)} sample(s); cannot stratify")
    rng = np.random.default_rng(seed)
    val_idx: list[int] = []
    train_idx: list[int] = []
    for lab in sorted(by_class):
        idxs = np.array(by_class[lab])
        rng.shuffle(idxs)
        n_val = round_half_up(fraction * len(idxs))
        val_idx.extend(int(i) for i in idxs[:n_val])
        train_idx.extend(int(i) for i in idxs[n_val:])
    train = DomainDataset([ds.samples[i] for i in sorted(train_idx)], ds.num_classes, ds.domain_tag)
    val = DomainDataset([ds.samples[i] for i in sorted(val_idx)], ds.num_classes, ds.domain_tag)
    return train, val


def make_batch(
    labeled_pool: DomainDataset,
    unlabeled_pool: DomainDataset | None,
    batch_size: int,
    beta: float,
    tasks: list[PretextTask] | tuple[PretextTask, ...],
    rng: np.random.Generator,
    provenance: str = SOURCE,
    grayscale_prob: float = 0.1,
) -> Batch:
    """Assemble one beta-biased batch.

    Ordered items come from the labeled pool and keep their class one-hot
    (absent for unlabeled data in that slot). Transformed items draw a task
    uniformly and a pretext label uniformly from the nonzero labels; when an
    unlabeled pool is given, each transformed item first picks one of the two
    pools with equal probability and the unlabeled picks carry provenance
    "target". All draws are without replacement within the batch.
    """
    tasks = tuple(tasks)
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if not tasks:
        raise ValueError("need at least one pretext task")
    if len(labeled_pool) == 0:
        raise ValueError("labeled pool is empty")
    if unlabeled_pool is not None and len(unlabeled_pool) == 0:
        raise ValueError("unlabeled pool is empty")

    n_ordered = round_half_up(beta * batch_size)
    n_transformed = batch_size - n_ordered
    if n_transformed > 0 and any(t.num_labels < 2 for t in tasks):
        raise ValueError("transform label space is empty for at least one task")

    lab_order = rng.permutation(len(labeled_pool))
    ordered_idx = lab_order[:n_ordered]
    if len(ordered_idx) < n_ordered:
        raise ValueError(f"labeled pool of {len(labeled_pool)} cannot fill {n_ordered} ordered items")

    if unlabeled_pool is None:
        pool_pick = np.zeros(n_transformed, dtype=np.int64)
    else:
        pool_pick = rng.integers(0, 2, size=n_transformed)
    n_from_lab = int((pool_pick == 0).sum())
    n_from_unlab = n_transformed - n_from_lab
    lab_extra = lab_order[n_ordered : n_ordered + n_from_lab]
    if len(lab_extra) < n_from_lab:
        raise ValueError("labeled pool too small for the requested batch")
    if n_from_unlab > 0:
        unlab_idx = rng.permutation(len(unlabeled_pool))[:n_from_unlab]
        if len(unlab_idx) < n_from_unlab:
            raise ValueError("unlabeled pool too small for the requested batch")

    ordered: list[OrderedItem] = []
    for i in ordered_idx:
        img, lab = labeled_pool.samples[int(i)]
        onehot = _onehot(lab, labeled_pool.num_classes) if lab is not None else None
        ordered.append(OrderedItem(image=augment(img, rng), class_onehot=onehot, provenance=provenance))

    transformed: list[TransformedItem] = []
    lab_iter, unlab_iter = iter(lab_extra), iter(unlab_idx) if n_from_unlab > 0 else iter(())
    for pick in pool_pick:
        if pick == 0:
            img, _ = labeled_pool.samples[int(next(lab_iter))]
            prov = provenance
        else:
            img, _ = unlabeled_pool.samples[int(next(unlab_iter))]
            prov = TARGET
        img = augment(img, rng)
        task = tasks[int(rng.integers(0, len(tasks)))]
        label = int(rng.integers(1, task.num_labels))
        sample = apply_pretext(img, task, label, rng, grayscale_prob=grayscale_prob)
        out = sample.image
        if out.shape != img.shape:
            # jigsaw recomposition center-crops to the divisible size; scale the
            # recomposed image back so every batch item shares one shape
            out = resize_bilinear(out, img.shape[0], img.shape[1])
            sample = SelfSupSample(image=out, pretext_label=sample.pretext_label, task=sample.task)
        transformed.append(TransformedItem(sample=sample, provenance=prov))

    return Batch(ordered=ordered, transformed=transformed, tasks=tasks)


def pda_filter(ds: DomainDataset, keep_classes: set[int]) -> DomainDataset:
    """Drop samples outside keep_classes; the label space itself is unchanged."""
    if not keep_classes:
        raise ValueError("keep_classes is empty")
    if not keep_classes <= set(range(ds.num_classes)):
        raise ValueError(f"keep_classes {sorted(keep_classes)} not within 0..{ds.num_classes - 1}")
    samples = [(img, lab) for img, lab in ds.samples if lab in keep_classes]
    return DomainDataset(samples=samples, num_classes=ds.num_classes, domain_tag=ds.domain_tag)


# ----------------------------------------------------------------------------
# Synthetic multi-domain glyphs
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 10
    per_domain_count: int = 500
    image_size: int = 32
    styles: tuple[str, ...] = ("plain", "inverted", "colored", "textured")


def _glyph_mask(class_id: int, size: int, geom_rng: np.random.Generator) -> np.ndarray:
    """Binary mask of one glyph instance. Geometry is style-independent.

    All ten shapes are asymmetric under 90/180/270-degree rotations so that
    orientation recognition is learnable on every class.
    """
    cx = size / 2 + geom_rng.uniform(-0.06, 0.06) * size
    cy = size / 2 + geom_rng.uniform(-0.06, 0.06) * size
    r = size / 2 * geom_rng.uniform(0.62, 0.80)
    t = geom_rng.uniform(0.20, 0.28)  # bar half-thickness in glyph units

    yy, xx = np.mgrid[0:size, 0:size]
    u = (xx - cx) / r          # right-positive
    v = (cy - yy) / r          # up-positive

    if class_id == 0:  # triangle, apex up
        m = (v >= -0.9) & (v <= 0.9) & (np.abs(u) <= 0.9 * (0.9 - v) / 1.8)
    elif class_id == 1:  # L
        m = ((u >= -0.9) & (u <= -0.9 + 2 * t) & (np.abs(v) <= 0.9)) | (
            (v >= -0.9) & (v <= -0.9 + 2 * t) & (np.abs(u) <= 0.9)
        )
    elif class_id == 2:  # T
        m = ((v >= 0.9 - 2 * t) & (v <= 0.9) & (np.abs(u) <= 0.9)) | (
            (np.abs(u) <= t) & (v >= -0.9) & (v <= 0.9)
        )
    elif class_id == 3:  # arrow up
        m = ((v >= 0.0) & (v <= 0.9) & (np.abs(u) <= 0.8 * (0.9 - v) / 0.9)) | (
            (np.abs(u) <= 0.8 * t) & (v >= -0.9) & (v <= 0.0)
        )
    elif class_id == 4:  # upper half-disk
        m = (u**2 + v**2 <= 0.85**2) & (v >= 0.0)
    elif class_id == 5:  # F
        m = (
            ((u >= -0.9) & (u <= -0.9 + 2 * t) & (np.abs(v) <= 0.9))
            | ((v >= 0.9 - 2 * t) & (v <= 0.9) & (u >= -0.9) & (u <= 0.7))
            | ((np.abs(v) <= t) & (u >= -0.9) & (u <= 0.4))
        )
    elif class_id == 6:  # filled terrace descending to the right
        step = np.where(u < -0.3, 0.9, np.where(u < 0.3, 0.3, -0.3))
        m = (np.abs(u) <= 0.9) & (v >= -0.9) & (v <= step)
    elif class_id == 7:  # ring with a gap opening right
        rad = np.sqrt(u**2 + v**2)
        gap = (u > 0) & (np.abs(np.arctan2(v, u)) <= 0.6)
        m = (rad >= 0.45) & (rad <= 0.9) & ~gap
    elif class_id == 8:  # plus with a corner dot
        m = (
            ((np.abs(u) <= t) & (np.abs(v) <= 0.9))
            | ((np.abs(v) <= t) & (np.abs(u) <= 0.9))
            | ((u + 0.65) ** 2 + (v - 0.65) ** 2 <= 0.22**2)
        )
    elif class_id == 9:  # diagonal stroke with a head at the top-right
        m = ((np.abs(v - u) <= 1.2 * t) & (np.abs(u) <= 0.85) & (np.abs(v) <= 0.85)) | (
            (u - 0.6) ** 2 + (v - 0.6) ** 2 <= 0.3**2
        )
    else:
        raise ValueError(f"no glyph defined for class {class_id}")
    return m


def _erode(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] &= mask[:-1, :]
    out[:-1, :] &= mask[1:, :]
    out[:, 1:] &= mask[:, :-1]
    out[:, :-1] &= mask[:, 1:]
    return out


def _render_style(mask: np.ndarray, style: str, style_rng: np.random.Generator) -> np.ndarray:
    size = mask.shape[0]
    m = mask[..., None].astype(np.float32)
    if style == "plain":
        img = np.repeat(m, 3, axis=2)
    elif style == "inverted":
        img = 1.0 - np.repeat(m, 3, axis=2)
    elif style == "colored":
        hue = style_rng.uniform(0.0, 1.0)
        sat = style_rng.uniform(0.55, 0.95)
        val = style_rng.uniform(0.35, 0.75)
        bg = np.array(colorsys.hsv_to_rgb(hue, sat, val), dtype=np.float32)
        img = m * 1.0 + (1.0 - m) * bg[None, None, :]
    elif style == "textured":
        coarse = style_rng.uniform(-0.45, 0.45, size=(6, 6, 3)).astype(np.float32)
        noise = resize_bilinear(coarse, size, size)
        img = np.clip(np.repeat(m, 3, axis=2) + noise, 0.0, 1.0)
    elif style == "sketch":
        outline = mask & ~_erode(_erode(mask))
        img = 1.0 - np.repeat(outline[..., None].astype(np.float32), 3, axis=2)
    else:
        raise ValueError(f"unknown style {style!r}; expected one of {STYLE_NAMES}")
    return img.astype(np.float32)


def synth_domains(spec: SynthSpec, seed: int) -> list[DomainDataset]:
    """Render one labeled DomainDataset per requested style, deterministic under seed."""
    if len(spec.styles) < 2:
        raise ValueError("need at least 2 styles")
    for style in spec.styles:
        if style not in STYLE_NAMES:
            raise ValueError(f"unknown style {style!r}; expected one of {STYLE_NAMES}")
    if not 2 <= spec.num_classes <= 10:
        raise ValueError(f"num_classes must be in 2..10, got {spec.num_classes}")

    datasets = []
    for style_idx, style in enumerate(spec.styles):
        samples: list[tuple[np.ndarray, int | None]] = []
        for i in range(spec.per_domain_count):
            class_id = i % spec.num_classes
            instance = i // spec.num_classes
            geom_rng = np.random.default_rng([seed, 7919, class_id, instance])
            style_rng = np.random.default_rng([seed, 104729, STYLE_NAMES.index(style), class_id, instance])
            mask = _glyph_mask(class_id, spec.image_size, geom_rng)
            samples.append((_render_style(mask, style, style_rng), class_id))
        datasets.append(DomainDataset(samples=samples, num_classes=spec.num_classes, domain_tag=style))
    return datasets


# ----------------------------------------------------------------------------
# On-disk dataset directories (manifest of "path,class,domain" lines)
# ----------------------------------------------------------------------------

def save_domains(datasets: list[DomainDataset], out_dir: str | Path) -> Path:
    """Write per-domain PNGs plus a manifest; returns the manifest path."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for d_idx, ds in enumerate(datasets):
        tag = ds.domain_tag or f"domain{d_idx}"
        (out_dir / tag).mkdir(exist_ok=True)
        for i, (img, lab) in enumerate(ds.samples):
            rel = f"{tag}/{i:05d}.png"
            arr = np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)
            if arr.shape[2] == 1:
                arr = arr[:, :, 0]
            Image.fromarray(arr).save(out_dir / rel)
            lines.append(f"{rel},{lab if lab is not None else '-'},{tag}")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_domains(data_dir: str | Path, num_classes: int | None = None) -> list[DomainDataset]:
    """Read a dataset directory written by save_domains, grouped by domain tag."""
    from PIL import Image

    data_dir = Path(data_dir)
    manifest = data_dir / "manifest.txt"
    if not manifest.exists():
        raise FormatError(f"{manifest}: manifest not found")
    grouped: dict[str, list[tuple[np.ndarray, int | None]]] = {}
    order: list[str] = []
    labels_seen: list[int] = []
    for k, line in enumerate(manifest.read_text().splitlines()):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"{manifest}: line {k}: expected 'path,class,domain'")
        rel, lab_s, tag = parts
        img_path = data_dir / rel
        if not img_path.exists():
            raise FormatError(f"{manifest}: line {k}: missing image {rel}")
        arr = np.asarray(Image.open(img_path), dtype=np.float32) / 255.0
        if arr.ndim == 2:
            arr = arr[:, :, None]
        lab = None if lab_s == "-" else int(lab_s)
        if lab is not None:
            labels_seen.append(lab)
        if tag not in grouped:
            grouped[tag] = []
            order.append(tag)
        grouped[tag].append((arr, lab))
    if num_classes is None:
        num_classes = (max(labels_seen) + 1) if labels_seen else 1
    return [DomainDataset(samples=grouped[tag], num_classes=num_classes, domain_tag=tag) for tag in order]
