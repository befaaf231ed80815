"""Pretext-labeled image variants: 90-degree rotations, jigsaw tile shuffles, augmentation.

Images are float arrays of shape (H, W, C) with C in {1, 3} and values in
[0, 1]. All randomness comes through an explicit numpy Generator passed by the
caller; nothing here touches global random state.

Conventions fixed here and relied on by tests:
  * rotations are counterclockwise, label k means 90*k degrees;
  * jigsaw permutations map destination cell i to source tile mapping[i];
  * images whose sides are not divisible by the grid are center-cropped first.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .permutations import Permutation, PermutationSet

ROTATION_CLASSES = 4
GRAYSCALE_TILE_PROB = 0.1  # chance of converting a jigsaw tile to grayscale


class TaskKind(str, Enum):
    ROTATION = "rotation"
    JIGSAW = "jigsaw"


@dataclass(frozen=True)
class PretextTask:
    """A pretext label space: 4 orientations, or the P permutations of a tile grid."""

    kind: TaskKind
    grid_n: int = 3
    permutations: PermutationSet | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if self.kind is TaskKind.JIGSAW:
            if self.permutations is None:
                raise ValueError("jigsaw task needs a PermutationSet")
            if self.grid_n < 2:
                raise ValueError(f"grid_n must be >= 2, got {self.grid_n}")
            if self.permutations.n_tiles != self.grid_n**2:
                raise ValueError(
                    f"permutation set covers {self.permutations.n_tiles} tiles, "
                    f"grid {self.grid_n}x{self.grid_n} needs {self.grid_n ** 2}"
                )

    @property
    def num_labels(self) -> int:
        if self.kind is TaskKind.ROTATION:
            return ROTATION_CLASSES
        return len(self.permutations)


@dataclass(frozen=True)
class SelfSupSample:
    """A transformed image together with its pretext label."""

    image: np.ndarray
    pretext_label: int
    task: TaskKind

    def __post_init__(self):
        if self.pretext_label < 0:
            raise ValueError(f"negative pretext label {self.pretext_label}")


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate the (H, W, C) float-in-[0,1] image contract."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, C) image with C in {{1, 3}}, got shape {img.shape}")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values outside [0, 1]")
    return img


def rotate(img: np.ndarray, k: int) -> np.ndarray:
    """Rotate counterclockwise by 90*k degrees; k=0 returns the input unchanged."""
    if k not in (0, 1, 2, 3):
        raise ValueError(f"rotation label must be in 0..3, got {k}")
    if k == 0:
        return img
    return np.ascontiguousarray(np.rot90(img, k, axes=(0, 1)))


def decompose_grid(img: np.ndarray, grid_n: int) -> list[np.ndarray]:
    """Center-crop to divisible size, then cut into grid_n**2 row-major tiles (views)."""
    if grid_n < 2:
        raise ValueError(f"grid_n must be >= 2, got {grid_n}")
    h, w = img.shape[:2]
    if h < grid_n or w < grid_n:
        raise ValueError(f"image {h}x{w} too small for a {grid_n}x{grid_n} grid")
    ch, cw = h - h % grid_n, w - w % grid_n
    top, left = (h - ch) // 2, (w - cw) // 2
    cropped = img[top : top + ch, left : left + cw]
    th, tw = ch // grid_n, cw // grid_n
    tiles = []
    for r in range(grid_n):
        for c in range(grid_n):
            tiles.append(cropped[r * th : (r + 1) * th, c * tw : (c + 1) * tw])
    return tiles


def reassemble(tiles: list[np.ndarray], perm: Permutation) -> np.ndarray:
    """Place tiles[perm.mapping[i]] at row-major cell i of the output grid.

    The grid is square when len(tiles) is a perfect square, else a single row
    (handy for 1xN test fixtures).
    """
    if len(tiles) != perm.n_tiles:
        raise ValueError(f"{len(tiles)} tiles but permutation covers {perm.n_tiles}")
    shape = tiles[0].shape
    if any(t.shape != shape for t in tiles):
        raise ValueError("tiles differ in shape")
    side = int(round(len(tiles) ** 0.5))
    rows, cols = (side, side) if side * side == len(tiles) else (1, len(tiles))
    th, tw = shape[0], shape[1]
    out = np.empty((rows * th, cols * tw, shape[2]), dtype=tiles[0].dtype)
    for i, src in enumerate(perm.mapping):
        r, c = divmod(i, cols)
        out[r * th : (r + 1) * th, c * tw : (c + 1) * tw] = tiles[src]
    return out


def apply_pretext(
    img: np.ndarray,
    task: PretextTask,
    label: int,
    rng: np.random.Generator | None = None,
    grayscale_prob: float = GRAYSCALE_TILE_PROB,
) -> SelfSupSample:
    """Produce the pretext-labeled variant of an image.

    Rotation: rotate by the label. Jigsaw: decompose, convert each tile to
    grayscale with probability ``grayscale_prob`` (skipped when rng is None),
    then reassemble under the label's permutation.
    """
    if not 0 <= label < task.num_labels:
        raise ValueError(f"label {label} outside 0..{task.num_labels - 1} for task {task.kind.value}")
    if task.kind is TaskKind.ROTATION:
        return SelfSupSample(image=rotate(img, label), pretext_label=label, task=task.kind)

    tiles = decompose_grid(img, task.grid_n)
    if rng is not None and grayscale_prob > 0.0:
        draws = rng.random(len(tiles))
        tiles = [
            np.repeat(t.mean(axis=2, keepdims=True), t.shape[2], axis=2) if d < grayscale_prob else t
            for t, d in zip(tiles, draws)
        ]
    image = reassemble(tiles, task.permutations[label])
    return SelfSupSample(image=image, pretext_label=label, task=task.kind)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers; exact identity at equal sizes.

    Uses the incremental form a + w*(b - a) so constant images come back
    bit-exact.
    """
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.int64)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]

    a = img[np.ix_(y0, x0)]
    b = img[np.ix_(y0, x1)]
    c = img[np.ix_(y1, x0)]
    d = img[np.ix_(y1, x1)]
    top = a + wx * (b - a)
    bot = c + wx * (d - c)
    out = top + wy * (bot - top)
    return np.clip(out, 0.0, 1.0).astype(img.dtype)


def augment(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random crop retaining 80-100% of the area, resize back, then coin-flip mirror.

    Draw order (area fraction, top, left, flip) is fixed so seeded streams
    reproduce exactly.
    """
    h, w = img.shape[:2]
    frac = rng.uniform(0.8, 1.0)
    scale = float(np.sqrt(frac))
    ch = min(h, max(1, int(np.floor(h * scale + 0.5))))
    cw = min(w, max(1, int(np.floor(w * scale + 0.5))))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    out = resize_bilinear(img[top : top + ch, left : left + cw], h, w)
    if rng.random() < 0.5:
        out = out[:, ::-1, :].copy()
    return out
