"""Jigsaw label space: tile permutations selected greedily for maximal mutual Hamming distance.

The label space of the jigsaw task is an ordered set of P tile permutations.
Index 0 is always the identity ordering, so an untouched image is itself a
valid (label-0) jigsaw sample. The remaining P-1 entries are picked greedily:
each step appends the candidate whose minimum Hamming distance to everything
already selected is largest, breaking ties by lexicographically smallest
mapping so that generation is fully deterministic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

# Above this many total permutations the candidate pool switches from full
# enumeration to a seeded uniform sample of the same size. 9! = 362880 still
# enumerates fully.
FULL_ENUMERATION_LIMIT = 500_000


@dataclass(frozen=True)
class Permutation:
    """A bijection on {0..n_tiles-1}; ``mapping[i]`` is the source tile placed at cell i."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(v) for v in self.mapping)
        object.__setattr__(self, "mapping", mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"not a permutation of 0..{len(mapping) - 1}: {mapping}")

    @property
    def n_tiles(self) -> int:
        return len(self.mapping)

    @staticmethod
    def identity(n_tiles: int) -> "Permutation":
        return Permutation(tuple(range(n_tiles)))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n_tiles
        for dst, src in enumerate(self.mapping):
            inv[src] = dst
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(i == v for i, v in enumerate(self.mapping))


@dataclass(frozen=True)
class PermutationSet:
    """Ordered jigsaw label space: ``perms[0]`` is the identity, all entries distinct."""

    n_tiles: int
    perms: tuple[Permutation, ...]

    def __post_init__(self):
        perms = tuple(self.perms)
        object.__setattr__(self, "perms", perms)
        if not perms:
            raise ValueError("permutation set is empty")
        for p in perms:
            if p.n_tiles != self.n_tiles:
                raise ValueError(f"permutation {p.mapping} has {p.n_tiles} tiles, expected {self.n_tiles}")
        if not perms[0].is_identity():
            raise ValueError("first permutation must be the identity")
        if len({p.mapping for p in perms}) != len(perms):
            raise ValueError("permutations are not pairwise distinct")

    def __len__(self) -> int:
        return len(self.perms)

    def __getitem__(self, idx: int) -> Permutation:
        return self.perms[idx]

    def __iter__(self):
        return iter(self.perms)


def hamming_distance(a: Permutation, b: Permutation) -> int:
    """Number of cells where the two orderings disagree."""
    if a.n_tiles != b.n_tiles:
        raise ValueError(f"length mismatch: {a.n_tiles} vs {b.n_tiles}")
    return sum(x != y for x, y in zip(a.mapping, b.mapping))


def _full_pool(n_tiles: int) -> np.ndarray:
    # itertools.permutations enumerates in lexicographic order, which is what
    # the first-occurrence argmax tie-break below relies on.
    return np.array(list(itertools.permutations(range(n_tiles))), dtype=np.uint8)


def _sampled_pool(n_tiles: int, size: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rows: np.ndarray | None = None
    while rows is None or len(rows) < size:
        batch = np.tile(np.arange(n_tiles, dtype=np.uint8), (size, 1))
        batch = rng.permuted(batch, axis=1)
        rows = batch if rows is None else np.concatenate([rows, batch])
        rows = np.unique(rows, axis=0)
    # np.unique sorts rows lexicographically; truncation keeps the result
    # deterministic for a given seed.
    return rows[:size]


def generate_permutation_set(n_tiles: int, count: int, seed: int = 0) -> PermutationSet:
    """Greedy max-min Hamming selection of ``count`` permutations, identity first.

    The candidate pool is the full n_tiles! enumeration when that fits under
    ``FULL_ENUMERATION_LIMIT``, otherwise a seeded uniform sample of that many
    distinct permutations. Ties on the max-min criterion go to the
    lexicographically smallest mapping.
    """
    if n_tiles < 2:
        raise ValueError(f"n_tiles must be >= 2, got {n_tiles}")
    total = math.factorial(n_tiles)
    if count > total:
        raise ValueError(f"infeasible: requested {count} permutations but only {total} exist for {n_tiles} tiles")
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")

    if total <= FULL_ENUMERATION_LIMIT:
        pool = _full_pool(n_tiles)
    else:
        pool = _sampled_pool(n_tiles, FULL_ENUMERATION_LIMIT, seed)

    identity = np.arange(n_tiles, dtype=np.uint8)
    chosen = [identity]
    # Minimum distance from each candidate to the chosen set, updated
    # incrementally as the set grows. Selected rows drop to 0 and are never
    # picked again (distinct permutations are always at distance >= 2).
    min_dist = (pool != identity[None, :]).sum(axis=1)
    while len(chosen) < count:
        pick = int(np.argmax(min_dist))  # first occurrence = lexicographically smallest
        chosen.append(pool[pick].copy())
        min_dist = np.minimum(min_dist, (pool != pool[pick][None, :]).sum(axis=1))

    perms = tuple(Permutation(tuple(int(v) for v in row)) for row in chosen)
    return PermutationSet(n_tiles=n_tiles, perms=perms)


def min_pairwise_distance(pset: PermutationSet) -> int:
    """Minimum Hamming distance over all unordered pairs in the set."""
    if len(pset) < 2:
        raise ValueError("need at least 2 permutations")
    arr = np.array([p.mapping for p in pset], dtype=np.int64)
    best = pset.n_tiles
    for i in range(len(arr) - 1):
        d = (arr[i + 1 :] != arr[i][None, :]).sum(axis=1).min()
        best = min(best, int(d))
    return best


def save_set(pset: PermutationSet, path: str | Path) -> None:
    """Write one comma-separated permutation per line; line 0 is the identity."""
    lines = [",".join(str(v) for v in p.mapping) for p in pset]
    Path(path).write_text("\n".join(lines) + "\n")


def load_set(path: str | Path) -> PermutationSet:
    """Parse a permutation-set file, naming the offending line on any violation."""
    text = Path(path).read_text()
    raw_lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not raw_lines:
        raise FormatError(f"{path}: empty permutation file")

    perms: list[Permutation] = []
    n_tiles: int | None = None
    seen: set[tuple[int, ...]] = set()
    for k, line in enumerate(raw_lines):
        try:
            values = tuple(int(tok) for tok in line.split(","))
        except ValueError as exc:
            raise FormatError(f"{path}: line {k}: not a comma-separated integer row") from exc
        if n_tiles is None:
            n_tiles = len(values)
        elif len(values) != n_tiles:
            raise FormatError(f"{path}: line {k}: expected {n_tiles} entries, got {len(values)}")
        try:
            perm = Permutation(values)
        except ValueError as exc:
            raise FormatError(f"{path}: line {k}: {exc}") from exc
        if k == 0 and not perm.is_identity():
            raise FormatError(f"{path}: line 0: first permutation must be the identity")
        if perm.mapping in seen:
            raise FormatError(f"{path}: line {k}: duplicate permutation")
        seen.add(perm.mapping)
        perms.append(perm)

    return PermutationSet(n_tiles=n_tiles, perms=tuple(perms))
