"""Set-partition combinatorics for configuration-space coverings.

Partitions are stored with blocks sorted by minimum element.  Enumeration
walks restricted-growth strings in lexicographic order so fixtures are
reproducible.  The F-sampler draws points that are collapsed within blocks
and separated across blocks, for oracle-side tests.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Iterator


@dataclass(frozen=True)
class Partition:
    blocks: tuple  # tuple[frozenset[int], ...] sorted by min element

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            if not b:
                raise ValueError("empty partition block")
            if seen & b:
                raise ValueError("partition blocks overlap")
            seen |= b
        expected = tuple(sorted(self.blocks, key=min))
        if self.blocks != expected:
            raise ValueError("blocks must be sorted by minimum element")

    @staticmethod
    def of(blocks: Iterable[Iterable[int]]) -> "Partition":
        return Partition(tuple(sorted((frozenset(b) for b in blocks), key=min)))

    @property
    def ground_set(self) -> frozenset:
        return frozenset().union(*self.blocks)

    def is_proper(self) -> bool:
        return len(self.blocks) > 1

    def is_discrete(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)

    def block_of(self, j: int) -> frozenset:
        for b in self.blocks:
            if j in b:
                return b
        raise KeyError(f"{j} not in the ground set")

    def __str__(self) -> str:
        return "{" + "|".join(",".join(str(j) for j in sorted(b)) for b in self.blocks) + "}"

    @staticmethod
    def parse(text: str) -> "Partition":
        text = text.strip()
        if not (text.startswith("{") and text.endswith("}")):
            raise ValueError(f"partition text must look like {{1,3|2}}: {text!r}")
        blocks = [
            [int(x) for x in chunk.split(",") if x.strip()]
            for chunk in text[1:-1].split("|")
        ]
        return Partition.of(blocks)

    def __iter__(self) -> Iterator[frozenset]:
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)


def enumerate_partitions(S: Iterable[int], proper_only: bool = False) -> list:
    """All partitions of S via restricted-growth strings, lex order."""
    elems = sorted(set(S))
    if not elems:
        raise ValueError("cannot partition the empty set")
    n = len(elems)
    out: list[Partition] = []

    def walk(i: int, rgs: list[int], nblocks: int):
        if i == n:
            blocks: list[list[int]] = [[] for _ in range(nblocks)]
            for j, b in enumerate(rgs):
                blocks[b].append(elems[j])
            part = Partition.of(blocks)
            if not (proper_only and not part.is_proper()):
                out.append(part)
            return
        for b in range(nblocks + 1):
            rgs.append(b)
            walk(i + 1, rgs, max(nblocks, b + 1))
            rgs.pop()

    walk(0, [], 0)
    return out


def quotient(S: Iterable[int], part: Partition) -> frozenset:
    """One representative per block: the maximum element."""
    S = frozenset(S)
    if part.ground_set != S:
        raise ValueError("partition does not cover the given set")
    return frozenset(max(b) for b in part.blocks)


def related(j: int, k: int, part: Partition) -> bool:
    """True iff j and k lie in the same block."""
    bj = part.block_of(j)
    if k not in part.ground_set:
        raise KeyError(f"{k} not in the ground set")
    return k in bj


def sample_config(
    part: Partition,
    dim: int,
    rng: random.Random,
    eps: float = 0.0,
    spread: float = 3.0,
) -> dict:
    """Point of the partition's configuration stratum: j -> coordinate tuple.

    Blocks are collapsed to within eps of a common center; distinct blocks
    are separated by at least 1.
    """
    centers: list[tuple] = []
    out: dict[int, tuple] = {}
    for b in part.blocks:
        while True:
            c = tuple(rng.uniform(-spread, spread) for _ in range(dim))
            if all(
                sum((a - d) ** 2 for a, d in zip(c, c2)) >= (1.0 + eps) ** 2
                for c2 in centers
            ):
                break
        centers.append(c)
        for j in sorted(b):
            jitter = tuple(rng.uniform(-eps, eps) for _ in range(dim)) if eps else (0.0,) * dim
            pt = tuple(a + d for a, d in zip(c, jitter))
            out[j] = pt
    return out
