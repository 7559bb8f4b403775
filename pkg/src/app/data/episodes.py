from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.app.core.errors import EpisodeError
from src.app.data.index import DatasetIndex, ExampleRef


@dataclass(frozen=True)
class Episode:
    support: tuple[tuple[ExampleRef, str], ...]
    query: tuple[tuple[ExampleRef, str], ...]
    class_order: tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.class_order)

    @property
    def support_labels(self) -> list[str]:
        return [label for _, label in self.support]

    @property
    def query_labels(self) -> list[str]:
        return [label for _, label in self.query]

    @property
    def refs(self) -> list[ExampleRef]:
        """Support then query references: the order they are encoded in one batch."""
        return [ref for ref, _ in self.support] + [ref for ref, _ in self.query]


def check_episode_feasible(index: DatasetIndex, split_part: Sequence[str], n: int, k: int, q: int) -> None:
    if n < 1 or k < 1 or q < 1:
        raise EpisodeError(f"n, k and q must be >= 1, got n={n} k={k} q={q}")
    if k < 2:
        raise EpisodeError(f"k-way episodes need k >= 2, got {k}")
    if len(split_part) < k:
        raise EpisodeError(f"k={k} is too large: split part has only {len(split_part)} classes")
    for label in split_part:
        if index.count(label) < n + q:
            raise EpisodeError(f"class {label!r} has {index.count(label)} examples, needs n+q={n + q}")


def sample_episode(
        index: DatasetIndex,
        split_part: Sequence[str],
        n: int,
        k: int,
        q: int,
        rng: np.random.Generator,
) -> Episode:
    """
    Draw k classes without replacement, then n + q examples per class without
    replacement: the first n go to the support set, the next q to the query set.
    """
    check_episode_feasible(index, split_part, n, k, q)

    candidates = sorted(split_part)
    chosen = [candidates[position] for position in rng.choice(len(candidates), size=k, replace=False)]

    support: list[tuple[ExampleRef, str]] = []
    query: list[tuple[ExampleRef, str]] = []
    for label in chosen:
        examples = index.classes[label]
        picks = rng.choice(len(examples), size=n + q, replace=False)
        support.extend((examples[pick], label) for pick in picks[:n])
        query.extend((examples[pick], label) for pick in picks[n:])

    return Episode(support=tuple(support), query=tuple(query), class_order=tuple(chosen))
