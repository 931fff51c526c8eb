import itertools
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

HittingSet = Tuple[int, ...]


@dataclass(frozen=True)
class SetSystem:
    """A finite family of nonempty sets over a common ground set."""

    sets: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        if any(not s for s in self.sets):
            raise ValueError("a set system may not contain an empty set")

    @classmethod
    def of(cls, sets: Iterable[Iterable[int]]) -> "SetSystem":
        return cls(tuple(frozenset(s) for s in sets))

    @property
    def ground(self) -> FrozenSet[int]:
        return frozenset().union(*self.sets)

    @property
    def l(self) -> int:
        return max((len(s) for s in self.sets), default=0)

    def is_hit_by(self, candidate: Iterable[int]) -> bool:
        chosen = set(candidate)
        return all(not chosen.isdisjoint(s) for s in self.sets)


def _can_hit(sets: Sequence[FrozenSet[int]], budget: int) -> bool:
    if not sets:
        return True
    if budget == 0:
        return False
    for element in sorted(sets[0]):
        rest = [s for s in sets if element not in s]
        if _can_hit(rest, budget - 1):
            return True
    return False


def _branch(sets: Sequence[FrozenSet[int]], budget: int) -> Iterator[FrozenSet[int]]:
    # Every hitting set meets the first set in some element; branch on it.
    if not sets:
        yield frozenset()
        return
    if budget == 0:
        return
    for element in sorted(sets[0]):
        rest = [s for s in sets if element not in s]
        for tail in _branch(rest, budget - 1):
            yield tail | {element}


def min_hitting_set_size(system: SetSystem, cap: int) -> Optional[int]:
    """Exact minimum hitting set size, or None when it exceeds `cap`."""
    sets = list(system.sets)
    for size in range(cap + 1):
        if _can_hit(sets, size):
            return size
    return None


def enumerate_min_hitting_sets(system: SetSystem, cap: int) -> Optional[List[HittingSet]]:
    """
    All distinct minimum hitting sets as sorted tuples, in lexicographic
    order, or None when the minimum size exceeds `cap`.
    """
    size = min_hitting_set_size(system, cap)
    if size is None:
        return None
    found = {tuple(sorted(h)) for h in _branch(list(system.sets), size)}
    if system.sets:
        assert len(found) <= system.l**size, "more minimum hitting sets than l^s"
    return sorted(found)


def min_hitting_set(system: SetSystem, cap: int) -> Optional[HittingSet]:
    """Lexicographically smallest minimum hitting set."""
    options = enumerate_min_hitting_sets(system, cap)
    return options[0] if options is not None else None


def sample_min_hitting_set(
    system: SetSystem, cap: int, rng: np.random.Generator
) -> Optional[HittingSet]:
    """A minimum hitting set drawn uniformly at random."""
    options = enumerate_min_hitting_sets(system, cap)
    if options is None:
        return None
    return options[int(rng.integers(len(options)))]


def brute_force_min_hitting_sets(system: SetSystem, cap: int) -> Optional[List[HittingSet]]:
    """Subset-enumeration oracle for enumerate_min_hitting_sets."""
    ground = sorted(system.ground)
    for size in range(cap + 1):
        hits = [c for c in itertools.combinations(ground, size) if system.is_hit_by(c)]
        if hits:
            return hits
    return None
