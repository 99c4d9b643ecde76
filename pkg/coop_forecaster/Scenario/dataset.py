import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from coop_forecaster.Numerics.params import Rng
from coop_forecaster.Scenario.types import Scenario
from coop_forecaster.Utils.errors import SplitError


def partition_sizes(total: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder rounding: floors first, leftovers to the largest remainders (lower index on ties)."""
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must be non-negative and sum to 1, got {list(fractions)}")
    exact = [total * f for f in fractions]
    sizes = [math.floor(value + 1e-9) for value in exact]
    remainders = [value - size for value, size in zip(exact, sizes)]
    for index in sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))[:total - sum(sizes)]:
        sizes[index] += 1
    for index, (fraction, size) in enumerate(zip(fractions, sizes)):
        if fraction > 0 and size == 0:
            raise SplitError(f"partition {index} (fraction {fraction}) would be empty with {total} scenarios")
    return sizes


def split_dataset(scenarios: Sequence[Scenario], fractions: Sequence[float], seed: int) -> list[list[Scenario]]:
    sizes = partition_sizes(len(scenarios), fractions)
    order = Rng(seed).permutation(len(scenarios))
    partitions, cursor = [], 0
    for size in sizes:
        partitions.append([scenarios[i] for i in sorted(order[cursor:cursor + size])])
        cursor += size
    return partitions


def take_fraction(scenarios: Sequence[Scenario], fraction: float, seed: int) -> list[Scenario]:
    """ceil(fraction * N) scenarios drawn by a seeded permutation, original order kept."""
    if not 0.0 < fraction <= 1.0:
        raise SplitError(f"fraction must lie in (0, 1], got {fraction}")
    count = math.ceil(fraction * len(scenarios) - 1e-9)
    if fraction == 1.0:
        return list(scenarios)
    chosen = sorted(Rng(seed).permutation(len(scenarios))[:count])
    return [scenarios[i] for i in chosen]


def mask_views(scenario: Scenario, kinds: Sequence[str]) -> Scenario:
    """Copy of the scenario whose views of the listed kinds carry no tracks."""
    if not kinds:
        return scenario
    views = tuple(replace(view, tracks=()) if view.kind in kinds and view.kind != "ego" else view
                  for view in scenario.views)
    return replace(scenario, views=views)


def observed_fraction(scenario: Scenario) -> float:
    """Share of the T frames in which the target is observed by the ego view."""
    return float(np.mean(scenario.track(scenario.target).observed))
