import math

import numpy as np

from coop_forecaster.Utils.errors import ContractError


def hungarian_min(cost: np.ndarray) -> list[int]:
    """
    Shortest-augmenting-path Hungarian method with row/column potentials, O(n^3).

    `cost` must be square; returns assignment[row] = column. Among equal-cost
    choices the column scan keeps the first (lowest) index through strict
    comparisons, so results are deterministic.
    """
    n = cost.shape[0]
    u = [0.0] * (n + 1)  # row potentials
    v = [0.0] * (n + 1)  # column potentials
    owner = [0] * (n + 1)  # owner[j] = row assigned to column j, 1-based
    way = [0] * (n + 1)
    rows = cost.tolist()

    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        min_slack = [math.inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            delta = math.inf
            j1 = 0
            row = rows[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                slack = row[j - 1] - u[i0] - v[j]
                if slack < min_slack[j]:
                    min_slack[j] = slack
                    way[j] = j0
                if min_slack[j] < delta:
                    delta = min_slack[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    min_slack[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while True:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
            if j0 == 0:
                break

    assignment = [-1] * n
    for j in range(1, n + 1):
        assignment[owner[j] - 1] = j - 1
    return assignment


def hungarian_max(weights) -> list[tuple[int, int]]:
    """Maximum-weight one-to-one assignment of size min(n, m), as sorted (row, col) pairs."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        return []
    if weights.ndim != 2:
        raise ContractError(f"weights must be a matrix, got shape {weights.shape}")
    if not np.isfinite(weights).all():
        raise ContractError("weights must be finite")
    n_rows, n_cols = weights.shape
    size = max(n_rows, n_cols)
    # Dummy rows/columns carry zero weight and are dropped from the result.
    cost = np.zeros((size, size))
    cost[:n_rows, :n_cols] = -weights
    assignment = hungarian_min(cost)
    return sorted((row, col) for row, col in enumerate(assignment) if row < n_rows and col < n_cols)


def assignment_weight(weights, pairs: list[tuple[int, int]]) -> float:
    weights = np.asarray(weights, dtype=np.float64)
    return float(sum(weights[row, col] for row, col in pairs))
