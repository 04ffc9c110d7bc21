"""Seeded synthetic categorical datasets with plantable associations."""

from __future__ import annotations

import numpy as np

from .tabular import Dataset


def generate_synthetic(
    columns: int, rows: int, categories_per_column: int, density: float, seed: int
) -> Dataset:
    """Dataset where each cell copies its column's pattern category with
    probability `density` and otherwise draws uniformly over all categories.

    Higher density plants stronger cross-column associations (all pattern
    categories co-occur). Deterministic per seed.
    """
    if columns < 1 or rows < 1 or categories_per_column < 1:
        raise ValueError("columns, rows and categories_per_column must be >= 1")
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    rng = np.random.default_rng(seed)
    k = categories_per_column
    pattern = rng.integers(0, k, size=columns)
    copy_pattern = rng.random((rows, columns)) < density
    uniform = rng.integers(0, k, size=(rows, columns))
    chosen = np.where(copy_pattern, pattern[None, :], uniform)
    labels = tuple(f"v{j}" for j in range(k))
    return Dataset(
        columns=tuple(f"col{j}" for j in range(columns)),
        categories=tuple(labels for _ in range(columns)),
        rows=tuple(tuple(labels[c] for c in row) for row in chosen),
    )
