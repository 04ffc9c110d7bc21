"""Rule extraction from a trained reconstructor via probe vectors.

A probe marks a candidate antecedent as one-hot and leaves every other column
at its uniform distribution. The candidate passes when the reconstruction
keeps each marked item's probability at tau_a or above; consequents are the
non-antecedent columns whose reconstructed argmax reaches tau_c.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .miners import Rule
from .tabular import Item, OneHotSchema

Reconstructor = Callable[[np.ndarray], np.ndarray]
"""Maps a (B, d') batch of probe vectors to (B, d') per-column distributions."""


@dataclass(frozen=True)
class ExtractionConfig:
    """Extraction thresholds: antecedent cap and the two similarity cutoffs."""

    max_antecedents: int = 2
    tau_a: float = 0.5
    tau_c: float = 0.8
    item_constraints: frozenset[Item] | None = None

    def __post_init__(self) -> None:
        if self.max_antecedents < 1:
            raise ValueError("max_antecedents must be >= 1")
        for name, tau in (("tau_a", self.tau_a), ("tau_c", self.tau_c)):
            if not 0.0 < tau <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {tau}")
        if self.tau_c < self.tau_a:
            warnings.warn(
                f"tau_c={self.tau_c} below tau_a={self.tau_a}; consequent test is "
                "weaker than the antecedent test",
                stacklevel=2,
            )


def build_test_vector(schema: OneHotSchema, antecedent: Iterable[Item]) -> np.ndarray:
    """Probe vector: one-hot antecedent columns, uniform 1/k everywhere else."""
    vec = _uniform_vector(schema)
    seen_columns: set[str] = set()
    for item in antecedent:
        if item not in schema.feature_index:
            raise ValueError(f"{item} is not a feature of this schema")
        if item.column in seen_columns:
            raise ValueError(f"two antecedent items share column {item.column!r}")
        seen_columns.add(item.column)
        start, stop = schema.span_of(item.column)
        vec[start:stop] = 0.0
        vec[schema.feature_index[item]] = 1.0
    return vec


def _uniform_vector(schema: OneHotSchema) -> np.ndarray:
    vec = np.empty(schema.total_features, dtype=np.float64)
    for start, stop in schema.column_spans:
        vec[start:stop] = 1.0 / (stop - start)
    return vec


class _Prober:
    """Chunked probing plus vectorized threshold tests over one schema."""

    def __init__(self, reconstruct: Reconstructor, schema: OneHotSchema, chunk_size: int):
        self.reconstruct = reconstruct
        self.schema = schema
        self.chunk_size = chunk_size
        self.base = _uniform_vector(schema)
        self.span_starts = np.array([s for s, _ in schema.column_spans], dtype=np.intp)
        self.spans = schema.column_spans
        sizes = [e - s for s, e in schema.column_spans]
        self.feature_column = np.repeat(np.arange(len(schema.columns)), sizes)

    def chunks(
        self, candidates: Sequence[tuple[int, ...]]
    ) -> Iterator[tuple[Sequence[tuple[int, ...]], np.ndarray]]:
        d = self.schema.total_features
        for lo in range(0, len(candidates), self.chunk_size):
            chunk = candidates[lo : lo + self.chunk_size]
            probes = np.tile(self.base, (len(chunk), 1))
            for row, cand in enumerate(chunk):
                for feat in cand:
                    start, stop = self.spans[self.feature_column[feat]]
                    probes[row, start:stop] = 0.0
                    probes[row, feat] = 1.0
            out = np.asarray(self.reconstruct(probes))
            if out.shape != (len(chunk), d):
                raise ValueError(
                    f"reconstructor returned shape {out.shape}, "
                    f"expected {(len(chunk), d)}"
                )
            yield chunk, out

    def antecedent_pass(
        self, chunk: Sequence[tuple[int, ...]], out: np.ndarray, tau_a: float
    ) -> np.ndarray:
        cand = np.array(chunk, dtype=np.intp)
        rows = np.arange(len(chunk))[:, None]
        return (out[rows, cand] >= tau_a).all(axis=1)

    def consequents(
        self,
        chunk: Sequence[tuple[int, ...]],
        out: np.ndarray,
        passed: np.ndarray,
        tau_c: float,
        sink: list[tuple[tuple[int, ...], int]],
    ) -> None:
        span_max = np.maximum.reduceat(out, self.span_starts, axis=1)
        qualify = (span_max >= tau_c) & passed[:, None]
        for row, cand in enumerate(chunk):
            if passed[row]:
                qualify[row, self.feature_column[list(cand)]] = False
        for row, span in zip(*np.nonzero(qualify)):
            start, stop = self.spans[span]
            best = start + int(np.argmax(out[row, start:stop]))
            sink.append((chunk[row], best))


def extract_rules(
    reconstruct: Reconstructor,
    schema: OneHotSchema,
    cfg: ExtractionConfig,
    chunk_size: int = 1024,
) -> list[Rule]:
    """Enumerate antecedent candidates, probe them, and emit threshold rules.

    Candidates grow from size 1 to max_antecedents with at most one item per
    column; single items failing the antecedent test prune every superset.
    Probing is chunked, which is bit-identical to one-at-a-time probing
    because the model math is batch-size invariant. Rules come back
    duplicate-free in canonical order with support/confidence unset.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    prober = _Prober(reconstruct, schema, chunk_size)
    if cfg.item_constraints is not None:
        allowed = []
        for item in cfg.item_constraints:
            if item not in schema.feature_index:
                raise ValueError(f"constraint {item} is not a feature of this schema")
            allowed.append(schema.feature_index[item])
        single_features = sorted(allowed)
    else:
        single_features = list(range(schema.total_features))

    raw_rules: list[tuple[tuple[int, ...], int]] = []
    passing_singles: list[int] = []
    for chunk, out in prober.chunks([(f,) for f in single_features]):
        passed = prober.antecedent_pass(chunk, out, cfg.tau_a)
        passing_singles.extend(cand[0] for cand, ok in zip(chunk, passed) if ok)
        prober.consequents(chunk, out, passed, cfg.tau_c, raw_rules)

    column_of = prober.feature_column
    for size in range(2, cfg.max_antecedents + 1):
        level = [
            combo
            for combo in combinations(passing_singles, size)
            if len({column_of[f] for f in combo}) == size
        ]
        for chunk, out in prober.chunks(level):
            passed = prober.antecedent_pass(chunk, out, cfg.tau_a)
            prober.consequents(chunk, out, passed, cfg.tau_c, raw_rules)

    raw_rules.sort(key=lambda rc: (rc[0], rc[1]))
    items = schema.items
    return [
        Rule(
            antecedent=tuple(items[f] for f in cand),
            consequent=items[consequent],
        )
        for cand, consequent in raw_rules
    ]
