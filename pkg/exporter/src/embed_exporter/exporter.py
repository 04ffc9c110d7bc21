"""Out-of-fold embedding extraction and the EMBEDV1 writer.

The embedding backend is pluggable: anything with `name` and
`embed(X_train, y_train, X_test) -> (n_test, d_e)` works. The default is
TabPFN's classifier embedding interface, imported lazily so the rest of the
tool (fold bookkeeping, format writing) stays usable and testable without it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Protocol

import numpy as np

EXCHANGE_MAGIC = "EMBEDV1"
META_KEYS = ("n", "d_e", "source_model", "target_column", "folds", "seed")
MAX_ROWS = 10_000  # TabPFN's supported fit size


class EmbedderUnavailableError(RuntimeError):
    """The embedding model cannot run in this environment."""


class Embedder(Protocol):
    name: str

    def embed(
        self, X_train: np.ndarray, y_train: np.ndarray, X_test: np.ndarray
    ) -> np.ndarray: ...


class TabPFNEmbedder:
    """Per-row embeddings from a TabPFN classifier fitted on (X, y)."""

    name = "tabpfn"

    def __init__(self) -> None:
        try:
            from tabpfn import TabPFNClassifier
        except ImportError as exc:
            raise EmbedderUnavailableError(
                "TabPFN is not installed. Install it with `pip install tabpfn` "
                "(downloads model weights on first use) or pass a custom "
                "embedder to export_embeddings."
            ) from exc
        self._cls = TabPFNClassifier

    def embed(self, X_train, y_train, X_test):
        model = self._cls()
        model.fit(X_train, y_train)
        raw = np.asarray(model.get_embeddings(X_test))
        # (n_estimators, n, d) from ensembles; average members
        if raw.ndim == 3:
            raw = raw.mean(axis=0)
        if raw.ndim != 2 or raw.shape[0] != X_test.shape[0]:
            raise RuntimeError(f"unexpected embedding shape {raw.shape}")
        return raw.astype(np.float64)


@dataclass(frozen=True)
class ExportJob:
    input_path: str
    output_path: str
    target_column: str = "random"
    folds: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


@dataclass
class ExportResult:
    meta: dict
    fold_of_row: list[int]
    output_path: str


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    """Header + body of a rectangular UTF-8 CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: missing header row") from None
        rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
                )
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, rows


def encode_columns(rows: list[list[str]]) -> np.ndarray:
    """Ordinal-encode each column by first appearance; floats stay numeric."""
    n, d = len(rows), len(rows[0])
    out = np.empty((n, d), dtype=np.float64)
    for j in range(d):
        column = [row[j] for row in rows]
        try:
            out[:, j] = [float(v) for v in column]
            continue
        except ValueError:
            pass
        codes: dict[str, int] = {}
        for i, value in enumerate(column):
            out[i, j] = codes.setdefault(value, len(codes))
    return out


def assign_folds(n: int, folds: int, seed: int) -> list[int]:
    """Seeded permutation split into `folds` near-equal parts."""
    order = np.random.default_rng(seed).permutation(n)
    fold_of_row = [0] * n
    for pos, row in enumerate(order):
        fold_of_row[row] = pos % folds
    return fold_of_row


def write_exchange_file(values: np.ndarray, meta: dict, path: str) -> None:
    n, d_e = values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{EXCHANGE_MAGIC},n={n},d_e={d_e}\n")
        fh.write(json.dumps({k: meta.get(k) for k in META_KEYS}, separators=(",", ":")))
        fh.write("\n")
        for row in values:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def export_embeddings(job: ExportJob, embedder: Embedder | None = None) -> ExportResult:
    """Out-of-fold embeddings for every row, written as an EMBEDV1 file.

    Rows are split into `folds` seeded folds; each fold's rows are embedded
    by a model fitted only on the remaining folds (with y = target column),
    so no row is embedded by a model that saw its own label. The target is a
    named column or a seeded random choice.
    """
    header, rows = read_table(job.input_path)
    n = len(rows)
    if n > MAX_ROWS:
        raise ValueError(f"{n} rows exceed the model's supported range ({MAX_ROWS})")
    if n < job.folds:
        raise ValueError(f"{n} rows cannot fill {job.folds} folds")
    rng = np.random.default_rng(job.seed)
    if job.target_column == "random":
        target_idx = int(rng.integers(len(header)))
    else:
        try:
            target_idx = header.index(job.target_column)
        except ValueError:
            raise ValueError(
                f"target column {job.target_column!r} not in {header}"
            ) from None
    target_name = header[target_idx]
    y_labels = [row[target_idx] for row in rows]
    if len(set(y_labels)) < 2:
        raise ValueError(
            f"target column {target_name!r} is constant; no class signal to fit on"
        )

    encoded = encode_columns(rows)
    X = np.delete(encoded, target_idx, axis=1)
    label_codes: dict[str, int] = {}
    y = np.array([label_codes.setdefault(v, len(label_codes)) for v in y_labels])

    if embedder is None:
        embedder = TabPFNEmbedder()
    fold_of_row = assign_folds(n, job.folds, job.seed)
    fold_ids = np.array(fold_of_row)
    values: np.ndarray | None = None
    for fold in range(job.folds):
        held_out = np.nonzero(fold_ids == fold)[0]
        fitted_on = np.nonzero(fold_ids != fold)[0]
        if len(set(y[fitted_on])) < 2:
            raise ValueError(
                f"fold {fold}: training rows have a single target class; "
                "use more folds or a different target"
            )
        emb = np.asarray(embedder.embed(X[fitted_on], y[fitted_on], X[held_out]))
        if emb.ndim != 2 or emb.shape[0] != len(held_out):
            raise RuntimeError(f"embedder returned shape {emb.shape} for fold {fold}")
        if values is None:
            values = np.empty((n, emb.shape[1]), dtype=np.float64)
        elif emb.shape[1] != values.shape[1]:
            raise RuntimeError(
                f"fold {fold} produced d_e={emb.shape[1]}, expected {values.shape[1]}"
            )
        values[held_out] = emb
    assert values is not None
    if not np.isfinite(values).all():
        i, j = np.argwhere(~np.isfinite(values))[0]
        raise RuntimeError(f"embedder produced a non-finite value at row {i}, col {j}")

    meta = {
        "n": n,
        "d_e": int(values.shape[1]),
        "source_model": embedder.name,
        "target_column": target_name,
        "folds": job.folds,
        "seed": job.seed,
    }
    write_exchange_file(values, meta, job.output_path)
    return ExportResult(meta=meta, fold_of_row=fold_of_row, output_path=job.output_path)
