"""Benchmark harness: timed pipeline runs and the scalability protocol.

Every algorithm at a given column count consumes the identical sliced dataset,
and the algorithmic miners get their min_support derived from the autoencoder
run (half its rules' mean support). Timed sections run sequentially on a
monotonic clock and cover the full pipeline: encoding plus training and
extraction for the neurosymbolic runs, encoding plus mining and rule assembly
for the algorithmic ones.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

from .autoencoder import (
    AutoencoderModel,
    TrainConfig,
    default_layer_dims,
    init_xavier,
    train,
)
from .extraction import ExtractionConfig, extract_rules
from .finetune import EmbeddingMatrix, finetune_dl, finetune_wi
from .metrics import RuleMetricsReport, evaluate_rules
from .miners import Rule, eclat_frequent, fpgrowth_frequent, generate_rules
from .tabular import Dataset, dataset_to_transactions, one_hot_encode

ALGORITHMS = ("aerial", "aerial_wi", "aerial_dl", "fpgrowth", "eclat")
MINERS = {"fpgrowth": fpgrowth_frequent, "eclat": eclat_frequent}

CSV_COLUMNS = (
    "dataset",
    "algorithm",
    "columns",
    "rows",
    "exec_seconds",
    "rule_count",
    "avg_coverage",
    "avg_support",
    "avg_confidence",
    "total_data_coverage",
    "avg_zhang",
)


@dataclass(frozen=True)
class BenchmarkRecord:
    dataset: str
    algorithm: str
    columns: int
    rows: int
    exec_seconds: float
    report: RuleMetricsReport
    note: str = ""

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.exec_seconds <= 0.0:
            raise ValueError("exec_seconds must be positive")

    def csv_row(self) -> list[str]:
        r = self.report
        return [
            self.dataset,
            self.algorithm,
            str(self.columns),
            str(self.rows),
            repr(self.exec_seconds),
            str(r.rule_count),
            repr(r.avg_coverage),
            repr(r.avg_support),
            repr(r.avg_confidence),
            repr(r.total_data_coverage),
            repr(r.avg_zhang),
        ]


def write_benchmark_csv(records: list[BenchmarkRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow(record.csv_row())


def read_benchmark_csv(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row: dict = dict(raw)
            for key in ("columns", "rows", "rule_count"):
                row[key] = int(row[key])
            for key in CSV_COLUMNS[4:]:
                if key != "rule_count":
                    row[key] = float(row[key])
            rows.append(row)
        return rows


def run_aerial(
    ds: Dataset,
    train_cfg: TrainConfig,
    extract_cfg: ExtractionConfig,
    layer_dims: list[int] | None = None,
) -> tuple[list[Rule], AutoencoderModel, float]:
    """Timed end-to-end pipeline: encode, train, extract. Returns (rules, model, seconds)."""
    start = time.perf_counter()
    schema, matrix = one_hot_encode(ds)
    model = init_xavier(
        layer_dims or default_layer_dims(schema.total_features), train_cfg.seed, schema
    )
    model = train(model, matrix, train_cfg)
    rules = extract_rules(model.reconstruct, schema, extract_cfg)
    return rules, model, time.perf_counter() - start


def run_finetuned(
    ds: Dataset,
    E: EmbeddingMatrix,
    strategy: str,
    train_cfg: TrainConfig,
    extract_cfg: ExtractionConfig,
    lambda_proj: float = 1.0,
) -> tuple[list[Rule], AutoencoderModel, float]:
    """Timed fine-tuned pipeline ('wi' or 'dl'): encode, fine-tune, extract."""
    start = time.perf_counter()
    schema, matrix = one_hot_encode(ds)
    if strategy == "wi":
        model = finetune_wi(matrix, E, train_cfg)
    elif strategy == "dl":
        model = finetune_dl(matrix, E, train_cfg, lambda_proj=lambda_proj)
    else:
        raise ValueError(f"unknown strategy {strategy!r}, expected 'wi' or 'dl'")
    rules = extract_rules(model.reconstruct, schema, extract_cfg)
    return rules, model, time.perf_counter() - start


def run_miner(
    ds: Dataset, algorithm: str, min_support: float, min_conf: float, antecedents: int
) -> tuple[list[Rule], float]:
    """Timed algorithmic pipeline: encode, mine (size-capped), assemble rules."""
    miner = MINERS[algorithm]
    start = time.perf_counter()
    _, db = dataset_to_transactions(ds)
    frequent = miner(db, min_support, max_size=antecedents + 1)
    rules = generate_rules(frequent, db, min_conf, antecedents)
    return rules, time.perf_counter() - start


def bench_scalability(
    ds: Dataset,
    column_grid: list[int],
    algorithms: list[str],
    seed: int,
    dataset_name: str = "dataset",
    epochs: int = 10,
    batch_size: int = 2,
    antecedents: int = 2,
    tau_a: float = 0.5,
    tau_c: float = 0.8,
    min_conf: float = 0.8,
    min_support_floor: float = 0.1,
    log=None,
) -> list[BenchmarkRecord]:
    """Scalability protocol over an ascending column grid.

    For each column count: slice the leading columns, run the autoencoder
    pipeline first, derive min_support as half the mean support of its rules
    (falling back to min_support_floor when it produced none), then run each
    requested miner on the same slice with the same thresholds.
    """
    if sorted(column_grid) != list(column_grid):
        raise ValueError("column grid must be ascending")
    if column_grid and column_grid[-1] > ds.n_columns:
        raise ValueError(
            f"grid point {column_grid[-1]} exceeds dataset width {ds.n_columns}"
        )
    unknown = set(algorithms) - set(MINERS)
    if unknown:
        raise ValueError(f"unknown miner(s): {sorted(unknown)}")

    records = []
    for count in column_grid:
        sliced = ds.slice_columns(count)
        train_cfg = TrainConfig(
            epochs=epochs, batch_size=batch_size, noise_std=0.5, seed=seed,
            validation_fraction=0.0,
        )
        extract_cfg = ExtractionConfig(
            max_antecedents=antecedents, tau_a=tau_a, tau_c=tau_c
        )
        rules, _, seconds = run_aerial(sliced, train_cfg, extract_cfg)
        _, db = dataset_to_transactions(sliced)
        report = evaluate_rules(rules, db, seconds)
        note = ""
        if report.empty or report.avg_support == 0.0:
            min_support = min_support_floor
            note = "aerial produced no scorable rules; min_support fell back to floor"
            if log is not None:
                print(f"[bench] c={count}: {note}", file=log)
        else:
            min_support = 0.5 * report.avg_support
        records.append(
            BenchmarkRecord(
                dataset=dataset_name,
                algorithm="aerial",
                columns=count,
                rows=sliced.n_rows,
                exec_seconds=seconds,
                report=report,
                note=note,
            )
        )
        for algorithm in algorithms:
            miner_rules, miner_seconds = run_miner(
                sliced, algorithm, min_support, min_conf, antecedents
            )
            miner_report = evaluate_rules(miner_rules, db, miner_seconds)
            records.append(
                BenchmarkRecord(
                    dataset=dataset_name,
                    algorithm=algorithm,
                    columns=count,
                    rows=sliced.n_rows,
                    exec_seconds=miner_seconds,
                    report=miner_report,
                )
            )
    return records


def bench_finetune(
    ds: Dataset,
    E: EmbeddingMatrix,
    seeds: list[int],
    methods: tuple[str, ...] = ("aerial", "aerial_wi", "aerial_dl"),
    epochs: int = 25,
    batch_size: int = 2,
    antecedents: int = 2,
    tau_a: float = 0.5,
    tau_c: float = 0.8,
    dataset_name: str = "dataset",
) -> list[BenchmarkRecord]:
    """Repeat-run comparison of default vs fine-tuned pipelines across seeds."""
    extract_cfg = ExtractionConfig(max_antecedents=antecedents, tau_a=tau_a, tau_c=tau_c)
    _, db = dataset_to_transactions(ds)
    records = []
    for seed in seeds:
        cfg = TrainConfig(
            epochs=epochs, batch_size=batch_size, noise_std=0.5, seed=seed,
            validation_fraction=0.0,
        )
        for method in methods:
            if method == "aerial":
                rules, _, seconds = run_aerial(ds, cfg, extract_cfg)
            else:
                strategy = method.removeprefix("aerial_")
                rules, _, seconds = run_finetuned(ds, E, strategy, cfg, extract_cfg)
            records.append(
                BenchmarkRecord(
                    dataset=dataset_name,
                    algorithm=method,
                    columns=ds.n_columns,
                    rows=ds.n_rows,
                    exec_seconds=seconds,
                    report=evaluate_rules(rules, db, seconds),
                    note=f"seed={seed}",
                )
            )
    return records
