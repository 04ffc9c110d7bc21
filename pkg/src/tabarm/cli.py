"""Command-line entry point.

Commands: discretize, mine, finetune, metrics, `embed synth`, and
`bench scalability` / `bench finetune`. Rules go to --output as JSON Lines;
reports are printed as one JSON object (to stderr when rules use stdout).
"""

from __future__ import annotations

import sys

import click
import numpy as np

from .autoencoder import TrainConfig, save_model
from .bench import (
    bench_finetune,
    bench_scalability,
    run_aerial,
    run_finetuned,
    run_miner,
    write_benchmark_csv,
)
from .extraction import ExtractionConfig
from .finetune import load_embeddings, make_synthetic_embeddings, save_embeddings
from .metrics import evaluate_rules, score_rules
from .rulesio import load_rules_jsonl, save_rules_jsonl, write_rules_jsonl
from .tabular import (
    Dataset,
    dataset_to_transactions,
    load_csv,
    load_numeric_csv,
    write_csv,
    zscore_discretize,
)


@click.group()
def main() -> None:
    """Association rule mining on categorical tabular data."""


@main.command()
@click.argument("in_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_csv", type=click.Path(dir_okay=False))
@click.option("--cutoff", default=1.0, show_default=True, help="z-score bin boundary")
def discretize(in_csv: str, out_csv: str, cutoff: float) -> None:
    """Bin a numeric CSV into low/medium/high labels by z-score."""
    columns, values = load_numeric_csv(in_csv)
    write_csv(zscore_discretize(values, columns, cutoff), out_csv)
    click.echo(f"wrote {out_csv}", err=True)


def _emit_rules_and_report(rules, db, seconds, output, source):
    scored = score_rules(rules, db)
    report = evaluate_rules(rules, db, seconds)
    if output == "-":
        write_rules_jsonl(scored, sys.stdout, source)
        print(report.to_json(), file=sys.stderr)
    else:
        save_rules_jsonl(scored, output, source)
        print(report.to_json())


@main.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--algorithm", type=click.Choice(["aerial", "fpgrowth", "eclat"]), required=True)
@click.option("--antecedents", default=2, show_default=True)
@click.option("--tau-a", default=0.5, show_default=True)
@click.option("--tau-c", default=0.8, show_default=True)
@click.option("--min-support", type=float, default=None, help="fraction in (0,1]; required for fpgrowth/eclat")
@click.option("--min-conf", default=0.8, show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--batch-size", default=2, show_default=True)
@click.option("--noise-std", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--output", default="-", show_default=True, help="rules JSONL path, - for stdout")
@click.option("--save-model", "model_path", type=click.Path(dir_okay=False), default=None, help="write an autoencoder checkpoint (aerial only)")
def mine(data_csv, algorithm, antecedents, tau_a, tau_c, min_support, min_conf,
         epochs, batch_size, noise_std, seed, output, model_path) -> None:
    """Mine rules from a categorical CSV with one algorithm."""
    ds = load_csv(data_csv)
    if algorithm == "aerial":
        train_cfg = TrainConfig(
            epochs=epochs, batch_size=batch_size, noise_std=noise_std, seed=seed
        )
        extract_cfg = ExtractionConfig(max_antecedents=antecedents, tau_a=tau_a, tau_c=tau_c)
        rules, model, seconds = run_aerial(ds, train_cfg, extract_cfg)
        if model_path:
            save_model(model, model_path)
        _, db = dataset_to_transactions(ds)
        _emit_rules_and_report(rules, db, seconds, output, source="aerial")
    else:
        if min_support is None:
            raise click.UsageError(f"--min-support is required for {algorithm}")
        if model_path:
            raise click.UsageError("--save-model only applies to --algorithm aerial")
        rules, seconds = run_miner(ds, algorithm, min_support, min_conf, antecedents)
        _, db = dataset_to_transactions(ds)
        _emit_rules_and_report(rules, db, seconds, output, source=None)


@main.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", type=click.Choice(["wi", "dl"]), required=True)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lambda-proj", default=1.0, show_default=True)
@click.option("--antecedents", default=2, show_default=True)
@click.option("--tau-a", default=0.5, show_default=True)
@click.option("--tau-c", default=0.8, show_default=True)
@click.option("--epochs", default=25, show_default=True)
@click.option("--batch-size", default=2, show_default=True)
@click.option("--noise-std", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
@click.option("--save-model", "model_path", type=click.Path(dir_okay=False), default=None)
def finetune(data_csv, strategy, embeddings_path, lambda_proj, antecedents, tau_a,
             tau_c, epochs, batch_size, noise_std, seed, output, model_path) -> None:
    """Fine-tune the autoencoder with foundation-model embeddings, then extract."""
    ds = load_csv(data_csv)
    E = load_embeddings(embeddings_path)
    click.echo(
        f"embeddings: source_model={E.meta.get('source_model')!r} "
        f"target_column={E.meta.get('target_column')!r} "
        f"folds={E.meta.get('folds')} seed={E.meta.get('seed')}",
        err=True,
    )
    train_cfg = TrainConfig(
        epochs=epochs, batch_size=batch_size, noise_std=noise_std, seed=seed
    )
    extract_cfg = ExtractionConfig(max_antecedents=antecedents, tau_a=tau_a, tau_c=tau_c)
    rules, model, seconds = run_finetuned(
        ds, E, strategy, train_cfg, extract_cfg, lambda_proj=lambda_proj
    )
    if model_path:
        save_model(model, model_path)
    _, db = dataset_to_transactions(ds)
    _emit_rules_and_report(rules, db, seconds, output, source="aerial")


@main.command()
@click.argument("rules_jsonl", type=click.Path(exists=True, dir_okay=False))
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
def metrics(rules_jsonl, data_csv) -> None:
    """Evaluate a rules file against a dataset and print the report JSON."""
    rules = load_rules_jsonl(rules_jsonl)
    _, db = dataset_to_transactions(load_csv(data_csv))
    print(evaluate_rules(rules, db, exec_seconds=0.0).to_json())


@main.group()
def embed() -> None:
    """Embedding exchange file helpers."""


@embed.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--d-e", "d_e", type=int, required=True, help="embedding width")
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def synth(data_csv, d_e, seed, output) -> None:
    """Seeded random embeddings for a dataset (testing stand-in for an exporter)."""
    ds = load_csv(data_csv)
    save_embeddings(make_synthetic_embeddings(ds.n_rows, d_e, seed), output)
    click.echo(f"wrote {output} ({ds.n_rows} x {d_e})", err=True)


@main.group()
def bench() -> None:
    """Benchmark protocols."""


@bench.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--columns", required=True, help="ascending grid, e.g. 10,25,50,100,150")
@click.option("--algorithms", default="fpgrowth,eclat", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--batch-size", default=2, show_default=True)
@click.option("--antecedents", default=2, show_default=True)
@click.option("--min-conf", default=0.8, show_default=True)
@click.option("--min-support-floor", default=0.1, show_default=True)
@click.option("--shuffle-columns", "shuffle_seed", type=int, default=None,
              help="shuffle column order with this seed before slicing")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def scalability(data_csv, columns, algorithms, seed, epochs, batch_size, antecedents,
                min_conf, min_support_floor, shuffle_seed, output) -> None:
    """Execution-time comparison across an ascending column grid."""
    ds = load_csv(data_csv)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(ds.n_columns)
        ds = Dataset(
            columns=tuple(ds.columns[j] for j in order),
            categories=tuple(ds.categories[j] for j in order),
            rows=tuple(tuple(row[j] for j in order) for row in ds.rows),
        )
    grid = [int(c) for c in columns.split(",")]
    algos = [a for a in algorithms.split(",") if a]
    records = bench_scalability(
        ds, grid, algos, seed,
        dataset_name=data_csv,
        epochs=epochs, batch_size=batch_size, antecedents=antecedents,
        min_conf=min_conf, min_support_floor=min_support_floor, log=sys.stderr,
    )
    write_benchmark_csv(records, output)
    click.echo(f"wrote {output} ({len(records)} records)", err=True)


@bench.command(name="finetune")
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--repeats", default=10, show_default=True, help="number of seeded runs per method")
@click.option("--epochs", default=25, show_default=True)
@click.option("--batch-size", default=2, show_default=True)
@click.option("--antecedents", default=2, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def bench_finetune_cmd(data_csv, embeddings_path, repeats, epochs, batch_size,
                       antecedents, output) -> None:
    """Repeat-run rule-quality comparison: aerial vs aerial_wi vs aerial_dl."""
    ds = load_csv(data_csv)
    E = load_embeddings(embeddings_path)
    records = bench_finetune(
        ds, E, seeds=list(range(repeats)),
        epochs=epochs, batch_size=batch_size, antecedents=antecedents,
        dataset_name=data_csv,
    )
    write_benchmark_csv(records, output)
    click.echo(f"wrote {output} ({len(records)} records)", err=True)


if __name__ == "__main__":
    main()
