"""CLI: export-embeddings <in.csv> --target random --seed S --folds 10 -o <file>."""

from __future__ import annotations

import click

from .exporter import EmbedderUnavailableError, ExportJob, export_embeddings


@click.command()
@click.argument("in_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", default="random", show_default=True,
              help="target column name, or 'random' for a seeded choice")
@click.option("--seed", default=0, show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def main(in_csv: str, target: str, seed: int, folds: int, output: str) -> None:
    """Write out-of-fold TabPFN row embeddings in the EMBEDV1 format."""
    job = ExportJob(
        input_path=in_csv, output_path=output,
        target_column=target, folds=folds, seed=seed,
    )
    try:
        result = export_embeddings(job)
    except EmbedderUnavailableError as exc:
        raise click.ClickException(str(exc)) from exc
    meta = result.meta
    click.echo(
        f"wrote {output}: n={meta['n']} d_e={meta['d_e']} "
        f"target={meta['target_column']!r} folds={meta['folds']}",
        err=True,
    )


if __name__ == "__main__":
    main()
