"""Command-line interface: fit, witness, test, simulate.

Every run with a fixed --seed writes byte-identical CSV/JSON output.  The
environment variable CAUSAL_DRF_THREADS caps worker parallelism (default:
hardware concurrency).
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from .data import ForestConfig
from .forest import aggregate_weights, fit as fit_forest, num_threads
from .inference import band_from_bundle, default_grid, h0_test
from .model_io import DataSchema, load_csv, load_model, save_model
from .simulation import (
    BENCHMARK_REGIMES,
    METHOD_CAUSAL,
    METHOD_TWO_DRF,
    TOY_REGIMES,
    run_study,
)

PAPER_SCALE_TREES = 2500
PAPER_SCALE_GROUPS = 50
PAPER_SCALE_SIMS = 500


def _fmt(v: float) -> str:
    return repr(float(v))


def _load_config(path: str | None, seed: int | None) -> ForestConfig:
    fields = {}
    if path:
        with open(path) as fh:
            fields = json.load(fh)
    if seed is not None:
        fields["seed"] = seed
    return ForestConfig(**fields)


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise click.BadParameter(f"cannot parse point {text!r}") from None


@click.group()
def main():
    """Honest forest estimation of conditional distributional treatment
    effects, with resampling-based tests and witness-function bands."""


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Overrides the config file seed.")
@click.option("--out", "out_path", required=True, type=click.Path())
def fit_cmd(data_path, schema_path, config_path, seed, out_path):
    """Fit a forest on a CSV dataset and save the model as JSON."""
    schema = DataSchema.from_json(schema_path)
    dataset, _ = load_csv(data_path, schema)
    config = _load_config(config_path, seed)
    model = fit_forest(dataset, config, n_jobs=num_threads())
    save_model(model, out_path)
    click.echo(f"fitted {config.num_trees} trees on n={dataset.n}; model -> {out_path}")


@main.command("witness")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--point", required=True, help="Comma-separated covariate vector.")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--grid-size", type=int, default=201, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def witness_cmd(model_path, point, alpha, grid_size, out_path):
    """Evaluate the witness function with its simultaneous band; write CSV."""
    model = load_model(model_path)
    x = _parse_point(point)
    grid = default_grid(model.dataset.Y, grid_size)
    bundle = aggregate_weights(model, x)
    band = band_from_bundle(bundle, model.dataset.Y, model.kernel_spec, grid, alpha)
    header = {
        "statistic": band.test.statistic,
        "q": band.test.quantile_q,
        "alpha": alpha,
        "reject": bool(band.test.reject),
    }
    d = model.dataset.d
    cols = [f"y_{j + 1}" for j in range(d)] + ["estimate", "lower", "upper"]
    with open(out_path, "w") as fh:
        fh.write("# " + json.dumps(header) + "\n")
        fh.write(",".join(cols) + "\n")
        for g, est, lo, hi in zip(band.grid, band.estimate, band.lower, band.upper):
            row = [_fmt(v) for v in g] + [_fmt(est), _fmt(lo), _fmt(hi)]
            fh.write(",".join(row) + "\n")
    click.echo(f"witness band ({len(band.grid)} points) -> {out_path}")


@main.command("test")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--point", required=True, help="Comma-separated covariate vector.")
@click.option("--alpha", type=float, default=0.05, show_default=True)
def test_cmd(model_path, point, alpha):
    """Test equality of the conditional laws at a point.

    Prints the test result as JSON; exit code 0 = accept, 3 = reject.
    """
    model = load_model(model_path)
    result = h0_test(model, _parse_point(point), alpha)
    click.echo(
        json.dumps(
            {
                "statistic": result.statistic,
                "quantile_q": result.quantile_q,
                "alpha": result.alpha,
                "reject": bool(result.reject),
            }
        )
    )
    sys.exit(3 if result.reject else 0)


@main.command("simulate")
@click.option("--regime", required=True, type=click.Choice(BENCHMARK_REGIMES + TOY_REGIMES))
@click.option("--n", "n", required=True, type=int)
@click.option("--sims", type=int, default=100, show_default=True)
@click.option(
    "--method",
    type=click.Choice(["causal", "two-drf"]),
    default="causal",
    show_default=True,
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trees", type=int, default=1000, show_default=True)
@click.option("--groups", type=int, default=50, show_default=True)
@click.option(
    "--paper-scale",
    is_flag=True,
    help=f"Run {PAPER_SCALE_SIMS} sims with {PAPER_SCALE_TREES} trees in "
    f"{PAPER_SCALE_GROUPS} groups.",
)
@click.option("--out", "out_path", required=True, type=click.Path())
def simulate_cmd(regime, n, sims, method, seed, trees, groups, paper_scale, out_path):
    """Run a Monte Carlo study and write a results table CSV."""
    if paper_scale:
        trees, groups, sims = PAPER_SCALE_TREES, PAPER_SCALE_GROUPS, PAPER_SCALE_SIMS
    config = ForestConfig(num_trees=trees, num_groups=groups)
    method_name = METHOD_CAUSAL if method == "causal" else METHOD_TWO_DRF
    report = run_study(
        regime, n, sims, method_name, config, master_seed=seed, n_jobs=num_threads()
    )
    with open(out_path, "w") as fh:
        fh.write("regime,n,method,mae,coverage\n")
        fh.write(
            f"{regime},{n},{method},{_fmt(report.mae_mean)},{_fmt(report.coverage_rate)}\n"
        )
    meta = {
        "regime": regime,
        "n": n,
        "n_sims": sims,
        "method": method,
        "seed": seed,
        "config": {"num_trees": trees, "num_groups": groups},
        "mae_mean": report.mae_mean,
        "coverage_rate": report.coverage_rate,
        "coverage_se": report.coverage_se,
        "runtime_seconds": report.runtime_seconds,
    }
    with open(out_path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    click.echo(
        f"regime {regime} n={n} {method}: MAE={report.mae_mean:.4f} "
        f"coverage={report.coverage_rate:.3f} -> {out_path}"
    )


if __name__ == "__main__":
    main()
