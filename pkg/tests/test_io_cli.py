import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from causal_drf import (
    DataSchema,
    ForestConfig,
    aggregate_weights,
    fit,
    load_csv,
    load_model,
    save_model,
)
from causal_drf.cli import main as cli_main
from causal_drf.errors import (
    CorruptModel,
    MissingColumn,
    NonBinaryTreatment,
    ParseError,
    SchemaVersionMismatch,
)

from conftest import random_dataset

SCHEMA = DataSchema(
    covariate_columns=["x1", "x2", "x3"],
    treatment_column="w",
    outcome_columns=["y"],
)


def write_csv(path, dataset):
    with open(path, "w") as fh:
        fh.write("x1,x2,x3,w,y\n")
        for i in range(dataset.n):
            cells = [repr(float(v)) for v in dataset.X[i]]
            cells.append(str(int(dataset.W[i])))
            cells.append(repr(float(dataset.Y[i, 0])))
            fh.write(",".join(cells) + "\n")


class TestLoadCsv:
    def test_round_trip_exact(self, rng, tmp_path):
        ds = random_dataset(rng, n=30)
        path = tmp_path / "data.csv"
        write_csv(path, ds)
        loaded, std = load_csv(str(path), SCHEMA)
        assert std is None
        assert np.array_equal(loaded.X, ds.X)
        assert np.array_equal(loaded.W, ds.W)
        assert np.array_equal(loaded.Y, ds.Y)

    def test_extra_columns_ignored(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("id,x1,x2,x3,w,y\na,0.1,0.2,0.3,1,1.5\nb,0.4,0.5,0.6,0,-0.5\n")
        loaded, _ = load_csv(str(path), SCHEMA)
        assert loaded.n == 2
        assert loaded.Y[0, 0] == 1.5

    def test_missing_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,x2,w,y\n0.1,0.2,1,0.0\n")
        with pytest.raises(MissingColumn):
            load_csv(str(path), SCHEMA)

    def test_parse_error_carries_location(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,x2,x3,w,y\n0.1,0.2,0.3,1,1.0\n0.4,oops,0.6,0,2.0\n")
        with pytest.raises(ParseError) as exc:
            load_csv(str(path), SCHEMA)
        assert exc.value.row == 3
        assert exc.value.column == "x2"

    def test_non_binary_treatment(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,x2,x3,w,y\n0.1,0.2,0.3,2,1.0\n")
        with pytest.raises(NonBinaryTreatment):
            load_csv(str(path), SCHEMA)

    def test_standardization_moments(self, rng, tmp_path):
        ds = random_dataset(rng, n=50)
        path = tmp_path / "data.csv"
        write_csv(path, ds)
        schema = DataSchema(
            covariate_columns=["x1", "x2", "x3"],
            treatment_column="w",
            outcome_columns=["y"],
            standardize_outcomes=True,
        )
        loaded, std = load_csv(str(path), schema)
        assert loaded.Y.mean() == pytest.approx(0.0, abs=1e-12)
        assert loaded.Y.std() == pytest.approx(1.0, abs=1e-12)
        restored = loaded.Y * std.sds + std.means
        assert np.allclose(restored, ds.Y, atol=1e-12)

    def test_overlapping_roles_rejected(self):
        with pytest.raises(ValueError):
            DataSchema(
                covariate_columns=["a", "b"], treatment_column="a", outcome_columns=["y"]
            )


class TestModelPersistence:
    def test_round_trip_bit_identical_weights(self, rng, small_config, tmp_path):
        ds = random_dataset(rng, n=80)
        model = fit(ds, small_config, n_jobs=1)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        loaded = load_model(str(path))
        x = rng.uniform(size=3)
        a = aggregate_weights(model, x)
        b = aggregate_weights(loaded, x)
        assert np.array_equal(a.aggregate_w, b.aggregate_w)
        assert np.array_equal(a.group_w, b.group_w)
        assert loaded.kernel_spec.bandwidth_sigma == model.kernel_spec.bandwidth_sigma
        assert loaded.config == model.config

    def test_tampered_data_detected(self, rng, small_config, tmp_path):
        ds = random_dataset(rng, n=60)
        model = fit(ds, small_config, n_jobs=1)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        payload = json.loads(path.read_text())
        payload["data"]["Y"][0] = repr(float(payload["data"]["Y"][0]) + 1.0)
        path.write_text(json.dumps(payload))
        with pytest.raises(CorruptModel):
            load_model(str(path))

    def test_wrong_schema_tag(self, rng, small_config, tmp_path):
        ds = random_dataset(rng, n=60)
        model = fit(ds, small_config, n_jobs=1)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        payload = json.loads(path.read_text())
        payload["schema"] = "causal-drf-model/v99"
        path.write_text(json.dumps(payload))
        with pytest.raises(SchemaVersionMismatch):
            load_model(str(path))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(CorruptModel):
            load_model(str(path))

    def test_missing_key(self, rng, small_config, tmp_path):
        ds = random_dataset(rng, n=60)
        model = fit(ds, small_config, n_jobs=1)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        payload = json.loads(path.read_text())
        del payload["half_samples"]
        path.write_text(json.dumps(payload))
        with pytest.raises(CorruptModel):
            load_model(str(path))


@pytest.fixture
def cli_workspace(rng, tmp_path):
    ds = random_dataset(rng, n=80)
    data = tmp_path / "data.csv"
    write_csv(data, ds)
    schema = tmp_path / "schema.json"
    schema.write_text(
        json.dumps(
            {
                "covariate_columns": ["x1", "x2", "x3"],
                "treatment_column": "w",
                "outcome_columns": ["y"],
            }
        )
    )
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {"num_trees": 8, "num_groups": 4, "min_leaf_per_group": 2, "fourier_count": 8}
        )
    )
    return tmp_path, data, schema, config


class TestCli:
    def run(self, *args, env=None):
        return CliRunner().invoke(cli_main, list(args), env=env, catch_exceptions=False)

    def test_fit_witness_test_pipeline(self, cli_workspace):
        tmp, data, schema, config = cli_workspace
        model = tmp / "model.json"
        res = self.run(
            "fit", "--data", str(data), "--schema", str(schema),
            "--config", str(config), "--seed", "7", "--out", str(model),
        )
        assert res.exit_code == 0, res.output
        assert model.exists()

        band_csv = tmp / "band.csv"
        res = self.run(
            "witness", "--model", str(model), "--point", "0.5,0.5,0.5",
            "--alpha", "0.25", "--grid-size", "11", "--out", str(band_csv),
        )
        assert res.exit_code == 0, res.output
        lines = band_csv.read_text().splitlines()
        header = json.loads(lines[0][2:])
        assert set(header) == {"statistic", "q", "alpha", "reject"}
        assert lines[1] == "y_1,estimate,lower,upper"
        assert len(lines) == 13
        row = [float(v) for v in lines[2].split(",")]
        assert row[2] <= row[1] <= row[3]  # lower <= estimate <= upper

        res = self.run("test", "--model", str(model), "--point", "0.5,0.5,0.5", "--alpha", "0.25")
        assert res.exit_code in (0, 3)
        out = json.loads(res.output.strip().splitlines()[-1])
        assert out["reject"] == (res.exit_code == 3)

    def test_fit_reruns_byte_identical(self, cli_workspace):
        tmp, data, schema, config = cli_workspace
        outs = []
        for name in ("a.json", "b.json"):
            model = tmp / name
            self.run(
                "fit", "--data", str(data), "--schema", str(schema),
                "--config", str(config), "--seed", "3", "--out", str(model),
            )
            outs.append(model.read_bytes())
        assert outs[0] == outs[1]

    def test_simulate_writes_table_and_meta(self, tmp_path):
        out = tmp_path / "study.csv"
        res = self.run(
            "simulate", "--regime", "m2", "--n", "80", "--sims", "2",
            "--trees", "8", "--groups", "4", "--seed", "11", "--out", str(out),
            env={"CAUSAL_DRF_THREADS": "1"},
        )
        assert res.exit_code == 0, res.output
        lines = out.read_text().splitlines()
        assert lines[0] == "regime,n,method,mae,coverage"
        regime, n, method, mae_v, cov = lines[1].split(",")
        assert (regime, n, method) == ("m2", "80", "causal")
        assert 0.0 <= float(cov) <= 1.0 and float(mae_v) >= 0.0
        meta = json.loads((tmp_path / "study.csv.meta.json").read_text())
        assert meta["n_sims"] == 2 and meta["seed"] == 11

    def test_simulate_thread_count_invariant(self, tmp_path):
        # identical bytes regardless of the worker cap
        outputs = []
        for threads in ("1", "2"):
            out = tmp_path / f"study_{threads}.csv"
            res = self.run(
                "simulate", "--regime", "1", "--n", "80", "--sims", "2",
                "--trees", "8", "--groups", "4", "--seed", "5", "--out", str(out),
                env={"CAUSAL_DRF_THREADS": threads},
            )
            assert res.exit_code == 0, res.output
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_bad_point_rejected(self, cli_workspace):
        tmp, data, schema, config = cli_workspace
        model = tmp / "model.json"
        self.run(
            "fit", "--data", str(data), "--schema", str(schema),
            "--config", str(config), "--out", str(model),
        )
        res = CliRunner().invoke(
            cli_main, ["test", "--model", str(model), "--point", "a,b,c"]
        )
        assert res.exit_code != 0
