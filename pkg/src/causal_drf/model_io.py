"""CSV ingestion and JSON model persistence.

The model file is self-describing JSON tagged "causal-drf-model/v1": config,
bandwidth, all trees, the half-sample index sets, and the full training data
(weights reference row indices, and prediction needs the training outcomes
for kernel evaluations).  A content hash over the training arrays guards
against tampering.  Floats round-trip exactly: they are serialized with
Python's repr, which is lossless for finite doubles.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, ForestConfig
from .errors import (
    CorruptModel,
    MissingColumn,
    NonBinaryTreatment,
    ParseError,
    SchemaVersionMismatch,
)
from .forest import CausalDRFModel
from .kernel import KernelSpec
from .tree import Tree

MODEL_SCHEMA = "causal-drf-model/v1"


@dataclass
class DataSchema:
    """Column roles for CSV ingestion."""

    covariate_columns: list[str]
    treatment_column: str
    outcome_columns: list[str]
    standardize_outcomes: bool = False

    def __post_init__(self):
        cov, out = set(self.covariate_columns), set(self.outcome_columns)
        if not self.covariate_columns or not self.outcome_columns:
            raise ValueError("covariate and outcome column lists must be nonempty")
        if cov & out or self.treatment_column in cov | out:
            raise ValueError("covariate, treatment, and outcome columns must be disjoint")

    @classmethod
    def from_json(cls, path: str) -> "DataSchema":
        with open(path) as fh:
            return cls(**json.load(fh))


@dataclass
class Standardization:
    """Per-outcome-column (mean, sd) pairs for the inverse transform."""

    means: np.ndarray
    sds: np.ndarray


def load_csv(path: str, schema: DataSchema) -> tuple[Dataset, Standardization | None]:
    """Parse a headered CSV into a Dataset, with row-numbered cell errors.

    With ``standardize_outcomes`` each outcome column is centered and scaled
    to unit standard deviation; the transform parameters are returned so
    witness grids can be mapped back to the original units.
    """
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MissingColumn("file has no header row")
        for col in [*schema.covariate_columns, schema.treatment_column, *schema.outcome_columns]:
            if col not in reader.fieldnames:
                raise MissingColumn(f"column {col!r} not found in header")
        X_rows, W_rows, Y_rows = [], [], []
        for rownum, row in enumerate(reader, start=2):  # header is line 1
            def cell(col):
                try:
                    return float(row[col])
                except (TypeError, ValueError):
                    raise ParseError(rownum, col, f"cannot parse {row[col]!r}") from None

            X_rows.append([cell(c) for c in schema.covariate_columns])
            w = cell(schema.treatment_column)
            if w not in (0.0, 1.0):
                raise NonBinaryTreatment(
                    f"row {rownum}: treatment value {row[schema.treatment_column]!r} is not 0/1"
                )
            W_rows.append(int(w))
            Y_rows.append([cell(c) for c in schema.outcome_columns])
    X = np.asarray(X_rows)
    W = np.asarray(W_rows)
    Y = np.asarray(Y_rows)
    standardization = None
    if schema.standardize_outcomes:
        means = Y.mean(axis=0)
        sds = Y.std(axis=0, ddof=0)
        if np.any(sds == 0):
            raise ValueError("cannot standardize a constant outcome column")
        Y = (Y - means) / sds
        standardization = Standardization(means=means, sds=sds)
    return Dataset(X=X, W=W, Y=Y), standardization


def _float_list(a: np.ndarray):
    return [repr(float(v)) for v in np.asarray(a, dtype=np.float64).ravel()]


def _parse_floats(vals, shape):
    return np.array([float(v) for v in vals], dtype=np.float64).reshape(shape)


def _data_fingerprint(dataset: Dataset) -> str:
    h = hashlib.sha256()
    for arr in (dataset.X, dataset.W.astype(np.float64), dataset.Y):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return h.hexdigest()


def _tree_to_json(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": _float_list(tree.threshold),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "leaf_members": [
            None if m is None else np.asarray(m).tolist() for m in tree.leaf_members
        ],
        "build_indices": tree.build_indices.tolist(),
        "populate_indices": tree.populate_indices.tolist(),
    }


def _tree_from_json(obj: dict) -> Tree:
    return Tree(
        feature=np.asarray(obj["feature"], dtype=np.int32),
        threshold=_parse_floats(obj["threshold"], (len(obj["threshold"]),)),
        left=np.asarray(obj["left"], dtype=np.int32),
        right=np.asarray(obj["right"], dtype=np.int32),
        leaf_members=[
            None if m is None else np.asarray(m, dtype=np.int64)
            for m in obj["leaf_members"]
        ],
        build_indices=np.asarray(obj["build_indices"], dtype=np.int64),
        populate_indices=np.asarray(obj["populate_indices"], dtype=np.int64),
    )


def save_model(model: CausalDRFModel, path: str) -> None:
    """Serialize a fitted model (including its training data) to JSON."""
    payload = {
        "schema": MODEL_SCHEMA,
        "config": asdict(model.config),
        "bandwidth_sigma": repr(model.kernel_spec.bandwidth_sigma),
        "outcome_dim": model.kernel_spec.outcome_dim,
        "data": {
            "X": _float_list(model.dataset.X),
            "W": model.dataset.W.tolist(),
            "Y": _float_list(model.dataset.Y),
            "n": model.dataset.n,
            "p": model.dataset.p,
            "d": model.dataset.d,
            "fingerprint": _data_fingerprint(model.dataset),
        },
        "half_samples": [hs.tolist() for hs in model.half_samples],
        "groups": [[_tree_to_json(t) for t in trees] for trees in model.groups],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_model(path: str) -> CausalDRFModel:
    """Load a model file, verifying the schema tag and the data hash."""
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptModel(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("schema") != MODEL_SCHEMA:
        raise SchemaVersionMismatch(
            f"expected schema {MODEL_SCHEMA!r}, got {payload.get('schema')!r}"
        )
    try:
        data = payload["data"]
        n, p, d = data["n"], data["p"], data["d"]
        dataset = Dataset(
            X=_parse_floats(data["X"], (n, p)),
            W=np.asarray(data["W"], dtype=np.int8),
            Y=_parse_floats(data["Y"], (n, d)),
        )
        if _data_fingerprint(dataset) != data["fingerprint"]:
            raise CorruptModel("training data hash mismatch")
        config = ForestConfig(**payload["config"])
        spec = KernelSpec(
            bandwidth_sigma=float(payload["bandwidth_sigma"]),
            outcome_dim=int(payload["outcome_dim"]),
        )
        half_samples = [np.asarray(hs, dtype=np.int64) for hs in payload["half_samples"]]
        groups = [[_tree_from_json(t) for t in trees] for trees in payload["groups"]]
    except CorruptModel:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed model file: {exc}") from exc
    return CausalDRFModel(
        dataset=dataset,
        config=config,
        kernel_spec=spec,
        half_samples=half_samples,
        groups=groups,
    )
