"""Tabular dataset container, CSV ingestion, QID stripping and min-max scaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyInputError, ParameterError, ParseError, SchemaError, ShapeError

CONTINUOUS = "continuous"
QUASI_IDENTIFIER = "quasi_identifier"
DISCRETE_LABEL = "discrete_label"
KINDS = (CONTINUOUS, QUASI_IDENTIFIER, DISCRETE_LABEL)

NOISE = -1


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str = CONTINUOUS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")


def validate_schema(schema: Sequence[ColumnSpec]) -> tuple[ColumnSpec, ...]:
    schema = tuple(schema)
    seen = set()
    for col in schema:
        if col.name in seen:
            raise SchemaError(f"duplicate column name {col.name!r}")
        seen.add(col.name)
    n_labels = sum(c.kind == DISCRETE_LABEL for c in schema)
    if n_labels > 1:
        raise SchemaError("at most one discrete_label column is allowed")
    return schema


def schema_from_mapping(mapping: Mapping[str, str]) -> tuple[ColumnSpec, ...]:
    """Build a schema from ``{name: kind}`` (insertion order kept)."""
    return validate_schema(ColumnSpec(name, kind.strip()) for name, kind in mapping.items())


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table.

    ``values`` holds the continuous columns (schema order), ``labels`` the optional
    discrete label column and ``qid`` the raw text of quasi-identifier columns.
    Row index is the temporal order.
    """

    schema: tuple[ColumnSpec, ...]
    values: np.ndarray
    labels: np.ndarray | None = None
    qid: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        schema = validate_schema(self.schema)
        object.__setattr__(self, "schema", schema)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[1] != len(self.continuous_names):
            raise ShapeError(
                f"values has {values.shape[1]} columns, schema declares {len(self.continuous_names)}"
            )
        if not np.all(np.isfinite(values)):
            raise ParseError("continuous values must be finite")
        object.__setattr__(self, "values", _frozen(values))

        n = values.shape[0]
        if self.label_name is None:
            if self.labels is not None:
                raise SchemaError("labels given but schema has no discrete_label column")
        else:
            if self.labels is None:
                raise SchemaError(f"schema declares label column {self.label_name!r} but no labels given")
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise ShapeError(f"labels shape {labels.shape} does not match {n} rows")
            if labels.size and (labels.min() < NOISE):
                raise SchemaError("labels must be non-negative integers or the noise marker -1")
            object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))

        qid = {}
        for name in self.qid_names:
            col = tuple(self.qid.get(name, ()))
            if len(col) != n:
                raise ShapeError(f"quasi-identifier column {name!r} has {len(col)} cells, expected {n}")
            qid[name] = col
        object.__setattr__(self, "qid", qid)

    @property
    def continuous_names(self) -> list[str]:
        return [c.name for c in self.schema if c.kind == CONTINUOUS]

    @property
    def qid_names(self) -> list[str]:
        return [c.name for c in self.schema if c.kind == QUASI_IDENTIFIER]

    @property
    def label_name(self) -> str | None:
        for c in self.schema:
            if c.kind == DISCRETE_LABEL:
                return c.name
        return None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "Dataset":
        return Dataset(self.schema, values, self.labels, self.qid)

    def with_labels(self, labels: Iterable[int] | None, name: str = "label") -> "Dataset":
        """Return a copy whose label column is replaced (or added as ``name``)."""
        if labels is None:
            schema = tuple(c for c in self.schema if c.kind != DISCRETE_LABEL)
            return Dataset(schema, self.values, None, self.qid)
        if self.label_name is None:
            schema = self.schema + (ColumnSpec(name, DISCRETE_LABEL),)
        else:
            schema = self.schema
        return Dataset(schema, self.values, np.asarray(labels, dtype=np.int64), self.qid)

    def select_rows(self, mask_or_index) -> "Dataset":
        idx = np.asarray(mask_or_index)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        labels = None if self.labels is None else self.labels[idx]
        qid = {k: tuple(v[i] for i in idx) for k, v in self.qid.items()}
        return Dataset(self.schema, self.values[idx], labels, qid)


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64)
        hi = np.asarray(self.max, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("min and max must be 1-D vectors of equal length")
        if np.any(lo > hi):
            raise ParameterError("normalization min exceeds max")
        object.__setattr__(self, "min", _frozen(lo))
        object.__setattr__(self, "max", _frozen(hi))

    @property
    def constant(self) -> np.ndarray:
        return self.min == self.max

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormalizationParams":
        return cls(np.asarray(d["min"], float), np.asarray(d["max"], float))


def load_csv(path, schema: Sequence[ColumnSpec]) -> Dataset:
    """Read a headed, comma-separated file into a :class:`Dataset`."""
    schema = validate_schema(schema)
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ParseError(f"{path}: not UTF-8 text") from None
    rows = [r for r in rows if r]
    if not rows:
        raise EmptyInputError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    names = [c.name for c in schema]
    for name in names:
        if name not in header:
            raise SchemaError(f"{path}: column {name!r} declared in schema is missing from header")
    for name in header:
        if name not in names:
            raise SchemaError(f"{path}: column {name!r} in header is not declared in schema")
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column in header")
    body = rows[1:]
    if not body:
        raise EmptyInputError(f"{path}: no data rows")

    pos = {name: header.index(name) for name in names}
    kinds = {c.name: c.kind for c in schema}
    cont = [c.name for c in schema if c.kind == CONTINUOUS]
    values = np.empty((len(body), len(cont)), dtype=np.float64)
    labels = [] if any(k == DISCRETE_LABEL for k in kinds.values()) else None
    qid = {c.name: [] for c in schema if c.kind == QUASI_IDENTIFIER}

    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        for j, name in enumerate(cont):
            cell = row[pos[name]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {i}, column {name!r}: cannot parse {cell!r} as a number") from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {i}, column {name!r}: non-finite value {cell!r}")
            values[i - 1, j] = v
        for name in qid:
            qid[name].append(row[pos[name]])
        if labels is not None:
            lname = next(n for n, k in kinds.items() if k == DISCRETE_LABEL)
            cell = row[pos[lname]].strip()
            try:
                lab = int(cell)
            except ValueError:
                raise ParseError(f"{path}: row {i}, column {lname!r}: label {cell!r} is not an integer") from None
            if lab < NOISE:
                raise ParseError(f"{path}: row {i}, column {lname!r}: label {lab} below noise marker -1")
            labels.append(lab)

    return Dataset(schema, values, None if labels is None else np.asarray(labels, np.int64), qid)


def format_value(v: float) -> str:
    return format(float(v), ".12g")


def write_csv(data: Dataset, path) -> Path:
    """Serialize back to CSV; reals carry 12 significant digits."""
    path = Path(path)
    cont_idx = {name: j for j, name in enumerate(data.continuous_names)}
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in data.schema])
        for i in range(data.n_rows):
            row = []
            for c in data.schema:
                if c.kind == CONTINUOUS:
                    row.append(format_value(data.values[i, cont_idx[c.name]]))
                elif c.kind == QUASI_IDENTIFIER:
                    row.append(data.qid[c.name][i])
                else:
                    row.append(str(int(data.labels[i])))
            w.writerow(row)
    return path


def write_labels_csv(labels: np.ndarray, path, name: str = "label") -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(name + "\n")
        for lab in np.asarray(labels):
            fh.write(f"{int(lab)}\n")
    return path


def read_labels_csv(path) -> np.ndarray:
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if len(lines) < 2:
        raise EmptyInputError(f"{path}: no labels")
    try:
        return np.asarray([int(x) for x in lines[1:]], dtype=np.int64)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def strip_quasi_identifiers(data: Dataset) -> Dataset:
    schema = tuple(c for c in data.schema if c.kind != QUASI_IDENTIFIER)
    if not any(c.kind == CONTINUOUS for c in schema):
        raise EmptyInputError("no continuous columns remain after removing quasi-identifiers")
    return Dataset(schema, data.values, data.labels, {})


def minmax_normalize(data: Dataset) -> tuple[Dataset, NormalizationParams]:
    """Map each continuous column to [0, 1]; constant columns become 0."""
    x = data.values
    if x.shape[0] == 0:
        raise EmptyInputError("cannot normalize an empty dataset")
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    params = NormalizationParams(lo, hi)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (x - lo) / safe, 0.0)
    return data.with_values(out), params


def inverse_normalize(data: Dataset, params: NormalizationParams) -> Dataset:
    if params.min.shape[0] != data.n_features:
        raise ShapeError(
            f"normalization params cover {params.min.shape[0]} columns, data has {data.n_features}"
        )
    span = params.max - params.min
    return data.with_values(data.values * span + params.min)


def generate_toy_telemetry(
    seed: int,
    n: int,
    k: int,
    m: int,
    separation: float,
    with_identifiers: bool = False,
) -> tuple[Dataset, np.ndarray]:
    """Isotropic unit-variance Gaussian blobs with well-separated centroids.

    Centroids are drawn from a standard normal and the whole set is rescaled so the
    closest pair sits exactly ``separation`` apart. Labels are balanced (``i % k``)
    then shuffled. ``with_identifiers`` adds fake ``device_mac``/``timestamp`` QID
    columns so the stripping stage has something to do.
    """
    if not (n >= k >= 1) or m < 2 or not separation > 0:
        raise ParameterError(f"need n >= k >= 1, m >= 2, separation > 0 (got n={n}, k={k}, m={m}, sep={separation})")
    rng = np.random.default_rng(seed)
    centroids = rng.normal(size=(k, m))
    if k >= 2:
        diff = centroids[:, None, :] - centroids[None, :, :]
        d = np.sqrt((diff ** 2).sum(-1))
        dmin = d[np.triu_indices(k, 1)].min()
        centroids = centroids * (separation / dmin)
    labels = np.arange(n) % k
    rng.shuffle(labels)
    values = centroids[labels] + rng.normal(size=(n, m))

    schema = [ColumnSpec(f"feat_{j:02d}") for j in range(m)]
    qid = {}
    if with_identifiers:
        macs = rng.integers(0, 2 ** 48, size=n)
        qid["device_mac"] = tuple(
            ":".join(f"{(int(v) >> s) & 0xFF:02x}" for s in range(40, -1, -8)) for v in macs
        )
        qid["timestamp"] = tuple(str(1_700_000_000 + 60 * i) for i in range(n))
        schema = [ColumnSpec("timestamp", QUASI_IDENTIFIER), ColumnSpec("device_mac", QUASI_IDENTIFIER)] + schema
    return Dataset(tuple(schema), values, None, qid), labels.astype(np.int64)
