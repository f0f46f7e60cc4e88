import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from anonymixer.cluster import kmeans_fit
from anonymixer.dataio import (
    QUASI_IDENTIFIER,
    ColumnSpec,
    Dataset,
    generate_toy_telemetry,
    inverse_normalize,
    load_csv,
    minmax_normalize,
    schema_from_mapping,
    strip_quasi_identifiers,
    write_csv,
)
from anonymixer.errors import (
    EmptyInputError,
    ParameterError,
    ParseError,
    SchemaError,
    ShapeError,
)

SCHEMA = (ColumnSpec("rssi"), ColumnSpec("bytes"))


def _write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_small_file(tmp_path):
    p = _write(tmp_path, "rssi,bytes\n-40,100\n-55,2.5e3\n-61.5,0\n")
    d = load_csv(p, SCHEMA)
    assert (d.n_rows, d.n_features) == (3, 2)
    np.testing.assert_array_equal(d.values[:, 1], [100.0, 2500.0, 0.0])


def test_header_column_order_is_free(tmp_path):
    p = _write(tmp_path, "bytes,rssi\n1,2\n")
    d = load_csv(p, SCHEMA)
    assert d.values.tolist() == [[2.0, 1.0]]


def test_missing_column_is_named(tmp_path):
    p = _write(tmp_path, "rssi\n1\n")
    with pytest.raises(SchemaError, match="'bytes'"):
        load_csv(p, SCHEMA)


def test_extra_column_is_named(tmp_path):
    p = _write(tmp_path, "rssi,bytes,channel\n1,2,3\n")
    with pytest.raises(SchemaError, match="'channel'"):
        load_csv(p, SCHEMA)


def test_unparseable_cell_cites_row_and_column(tmp_path):
    p = _write(tmp_path, "rssi,bytes\n1,2\nabc,4\n5,6\n")
    with pytest.raises(ParseError, match=r"row 2, column 'rssi'"):
        load_csv(p, SCHEMA)


@pytest.mark.parametrize("cell", ["nan", "inf", "-Infinity"])
def test_non_finite_cells_rejected(tmp_path, cell):
    p = _write(tmp_path, f"rssi,bytes\n1,{cell}\n")
    with pytest.raises(ParseError):
        load_csv(p, SCHEMA)


@pytest.mark.parametrize("text", ["", "rssi,bytes\n"])
def test_empty_inputs(tmp_path, text):
    with pytest.raises(EmptyInputError):
        load_csv(_write(tmp_path, text), SCHEMA)


def test_unreadable_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError, match="cannot read"):
        load_csv(tmp_path / "nope.csv", SCHEMA)
    p = tmp_path / "bin.csv"
    p.write_bytes(b"rssi,bytes\n\xff\xfe,1\n")
    with pytest.raises(ParseError, match="UTF-8"):
        load_csv(p, SCHEMA)


def test_ragged_row(tmp_path):
    p = _write(tmp_path, "rssi,bytes\n1,2\n3\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(p, SCHEMA)


def test_label_column_parsing(tmp_path):
    schema = SCHEMA + (ColumnSpec("cluster", "discrete_label"),)
    d = load_csv(_write(tmp_path, "rssi,bytes,cluster\n1,2,0\n3,4,-1\n"), schema)
    assert d.labels.tolist() == [0, -1]
    with pytest.raises(ParseError, match="label"):
        load_csv(_write(tmp_path, "rssi,bytes,cluster\n1,2,-2\n", "b.csv"), schema)
    with pytest.raises(ParseError, match="not an integer"):
        load_csv(_write(tmp_path, "rssi,bytes,cluster\n1,2,x\n", "c.csv"), schema)


def test_schema_invariants():
    with pytest.raises(SchemaError):
        Dataset((ColumnSpec("a"), ColumnSpec("a")), np.zeros((1, 2)))
    with pytest.raises(SchemaError):
        schema_from_mapping({"a": "continuous", "l1": "discrete_label", "l2": "discrete_label"})
    with pytest.raises(SchemaError):
        ColumnSpec("a", "categorical")
    with pytest.raises(ParseError):
        Dataset(SCHEMA, np.array([[1.0, np.nan]]))
    with pytest.raises(ShapeError):
        Dataset(SCHEMA, np.zeros((2, 3)))


def test_dataset_is_read_only():
    d = Dataset(SCHEMA, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        d.values[0, 0] = 1.0


def test_round_trip_twelve_digits(tmp_path):
    rng = np.random.default_rng(7)
    x = rng.normal(size=(50, 2)) * 10.0 ** rng.integers(-6, 7, size=(50, 2))
    schema = (ColumnSpec("mac", QUASI_IDENTIFIER),) + SCHEMA
    d = Dataset(schema, x, None, {"mac": tuple(f"aa:{i:02x}" for i in range(50))})
    back = load_csv(write_csv(d, tmp_path / "out.csv"), schema)
    np.testing.assert_allclose(back.values, x, rtol=1e-11, atol=0)
    assert back.qid == d.qid


def test_strip_quasi_identifiers():
    schema = (ColumnSpec("mac", QUASI_IDENTIFIER), ColumnSpec("rssi"), ColumnSpec("bytes"))
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    d = Dataset(schema, x, None, {"mac": ("a", "b")})
    s = strip_quasi_identifiers(d)
    assert s.continuous_names == ["rssi", "bytes"]
    assert s.qid == {}
    np.testing.assert_array_equal(s.values, x)
    same = Dataset(SCHEMA, x)
    assert strip_quasi_identifiers(same).values.tolist() == x.tolist()
    only_qid = Dataset((ColumnSpec("mac", QUASI_IDENTIFIER),), np.zeros((2, 0)), None, {"mac": ("a", "b")})
    with pytest.raises(EmptyInputError):
        strip_quasi_identifiers(only_qid)


def test_minmax_examples():
    d = Dataset(SCHEMA, np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]))
    norm, params = minmax_normalize(d)
    assert norm.values[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert norm.values[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert params.constant.tolist() == [False, True]
    np.testing.assert_array_equal(inverse_normalize(norm, params).values, d.values)


def test_inverse_shape_mismatch():
    d = Dataset(SCHEMA, np.ones((2, 2)))
    _, params = minmax_normalize(Dataset((ColumnSpec("a"),), np.ones((2, 1))))
    with pytest.raises(ShapeError):
        inverse_normalize(d, params)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_minmax_range_and_round_trip(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(rng.integers(1, 40), 2)) * rng.uniform(0.1, 1e3)
    d = Dataset(SCHEMA, x)
    norm, params = minmax_normalize(d)
    assert norm.values.min() >= 0.0 and norm.values.max() <= 1.0
    np.testing.assert_allclose(inverse_normalize(norm, params).values, x, rtol=0, atol=1e-12 * max(1.0, abs(x).max()))


def test_toy_generator_contract():
    a, la = generate_toy_telemetry(1, 200, 2, 15, 10.0)
    b, lb = generate_toy_telemetry(1, 200, 2, 15, 10.0)
    assert a.values.shape == (200, 15)
    assert np.array_equal(a.values, b.values) and np.array_equal(la, lb)
    counts = np.bincount(la)
    assert counts.min() >= 0.8 * 100 and counts.max() <= 1.2 * 100
    _, single = generate_toy_telemetry(3, 50, 1, 4, 10.0)
    assert set(single.tolist()) == {0}
    with pytest.raises(ParameterError):
        generate_toy_telemetry(0, 2, 3, 4, 10.0)
    with pytest.raises(ParameterError):
        generate_toy_telemetry(0, 10, 2, 1, 10.0)
    with pytest.raises(ParameterError):
        generate_toy_telemetry(0, 10, 2, 4, 0.0)


def test_toy_identifiers_are_strippable():
    d, _ = generate_toy_telemetry(2, 30, 2, 3, 10.0, with_identifiers=True)
    assert set(d.qid_names) == {"device_mac", "timestamp"}
    assert strip_quasi_identifiers(d).n_features == 3


@pytest.mark.parametrize("seed,k", [(s, k) for s in range(3) for k in (2, 3, 4)])
def test_toy_separation_and_kmeans_recovery(seed, k):
    raw, truth = generate_toy_telemetry(seed, 300, k, 6, 10.0)
    cents = np.array([raw.values[truth == c].mean(axis=0) for c in range(k)])
    model, assignment = kmeans_fit(raw, k, seed=seed)
    assert oracles.adjusted_rand(assignment.labels, truth) >= 0.99
    # empirical centroids land near the drawn ones, which sit at least 10 apart
    d = np.sqrt(((cents[:, None] - cents[None]) ** 2).sum(-1))[np.triu_indices(k, 1)]
    assert d.min() > 9.0
