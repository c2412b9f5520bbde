import json
import math

import numpy as np
import pytest

from ellobst.errors import ValidationError
from ellobst.io import central_slice, read_field, read_json, write_field, write_json, write_slice_csv
from ellobst.obstacle import GridField, GridSpec, sample_field


@pytest.fixture
def field():
    spec = GridSpec(3, 2.0, 17)
    return sample_field(spec, lambda x: x[:, 0] + 10 * x[:, 1] + 100 * x[:, 2])


def test_field_roundtrip_bitwise(tmp_path, field):
    path = write_field(tmp_path / "f.bin", field)
    again = read_field(path)
    assert again.spec == field.spec
    assert np.array_equal(again.values, field.values)


def test_field_header(tmp_path, field):
    path = write_field(tmp_path / "f.bin", field)
    raw = path.read_bytes()
    header, _, body = raw.partition(b"\n")
    n, m, R, h = header.split()
    assert (int(n), int(m), float(R), float(h)) == (3, 17, 2.0, 0.25)
    assert len(body) == 8 * 17**3
    # little-endian C order: last index varies fastest
    first = np.frombuffer(body[:16], dtype="<f8")
    assert first[1] - first[0] == pytest.approx(100 * 0.25)


def test_truncated_field_rejected(tmp_path, field):
    path = write_field(tmp_path / "f.bin", field)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValidationError, match="expected"):
        read_field(path)


@pytest.mark.parametrize("header", [b"3 17\n", b"three 17 2.0 0.25\n", b"3 17 2.0 0.3\n"])
def test_bad_header_rejected(tmp_path, header):
    path = tmp_path / "f.bin"
    path.write_bytes(header + np.zeros(17**3).tobytes())
    with pytest.raises(ValidationError):
        read_field(path)


def test_central_slice(field):
    x, y, u = central_slice(field)
    assert len(x) == 17**2
    np.testing.assert_allclose(u, x + 10 * y, atol=1e-12)
    x, y, u = central_slice(field, normal_axis=0)
    np.testing.assert_allclose(u, 10 * x + 100 * y, atol=1e-12)


def test_slice_csv_exact(tmp_path):
    spec = GridSpec(2, 1.0, 17)
    fld = GridField(spec, np.random.default_rng(0).random(spec.shape))
    path = write_slice_csv(tmp_path / "s.csv", fld)
    rows = path.read_text().splitlines()
    assert rows[0] == "x,y,u"
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.array_equal(data[:, 2], fld.values.ravel())


def test_one_dimensional_slice():
    spec = GridSpec(1, 1.0, 17)
    x, y, u = central_slice(GridField(spec, spec.axis**2))
    assert np.all(y == 0) and np.array_equal(u, x**2)


def test_json_nonfinite_and_numpy(tmp_path):
    doc = {"a": np.float64(1.5), "b": np.array([1, 2]), "c": math.inf, "d": np.nan, "e": np.bool_(True),
           "f": (np.int64(3),)}
    path = write_json(tmp_path / "d.json", doc)
    text = path.read_text()
    assert "NaN" not in text and "Infinity" not in text
    back = read_json(path)
    assert back == {"a": 1.5, "b": [1, 2], "c": "inf", "d": "nan", "e": True, "f": [3]}


def test_json_deterministic(tmp_path):
    a = write_json(tmp_path / "a.json", {"z": 1, "a": [0.1, 0.2]}).read_bytes()
    b = write_json(tmp_path / "b.json", {"a": [0.1, 0.2], "z": 1}).read_bytes()
    assert a == b
