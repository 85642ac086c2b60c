import json
import re

import numpy as np
import pytest

from potdiag import error
from potdiag.cli import io


def _write(tmp_path, text, name="series.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_read_plain_series(tmp_path):
    series = io.read_series(_write(tmp_path, "value\n1.5\n-2\n3e2\n"))
    np.testing.assert_allclose(series.values, [1.5, -2.0, 300.0])
    assert not series.has_dates
    assert series.meta["source"].endswith("series.csv")


def test_read_dated_series_with_comments(tmp_path):
    text = "# station 42\n# units: mm\ndate,value\n2000-01-01,1\n2000-01-02,2\n2000-01-04,3\n"
    series = io.read_series(_write(tmp_path, text))
    assert series.has_dates
    assert [str(date) for date in series.timestamps] == [
        "2000-01-01",
        "2000-01-02",
        "2000-01-04",
    ]


@pytest.mark.parametrize(
    "text, line, match",
    [
        ("value\n1\n2\nabc\n", 4, "cannot parse value `abc`"),
        ("value\n1\n\n3\n", 3, "cannot parse value"),
        ("# comment\nvalue\n1\nnan\n", 4, "cannot parse value"),
        ("value\n1\ninf\n", 3, "non-finite value `inf`"),
        ("date,value\n2000-01-01,1\n2000-01-02,2\n2000-01-03,-inf\n", 4, "non-finite"),
        ("date,value\n2000-01-01,1\n2000-13-01,2\n", 3, "cannot parse date"),
        ("date,value\n2000-01-02,1\n2000-01-01,2\n", 3, "strictly increasing"),
        ("x,y\n1,2\n", 1, "expected header"),
        ("# only comments\n", 2, "missing header"),
    ],
)
def test_malformed_files_cite_the_line(tmp_path, text, line, match):
    with pytest.raises(error.ParseError, match=re.escape(f"line {line}: ") + ".*" + match):
        io.read_series(_write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(error.DataError, match="Cannot read"):
        io.read_series(tmp_path / "absent.csv")


def test_to_jsonable():
    assert io.to_jsonable(
        {"a": np.float64(np.nan), "b": np.inf, "c": -np.inf, "d": (np.int64(2), np.bool_(True))}
    ) == {"a": None, "b": "infinite", "c": "-infinite", "d": [2, True]}
    assert io.to_jsonable(np.datetime64("2001-02-03")) == "2001-02-03"


def test_format_csv():
    text = io.format_csv(
        [{"a": 1.0, "b": True}, {"a": None, "b": False}, {"a": np.inf, "b": None}],
        ("a", "b"),
        config={"command": "theta"},
    )
    lines = text.splitlines()
    assert lines[0].startswith(io.CONFIG_PREFIX)
    assert json.loads(lines[0][len(io.CONFIG_PREFIX) :])["config"] == {"command": "theta"}
    assert lines[1:] == ["a,b", "1,true", "NA,false", "infinite,NA"]
    assert "\r" not in text


def test_config_round_trip_through_files(tmp_path):
    config = {"command": "imt-grid", "p_grid": (0.95, 0.96), "seed": 3}
    io.write_csv(tmp_path / "out.csv", [{"x": 1}], ("x",), config)
    io.write_json(tmp_path / "out.json", {"x": 1}, config)
    expected = {"command": "imt-grid", "p_grid": [0.95, 0.96], "seed": 3}
    assert io.read_config(tmp_path / "out.csv") == expected
    assert io.read_config(tmp_path / "out.json") == expected


def test_json_metadata(tmp_path):
    io.write_json(tmp_path / "out.json", {"value": np.nan}, {"command": "gpd"})
    document = json.loads((tmp_path / "out.json").read_text())
    assert document["value"] is None
    assert document["metadata"]["generator"] == "PCG64"
    assert document["metadata"]["version"]


def test_read_config_without_metadata(tmp_path):
    with pytest.raises(error.ParseError, match="no embedded configuration"):
        io.read_config(_write(tmp_path, "value\n1\n"))


def test_atomic_write_replaces_and_leaves_no_temporary(tmp_path):
    path = tmp_path / "nested" / "out.txt"
    io.atomic_write(path, "first")
    io.atomic_write(path, "second")
    assert path.read_text() == "second"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]
