import json
import math

import numpy as np
from hypothesis import given, strategies as st

from pulsespec import output
from pulsespec.evans import EvansValue


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(output.fmt(x)) == x


def test_fmt_non_finite():
    assert output.fmt(math.nan) == "nan" and output.fmt(-math.inf) == "-inf"


@given(st.recursive(st.none() | st.booleans() | st.integers(-10 ** 6, 10 ** 6) | st.floats(allow_nan=False,
                                                                                           allow_infinity=False)
                    | st.text(max_size=8),
                    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=5), kids, max_size=4),
                    max_leaves=20))
def test_dumps_matches_json(obj):
    assert json.loads(output.dumps(obj)) == obj


def test_dumps_complex_and_numpy():
    text = output.dumps({"z": 1 + 2j, "a": np.array([0.1, 0.2]), "b": np.bool_(True)})
    assert json.loads(text) == {"z": {"re": 1.0, "im": 2.0}, "a": [0.1, 0.2], "b": True}
    assert "0.10000000000000001" in text


def test_evans_csv(tmp_path):
    v = EvansValue(0.5 + 0.1j, 1 + 0j, -0.3 + 0.4j, 12.5, "full")
    path = tmp_path / "e.csv"
    output.write_evans_csv(path, [v, v])
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(output.EVANS_COLUMNS)
    assert lines[1] == "0.5,0.10000000000000001,1,0,-0.29999999999999999,0.40000000000000002,12.5,full"


def test_svg_is_reproducible(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for p in (a, b):
        output.plot_bands_svg(p, np.linspace(0, 1, 20), np.linspace(-3, 3, 20), [(0.2, 0.4)], "t")
    assert a.read_bytes() == b.read_bytes()
