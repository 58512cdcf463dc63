import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatfit import io
from flatfit.cli import main
from flatfit.errors import ParseError
from flatfit.verify import gen_planted


def run(argv):
    return main([str(a) for a in argv])


def payload(path):
    doc = json.loads(path.read_text())
    assert doc["schema"] == "flatfit/1"
    return doc


def write_points(path, X):
    path.write_text(io.format_csv(X))
    return path


def test_parse_csv_header_and_errors():
    X = io.parse_csv("# x,y\n1,2\n3.5,-4e2\n\n")
    assert np.array_equal(X, [[1.0, 2.0], [3.5, -400.0]])
    for bad in ("1,2\n3\n", "1,a\n", "1,nan\n", "", "1,2\n# late\n"):
        with pytest.raises(ParseError):
            io.parse_csv(bad)


def test_parse_json():
    assert io.parse_json('{"points": [[1, 2], [3, 4]]}').shape == (2, 2)
    for bad in ("[]", '{"points": []}', '{"points": [[1], [1, 2]]}', '{"points": [["a"]]}', "{"):
        with pytest.raises(ParseError):
            io.parse_json(bad)


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.integers(1, 4).flatmap(lambda d: st.lists(st.lists(finite, min_size=d, max_size=d),
                                                    min_size=1, max_size=8)))
def test_csv_round_trip_is_exact(rows):
    X = np.array(rows, dtype=float)
    assert np.array_equal(io.parse_csv(io.format_csv(X)), X)


@given(finite)
def test_json_floats_round_trip(x):
    assert json.loads(io.dumps({"v": x}))["v"] == x


def test_collinear_fit_objective_zero(tmp_path):
    src = tmp_path / "p.csv"
    src.write_text("0,0\n1,1\n2,2\n")
    out = tmp_path / "o.json"
    assert run(["fit", src, "--j", 1, "--out", out]) == 0
    doc = payload(out)
    assert doc["result"]["objective"] == 0.0
    assert doc["manifest"]["input_digest"]


def strip_timings(text):
    doc = json.loads(text)
    doc["manifest"].pop("timings_ms")
    return json.dumps(doc, sort_keys=True)


def test_fit_is_byte_identical(tmp_path):
    inst = gen_planted(3, 1, 1, 60, 0.05, 0.1, rng=1)
    src = write_points(tmp_path / "p.csv", inst.points)
    outs = []
    out = tmp_path / "o.json"
    for _ in range(2):
        assert run(["fit", src, "--j", 1, "--r", 3, "--seed", 4, "--out", out]) == 0
        outs.append(strip_timings(out.read_text()))
    assert outs[0] == outs[1]


def test_cluster_k1_equals_fit(tmp_path):
    inst = gen_planted(3, 1, 1, 50, 0.05, 0.0, rng=2)
    src = write_points(tmp_path / "p.csv", inst.points)
    common = ["--j", 1, "--r", 2, "--seed", 3, "--gamma", 0.1, "--anchor", "subset_means",
              "--center-samples", 3]
    assert run(["fit", src, *common, "--out", tmp_path / "f.json"]) == 0
    assert run(["cluster", src, "--k", 1, "--grid", "off", *common, "--out", tmp_path / "c.json"]) == 0
    f = payload(tmp_path / "f.json")["result"]
    c = payload(tmp_path / "c.json")["result"]
    assert f["objective"] == c["objective"]
    assert f["flat"]["anchor"] == c["flats"][0]["anchor"]


def test_grid_never_worse_than_no_grid(tmp_path):
    inst = gen_planted(3, 1, 2, 40, 0.05, 0.0, rng=3, min_separation=1.0)
    src = write_points(tmp_path / "p.csv", inst.points)
    common = ["cluster", src, "--k", 2, "--j", 1, "--r", 1, "--center-samples", 2, "--seed", 1]
    assert run([*common, "--grid", "off", "--out", tmp_path / "off.json"]) == 0
    assert run([*common, "--grid", "on", "--out", tmp_path / "on.json"]) == 0
    off = payload(tmp_path / "off.json")["result"]["objective"]
    on = payload(tmp_path / "on.json")["result"]["objective"]
    assert on <= off


def test_verify_exit_codes(tmp_path, capsys):
    assert run(["verify", "--lemma", "hyperbox", "--trials", 50, "--out", tmp_path / "v.json"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert payload(tmp_path / "v.json")["result"]["reports"][0]["pass"] is True
    assert run(["verify", "--lemma", "nope"]) == 3
    assert run(["verify", "--trials", 0]) == 3


def test_gen_round_trip(tmp_path):
    out = tmp_path / "g.csv"
    args = ["gen", "--d", 3, "--j", 1, "--k", 2, "--n", 30, "--sigma", 0.0, "--seed", 5, "--out", out]
    assert run(args) == 0
    first = out.read_bytes()
    truth = json.loads((tmp_path / "g.csv.truth.json").read_text())
    X, _ = io.read_points(out)
    flats = [io.flat_from_dict(d) for d in truth["true_flats"]]
    labels = np.array(truth["true_assignment"])
    for l, F in enumerate(flats):
        assert F.distances(X[labels == l]).max() < 1e-12
    assert run(args) == 0
    assert out.read_bytes() == first
    assert run(["gen", "--d", 3, "--j", 5, "--n", 10, "--out", out]) == 3


def test_bench_is_deterministic(tmp_path, capsys):
    for i in range(2):
        assert run(["bench", "--suite", "small", "--out", tmp_path / f"b{i}.json"]) == 0
    assert "case" in capsys.readouterr().out
    a, b = (payload(tmp_path / f"b{i}.json")["result"] for i in range(2))
    assert a == b
    assert run(["bench", "--suite", ""]) == 3
    assert run(["bench", "--suite", "huge"]) == 3


def test_error_exit_codes(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    assert run(["fit", bad, "--j", 1]) == 2
    assert run(["fit", tmp_path / "missing.csv", "--j", 1]) == 2
    good = write_points(tmp_path / "p.csv", np.random.default_rng(0).standard_normal((20, 3)))
    assert run(["fit", good, "--j", 4]) == 3
    assert run(["fit", good]) == 3
    assert run(["fit", good, "--j", 1, "--r", 12]) == 4
    assert run(["fit", good, "--j", 1, "--r", "formula"]) == 4
    assert run(["fit", good, "--j", 1, "--r", 0]) == 3


def test_json_input_matches_csv(tmp_path):
    X = np.random.default_rng(1).standard_normal((20, 2))
    csv = write_points(tmp_path / "p.csv", X)
    js = tmp_path / "p.json"
    js.write_text(json.dumps({"points": X.tolist()}))
    for src, name in ((csv, "a"), (js, "b")):
        assert run(["fit", src, "--j", 1, "--r", 2, "--out", tmp_path / f"{name}.json"]) == 0
    assert (payload(tmp_path / "a.json")["result"]
            == payload(tmp_path / "b.json")["result"])
