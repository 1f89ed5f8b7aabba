from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from tracube.cli import EXIT_IO, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, run, verify_store
from tracube.container import load
from tracube.events import Tracks
from tracube.oracle import OracleStore


def call(*argv):
    out = io.StringIO()
    code = run([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    events, store = d / "events.csv", d / "s.3dgr"
    assert call("gen", "--objects", 12, "--instants", 400, "--side", 64, "--seed", 1,
                "--gap-prob", 0.01, "--out", events)[0] == EXIT_OK
    code, text = call("build", "--input", events, "--out", store, "--period", 50)
    assert code == EXIT_OK and "built" in text
    return events, store


def test_verify_passes(corpus):
    events, store = corpus
    code, text = call("verify", "--input", events, "--store", store, "--queries", 40, "--seed", 1)
    assert code == EXIT_OK, text


def test_verify_reports_mismatch(corpus, tmp_path):
    events, store = corpus
    other = tmp_path / "other.csv"
    call("gen", "--objects", 12, "--instants", 400, "--side", 64, "--seed", 2, "--out", other)
    code, _ = call("verify", "--input", other, "--store", store, "--queries", 10)
    assert code == EXIT_MISMATCH


def test_verify_store_counts(corpus):
    events, store = corpus
    st = load(store)
    with open(events) as f:
        oracle = OracleStore(Tracks.read_csv(f, n_instants=st.n_instants))
    counts = verify_store(st, oracle, 20, seed=3)
    assert counts and all(v == 0 for v in counts.values())
    assert any(label.endswith("no-prune") for label in counts)


def test_queries(corpus):
    events, store = corpus
    st = load(store)
    with open(events) as f:
        oracle = OracleStore(Tracks.read_csv(f, n_instants=st.n_instants))
    ident = st.header.ids[3]
    code, text = call("query", "position", "--store", store, "--object", ident, "--t", 120)
    rows = list(csv.reader(io.StringIO(text)))
    assert code == EXIT_OK and rows[0] == ["id", "instant", "cx", "cy", "cz"]
    want = oracle.position(3, 120)
    assert rows[1][2:] == ([str(v) for v in want] if want else ["", "", ""])

    code, text = call("query", "trajectory", "--store", store, "--object", ident, "--from", 10, "--to", 60)
    assert code == EXIT_OK and len(text.splitlines()) == 52

    box = "0,0,0,40,40,40"
    code, text = call("query", "slice", "--store", store, "--box", box, "--t", 77)
    got = {r[0] for r in list(csv.reader(io.StringIO(text)))[1:]}
    assert got == {st.header.ids[o] for o in oracle.time_slice((0, 0, 0, 40, 40, 40), 77)}

    for extra in ([], ["--no-prune"]):
        code, text = call("query", "interval", "--store", store, "--box", box, "--from", 5, "--to", 300, *extra)
        got = {r[0] for r in list(csv.reader(io.StringIO(text)))[1:]}
        assert got == {st.header.ids[o] for o in oracle.time_interval((0, 0, 0, 40, 40, 40), 5, 300)}


def test_stats_sweep_bench(corpus):
    events, store = corpus
    code, text = call("stats", "--store", store, "--json")
    info = json.loads(text)
    assert code == EXIT_OK and 0 < info["ratio"] < 1 and info["period"] == 50
    code, text = call("sweep", "--input", events, "--periods", "20,50", "--json")
    rows = json.loads(text)
    assert code == EXIT_OK and [r["period"] for r in rows] == [20, 50]
    code, text = call("bench", "--store", store, "--suite", "slice-small", "--queries", 20, "--json")
    b = json.loads(text)
    assert code == EXIT_OK and b["queries"] == 20 and b["p50_ms"] <= b["p99_ms"]


def test_error_exit_codes(corpus, tmp_path):
    events, store = corpus
    assert call("query", "position", "--store", store, "--object", "nobody", "--t", 0)[0] == EXIT_USAGE
    assert call("query", "slice", "--store", store, "--t", 0)[0] == EXIT_USAGE
    assert call("stats", "--store", tmp_path / "missing")[0] == EXIT_IO
    bad = tmp_path / "bad.3dgr"
    bad.write_bytes(store.read_bytes()[:-7])
    assert call("stats", "--store", bad)[0] == EXIT_IO
    assert call("build", "--input", events, "--out", tmp_path / "x", "--period", 1)[0] == EXIT_USAGE
    assert call("frobnicate")[0] == EXIT_USAGE
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n")
    assert call("build", "--input", junk, "--out", tmp_path / "y")[0] == EXIT_IO


def test_raw_input_with_interpolation(tmp_path):
    raw = tmp_path / "raw.csv"
    rows = ["id,t,x,y,z"] + [f"p,{t * 15},{t * 5000},0,0" for t in (0, 1, 2)] + [f"p,{t * 15},{t * 5000},0,0" for t in range(80, 83)]
    raw.write_text("\n".join(rows) + "\n")
    plain, filled = tmp_path / "a.3dgr", tmp_path / "b.3dgr"
    assert call("build", "--input", raw, "--out", plain)[0] == EXIT_OK
    assert call("build", "--input", raw, "--out", filled, "--interpolate")[0] == EXIT_OK
    assert load(plain).codeword_count() == 1 and load(filled).codeword_count() == 0
    code, text = call("query", "position", "--store", filled, "--object", "p", "--t", 40)
    assert text.splitlines()[1] == "p,40,40,0,0"
    assert call("verify", "--input", raw, "--store", filled, "--interpolate", "--queries", 10)[0] == EXIT_OK


def test_console_entry_point(corpus):
    _, store = corpus
    res = subprocess.run([sys.executable, "-m", "tracube.cli", "stats", "--store", str(store)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "ratio" in res.stdout
