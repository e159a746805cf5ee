import json
import math

import pytest

from lattice_hvz import cli
from lattice_hvz.clusters import ClusterDecomposition, enumerate_partitions, is_refinement
from lattice_hvz.model import ModelSpec, exponential_tail_potential, model_l1, model_l2, save_model


@pytest.fixture
def l1_path(tmp_path):
    p = tmp_path / "l1.json"
    save_model(model_l1(), p)
    return str(p)


@pytest.fixture
def l2_path(tmp_path):
    p = tmp_path / "l2.json"
    save_model(model_l2(), p)
    return str(p)


def run_json(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def data_rows(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_parse_complex():
    assert cli.parse_complex("-20+5i") == complex(-20, 5)
    assert cli.parse_complex("-10") == -10
    assert cli._complexes("-20,-20+5i") == (-20, complex(-20, 5))
    with pytest.raises(Exception):
        cli.parse_complex("abc")


def test_spectrum_l1_writes_json_and_csv(tmp_path, l1_path):
    out = tmp_path / "res" / "spec.json"
    assert cli.main(["spectrum", "--model", l1_path, "--grid", "64", "--K-index", "32", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["K"] == [0.0]
    assert len(doc["intervals"]) == 1
    lo, hi = doc["intervals"][0]
    assert lo == pytest.approx(0.0, abs=1e-12) and hi == pytest.approx(4.0, abs=1e-12)
    assert len(doc["points"]) == 1 and doc["points"][0] == pytest.approx(2 - math.sqrt(5), abs=1e-9)
    table = out.with_suffix(".csv").read_text()
    assert doc["config_digest"] in table
    assert data_rows(table)[1:] == ["0.0,0.0,4.0,", f"0.0,,,{doc['points'][0]!r}"]


def test_spectrum_free_model_has_no_points(tmp_path, capsys):
    p = tmp_path / "free.json"
    save_model(model_l1(0.0), p)
    code, doc = run_json(capsys, ["spectrum", "--model", str(p), "--grid", "32"])
    assert code == 0 and doc["points"] == [] and doc["discrete"] == []


def test_input_errors(tmp_path, l1_path, capsys):
    assert cli.main(["spectrum", "--model", str(tmp_path / "missing.json")]) == 2
    assert "error" in capsys.readouterr().err
    assert cli.main(["spectrum", "--model", l1_path, "--grid", "8", "--K-index", "8"]) == 2
    assert cli.main(["spectrum", "--model", l1_path, "--grid", "8", "--kgrid", "6", "--K-index", "1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"d": 1, "N": 2, "dispersions": [], "extra": 1}))
    assert cli.main(["clusters", "--model", str(bad)]) == 2
    bad.write_text("{not json")
    assert cli.main(["clusters", "--model", str(bad)]) == 2


def test_bands_sweep(tmp_path, l1_path, capsys):
    assert cli.main(["bands", "--model", l1_path, "--grid", "64", "--sweep", "8"]) == 0
    rows = data_rows(capsys.readouterr().out)
    assert rows[0] == "K1,band_lo,band_hi,level"
    Ks = {row.split(",")[0] for row in rows[1:]}
    assert len(Ks) == 8
    assert cli.main(["bands", "--model", l1_path, "--grid", "64", "--sweep", "7"]) == 2
    assert "divide" in capsys.readouterr().err


def test_bands_single_K_matches_spectrum(tmp_path, l2_path, capsys):
    out = tmp_path / "s.json"
    assert cli.main(["spectrum", "--model", l2_path, "--grid", "12", "--out", str(out)]) == 0
    assert cli.main(["bands", "--model", l2_path, "--grid", "12", "--sweep", "1"]) == 0
    bands = capsys.readouterr().out
    assert data_rows(bands) == data_rows(out.with_suffix(".csv").read_text())


def test_clusters_lists_every_partition(l2_path, capsys):
    code, doc = run_json(capsys, ["clusters", "--model", l2_path, "--grid", "8"])
    assert code == 0
    assert len(doc["decompositions"]) == 5
    assert sum(e["two_cluster"] for e in doc["decompositions"]) == 3
    coarse = [e for e in doc["decompositions"] if e["n_blocks"] == 1]
    assert "spectrum" not in coarse[0]


def lattice_chain_census(N):
    """Chains finest -> ... with one merge per step, found by extending every chain by one merge."""
    parts = enumerate_partitions(N)
    chains = [[ClusterDecomposition.finest(N)]]
    done = []
    while chains:
        chain = chains.pop()
        done.append(chain)
        last = chain[-1]
        for D in parts:
            if len(D) == len(last) - 1 and is_refinement(last, D):
                chains.append(chain + [D])
    census = {}
    for chain in done:
        census[str(len(chain[-1]))] = census.get(str(len(chain[-1])), 0) + 1
    return census


def test_wvw_two_and_three_particles(tmp_path, l1_path, l2_path, capsys):
    code, doc = run_json(capsys, ["wvw", "--model", l1_path, "--grid", "16", "--z=-10"])
    assert code == 0 and doc["pass"]
    assert doc["identity"][0]["residual"] <= 1e-10
    code, doc = run_json(capsys, ["wvw", "--model", l2_path, "--grid", "4", "--z=-20,-20+5i"])
    assert code == 0
    assert [row["z"] for row in doc["identity"]] == [[-20.0, 0.0], [-20.0, 5.0]]
    assert doc["census"] == lattice_chain_census(3)


def test_wvw_singular_z_is_input_error(l1_path, capsys):
    # z = 0 is an eigenvalue of H0 at K = 0
    assert cli.main(["wvw", "--model", l1_path, "--grid", "4", "--z=0"]) == 2


def test_verify_box_guard(l1_path, capsys):
    assert cli.main(["verify", "--model", l1_path, "--box", "31", "--r", "4"]) != 0
    assert "box too small" in capsys.readouterr().err


def test_verify_table(tmp_path, capsys):
    m = ModelSpec(2, 1, model_l1().dispersions, (exponential_tail_potential(1, 2),))
    p = tmp_path / "tail.json"
    save_model(m, p)
    assert cli.main(["verify", "--model", str(p), "--box", "64", "--r", "1,2,4"]) == 0
    rows = data_rows(capsys.readouterr().out)
    assert rows[0] == "check,pair,r,measured,bound,pass"
    kinds = [row.split(",")[0] for row in rows[1:]]
    assert kinds.count("commutator") == 3 and kinds.count("potential") == 3
    assert all(row.endswith("true") for row in rows[1:])


def outputs(tmp_path, path, tag, extra, monkeypatch, env=None):
    if env is None:
        monkeypatch.delenv("LATTICE_HVZ_THREADS", raising=False)
    else:
        monkeypatch.setenv("LATTICE_HVZ_THREADS", env)
    got = {}
    for cmd, args in [("spectrum", ["--grid", "8"]), ("bands", ["--grid", "8", "--sweep", "4"]),
                      ("clusters", ["--grid", "6"]), ("wvw", ["--grid", "3"]),
                      ("verify", ["--box", "16", "--r", "1,2"])]:
        out = tmp_path / f"{tag}-{cmd}.out"
        assert cli.main([cmd, "--model", path, "--out", str(out), *args, *extra]) == 0
        got[cmd] = out.read_bytes()
    return got


def test_outputs_deterministic_and_carry_digest(tmp_path, l2_path, monkeypatch):
    a = outputs(tmp_path, l2_path, "a", [], monkeypatch)
    b = outputs(tmp_path, l2_path, "b", [], monkeypatch)
    c = outputs(tmp_path, l2_path, "c", ["--threads", "2"], monkeypatch)
    d = outputs(tmp_path, l2_path, "d", [], monkeypatch, env="3")
    assert a == b == c == d
    for cmd, blob in a.items():
        text = blob.decode()
        assert "config_digest" in text, cmd
        assert '"M"' in text or "grid:" in text, cmd


def test_digest_depends_on_model_and_config(tmp_path, l1_path, l2_path):
    cfg = cli.RunConfig("spectrum", l1_path, grid=8)
    d1 = cli.config_digest(cfg, model_l1())
    assert d1 == cli.config_digest(cli.RunConfig("spectrum", "elsewhere.json", grid=8, threads=4, out="x"),
                                   model_l1())
    assert d1 != cli.config_digest(cli.RunConfig("spectrum", l1_path, grid=16), model_l1())
    assert d1 != cli.config_digest(cfg, model_l1(0.5))
