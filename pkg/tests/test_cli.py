import json
import os

import pytest

from propgraph import graph as G
from propgraph.cli import main
from propgraph.report import Bundle, atomic_write, compare_bundles, load_manifest


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("PROPGRAPH_OUT_DIR", str(tmp_path / "env-out"))
    return tmp_path


def report(path):
    with open(os.path.join(path, "report.json")) as fh:
        return json.load(fh)


def write_graph(tmp_path, g, name="g.edgelist"):
    p = tmp_path / name
    p.write_text(g.to_edgelist())
    return str(p)


class TestBundle:
    def test_manifest_hashes_and_timestamp(self, tmp_path):
        b = Bundle("x", {"a": 1}, 0)
        b.add("s", {"v": [1, 2]})
        b.add_csv("t", "# op\nx\n1\n")
        m = b.write(str(tmp_path))
        assert set(m["files"]) == {"report.json", "t.csv"}
        assert "created" in load_manifest(str(tmp_path))
        assert "created" not in (tmp_path / "report.json").read_text()

    def test_csv_requires_header(self):
        with pytest.raises(ValueError, match="provenance"):
            Bundle("x", {}, 0).add_csv("t", "x\n1\n")

    def test_format_selection(self, tmp_path):
        b = Bundle("x", {}, 0, "csv")
        b.add_csv("t", "# op\n")
        assert set(b.files()) == {"t.csv"}

    def test_compare_ignores_created(self, tmp_path):
        for d in "ab":
            Bundle("x", {"k": 2}, 1).write(str(tmp_path / d))
        assert compare_bundles(str(tmp_path / "a"), str(tmp_path / "b")) == []
        (tmp_path / "b" / "report.json").write_text("{}")
        assert compare_bundles(str(tmp_path / "a"), str(tmp_path / "b")) == ["report.json"]

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        atomic_write(str(tmp_path / "f.txt"), "hi")
        assert os.listdir(tmp_path) == ["f.txt"]

    def test_nan_rejected(self, tmp_path):
        b = Bundle("x", {}, 0)
        b.add("bad", float("nan"))
        with pytest.raises(ValueError):
            b.write(str(tmp_path))


class TestGen:
    def test_barbell(self, out):
        assert main(["gen", "--family", "barbell", "--m", "4", "--out", str(out / "b.el")]) == 0
        assert G.load_graph(str(out / "b.el")).num_edges == 13
        assert G.load_graph(str(out / "b.json")).num_edges == 13

    def test_causal_arcs(self, out):
        assert main(["gen", "--family", "causal", "--n", "3", "--out", str(out / "c.el")]) == 0
        g = G.load_graph(str(out / "c.el"))
        assert g.directed and g.num_edges == 6

    def test_env_out_dir(self, out):
        assert main(["gen", "--family", "path", "--n", "3"]) == 0
        assert (out / "env-out" / "path.edgelist").exists()

    def test_invalid_family(self, out, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "--family", "star", "--n", "3"])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_missing_param(self, out):
        assert main(["gen", "--family", "grid", "--rows", "2"]) == 3


class TestAnalyze:
    def test_complete4(self, out):
        path = write_graph(out, G.complete(4))
        assert main(["analyze", path, "--out-dir", str(out / "r")]) == 0
        sp = report(out / "r")["sections"]["spectral"]
        assert sp["spectral_gap"] == pytest.approx(4 / 3)
        assert sp["cheeger_exact"]["fraction"] == "2/3"
        assert sp["cheeger_inequality"] == "PASS"

    def test_barbell_bridge(self, out):
        path = write_graph(out, G.barbell(4))
        assert main(["analyze", path, "--curvature", "--resistance", "--out-dir", str(out / "r")]) == 0
        s = report(out / "r")["sections"]
        assert s["curvature"]["min_edge"] == [3, 4]
        assert s["resistance"]["max_resistance_edge"] == [3, 4]
        assert "spectral" not in s

    def test_csvs_have_headers(self, out):
        path = write_graph(out, G.path(4))
        main(["analyze", path, "--out-dir", str(out / "r")])
        for name in os.listdir(out / "r"):
            if name.endswith(".csv"):
                assert (out / "r" / name).read_text().startswith("#")

    def test_empty_file(self, out):
        (out / "e.el").write_text("")
        assert main(["analyze", str(out / "e.el"), "--out-dir", str(out / "r")]) == 3

    def test_missing_file(self, out):
        assert main(["analyze", str(out / "nope.el")]) == 3

    def test_disconnected_refused(self, out):
        path = write_graph(out, G.build_graph(4, [(0, 1), (2, 3)]))
        assert main(["analyze", path, "--spectral", "--out-dir", str(out / "r")]) == 4
        assert report(out / "r")["sections"]["spectral"]["verdict"] == "REFUSED"

    def test_cheeger_too_large(self, out, capsys):
        path = write_graph(out, G.path(21))
        assert main(["analyze", path, "--cheeger-exact", "--out-dir", str(out / "r")]) == 4
        assert "n=21" in capsys.readouterr().err

    def test_format_json_only(self, out):
        path = write_graph(out, G.path(3))
        main(["analyze", path, "--format", "json", "--out-dir", str(out / "r")])
        assert sorted(os.listdir(out / "r")) == ["manifest.json", "report.json"]


class TestBounds:
    def cfg(self, out, **kw):
        p = out / "cfg.json"
        p.write_text(json.dumps({"arch": "mean_gnn", "layers": 2, "dim": 3, "linear_mode": True, **kw}))
        return str(p)

    def test_p3_pass(self, out):
        path = write_graph(out, G.path(3))
        assert main(["bounds", path, "--config", self.cfg(out), "--depth", "2", "--out-dir", str(out / "r")]) == 0
        v = report(out / "r")["sections"]["verdict"]
        assert v["overall"] == "PASS" and v["label"] == "exact"

    def test_half_alpha_fails(self, out):
        path = write_graph(out, G.path(3))
        main(["bounds", path, "--config", self.cfg(out), "--depth", "1", "--alpha-scale", "0.5",
              "--out-dir", str(out / "r")])
        assert report(out / "r")["sections"]["verdict"]["overall"] == "FAIL"

    def test_zero_spec(self, out):
        path = write_graph(out, G.path(3))
        main(["bounds", path, "--config", self.cfg(out, weight_scale=0), "--depth", "2", "--alpha", "0",
              "--beta", "0", "--out-dir", str(out / "r")])
        s = report(out / "r")["sections"]
        assert s["verdict"]["overall"] == "PASS"
        assert not any(map(any, s["empirical"]["from_input"]))
        assert not any(map(any, s["bound_power"]["values"]))

    def test_transformer_config_rejected(self, out):
        path = write_graph(out, G.path(3))
        assert main(["bounds", path, "--config", self.cfg(out, arch="transformer", linear_mode=False)]) == 3

    def test_depth_beyond_model(self, out):
        path = write_graph(out, G.path(3))
        assert main(["bounds", path, "--config", self.cfg(out), "--depth", "5"]) == 3


class TestSimulate:
    def test_collapse_sweep(self, out):
        assert main(["simulate", "--arch", "transformer", "--causal", "--uniform", "--linear", "--sweep",
                     "lengths", "2..64", "--diag", "last_token_collapse", "--out-dir", str(out / "r")]) == 0
        lines = (out / "r" / "last_token_collapse.csv").read_text().splitlines()
        rows = [tuple(map(float, line.split(","))) for line in lines[2:]]
        assert [int(n) for n, _ in rows] == [2, 4, 8, 16, 32, 64]
        c = rows[0][0] * rows[0][1]
        assert all(v * n == pytest.approx(c, rel=1e-9) for n, v in rows)

    def test_sink_25_48(self, out):
        assert main(["simulate", "--diag", "sink", "--n", "4", "--uniform", "--out-dir", str(out / "r")]) == 0
        assert report(out / "r")["sections"]["sink"]["sink_score"] == pytest.approx(25 / 48)

    def test_oversmoothing_monotone(self, out):
        assert main(["simulate", "--diag", "oversmoothing", "--arch", "mean_gnn", "--layers", "32",
                     "--out-dir", str(out / "r")]) == 0
        vals = report(out / "r")["sections"]["oversmoothing"]["values"]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("diag", ["runway", "underreaching", "contraction"])
    def test_other_diags(self, out, diag):
        arch = "mean_gnn" if diag == "underreaching" else "transformer"
        assert main(["simulate", "--arch", arch, "--diag", diag, "--n", "5", "--layers", "2",
                     "--out-dir", str(out / "r")]) == 0

    def test_bad_diag(self, out):
        assert main(["simulate", "--diag", "entropy"]) == 3

    def test_bad_config_combo(self, out):
        assert main(["simulate", "--arch", "transformer", "--no-causal", "--pause", "2"]) == 3


class TestRewire:
    def test_p3_and_replay(self, out):
        path = write_graph(out, G.path(3))
        assert main(["rewire", path, "--objective", "spectral_gap", "--budget", "1", "--out-dir", str(out / "a")]) == 0
        plan = json.loads((out / "a" / "plan.json").read_text())
        assert [s["edge"] for s in plan["steps"]] == [[0, 2]]
        assert plan["steps"][0]["after"] == pytest.approx(1.5)
        assert main(["rewire", "--replay", str(out / "a" / "plan.json"), "--out-dir", str(out / "b")]) == 0
        assert (out / "a" / "rewired.edgelist").read_bytes() == (out / "b" / "rewired.edgelist").read_bytes()

    def test_budget_zero(self, out):
        path = write_graph(out, G.path(3))
        assert main(["rewire", path, "--budget", "0", "--out-dir", str(out / "a")]) == 0
        assert json.loads((out / "a" / "plan.json").read_text())["steps"] == []

    def test_complete_rejected(self, out):
        assert main(["rewire", write_graph(out, G.complete(3))]) == 3


class TestReport:
    @pytest.mark.parametrize("argv", [
        ["analyze", "{g}"],
        ["rewire", "{g}", "--objective", "resistance", "--budget", "2"],
        ["simulate", "--diag", "sink", "--diag", "contraction", "--n", "6", "--seed", "4"],
    ])
    def test_regenerated_bundle_identical(self, out, argv):
        g = write_graph(out, G.barbell(3))
        argv = [a.format(g=g) for a in argv]
        assert main(argv + ["--out-dir", str(out / "a")]) == 0
        assert main(["report", str(out / "a"), "--regenerate", "--out-dir", str(out / "b")]) == 0
        assert compare_bundles(str(out / "a"), str(out / "b")) == []

    def test_show_only(self, out, capsys):
        main(["analyze", write_graph(out, G.path(3)), "--out-dir", str(out / "a")])
        assert main(["report", str(out / "a" / "manifest.json")]) == 0
        assert "report.json" in capsys.readouterr().out

    def test_missing_manifest(self, out):
        assert main(["report", str(out / "none")]) == 3


def test_verify_subset(out, capsys):
    assert main(["verify", "--only", "7", "--only", "8", "--no-repro", "--out-dir", str(out / "v")]) == 0
    text = capsys.readouterr().out
    assert "[PASS]  7." in text and "[PASS]  8." in text
