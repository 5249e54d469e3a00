import json

import numpy as np
import pytest

import covdesign as cd
from covdesign.cli import main


@pytest.fixture
def workspace(tmp_path):
    graph, clustering = cd.generate_sbm([5, 5, 5, 5], 0.6, 0.1, seed=6)
    graph_path = tmp_path / "toy.el"
    cd.save_edge_list(graph, graph_path)
    clusters_path = tmp_path / "clusters.txt"
    cd.write_clustering(clustering, clusters_path)
    return tmp_path, graph, clustering, graph_path, clusters_path


def run(argv):
    return main([str(a) for a in argv])


class TestCluster:
    def test_writes_clustering_and_manifest(self, workspace, capsys):
        tmp, graph, _, graph_path, _ = workspace
        out = tmp / "louvain.txt"
        assert run(["cluster", "--graph", graph_path, "--resolution", "1.0",
                    "--seed", "3", "--out", out]) == 0
        clustering = cd.read_clustering(out, n=graph.n)
        assert clustering.k >= 2
        manifest = json.loads((tmp / "louvain.txt.manifest.json").read_text())
        assert manifest["command"] == "cluster"
        assert manifest["resolved_config"]["seed"] == 3
        assert str(graph_path) in manifest["input_digests"]

    def test_missing_graph_file_names_path(self, tmp_path, capsys):
        code = run(["cluster", "--graph", tmp_path / "absent.el",
                    "--seed", "1", "--out", tmp_path / "c.txt"])
        assert code != 0
        assert "absent.el" in capsys.readouterr().err

    def test_rerun_from_manifest_is_byte_identical(self, workspace):
        tmp, _, _, graph_path, _ = workspace
        out = tmp / "c.txt"
        run(["cluster", "--graph", graph_path, "--seed", "2", "--out", out])
        first = out.read_bytes()
        out.unlink()
        assert run(["cluster", "--from-manifest", tmp / "c.txt.manifest.json"]) == 0
        assert out.read_bytes() == first

    def test_resolution_sweep_grows_cluster_count(self, tmp_path):
        graph, _ = cd.generate_sbm([20] * 10, 0.3, 0.02, seed=11)
        graph_path = tmp_path / "sweep.el"
        cd.save_edge_list(graph, graph_path)
        ks = []
        for resolution in (2.0, 5.0, 10.0):
            out = tmp_path / f"c{resolution:g}.txt"
            assert run(["cluster", "--graph", graph_path, "--resolution",
                        resolution, "--seed", "1", "--out", out]) == 0
            ks.append(cd.read_clustering(out, n=graph.n).k)
        assert ks[0] <= ks[1] <= ks[2]


class TestOptimize:
    def test_writes_root_sidecar_and_trace(self, workspace):
        tmp, _, _, graph_path, clusters_path = workspace
        out = tmp / "root.csv"
        assert run(["optimize", "--graph", graph_path, "--clusters", clusters_path,
                    "--iters", "200", "--out", out]) == 0
        root = np.loadtxt(out, delimiter=",")
        assert np.allclose(np.linalg.norm(root, axis=1), 1.0, atol=1e-12)
        sidecar = json.loads((tmp / "root.csv.json").read_text())
        assert sidecar["omega"] == 1.0
        assert sidecar["objective_final"] <= sidecar["objective_initial"]
        trace_lines = (tmp / "root.csv.trace.csv").read_text().strip().splitlines()
        assert trace_lines[0] == "iteration,objective,bias_term,variance_term,clamped"
        final = trace_lines[-1].split(",")
        assert float(final[1]) == pytest.approx(sidecar["objective_final"])

    def test_warm_start_k_mismatch_reports_both(self, workspace, capsys):
        tmp, _, _, graph_path, clusters_path = workspace
        bad = tmp / "warm.csv"
        np.savetxt(bad, np.eye(3), delimiter=",")
        code = run(["optimize", "--graph", graph_path, "--clusters", clusters_path,
                    "--warm-start", bad, "--out", tmp / "r.csv"])
        assert code != 0
        err = capsys.readouterr().err
        assert "K=3" in err and "K=4" in err

    def test_rerun_from_manifest_is_byte_identical(self, workspace):
        tmp, _, _, graph_path, clusters_path = workspace
        out = tmp / "root.csv"
        run(["optimize", "--graph", graph_path, "--clusters", clusters_path,
             "--iters", "150", "--out", out])
        artifacts = [out, tmp / "root.csv.json", tmp / "root.csv.trace.csv"]
        first = [p.read_bytes() for p in artifacts]
        for p in artifacts:
            p.unlink()
        assert run(["optimize", "--from-manifest", tmp / "root.csv.manifest.json"]) == 0
        assert [p.read_bytes() for p in artifacts] == first


def write_sim_config(tmp, graph_path, clusters_path, root_rel="root.csv", **overrides):
    cfg = {
        "graph": graph_path.name,
        "clustering": clusters_path.name,
        "designs": [
            {"kind": "ber"},
            {"kind": "cr"},
            {"kind": "ibr", "block_size": 2},
            {"kind": "ocd", "root": root_rel},
        ],
        "model": {"kind": "linear", "alpha": 1, "beta": 1, "c": 0.5, "sigma": 0.1},
        "gammas": [0.5, 1.0, 2.0],
        "replications": 120,
        "seed": 7,
        "estimators": ["ht", "dim"],
        "out_dir": "simout",
    }
    cfg.update(overrides)
    path = tmp / "sim.json"
    path.write_text(json.dumps(cfg))
    return path


class TestSimulate:
    @pytest.fixture
    def prepared(self, workspace):
        tmp, _, _, graph_path, clusters_path = workspace
        run(["optimize", "--graph", graph_path, "--clusters", clusters_path,
             "--iters", "100", "--out", tmp / "root.csv"])
        return tmp, graph_path, clusters_path

    def test_table_shape_matches_roster_and_gamma_grid(self, prepared):
        tmp, graph_path, clusters_path = prepared
        cfg = write_sim_config(tmp, graph_path, clusters_path)
        assert run(["simulate", "--config", cfg]) == 0
        csv_path = tmp / "simout" / "report_linear_ht.csv"
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0].split(",")[0] == "method"
        assert len(lines[0].split(",")) == 1 + 3 * 3
        methods = [ln.split(",")[0] for ln in lines[1:]]
        assert methods == ["ber", "cr", "ibr-2", "ocd"]
        bundle = json.loads((tmp / "simout" / "report.json").read_text())
        assert set(bundle["minima"]) == {
            f"{e}|gamma={g:g}" for e in ("ht", "dim") for g in (0.5, 1.0, 2.0)
        }
        assert "workers" not in bundle["meta"]["config"]

    def test_reps_override_echoed(self, prepared):
        tmp, graph_path, clusters_path = prepared
        cfg = write_sim_config(tmp, graph_path, clusters_path)
        assert run(["simulate", "--config", cfg, "--reps", "60"]) == 0
        bundle = json.loads((tmp / "simout" / "report.json").read_text())
        assert bundle["meta"]["replications"] == 60

    def test_unknown_design_lists_valid_kinds(self, prepared, capsys):
        tmp, graph_path, clusters_path = prepared
        cfg = write_sim_config(tmp, graph_path, clusters_path)
        raw = json.loads(cfg.read_text())
        raw["designs"] = [{"kind": "matched-pairs"}]
        cfg.write_text(json.dumps(raw))
        assert run(["simulate", "--config", cfg]) != 0
        assert "ber, cr, ibr, ocd" in capsys.readouterr().err

    def test_workers_do_not_change_outputs(self, prepared):
        tmp, graph_path, clusters_path = prepared
        cfg = write_sim_config(tmp, graph_path, clusters_path,
                               replications=80, out_dir="w1")
        run(["simulate", "--config", cfg, "--workers", "1"])
        run(["simulate", "--config", cfg, "--workers", "2", "--out-dir", tmp / "w2"])
        for name in ("report_linear_ht.csv", "report_linear_dim.csv", "report.json"):
            assert (tmp / "w1" / name).read_bytes() == (tmp / "w2" / name).read_bytes()

    def test_rerun_from_manifest_is_byte_identical(self, prepared):
        tmp, graph_path, clusters_path = prepared
        cfg = write_sim_config(tmp, graph_path, clusters_path, replications=50)
        run(["simulate", "--config", cfg])
        out = tmp / "simout"
        names = ["report_linear_ht.csv", "report_linear_dim.csv", "report.json"]
        first = [(out / n).read_bytes() for n in names]
        for n in names:
            (out / n).unlink()
        assert run(["simulate", "--from-manifest", out / "simulate.manifest.json"]) == 0
        assert [(out / n).read_bytes() for n in names] == first

    def test_inline_louvain_clustering_spec(self, prepared):
        tmp, graph_path, clusters_path = prepared
        cfg = write_sim_config(tmp, graph_path, clusters_path, replications=30,
                               out_dir="louv")
        raw = json.loads(cfg.read_text())
        raw["clustering"] = {"resolution": 1.0, "seed": 3}
        raw["designs"] = [{"kind": "ber"}, {"kind": "cr"}]
        cfg.write_text(json.dumps(raw))
        assert run(["simulate", "--config", cfg]) == 0
        assert (tmp / "louv" / "report.json").exists()


class TestAnalyze:
    def test_exact_diagnostics_match_library(self, workspace, capsys):
        tmp, graph, clustering, graph_path, clusters_path = workspace
        assert run(["analyze", "--graph", graph_path, "--clusters", clusters_path,
                    "--design", "cr", "--gamma", "1.5", "--beta", "1.0"]) == 0
        result = json.loads(capsys.readouterr().out)
        summary = cd.build_cluster_summary(graph, clustering)
        expected_bias = cd.bias_closed_form(
            summary, cd.CompleteDesign(4).covariance(), 1.5
        )
        assert result["bias"] == pytest.approx(expected_bias, rel=1e-12)
        assert result["variance"]["method"] == "exact"
        assert result["variance_bound"] >= result["variance"]["value"]
        assert result["objective"]["f"] == pytest.approx(
            result["objective"]["bias_term"] + result["objective"]["variance_term"]
        )

    def test_writes_json_file(self, workspace):
        tmp, _, _, graph_path, clusters_path = workspace
        out = tmp / "analysis.json"
        assert run(["analyze", "--graph", graph_path, "--clusters", clusters_path,
                    "--design", "ber", "--out", out]) == 0
        assert json.loads(out.read_text())["design"] == "ber"

    def test_non_enumerable_design_falls_back_to_monte_carlo(self, tmp_path, capsys):
        # six coupled clusters: the correlated design cannot enumerate exactly
        graph, clustering = cd.generate_sbm([4] * 6, 0.6, 0.15, seed=21)
        graph_path = tmp_path / "g.el"
        clusters_path = tmp_path / "c.txt"
        cd.save_edge_list(graph, graph_path)
        cd.write_clustering(clustering, clusters_path)
        summary = cd.build_cluster_summary(graph, clustering)
        root, _ = cd.optimize(summary, cd.OptimizerConfig(iterations=100))
        root_path = tmp_path / "root.csv"
        np.savetxt(root_path, root, fmt="%.17g", delimiter=",")
        assert run(["analyze", "--graph", graph_path, "--clusters", clusters_path,
                    "--design", "ocd", "--root", root_path,
                    "--mc-reps", "3000"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["variance"]["method"] == "monte-carlo"
        assert result["variance"]["se"] > 0
        assert result["variance_bound"] >= result["variance"]["value"] \
            - 5 * result["variance"]["se"]


class TestReport:
    def test_renders_table_with_minimum_flag(self, workspace, capsys):
        tmp, _, _, graph_path, clusters_path = workspace
        run(["optimize", "--graph", graph_path, "--clusters", clusters_path,
             "--iters", "100", "--out", tmp / "root.csv"])
        cfg = write_sim_config(tmp, graph_path, clusters_path, replications=40)
        run(["simulate", "--config", cfg])
        capsys.readouterr()
        assert run(["report", "--bundle", tmp / "simout" / "report.json",
                    "--estimator", "ht"]) == 0
        out = capsys.readouterr().out
        assert "estimator: ht" in out
        assert "ber" in out and "ocd" in out and "*" in out

    def test_missing_bundle(self, tmp_path, capsys):
        assert run(["report", "--bundle", tmp_path / "nope.json"]) != 0
        assert "nope.json" in capsys.readouterr().err
