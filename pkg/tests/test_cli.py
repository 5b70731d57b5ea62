"""CLI: file formats, round trips, exit codes, manifest reproducibility."""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from geolatnet.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    main,
    read_config,
    read_edge_list,
    ConfigError,
    ParseError,
)

DATA = Path(__file__).resolve().parent.parent / "data"


def run_cli(*argv):
    return main(list(argv))


class TestEdgeList:
    def test_parse_bundled_florentine(self):
        net = read_edge_list(DATA / "florentine.txt")
        assert net.n == 15
        assert net.n_edges == 20

    def test_malformed_line_names_position(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("1 2\na b c\n")
        with pytest.raises(ParseError, match="bad.txt:2"):
            read_edge_list(p)

    def test_comments_and_duplicates(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("# comment\n1 2\n2 1  # duplicate\n\n2 3\n")
        net = read_edge_list(p)
        assert net.n == 3
        assert net.n_edges == 2

    def test_nodes_override_for_isolated(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("1 2\n")
        net = read_edge_list(p, n_nodes=5)
        assert net.n == 5

    def test_self_tie_rejected(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("3 3\n")
        with pytest.raises(ParseError):
            read_edge_list(p)


class TestConfig:
    def test_parse(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("geometry = spherical\niterations = 500\n# note\nkappa_z = 2.5\n")
        cfg = read_config(p)
        assert cfg == {"geometry": "spherical", "iterations": 500, "kappa_z": 2.5}

    def test_unknown_key_diagnostic(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("geometry = spherical\nwibble = 3\n")
        with pytest.raises(ConfigError, match="run.cfg:2"):
            read_config(p)

    def test_bad_value_diagnostic(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("iterations = soon\n")
        with pytest.raises(ConfigError, match="expects int"):
            read_config(p)


class TestGenerate:
    def test_empty_graph_at_saturated_alpha(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            "generate", "--geometry", "spherical", "--nodes", "20",
            "--alpha", "-50", "--seed", "1", "--out", str(out),
        )
        assert code == EXIT_OK
        lines = (out / "edges.txt").read_text().splitlines()
        assert lines == ["# i j (1-based node ids, undirected)"]

    def test_byte_identical_reruns(self, tmp_path):
        args = (
            "generate", "--geometry", "hyperbolic", "--nodes", "12",
            "--alpha", "0.5", "--seed", "9",
        )
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*args, "--out", str(a)) == EXIT_OK
        assert run_cli(*args, "--out", str(b)) == EXIT_OK
        for name in ("edges.txt", "truth.json", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_density_sanity_band(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            "generate", "--geometry", "spherical", "--nodes", "30",
            "--alpha", "1.0", "--kappa_z", "5", "--seed", "3", "--out", str(out),
        )
        assert code == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        density = manifest["n_edges"] / (30 * 29 / 2)
        assert 0.05 < density < 0.95

    def test_missing_required_is_usage_error(self, tmp_path):
        assert run_cli("generate", "--out", str(tmp_path / "x")) == EXIT_USAGE


@pytest.fixture(scope="module")
def florentine_fit(tmp_path_factory):
    out = tmp_path_factory.mktemp("fit") / "mcmc"
    code = run_cli(
        "fit", "mcmc", "--edges", str(DATA / "florentine.txt"),
        "--geometry", "spherical", "--iterations", "2000", "--thin", "10",
        "--burnin", "1000", "--seed", "5", "--out", str(out),
    )
    assert code == EXIT_OK
    return out


@pytest.fixture(scope="module")
def florentine_bbvi(tmp_path_factory):
    out = tmp_path_factory.mktemp("fit") / "bbvi"
    code = run_cli(
        "fit", "bbvi", "--edges", str(DATA / "florentine.txt"),
        "--geometry", "spherical", "--iterations", "120", "--samples", "8",
        "--seed", "5", "--out", str(out),
    )
    assert code == EXIT_OK
    return out


class TestFit:
    def test_outputs_exist(self, florentine_fit):
        for name in ("trace.csv", "latent_trace.csv", "state.json", "manifest.json"):
            assert (florentine_fit / name).exists()

    def test_trace_csv_round_trips(self, florentine_fit):
        with open(florentine_fit / "trace.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 200
        for row in rows[:5]:
            int(row["iter"])
            float(row["alpha"])
            float(row["loglik"])

    def test_state_records_estimates(self, florentine_fit):
        state = json.loads((florentine_fit / "state.json").read_text())
        assert state["method"] == "mcmc"
        assert len(state["latent_mean"]) == 15
        assert state["acceptance_rates"]["alpha"] > 0

    def test_manifest_reproducibility(self, florentine_fit, tmp_path):
        manifest = json.loads((florentine_fit / "manifest.json").read_text())
        edges = DATA / "florentine.txt"
        assert manifest["edges_sha256"] == hashlib.sha256(
            b"".join(
                f"{i} {j}\n".encode()
                for i, j in sorted(
                    tuple(sorted(map(int, l.split())))
                    for l in edges.read_text().splitlines()[1:]
                )
            )
        ).hexdigest()
        rerun = tmp_path / "rerun"
        s = manifest["settings"]
        code = run_cli(
            "fit", "mcmc", "--edges", str(edges),
            "--geometry", s["geometry"], "--iterations", str(s["iterations"]),
            "--thin", str(s["thin"]), "--burnin", str(s["burnin"]),
            "--seed", str(manifest["seed"]), "--out", str(rerun),
        )
        assert code == EXIT_OK
        assert (rerun / "trace.csv").read_bytes() == (florentine_fit / "trace.csv").read_bytes()
        assert (rerun / "latent_trace.csv").read_bytes() == (
            florentine_fit / "latent_trace.csv"
        ).read_bytes()

    def test_bbvi_outputs(self, florentine_bbvi):
        state = json.loads((florentine_bbvi / "state.json").read_text())
        assert state["method"] == "bbvi"
        assert "m_tilde" in state and "sigma_tilde" in state
        with open(florentine_bbvi / "elbo.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 120
        float(rows[-1]["elbo"])

    def test_malformed_edges_exit_code(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("a b c\n")
        code = run_cli(
            "fit", "mcmc", "--edges", str(p), "--geometry", "spherical",
            "--iterations", "10", "--out", str(tmp_path / "o"),
        )
        assert code == EXIT_DATA

    def test_multichain_layout(self, tmp_path):
        out = tmp_path / "chains"
        code = run_cli(
            "fit", "mcmc", "--edges", str(DATA / "florentine.txt"),
            "--geometry", "spherical", "--iterations", "200", "--thin", "10",
            "--seed", "5", "--chains", "2", "--out", str(out),
        )
        assert code == EXIT_OK
        assert (out / "chain_00" / "trace.csv").exists()
        assert (out / "chain_01" / "trace.csv").exists()
        a = (out / "chain_00" / "trace.csv").read_bytes()
        b = (out / "chain_01" / "trace.csv").read_bytes()
        assert a != b  # distinct chain seeds


class TestPredict:
    def test_predict_from_mcmc(self, florentine_fit, tmp_path):
        out = tmp_path / "pred.csv"
        code = run_cli(
            "predict", "--in", str(florentine_fit),
            "--edges", str(DATA / "florentine.txt"), "--out", str(out),
        )
        assert code == EXIT_OK
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 15 * 14 // 2
        for row in rows:
            assert row["y"] in ("0", "1")
            assert 0.0 <= float(row["mean_p"]) <= 1.0

    def test_predict_from_bbvi(self, florentine_bbvi, tmp_path):
        out = tmp_path / "pred.csv"
        code = run_cli(
            "predict", "--in", str(florentine_bbvi),
            "--edges", str(DATA / "florentine.txt"), "--out", str(out),
        )
        assert code == EXIT_OK
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 105

    def test_missing_fit_dir(self, tmp_path):
        code = run_cli(
            "predict", "--in", str(tmp_path / "nope"),
            "--edges", str(DATA / "florentine.txt"),
        )
        assert code == EXIT_DATA


class TestDatasetsMatchNetworkx:
    def test_florentine(self):
        nx = pytest.importorskip("networkx")
        g = nx.florentine_families_graph()
        names = sorted(g.nodes())
        idx = {n: i for i, n in enumerate(names)}
        expected = {tuple(sorted((idx[u], idx[v]))) for u, v in g.edges()}
        from geolatnet.datasets import florentine_marriage

        assert set(florentine_marriage().edge_list()) == expected

    def test_karate(self):
        nx = pytest.importorskip("networkx")
        g = nx.karate_club_graph()
        expected = {tuple(sorted((u, v))) for u, v in g.edges()}
        from geolatnet.datasets import karate_club

        assert set(karate_club().edge_list()) == expected

    def test_bundled_files_match_datasets(self):
        from geolatnet.datasets import florentine_marriage, karate_club

        assert set(read_edge_list(DATA / "florentine.txt").edge_list()) == set(
            florentine_marriage().edge_list()
        )
        assert set(read_edge_list(DATA / "karate.txt").edge_list()) == set(
            karate_club().edge_list()
        )
