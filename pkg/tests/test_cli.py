import json
import math
import os
import subprocess
import sys

import pytest

from fermicavity.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, SCHEMA, main, read_csv_table
from fermicavity.thermo import binary_entropy


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_OK, err
    doc = json.loads(out)
    assert doc["schema"] == SCHEMA
    return doc


def csv_lines(text):
    lines = text.splitlines()
    assert lines[0] == f"# schema={SCHEMA}"
    meta = dict(ln[2:].split("=", 1) for ln in lines if ln.startswith("# "))
    body = [ln for ln in lines if not ln.startswith("#")]
    return meta, body


class TestExitCodes:
    def test_unknown_command(self, capsys):
        assert run(capsys, "bogus")[0] == EXIT_USAGE

    def test_missing_argument(self, capsys):
        assert run(capsys, "recurrence", "--dF", "3")[0] == EXIT_USAGE

    def test_domain_error(self, capsys):
        code, _, err = run(capsys, "thermo", "solve", "--E", "10", "--N", "200")
        assert code == EXIT_DOMAIN and "domain error" in err

    def test_bad_recurrence_input(self, capsys):
        code, _, _ = run(capsys, "recurrence", "--dF", "3", "--cmin", "0.5", "--cmax", "0.1",
                         "--deps", "1", "--eps", "0.1")
        assert code == EXIT_DOMAIN

    def test_repro_unknown_id(self, capsys):
        assert run(capsys, "repro", "fig9")[0] == EXIT_USAGE
        assert run(capsys, "repro", "fig4")[0] == EXIT_USAGE

    def test_help(self, capsys):
        assert run(capsys, "--help")[0] == EXIT_OK


class TestCommands:
    def test_thermo_solve(self, capsys):
        doc = run_json(capsys, "thermo", "solve", "--E", "21900", "--N", "200")
        assert doc["command"] == "thermo solve"
        assert doc["T"] == pytest.approx(33.42, rel=0.05)
        assert doc["mu"] == pytest.approx(200.4, rel=0.02)

    def test_thermo_solve_levels_file(self, capsys, tmp_path):
        path = tmp_path / "levels.csv"
        path.write_text("eps\n" + "\n".join(str(k) for k in range(1, 2001)) + "\n")
        doc = run_json(capsys, "thermo", "solve", "--levels", "file", "--levels-file", str(path),
                       "--E", "21900", "--N", "200")
        ref = run_json(capsys, "thermo", "solve", "--E", "21900", "--N", "200")
        assert doc["T"] == pytest.approx(ref["T"], rel=1e-8)

    def test_ehrenfest(self, capsys):
        doc = run_json(capsys, "thermo", "ehrenfest", "--eps", "50", "--volume", "10000")
        assert doc["t_E"] == pytest.approx(100 / math.sqrt(50) * math.log(1000))

    def test_ee_single_site(self, capsys):
        doc = run_json(capsys, "ee", "lattice", "--side", "1", "--skip-formula")
        rec = doc["records"][0]
        c0 = (1 / math.sqrt(2)) ** 2 / (2 * math.pi) * math.log1p(math.exp(-2))
        assert rec["N_A"] == 1
        assert rec["S"] == pytest.approx(float(binary_entropy(c0)), rel=1e-10)
        assert rec["formula_value"] is None

    def test_ee_square_with_formula(self, capsys):
        rec = run_json(capsys, "ee", "lattice", "--side", "12")["records"][0]
        assert rec["S_per_site"] == pytest.approx(0.042498, abs=5e-6)
        assert rec["gap"] == pytest.approx(abs(rec["S_per_site"] - rec["formula_value"])
                                           / rec["formula_value"])

    def test_ee_density(self, capsys):
        doc = run_json(capsys, "ee", "density", "--mu", "1", "--a-sweep", "0.5,0.25")
        gaps = [r["gap"] for r in doc["records"]]
        assert len(gaps) == 2 and gaps[1] < 1e-6

    def test_szego(self, capsys):
        doc = run_json(capsys, "szego", "--sizes", "32,64")
        g = [r["gap"] for r in doc["records"]]
        assert g[1] < g[0]

    def test_recurrence(self, capsys):
        doc = run_json(capsys, "recurrence", "--dF", "1", "--cmin", "0.1", "--cmax", "0.2",
                       "--deps", "0.5", "--eps", "0.01")
        assert doc["t_minus"] == pytest.approx(4 * math.pi)
        assert doc["t_plus"] == doc["t_minus"]
        assert doc["log10_t_minus"] == pytest.approx(math.log10(4 * math.pi))
        assert doc["inputs"]["d_F"] == 1

    def test_recurrence_huge(self, capsys):
        doc = run_json(capsys, "recurrence", "--dF", "5000", "--cmin", "0.2", "--cmax", "0.3",
                       "--deps", "1", "--eps", "0.05")
        assert doc["t_minus"] is None and doc["log10_t_minus"] > 300

    def test_corr_eval(self, capsys, tmp_path):
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("x1,y1,x2,y2\n0,0,0,0\n0,0,1.5,0\n")
        code, out, err = run(capsys, "corr", "eval", "--pairs", str(pairs), "--T", "1",
                             "--mu", "1")
        assert code == EXIT_OK, err
        meta, body = csv_lines(out)
        assert body[0] == "separation,value"
        first = [float(v) for v in body[1].split(",")]
        assert first[0] == 0.0
        assert first[1] == pytest.approx(math.log1p(math.e) / (2 * math.pi), rel=1e-10)

    def test_corr_eval_thermal_from_E_N(self, capsys, tmp_path):
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("x1,y1,x2,y2\n0,0,0,0\n")
        code, out, _ = run(capsys, "corr", "eval", "--pairs", str(pairs), "--E", "4e5",
                           "--N", "2e5", "--format", "json")
        doc = json.loads(out)
        assert code == EXIT_OK
        # diagonal of the one-particle correlation is the density N / V
        assert doc["records"][0]["value"] == pytest.approx(2e5 / 1e6, rel=1e-8)

    def test_kinetics_run(self, capsys):
        code, out, _ = run(capsys, "kinetics", "run", "--steps", "200", "--record-every", "100")
        assert code == EXIT_OK
        meta, body = csv_lines(out)
        assert body[0] == "t,sup_distance,N,E"
        rows = [[float(v) for v in ln.split(",")] for ln in body[1:]]
        assert len(rows) == 3
        assert rows[-1][1] < rows[0][1]
        assert all(abs(r[2] - 24) < 1e-10 for r in rows)
        assert float(meta["T_star"]) == pytest.approx(4.4489, abs=1e-4)

    def test_kinetics_custom_init(self, capsys, tmp_path):
        init = tmp_path / "init.csv"
        init.write_text("eps,occupation\n1,1\n2,1\n3,0\n4,0\n5,0.5\n6,0.5\n")
        code, out, err = run(capsys, "kinetics", "run", "--init", str(init), "--steps", "10",
                             "--format", "json")
        assert code == EXIT_OK, err
        assert json.loads(out)["levels"] == 6

    def test_partition_sample_small(self, capsys):
        code, out, _ = run(capsys, "partition", "sample", "--E", "2000", "--N", "40", "--Gm", "5",
                           "--samples", "200", "--burn-in", "20000", "--thinning", "100")
        assert code == EXIT_OK
        meta, body = csv_lines(out)
        assert body[0] == "m,eps_m,mean_ratio,std_ratio"
        assert float(meta["fit_T"]) > 0

    def test_partition_vershik_json(self, capsys):
        doc = run_json(capsys, "partition", "vershik", "--E", "1000", "--samples", "20",
                       "--burn-in", "20000", "--thinning", "200", "--format", "json")
        assert doc["T"] == pytest.approx(math.sqrt(12000) / math.pi)
        first = doc["records"][0]
        assert first["vershik_curve"] == pytest.approx(math.sqrt(12) / math.pi * math.log(2))


class TestOutput:
    def test_atomic_out(self, capsys, tmp_path):
        out = tmp_path / "r.json"
        code, stdout, _ = run(capsys, "recurrence", "--dF", "2", "--cmin", "0.1", "--cmax", "0.1",
                              "--deps", "1", "--eps", "0.1", "--out", str(out))
        assert code == EXIT_OK and stdout == ""
        assert json.loads(out.read_text())["schema"] == SCHEMA
        assert [p.name for p in tmp_path.iterdir()] == ["r.json"]

    def test_json_round_trip(self, capsys, tmp_path):
        out = tmp_path / "s.json"
        run(capsys, "thermo", "solve", "--E", "5000", "--N", "60", "--out", str(out))
        doc = json.loads(out.read_text())
        again = run_json(capsys, "thermo", "solve", "--E", str(doc["E"]), "--N", str(doc["N"]))
        assert again == doc

    def test_csv_reader_reads_repro(self, capsys, tmp_path):
        out = tmp_path / "v.csv"
        assert run(capsys, "repro", "volume-law", "--out", str(out))[0] == EXIT_OK
        header, table = read_csv_table(out)
        assert header[:2] == ["side", "N_A"] and table.shape == (3, 6)
        assert table[:, 1].tolist() == [144, 400, 900]


class TestConfig:
    def test_config_overrides_flags(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"schema": SCHEMA, "thermal": {"T": 1.0, "mu": -3.0},
                                   "subsystem": {"side": 2}}))
        doc = run_json(capsys, "ee", "lattice", "--side", "7", "--mu", "-1", "--skip-formula",
                       "--config", str(cfg))
        assert doc["mu"] == -3.0 and doc["records"][0]["N_A"] == 4

    def test_polygon_from_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"subsystem": {"shape": "polygon", "vertices": [
            [-0.5, -0.5], [2.5, -0.5], [2.5, 1.5], [-0.5, 1.5]]}}))
        doc = run_json(capsys, "ee", "lattice", "--config", str(cfg))
        assert doc["records"][0]["N_A"] == 6

    @pytest.mark.parametrize("payload", [
        {"thermal": {"T": 1.0}},
        {"thermal": {"T": 1.0, "mu": 0.0, "E": 3.0}},
        {"cavity": {"volume": "big"}},
        {"unknown": 1},
        {"schema": "other/2"},
    ])
    def test_schema_violation(self, capsys, tmp_path, payload):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(payload))
        code, _, _ = run(capsys, "ee", "lattice", "--side", "2", "--config", str(cfg))
        assert code == EXIT_USAGE

    def test_unreadable_config(self, capsys, tmp_path):
        code, _, _ = run(capsys, "ee", "lattice", "--config", str(tmp_path / "missing.json"))
        assert code == EXIT_USAGE


class TestRepro:
    def test_fig4_deterministic(self, capsys):
        _, first, _ = run(capsys, "repro", "fig4", "--panel", "b", "--seed", "7")
        _, second, _ = run(capsys, "repro", "fig4", "--panel", "b", "--seed", "7")
        assert first == second
        meta, body = csv_lines(first)
        assert body[0] == "m,eps_m,ratio_mean,fd_fit"
        assert meta["figure"] == "fig4b" and meta["samples"] == "10000"
        assert float(meta["fit_T"]) == pytest.approx(33.42, rel=0.05)

    def test_seed_changes_output(self, capsys):
        _, a, _ = run(capsys, "repro", "fig4b", "--seed", "1", "--samples", "200")
        _, b, _ = run(capsys, "repro", "fig4b", "--seed", "2", "--samples", "200")
        assert a != b

    def test_continuum(self, capsys):
        code, out, _ = run(capsys, "repro", "continuum-limit")
        meta, body = csv_lines(out)
        assert code == EXIT_OK and len(body) == 7

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "fermicavity", "recurrence", "--dF", "1",
                               "--cmin", "0.1", "--cmax", "0.1", "--deps", "1", "--eps", "0.1"],
                              capture_output=True, text=True, env={**os.environ})
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["t_minus"] == pytest.approx(2 * math.pi)
        bad = subprocess.run([sys.executable, "-m", "fermicavity", "nope"], capture_output=True)
        assert bad.returncode == EXIT_USAGE
