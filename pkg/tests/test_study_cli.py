"""Study configuration, end-to-end runs, CLI subcommands, determinism."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from b2bvalue.cli import main
from b2bvalue.errors import ConfigError
from b2bvalue.study import SCENARIO_COLUMNS, load_study_config, run_study

from conftest import simple_set, write_study_config


@pytest.fixture()
def study_path(tmp_path, pool_dir):
    return write_study_config(
        tmp_path / "study.json", pool_dir,
        sets=[simple_set(reps=2)], capacities=(200.0,),
    )


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _tree_bytes(root: Path, patterns=("*.csv", "*.json")) -> dict[str, bytes]:
    out = {}
    for pattern in patterns:
        for path in sorted(root.rglob(pattern)):
            out[str(path.relative_to(root))] = path.read_bytes()
    return out


class TestConfig:
    def test_parse(self, study_path):
        config = load_study_config(study_path)
        assert config.master_seed == 42
        assert config.converter_capacities_kw == (200.0,)
        assert config.grid.back_feed_limit_kw == 0.0
        assert len(config.sets) == 1
        assert config.sets[0].subsets[0].label == "pv100"

    def test_schema_error_names_path(self, tmp_path, pool_dir):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "master_seed": -1, "pool_manifest": str(pool_dir),
            "sets": [simple_set()],
        }), encoding="utf-8")
        with pytest.raises(ConfigError) as err:
            load_study_config(path)
        assert "$.master_seed" in str(err.value)

    def test_unknown_key_rejected(self, tmp_path, pool_dir):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "master_seed": 1, "pool_manifest": str(pool_dir),
            "sets": [simple_set()], "bogus": 1,
        }), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_study_config(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_study_config(path)

    def test_unlimited_sentinel(self, tmp_path, pool_dir):
        path = write_study_config(tmp_path / "s.json", pool_dir,
                                  sets=[simple_set()], back_feed_limit="unlimited")
        config = load_study_config(path)
        assert config.grid.back_feed_limit_kw == float("inf")

    def test_per_system_penetrations(self, tmp_path, pool_dir):
        path = write_study_config(
            tmp_path / "s.json", pool_dir,
            sets=[simple_set(penetrations=[[1.0, 0.5]])])
        config = load_study_config(path)
        subset = config.sets[0].subsets[0]
        assert subset.pv1.penetration == 1.0
        assert subset.pv2.penetration == 0.5
        assert subset.label == "pv100-50"


class TestRunStudy:
    def test_counting_contract_and_files(self, tmp_path, study_path):
        out = tmp_path / "out"
        manifest = run_study(load_study_config(study_path), out, jobs=1)
        scen = _read_csv(out / "results" / "scenarios_set1__cap200kw.csv")
        assert len(scen) == 4  # 2 reps x 2 systems
        assert list(scen[0].keys()) == SCENARIO_COLUMNS
        summary = _read_csv(out / "results" / "summary__cap200kw.csv")
        assert {row["metric"] for row in summary} == {"r_ec", "r_ees", "r_pes", "r_deep"}
        assert (out / "manifest.json").exists()
        assert set(manifest["files"]) == {
            "results/scenarios_set1__cap200kw.csv", "results/summary__cap200kw.csv"}

    def test_rates_numeric_or_blank(self, tmp_path, study_path):
        out = tmp_path / "out"
        run_study(load_study_config(study_path), out, jobs=1)
        for row in _read_csv(out / "results" / "scenarios_set1__cap200kw.csv"):
            for key in ("r_ec", "r_ees", "r_pes", "r_deep"):
                if row[key]:
                    float(row[key])

    def test_rerun_byte_identical_across_parallelism(self, tmp_path, pool_dir):
        config_path = write_study_config(
            tmp_path / "study.json", pool_dir,
            sets=[simple_set("a", reps=3), simple_set("b", x1=0.3, x2=0.7, reps=3)],
            capacities=(100.0, 300.0),
        )
        config = load_study_config(config_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        run_study(config, out1, jobs=1)
        run_study(config, out2, jobs=2)
        assert _tree_bytes(out1) == _tree_bytes(out2)

    def test_database_cache_reused(self, tmp_path, study_path):
        config = load_study_config(study_path)
        out = tmp_path / "out"
        run_study(config, out, jobs=1)
        stamp = sorted((out / "db").rglob("*.csv"))[0].stat().st_mtime_ns
        run_study(config, out, jobs=1)
        assert sorted((out / "db").rglob("*.csv"))[0].stat().st_mtime_ns == stamp

    def test_gen_refuses_foreign_directory(self, tmp_path, study_path):
        out = tmp_path / "precious"
        out.mkdir()
        (out / "notes.txt").write_text("mine", encoding="utf-8")
        rc = main(["gen", "--config", str(study_path), "--out", str(out)])
        assert rc == 1
        assert (out / "notes.txt").exists()

    def test_unsorted_capacities_rejected(self, tmp_path, pool_dir):
        path = write_study_config(tmp_path / "s.json", pool_dir,
                                  sets=[simple_set()], capacities=(300.0, 100.0))
        with pytest.raises(ConfigError):
            load_study_config(path)

    def test_missing_pool_no_results(self, tmp_path, pool_dir):
        config_path = write_study_config(tmp_path / "study.json",
                                         tmp_path / "nowhere.csv", sets=[simple_set()])
        out = tmp_path / "out"
        rc = main(["run", "--config", str(config_path), "--out", str(out)])
        assert rc == 1
        assert not (out / "results").exists()


class TestCli:
    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0

    def test_unknown_subcommand_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_gen_then_run_equals_run(self, tmp_path, pool_dir):
        config_path = write_study_config(
            tmp_path / "study.json", pool_dir,
            sets=[simple_set(reps=2)], capacities=(150.0,))
        db = tmp_path / "db"
        out_split = tmp_path / "split"
        out_single = tmp_path / "single"
        assert main(["gen", "--config", str(config_path), "--out", str(db)]) == 0
        assert main(["run", "--config", str(config_path), "--db", str(db),
                     "--out", str(out_split), "--jobs", "1"]) == 0
        assert main(["run", "--config", str(config_path),
                     "--out", str(out_single), "--jobs", "1"]) == 0
        split = _tree_bytes(out_split / "results")
        single = _tree_bytes(out_single / "results")
        assert split == single

    def test_gen_is_database_only(self, tmp_path, pool_dir):
        config_path = write_study_config(tmp_path / "study.json", pool_dir,
                                         sets=[simple_set(reps=1)])
        db = tmp_path / "db"
        assert main(["gen", "--config", str(config_path), "--out", str(db)]) == 0
        assert (db / "manifest.json").exists()
        assert (db / "set1" / "sub00_rep0000.csv").exists()
        assert not list(db.rglob("scenarios_*"))

    def test_run_rejects_mismatched_db(self, tmp_path, pool_dir):
        config_a = write_study_config(tmp_path / "a.json", pool_dir,
                                      sets=[simple_set(reps=1)], master_seed=1)
        config_b = write_study_config(tmp_path / "b.json", pool_dir,
                                      sets=[simple_set(reps=1)], master_seed=2)
        db = tmp_path / "db"
        assert main(["gen", "--config", str(config_a), "--out", str(db)]) == 0
        rc = main(["run", "--config", str(config_b), "--db", str(db),
                   "--out", str(tmp_path / "out")])
        assert rc == 1

    def test_marginal_grid_point_count(self, tmp_path, pool_dir):
        config_path = write_study_config(tmp_path / "study.json", pool_dir,
                                         sets=[simple_set(reps=1)])
        out = tmp_path / "out"
        rc = main(["marginal", "--config", str(config_path), "--out", str(out),
                   "--cap-min", "200", "--cap-max", "750", "--cap-step", "50",
                   "--jobs", "1"])
        assert rc == 0
        rows = _read_csv(out / "results" / "marginal.csv")
        sys1 = [r for r in rows if r["system"] == "1"]
        assert len(sys1) == 12
        assert sys1[0]["delta"] == ""
        assert sum(1 for r in sys1 if r["delta"] != "") == 11
        assert [float(r["capacity_kw"]) for r in sys1] == [200.0 + 50.0 * i for i in range(12)]

    def test_marginal_requires_grid(self, tmp_path, pool_dir):
        config_path = write_study_config(tmp_path / "study.json", pool_dir,
                                         sets=[simple_set(reps=1)], capacities=(100.0,))
        rc = main(["marginal", "--config", str(config_path),
                   "--out", str(tmp_path / "out")])
        assert rc == 1

    def test_report_collates(self, tmp_path, pool_dir):
        config_path = write_study_config(
            tmp_path / "study.json", pool_dir,
            sets=[simple_set("a", reps=2), simple_set("b", reps=2)],
            capacities=(100.0, 200.0))
        out = tmp_path / "out"
        assert main(["run", "--config", str(config_path), "--out", str(out),
                     "--jobs", "1"]) == 0
        report = tmp_path / "report"
        assert main(["report", "--results", str(out / "results"),
                     "--out", str(report)]) == 0
        rows = _read_csv(report / "all_scenarios__cap100kw.csv")
        assert {r["set"] for r in rows} == {"a", "b"}
        assert len(rows) == 8  # 2 sets x 2 reps x 2 systems
        summary = _read_csv(report / "all_summary.csv")
        assert {r["capacity_kw"] for r in summary} == {"100", "200"}
        assert (report / "marginal.csv").exists()

    def test_hosting_cli_with_network(self, tmp_path, capsys):
        net = {
            "buses": [{"id": "src", "v_nom": 7200}, {"id": "b1", "v_nom": 7200},
                      {"id": "b2", "v_nom": 7200}],
            "lines": [{"from": "src", "to": "b1", "r_ohm": 0.4, "x_ohm": 0.2},
                      {"from": "b1", "to": "b2", "r_ohm": 0.3, "x_ohm": 0.1}],
            "source": {"id": "src", "v": 7200},
        }
        net_path = tmp_path / "net.json"
        net_path.write_text(json.dumps(net), encoding="utf-8")
        out_csv = tmp_path / "hosting.csv"
        rc = main(["hosting", "--network", str(net_path), "--beta", "b1",
                   "--weak", "b2", "--dp-kw", "2000", "--agg", "min",
                   "--base-kw", "1000", "--out", str(out_csv)])
        assert rc == 0
        captured = capsys.readouterr().out
        # p(b2,b1) = 0.4/7200, p(b2,b2) = 0.7/7200 -> delta = 2000 * 4/7
        assert "1142.8571" in captured
        rows = _read_csv(out_csv)
        kinds = {r["record"] for r in rows}
        assert kinds == {"delta_kw", "aggregate_min_kw", "r_cder"}

    def test_hosting_cli_with_vlsm_csv(self, tmp_path, capsys):
        path = tmp_path / "vlsm.csv"
        path.write_text(",b1,b2\nb1,0.0007919,0.000076401\nb2,0.000076401,0.0007919\n",
                        encoding="utf-8")
        rc = main(["hosting", "--vlsm", str(path), "--beta", "b1", "--weak", "b2",
                   "--dp-kw", "2000"])
        assert rc == 0
        assert "192.9562" in capsys.readouterr().out


class TestHostingInStudy:
    def test_hosting_csv_written(self, tmp_path, pool_dir):
        net = {
            "buses": [{"id": "src", "v_nom": 7200}, {"id": "b1", "v_nom": 7200},
                      {"id": "b2", "v_nom": 7200}],
            "lines": [{"from": "src", "to": "b1", "r_ohm": 0.4, "x_ohm": 0.2},
                      {"from": "b1", "to": "b2", "r_ohm": 0.3, "x_ohm": 0.1}],
            "source": {"id": "src", "v": 7200},
        }
        (tmp_path / "net.json").write_text(json.dumps(net), encoding="utf-8")
        config_path = write_study_config(
            tmp_path / "study.json", pool_dir, sets=[simple_set(reps=1)],
            hosting={"network": "net.json", "beta": "b1", "weak_buses": ["b2"],
                     "delta_p_kw": 2000.0, "aggregate": "min",
                     "base_capacity_kw": 1000.0,
                     "baseline_voltages_v": {"b2": 7250.0}},
        )
        out = tmp_path / "out"
        run_study(load_study_config(config_path), out, jobs=1)
        rows = _read_csv(out / "results" / "hosting.csv")
        delta_rows = [r for r in rows if r["record"] == "delta_kw"]
        assert len(delta_rows) == 1
        assert float(delta_rows[0]["v_prime_v"]) < 7250.0
