from __future__ import annotations

import json

import pytest

from impersonation import harness as Hn
from impersonation.cli import main


def cfg(**kw) -> Hn.ExperimentConfig:
    kw.setdefault("scheme", "clifford")
    if "epsilon" not in kw:
        kw.setdefault("K", 4)
    return Hn.ExperimentConfig(**kw)


class TestConfig:
    def test_exactly_one_of_K_and_epsilon(self):
        with pytest.raises(Hn.ConfigError):
            Hn.ExperimentConfig(scheme="clifford")
        with pytest.raises(Hn.ConfigError):
            Hn.ExperimentConfig(scheme="clifford", K=4, epsilon=0.5)

    @pytest.mark.parametrize("kw", [{"K": 0}, {"epsilon": 1.0}, {"epsilon": 0.0}])
    def test_ranges(self, kw):
        with pytest.raises(Hn.ConfigError):
            Hn.ExperimentConfig(scheme="clifford", **kw)

    def test_unknown_scheme(self):
        with pytest.raises(Hn.ConfigError):
            cfg(scheme="nope")

    def test_epsilon_resolves_budget(self):
        rec = Hn.run_experiment(cfg(scheme="constant", n=2, ny=2, epsilon=0.5))
        assert rec.status == "ok" and rec.K == 24
        assert rec.epsilon_implied <= 0.5

    def test_fixed_t_schemes(self):
        rec = Hn.run_experiment(cfg(scheme="epr-auth", n=1, t=1))
        assert rec.status == "error" and "t=2" in rec.error


class TestRunExperiment:
    def test_product_state_distance_zero(self):
        rec = Hn.run_experiment(cfg(scheme="constant", n=1, K=6))
        assert rec.status == "ok" and rec.distance == pytest.approx(0, abs=1e-12)
        assert rec.passed and rec.theorem_backed

    def test_cap_errors_become_records(self):
        rec = Hn.run_experiment(cfg(scheme="haar", n=2, ny=2, qubit_cap=4))
        assert rec.status == "error" and "QubitCapExceeded" in rec.error
        rec = Hn.run_experiment(cfg(scheme="haar", K=6, branch_cap=4))
        assert rec.status == "error" and "BranchCapExceeded" in rec.error

    def test_qubit_cap_restored(self):
        from impersonation.qcore import qubit_cap
        before = qubit_cap()
        Hn.run_experiment(cfg(qubit_cap=3))
        assert qubit_cap() == before

    def test_fixed_k_trigger_is_diagnostic(self):
        rec = Hn.run_experiment(cfg(scheme="trigger", n=3, horizon=8, K=8, fixed_k=1))
        assert rec.status == "ok" and not rec.theorem_backed
        assert rec.distance == pytest.approx(1 - 1 / 7)
        table, summary, code = Hn.report([rec])
        assert "fixed-k diagnostic" in table and code == Hn.EXIT_OK

    def test_ladder_recorded(self):
        rec = Hn.run_experiment(cfg(t=2, ladder_k=1))
        assert len(rec.ladder) == 2
        for r in rec.ladder:
            assert r["adjacent"] <= r["pinsker"] + 1e-8

    def test_wall_time_only_with_timing(self):
        rec = Hn.run_experiment(cfg())
        assert "wall_time" not in json.loads(rec.to_json())
        assert json.loads(rec.to_json(timing=True))["wall_time"] >= 0


class TestSweepAndReport:
    def test_empty_sweep_writes_header_only(self, tmp_path):
        out = tmp_path / "empty.jsonl"
        assert Hn.sweep([], out) == []
        lines = out.read_text().splitlines()
        assert len(lines) == 1 and json.loads(lines[0])["format"] == Hn.FORMAT
        assert Hn.load_records(out) == []
        assert out.with_suffix(".csv").read_text().startswith("index,scheme")

    def test_failure_isolated_and_order_kept(self, tmp_path):
        cfgs = [cfg(seed=0), cfg(scheme="trigger", n=2, horizon=8, K=4), cfg(seed=1)]
        recs = Hn.sweep(cfgs, tmp_path / "s.jsonl")
        assert [r.status for r in recs] == ["ok", "error", "ok"]
        assert [r.index for r in recs] == [0, 1, 2]
        loaded = Hn.load_records(tmp_path / "s.jsonl")
        assert [r.index for r in loaded] == [0, 1, 2]

    def test_parallel_matches_serial(self, tmp_path):
        cfgs = [cfg(seed=s) for s in range(3)]
        Hn.sweep(cfgs, tmp_path / "a.jsonl")
        Hn.sweep(cfgs, tmp_path / "b.jsonl", jobs=2)
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_report_sorted_by_slack(self, tmp_path):
        recs = Hn.sweep([cfg(seed=s, K=K) for s in (0, 2) for K in (2, 8)], tmp_path / "r.jsonl")
        table, summary, code = Hn.report(recs)
        assert code == Hn.EXIT_OK and summary["ok"] == 4 and summary["failed"] == []
        slacks = [r.slack for r in sorted(recs, key=lambda r: r.slack)]
        assert slacks == sorted(slacks)
        assert len(table.splitlines()) == 5

    def test_report_flags_failure(self, tmp_path):
        rec = Hn.run_experiment(cfg())
        rec.passed = False
        _, summary, code = Hn.report([rec])
        assert code == Hn.EXIT_CHECK_FAILED and summary["failed"] == [0]

    def test_corrupt_line_named(self, tmp_path):
        out = tmp_path / "c.jsonl"
        Hn.sweep([cfg(), cfg(seed=1)], out)
        lines = out.read_text().splitlines()
        lines[2] = lines[2][:-5]
        out.write_text("\n".join(lines) + "\n")
        with pytest.raises(Hn.ReportError) as err:
            Hn.load_records(out)
        assert err.value.line == 3

    def test_tampered_distance_detected(self, tmp_path):
        out = tmp_path / "t.jsonl"
        Hn.sweep([cfg(seed=2)], out)
        lines = out.read_text().splitlines()
        d = json.loads(lines[1])
        d["distance"] += 0.01
        lines[1] = json.dumps(d)
        out.write_text("\n".join(lines) + "\n")
        with pytest.raises(Hn.ReportError, match="line 2"):
            Hn.load_records(out)

    @pytest.mark.parametrize("payload,msg", [
        ({"index": 0}, "missing"),
        ({"index": 0, "config": {}, "status": "ok", "bogus": 1}, "unknown"),
        ([1, 2], "not an object"),
    ])
    def test_schema_errors(self, tmp_path, payload, msg):
        out = tmp_path / "x.jsonl"
        out.write_text(Hn.header() + "\n" + json.dumps(payload) + "\n")
        with pytest.raises(Hn.ReportError, match=msg):
            Hn.load_records(out)


class TestCli:
    def test_run_writes_to_env_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(Hn.OUT_DIR_ENV, str(tmp_path))
        assert main(["run", "--scheme", "clifford", "--K", "4"]) == 0
        assert (tmp_path / "run.jsonl").exists()
        assert "clifford" in capsys.readouterr().out

    def test_run_config_error(self, tmp_path, capsys):
        code = main(["run", "--scheme", "clifford", "--K", "4", "--epsilon", "0.5",
                     "--out", str(tmp_path / "x.jsonl")])
        assert code == Hn.EXIT_CONFIG
        assert "exactly one" in capsys.readouterr().err

    def test_sweep_and_report(self, tmp_path, capsys):
        out = tmp_path / "sw.jsonl"
        assert main(["sweep", "--scheme", "clifford", "--t", "1", "2", "--K", "2", "4",
                     "--out", str(out)]) == 0
        assert len(Hn.load_records(out)) == 4
        assert main(["report", str(out)]) == 0
        capsys.readouterr()
        assert main(["report", str(out), "--json"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["records"] == 4 and summary["errors"] == 0

    def test_sweep_with_error_exits_nonzero(self, tmp_path):
        code = main(["sweep", "--scheme", "trigger", "--n", "2", "4", "--horizon", "8", "--K", "2",
                     "--out", str(tmp_path / "e.jsonl")])
        assert code == Hn.EXIT_CONFIG

    def test_report_missing_file(self, tmp_path):
        assert main(["report", str(tmp_path / "missing.jsonl")]) == Hn.EXIT_CONFIG

    def test_report_corrupt_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(Hn.header() + "\n{not json\n")
        assert main(["report", str(bad)]) == Hn.EXIT_CONFIG
        assert "line 2" in capsys.readouterr().err
