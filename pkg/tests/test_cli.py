import csv
import io
import json
import math

import numpy as np
import pytest

from ridge_recovery import cli
from ridge_recovery.cli import (CSV_COLUMNS, ExperimentSpec, build_parser, build_spec,
                                emit_profile_plot_data, format_csv, main, read_plot_data,
                                run_batch, run_single, summarize, trial_seeds)
from ridge_recovery.oracle import Profile, RidgeOracle
from ridge_recovery.pipeline import RecoveryOutput
from ridge_recovery.stats import median

FAST = ["--frequency", "1", "--M", "20"]


def fast_spec(**kw):
    return ExperimentSpec(frequency=1.0, overrides={"M": 20}, **kw)


def parse(argv):
    return build_spec(build_parser().parse_args(argv))


@pytest.fixture(scope="module")
def single():
    return run_single(fast_spec(), 0)


@pytest.fixture(scope="module")
def batch_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("batch")
    for name in ("a", "b"):
        rc = main(["batch", *FAST, "--trials", "3", "--seed", "5",
                   "--csv", str(d / f"{name}.csv"), "--summary", str(d / f"{name}.json")])
        assert rc == 0
    return d


class TestSpec:
    def test_defaults(self):
        s = ExperimentSpec()
        c = s.config()
        assert (s.n, s.K1, s.K2, s.epsilon, s.trials) == (50, 8, 7, 1e-20, 10)
        assert (c.M, c.M1, c.N1, c.N2, c.N3) == (12, 30, 200, 25, 200)

    def test_derived_preset(self):
        c = ExperimentSpec(preset="derived").config()
        assert c.N1 == 2 * c.M ** 2 and c.N3 == 2 * c.M1 ** 2

    def test_invalid(self):
        with pytest.raises(ValueError):
            ExperimentSpec(trials=0)
        with pytest.raises(ValueError):
            ExperimentSpec(overrides={"bogus": 1})

    def test_subseeds_distinct(self):
        states = [tuple(s.generate_state(4)) for s in trial_seeds(1, 50)]
        assert len(set(states)) == 50
        # a trial's seed does not depend on how many trials are run
        assert trial_seeds(1, 3)[2].generate_state(4).tolist() == \
            trial_seeds(1, 10)[2].generate_state(4).tolist()


class TestConfigFile:
    def test_file_values(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# experiment\nn = 20\nepsilon = 1e-14\nM1 = 25\nomega-star = 1e-3  # loose\n"
                     "profile = constant\n")
        s = parse(["batch", "--config", str(f)])
        assert s.n == 20 and s.epsilon == 1e-14 and s.omega_star == 1e-3
        assert s.profile == "constant" and s.overrides == {"M1": 25}
        assert s.config().M1 == 25

    def test_flags_override_file(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("n = 20\nseed = 3\nN2 = 11\n")
        s = parse(["batch", "--config", str(f), "--seed", "9", "--N2", "13"])
        assert s.n == 20 and s.seed == 9 and s.overrides["N2"] == 13

    def test_unknown_key(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("colour = blue\n")
        assert main(["batch", "--config", str(f)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["recover", "--config", str(tmp_path / "none.cfg")]) == 1


class TestRunSingle:
    def test_record(self, single):
        out, rec, oracle = single
        assert out.status == "recovered" and rec["status"] == "recovered"
        assert rec["a_error"] <= 1e-3 and rec["profile_error"] <= 1e-5
        assert rec["eval_count"] == 50526
        assert 0 < rec["alpha"] < 1
        assert "dkw" in out.diagnostics and 0 <= out.diagnostics["dkw_gap"] <= 1

    def test_constant(self):
        out, rec, _ = run_single(ExperimentSpec(profile="constant", constant_value=0.5), 0)
        assert rec["status"] == "constant" and out.status == "constant"
        assert rec["profile_error"] <= 1e-4 and math.isnan(rec["a_error"])

    def test_in_class_noiseless(self):
        spec = ExperimentSpec(epsilon=0.0)
        rng = np.random.default_rng(0)
        c = np.r_[0.0, rng.standard_normal(8)]
        orc = RidgeOracle(np.eye(50)[0], Profile.polynomial(c / np.linalg.norm(c)), 0.0)
        _, rec, _ = run_single(spec, instance=(orc, rng))
        assert rec["a_error"] <= 1e-8 and rec["profile_error"] <= 1e-8

    def test_failed_row(self):
        # one probe of a linear profile always oscillates but embeds into nothing
        orc = RidgeOracle(np.eye(50)[0], Profile.polynomial([0.0, 1.0]), 0.0)
        spec = ExperimentSpec(overrides={"N2": 1})
        _, rec, _ = run_single(spec, instance=(orc, np.random.default_rng(0)))
        assert rec["status"].startswith("failed: typical-index-not-found")
        assert math.isnan(rec["a_error"]) and math.isnan(rec["profile_error"])


class TestBatch:
    def test_byte_identical(self, batch_dir):
        assert (batch_dir / "a.csv").read_bytes() == (batch_dir / "b.csv").read_bytes()

    def test_schema(self, batch_dir):
        rows = list(csv.DictReader(io.StringIO((batch_dir / "a.csv").read_text())))
        assert tuple(rows[0].keys()) == CSV_COLUMNS
        assert [int(r["trial"]) for r in rows] == [0, 1, 2]

    def test_summary_matches_csv(self, batch_dir):
        rows = list(csv.DictReader(io.StringIO((batch_dir / "a.csv").read_text())))
        summ = json.loads((batch_dir / "a.json").read_text())
        assert summ["trials"] == 3 and summ["recovered"] + summ["failed"] + summ["constant"] == 3
        for col in ("a_error", "profile_error", "alpha"):
            vals = [float(r[col]) for r in rows if math.isfinite(float(r[col]))]
            assert summ[col]["median"] == median(vals) and summ[col]["max"] == max(vals)
        assert summ["config"]["M"] == 20

    def test_single_trial_table(self):
        spec = ExperimentSpec(profile="constant", trials=1)
        records, summary, text = run_batch(spec)
        assert len(records) == 1 and text.count("\n") == 2 and summary["constant"] == 1

    def test_timings_column(self):
        rec = {c: 0 for c in CSV_COLUMNS} | {"wall_time": 1.5, "a_error": 1e-7}
        assert format_csv([rec]).splitlines()[0] == ",".join(CSV_COLUMNS)
        assert format_csv([rec], timings=True).splitlines()[0].endswith(",wall_time")

    def test_csv_quoting(self):
        rec = {c: 0 for c in CSV_COLUMNS} | {"status": "failed: a, b"}
        row = next(csv.DictReader(io.StringIO(format_csv([rec]))))
        assert row["status"] == "failed: a, b"

    def test_summary_lower_median(self):
        recs = [{"status": "recovered", "a_error": x, "profile_error": x, "alpha": x,
                 "eval_count": 1, "wall_time": 0.0} for x in (4.0, 1.0, 3.0, 2.0)]
        assert summarize(recs)["a_error"] == {"median": 2.0, "max": 4.0}

    def test_stdout(self, capsys):
        assert main(["batch", "--profile", "constant", "--trials", "2"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == ",".join(CSV_COLUMNS) and len(out.splitlines()) == 3


class TestPlotData:
    def test_recovered(self, single, tmp_path):
        out, rec, oracle = single
        text = emit_profile_plot_data(out, oracle.profile, tmp_path / "p.dat")
        assert (tmp_path / "p.dat").read_text() == text
        est, ref = read_plot_data(text)
        assert est.shape == ref.shape == (1000, 2)
        assert est[0, 0] == -1.0 and est[-1, 0] == 1.0 and np.array_equal(est[:, 0], ref[:, 0])
        gap = np.max(np.abs(est[:, 1] - ref[:, 1]))
        # the 2000-point error and the 1000-point gap differ by at most slope * spacing
        t = np.linspace(-1, 1, 200001)
        e = [out.phi_hat(t) - oracle.profile(s * t) for s in (1, -1)]
        slope = max(np.max(np.abs(np.diff(x))) / (t[1] - t[0]) for x in e)
        assert abs(gap - rec["profile_error"]) <= slope * 2 / 999

    def test_constant_flat(self):
        out = RecoveryOutput("constant", 1, f0=0.25)
        est, ref = read_plot_data(emit_profile_plot_data(out, Profile.constant(0.25)))
        assert np.all(est[:, 1] == 0.25) and np.all(ref[:, 1] == 0.25)

    def test_failed_rejected(self):
        with pytest.raises(ValueError):
            emit_profile_plot_data(RecoveryOutput("failed", 1), Profile.constant(0.0))


class TestCommands:
    def test_recover_json_then_plot(self, tmp_path, capsys):
        res = tmp_path / "run.json"
        assert main(["recover", "--profile", "constant", "--json", str(res)]) == 0
        line = capsys.readouterr().out
        assert "status=constant" in line and "eval_count=10026" in line
        doc = json.loads(res.read_text())
        assert doc["output"]["status"] == "constant" and doc["oracle"]["profile"]["kind"] == "constant"
        plot = tmp_path / "run.dat"
        assert main(["plot-data", str(res), "-o", str(plot)]) == 0
        est, _ = read_plot_data(plot.read_text())
        assert np.all(est[:, 1] == doc["output"]["f0"])

    def test_recover_plot_flag(self, tmp_path):
        plot = tmp_path / "p.dat"
        assert main(["recover", "--profile", "constant", "--plot-data", str(plot)]) == 0
        assert plot.read_text().startswith("# t phi_hat")

    def test_plot_from_failed_run(self, tmp_path):
        res = tmp_path / "run.json"
        doc = {"output": RecoveryOutput("failed", 401, reason="x").to_dict(),
               "oracle": RidgeOracle([1.0, 0.0], Profile.constant(0.0)).to_dict()}
        res.write_text(json.dumps(doc))
        assert main(["plot-data", str(res)]) == 1

    def test_alpha(self, capsys):
        assert main(["alpha", "--trials", "3"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert [l.split()[0] for l in lines] == ["0", "1", "2"]
        vals = [float(l.split()[1]) for l in lines]
        assert all(1e-8 <= v <= 1e-4 for v in vals)

    def test_alpha_matches_batch(self, capsys):
        main(["alpha", "--trials", "2", "--seed", "5", *FAST])
        alpha_out = [float(l.split()[1]) for l in capsys.readouterr().out.splitlines()]
        recs, _, _ = run_batch(ExperimentSpec(profile="trig", trials=2, seed=5, frequency=1.0,
                                              overrides={"N2": 1}))
        assert alpha_out == [float(f"{r['alpha']:.6e}") for r in recs]

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit):
            main(["batch", "--n", "many"])

    def test_missing_result_file(self, tmp_path):
        assert main(["plot-data", str(tmp_path / "missing.json")]) == 1

    def test_module_entry(self):
        assert cli.main is main
