import json

import pytest

from bb84rate.cli import main, read_result_csv

FAST_OPT = """
[optimizer]
grid_resolution = 8
refinement_rounds = 1
loss_bisection_tol_db = 0.1
"""

QUICK_ORACLE = """
[oracle]
seed = 4242
n_pulses = 200000
eps_test = 0.01
chernoff_trials = 20000
sampling_trials = 2000
losses_db = 0,20
"""


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestAsymptoticCommand:
    def test_curve_file(self, tmp_path):
        cfg = write(tmp_path / "run.ini", FAST_OPT + "[asymptotic]\ndistances_km = 0,100,175\n")
        out = tmp_path / "akr.csv"
        assert main(["asymptotic", "--config", cfg, "--out", str(out)]) == 0
        echo, header, rows = read_result_csv(str(out))
        assert header[:6] == ["distance_km", "loss_db", "rate_bps",
                              "single_photon_fraction", "qber", "p_click"]
        assert len(rows) == 3
        assert echo["source.mean_photon_number"] == "0.0142"
        # positive rate through the longest demonstrated distance
        assert float(rows[-1][header.index("rate_bps")]) > 0.0

    def test_empty_distance_list(self, tmp_path):
        cfg = write(tmp_path / "run.ini", "[asymptotic]\ndistances_km =\n")
        out = tmp_path / "akr.csv"
        assert main(["asymptotic", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        assert header and rows == []

    def test_zero_brightness_gives_zero_rates(self, tmp_path):
        cfg = write(tmp_path / "run.ini",
                    FAST_OPT + "[source]\nmean_photon_number = 0\n"
                    "[asymptotic]\ndistances_km = 0,50\n")
        out = tmp_path / "akr.csv"
        assert main(["asymptotic", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        assert all(float(r[header.index("rate_bps")]) == 0.0 for r in rows)

    def test_error_rows_keep_csv_shape(self, tmp_path):
        # a failed point must not smuggle commas into the unquoted schema
        cfg = write(tmp_path / "run.ini", FAST_OPT + "[asymptotic]\ndistances_km = -5,10\n")
        out = tmp_path / "akr.csv"
        assert main(["asymptotic", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        assert all(len(r) == len(header) for r in rows)
        assert rows[0][header.index("status")].startswith("error:")
        assert rows[1][header.index("status")] == "ok"

    def test_byte_deterministic(self, tmp_path):
        cfg = write(tmp_path / "run.ini", FAST_OPT + "[asymptotic]\ndistances_km = 0,50\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["asymptotic", "--config", cfg, "--out", str(a)]) == 0
        assert main(["asymptotic", "--config", cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestFiniteCommand:
    def test_acquisition_time_rows(self, tmp_path):
        cfg = write(tmp_path / "run.ini",
                    FAST_OPT + "[channel]\ndistance_km = 100\n"
                    "[finite]\nacquisition_times_s = 1,60\n")
        out = tmp_path / "fin.csv"
        assert main(["finite", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        assert header[0] == "acquisition_time_s"
        rates = [float(r[header.index("rate_bps")]) for r in rows]
        assert rates[1] > 0.0
        # every intermediate is emitted for audit
        for col in ("phi_x_upper", "lambda_ec", "n_nmp_x", "ell"):
            assert col in header

    def test_tiny_block_below_penalty_floor(self, tmp_path):
        # a microsecond of pulses cannot pay the fixed security penalties
        cfg = write(tmp_path / "run.ini",
                    FAST_OPT + "[finite]\nacquisition_times_s = 1e-6\n")
        out = tmp_path / "fin.csv"
        assert main(["finite", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        assert float(rows[0][header.index("rate_bps")]) == 0.0
        assert int(rows[0][header.index("ell")]) == 0

    def test_block_size_rows_ordered(self, tmp_path):
        cfg = write(tmp_path / "run.ini",
                    FAST_OPT + "[channel]\nloss_db = 0\n"
                    "[finite]\nblock_sizes_received = 1e5,1e6,1e7\n")
        out = tmp_path / "fin.csv"
        assert main(["finite", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        rates = [float(r[header.index("rate_bps")]) for r in rows]
        assert rates == sorted(rates)

    def test_json_format(self, tmp_path):
        cfg = write(tmp_path / "run.ini",
                    FAST_OPT + "[finite]\nacquisition_times_s = 1\n")
        out = tmp_path / "fin.json"
        assert main(["finite", "--config", cfg, "--out", str(out), "--format", "json"]) == 0
        payload = json.loads(out.read_text())
        assert payload["config"]["source"]["mean_photon_number"] == 0.0142
        assert len(payload["rows"]) == 1


class TestMaxlossCommand:
    def test_rows(self, tmp_path):
        cfg = write(tmp_path / "run.ini", FAST_OPT + "[maxloss]\nacquisition_times_s = 1\n")
        out = tmp_path / "ml.csv"
        assert main(["maxloss", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        assert header == ["acquisition_time_s", "max_loss_db", "p_x_opt", "att_opt", "status"]
        assert rows[0][-1] == "ok"
        assert 20.0 < float(rows[0][1]) < 30.0

    def test_no_key_at_zero_loss_is_flagged(self, tmp_path):
        # a detector this noisy cannot make key anywhere
        cfg = write(tmp_path / "run.ini",
                    FAST_OPT + "[detector]\ndark_count_prob = 0.4\nmisalignment = 0.45\n"
                    "[maxloss]\nacquisition_times_s = 1\n")
        out = tmp_path / "ml.csv"
        assert main(["maxloss", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_result_csv(str(out))
        assert rows[0][header.index("status")] == "no_key_at_any_loss"
        assert rows[0][header.index("max_loss_db")] == "nan"


class TestFitQberCommand:
    def synth_csv(self, tmp_path, p_mis=0.003, blank=False):
        from bb84rate import qber_model
        lines = ["distance_km,qber"]
        for d in (0.0, 50.0, 100.0, 150.0):
            t = 10 ** (-d * 0.1904 / 10.0) * 0.6525
            lines.append(f"{d},{qber_model(0.0142, t, 1.47e-7, p_mis)!r}")
            if blank and d == 50.0:
                lines.append("")
        return write(tmp_path / "qber.csv", "\n".join(lines) + "\n")

    def test_recovers_misalignment(self, tmp_path):
        data = self.synth_csv(tmp_path)
        out = tmp_path / "fit.json"
        assert main(["fit-qber", "--data", data, "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["p_mis"] == pytest.approx(0.003, abs=1e-9)
        assert len(report["points"]) == 4
        assert all(abs(r) < 1e-12 for r in report["residuals"])

    def test_single_row(self, tmp_path):
        data = write(tmp_path / "one.csv", "distance_km,qber\n0.0,0.004\n")
        out = tmp_path / "fit.json"
        assert main(["fit-qber", "--data", data, "--out", str(out)]) == 0
        assert json.loads(out.read_text())["p_mis"] > 0.0

    def test_blank_line_warns_and_passes(self, tmp_path, capsys):
        data = self.synth_csv(tmp_path, blank=True)
        out = tmp_path / "fit.json"
        assert main(["fit-qber", "--data", data, "--out", str(out)]) == 0
        assert "blank line skipped" in capsys.readouterr().err

    def test_missing_column_is_config_error(self, tmp_path, capsys):
        data = write(tmp_path / "bad.csv", "distance,qber\n0.0,0.004\n")
        assert main(["fit-qber", "--data", data, "--out", "-"]) == 1
        assert "header" in capsys.readouterr().err

    def test_non_numeric_row_reports_line(self, tmp_path, capsys):
        data = write(tmp_path / "bad.csv", "distance_km,qber\n0.0,0.004\nfifty,0.01\n")
        assert main(["fit-qber", "--data", data, "--out", "-"]) == 1
        assert ":3:" in capsys.readouterr().err


class TestOracleCommand:
    def test_report_and_determinism(self, tmp_path):
        cfg = write(tmp_path / "run.ini", QUICK_ORACLE)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["oracle", "--config", cfg, "--out", str(a)]) == 0
        assert main(["oracle", "--config", cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        report = json.loads(a.read_text())
        assert report["all_passed"]
        assert report["trial"]["seed"] == 4242

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write(tmp_path / "run.ini", QUICK_ORACLE)
        out = tmp_path / "r.json"
        assert main(["oracle", "--config", cfg, "--out", str(out), "--seed", "7"]) == 0
        assert json.loads(out.read_text())["trial"]["seed"] == 7

    def test_corrupted_bound_exits_nonzero(self, tmp_path):
        cfg = write(tmp_path / "run.ini",
                    QUICK_ORACLE.replace("losses_db = 0,20",
                                         "losses_db = 0\nselftest_bound_scale = 0.5"))
        out = tmp_path / "r.json"
        assert main(["oracle", "--config", cfg, "--out", str(out)]) == 2
        assert not json.loads(out.read_text())["all_passed"]


class TestConfigHandling:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path / "run.ini", "[source]\nbrightness = 1\n")
        assert main(["asymptotic", "--config", cfg, "--out", "-"]) == 1
        assert "unknown key" in capsys.readouterr().err

    def test_unknown_section_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path / "run.ini", "[lasers]\npower = 1\n")
        assert main(["asymptotic", "--config", cfg, "--out", "-"]) == 1
        assert "unknown config section" in capsys.readouterr().err

    def test_out_of_range_value_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path / "run.ini", "[detector]\nefficiency = 1.5\n")
        assert main(["asymptotic", "--config", cfg, "--out", "-"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_mutually_exclusive_channel_keys(self, tmp_path):
        cfg = write(tmp_path / "run.ini", "[channel]\ndistance_km = 10\nloss_db = 5\n")
        assert main(["finite", "--config", cfg, "--out", "-"]) == 1

    def test_round_trip_echo_contains_all_defaults(self, tmp_path):
        cfg = write(tmp_path / "run.ini", FAST_OPT + "[asymptotic]\ndistances_km = 0\n")
        out = tmp_path / "akr.csv"
        assert main(["asymptotic", "--config", cfg, "--out", str(out)]) == 0
        echo, _, _ = read_result_csv(str(out))
        for key in ("source.g2", "detector.dark_count_prob", "security.eps_cor",
                    "optimizer.grid_resolution", "channel.loss_per_km_db"):
            assert key in echo
