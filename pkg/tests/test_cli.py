import json
import os

import numpy as np
import pytest

from neuroloop import io
from neuroloop.cli import run_cli
from neuroloop.signals import TimeSeries
from neuroloop.synth import gen_mvar, unidirectional_coupling_spec

GOLDEN = json.load(open(os.path.join(os.path.dirname(__file__), "golden",
                                     "stats_golden.json")))


def run(*argv):
    return run_cli(list(argv))


def simulate_dir(tmp_path, name, seed=7, extra=()):
    out = str(tmp_path / name)
    code = run("simulate", "--mode", "fat-c", "--seed", str(seed),
               "--target-running", "60", "--output-dir", out, *extra)
    assert code == 0
    return out


class TestSimulate:
    def test_outputs_exist_and_are_deterministic(self, tmp_path):
        a = simulate_dir(tmp_path, "a")
        b = simulate_dir(tmp_path, "b")
        for name in ("session_log.jsonl", "recording.rec", "session_summary.csv"):
            pa = open(os.path.join(a, name), "rb").read()
            pb = open(os.path.join(b, name), "rb").read()
            assert pa == pb, f"{name} differs between identical runs"

    def test_different_seed_differs(self, tmp_path):
        a = simulate_dir(tmp_path, "a", seed=1)
        b = simulate_dir(tmp_path, "b", seed=2)
        ra = open(os.path.join(a, "recording.rec"), "rb").read()
        rb = open(os.path.join(b, "recording.rec"), "rb").read()
        assert ra != rb

    def test_recording_is_readable(self, tmp_path):
        out = simulate_dir(tmp_path, "a")
        rec = io.read_recording(os.path.join(out, "recording.rec"))
        assert {c.channel for c in rec.channels} == {"EEG_AFF", "EMG_AFF"}
        assert rec.group == "fat-c"

    def test_config_file_drives_simulation(self, tmp_path):
        import configparser
        from neuroloop.controller import SessionConfig
        from neuroloop.synth import PlantConfig

        cp = configparser.ConfigParser()
        io.session_to_config(SessionConfig(target_running=60.0, threshold=9.0), cp)
        io.plant_to_config(PlantConfig(fatigue_gain=0.004), cp)
        cfg_path = str(tmp_path / "exp.ini")
        io.save_config(cfg_path, cp)
        out = str(tmp_path / "cfg_run")
        assert run("simulate", "--config", cfg_path, "--seed", "3",
                   "--output-dir", out) == 0
        rec = io.read_recording(os.path.join(out, "recording.rec"))
        assert 60.0 <= rec.duration <= 64.0

    def test_env_seed_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NEUROLOOP_SEED", "7")
        out = str(tmp_path / "env")
        assert run("simulate", "--mode", "fat-c", "--target-running", "60",
                   "--output-dir", out) == 0
        explicit = simulate_dir(tmp_path, "explicit", seed=7)
        assert (open(os.path.join(out, "recording.rec"), "rb").read()
                == open(os.path.join(explicit, "recording.rec"), "rb").read())


class TestUsageErrors:
    def test_unknown_flag(self, capsys):
        assert run("simulate", "--flux-capacitor", "1") == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_dcmc_requires_order(self, tmp_path):
        out = simulate_dir(tmp_path, "a")
        code = run("dcmc", "--input", os.path.join(out, "recording.rec"),
                   "--output", str(tmp_path / "d.csv"))
        assert code == 1

    def test_missing_input_is_data_error(self, tmp_path):
        assert run("mpf", "--input", str(tmp_path / "nope.rec"),
                   "--output", str(tmp_path / "o.csv")) == 2

    def test_unknown_command(self):
        assert run("frobnicate") == 1


class TestPipelines:
    def test_mpf_rows(self, tmp_path):
        out = simulate_dir(tmp_path, "a")
        table = str(tmp_path / "mpf.csv")
        assert run("mpf", "--input", os.path.join(out, "recording.rec"),
                   "--output", table) == 0
        rows = io.read_table(table)
        mpfs = [r.value for r in rows if r.metric == "mpf"]
        assert len(mpfs) == 15  # 60 s / 4 s windows
        assert all(60 <= v <= 200 for v in mpfs)
        assert any(r.metric == "mpf_drop_rate" for r in rows)

    def test_preprocess_changes_rate(self, tmp_path):
        rng = np.random.default_rng(0)
        rec = io.Recording([TimeSeries(rng.standard_normal(8000), 2000.0,
                                       channel="EEG_AFF")])
        src = str(tmp_path / "raw.rec")
        dst = str(tmp_path / "clean.rec")
        io.write_recording(src, rec)
        assert run("preprocess", "--input", src, "--output", dst,
                   "--rate", "1000") == 0
        out = io.read_recording(dst)
        assert out.sample_rate == 1000.0
        assert out.channels[0].samples.size == 4000

    def test_lzc_and_psd_slope(self, tmp_path):
        rng = np.random.default_rng(1)
        ts = [TimeSeries(rng.standard_normal(30_000), 1000.0, channel=c)
              for c in ("EEG_AFF", "EEG_UN")]
        src = str(tmp_path / "rest.rec")
        io.write_recording(src, io.Recording(ts, state="awake"))

        lz_out = str(tmp_path / "lzc.csv")
        assert run("lzc", "--input", src, "--output", lz_out,
                   "--channel", "EEG_AFF") == 0
        lz_rows = io.read_table(lz_out)
        assert sum(r.metric == "lzc" for r in lz_rows) == 6

        sl_out = str(tmp_path / "slope.csv")
        assert run("psd-slope", "--input", src, "--output", sl_out,
                   "--si", "EEG_AFF,EEG_UN") == 0
        sl_rows = io.read_table(sl_out)
        assert sum(r.metric == "psd_slope" for r in sl_rows) == 2
        assert sum(r.metric == "psd_slope_si" for r in sl_rows) == 1

    def test_dcmc_table(self, tmp_path):
        spec = unidirectional_coupling_spec()
        eeg, emg = gen_mvar(spec, 30_000, seed=3,
                            channels=("EEG_AFF", "EMG_AFF"))
        src = str(tmp_path / "coupled.rec")
        io.write_recording(src, io.Recording([eeg, emg]))
        out = str(tmp_path / "dcmc.csv")
        assert run("dcmc", "--input", src, "--output", out, "--order", "2",
                   "--n-sim", "10", "--seed", "5") == 0
        rows = io.read_table(out)
        by_metric = {}
        for r in rows:
            by_metric.setdefault(r.metric, []).append(r)
        assert len(by_metric["dcmc"]) == 200  # 100 freqs x 2 directions
        assert len(by_metric["dcmc_sig_threshold"]) == 1
        desc = [r.value for r in by_metric["dcmc"]
                if "direction=descending" in r.qualifiers]
        assert max(desc) == 1.0  # peak of the normalized spectrum

    def test_stats_anova_golden_smoke(self, tmp_path):
        g = GOLDEN["cli_anova"]
        rows = []
        for group, values in g["groups"].items():
            for i, v in enumerate(values):
                rows.append(io.TableRow(f"s{i}", 14, group, "mnss", v))
        table = str(tmp_path / "mnss.csv")
        io.write_table(table, rows)
        out = str(tmp_path / "stats.csv")
        assert run("stats", "--input", table, "--test", "anova1",
                   "--metric", "mnss", "--output", out) == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "test,metric,term,statistic,df,p_value,effect_size"
        fields = lines[1].split(",")
        assert abs(float(fields[3]) - g["F"]) < 1e-8
        assert abs(float(fields[5]) - g["p"]) < 1e-8
        assert abs(float(fields[6]) - g["eta2"]) < 1e-8

    def test_stats_ttest_by_qualifier(self, tmp_path):
        rows = []
        for phase, mu in (("early", 0.7), ("late", 0.3)):
            for i in range(6):
                rows.append(io.TableRow("s", 1, "fat-c", "dcmc_band_mean",
                                        mu + 0.01 * i, f"phase={phase};band=beta"))
        table = str(tmp_path / "bands.csv")
        io.write_table(table, rows)
        out = str(tmp_path / "tt.csv")
        assert run("stats", "--input", table, "--test", "ttest",
                   "--metric", "dcmc_band_mean", "--by", "phase",
                   "--output", out) == 0
        line = open(out).read().splitlines()[1]
        assert line.startswith("ttest,dcmc_band_mean,early-vs-late,")

    def test_stats_missing_metric_is_data_error(self, tmp_path):
        table = str(tmp_path / "empty.csv")
        io.write_table(table, [])
        assert run("stats", "--input", table, "--test", "ks",
                   "--metric", "mnss", "--output", str(tmp_path / "o.csv")) == 2

    def test_plot_writes_figures(self, tmp_path):
        rows = [io.TableRow(f"s{i}", d, g, "mnss", 10.0 - d * 0.3 + i * 0.1)
                for i in range(3) for d in (2, 7, 14) for g in ("fat-c", "for-t")]
        table = str(tmp_path / "scores.csv")
        io.write_table(table, rows)
        figs = str(tmp_path / "figs")
        assert run("plot", "--input", table, "--output-dir", figs) == 0
        assert os.path.exists(os.path.join(figs, "mnss.png"))
