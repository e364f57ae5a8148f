import configparser

import numpy as np
import pytest

from neuroloop import io
from neuroloop.controller import Mode, SessionConfig
from neuroloop.errors import (DataError, FormatError, IntegrityError,
                              RegistryError)
from neuroloop.fatigue import BaselineRule
from neuroloop.signals import TimeSeries
from neuroloop.synth import MvarSpec, PlantConfig, unidirectional_coupling_spec


def small_recording(n=250, rate=500.0):
    rng = np.random.default_rng(0)
    return io.Recording(
        [TimeSeries(rng.standard_normal(n), rate, channel="EEG_AFF", t0=1.5),
         TimeSeries(rng.standard_normal(n), rate, channel="EMG_AFF", t0=1.5)],
        subject="r01", day=3, state="training", group="fat-c",
        rejected_spans=[(1.6, 1.7)],
    )


class TestRecordingRoundtrip:
    def test_text_roundtrip_exact(self, tmp_path):
        rec = small_recording()
        path = str(tmp_path / "a.rec")
        io.write_recording(path, rec, encoding="text")
        back = io.read_recording(path)
        assert [c.channel for c in back.channels] == ["EEG_AFF", "EMG_AFF"]
        for a, b in zip(rec.channels, back.channels):
            assert np.array_equal(a.samples, b.samples)
            assert a.sample_rate == b.sample_rate and a.t0 == b.t0
        assert (back.subject, back.day, back.state, back.group) == (
            "r01", 3, "training", "fat-c")
        assert back.rejected_spans == [(1.6, 1.7)]

    def test_binary_roundtrip_float32(self, tmp_path):
        rec = small_recording()
        path = str(tmp_path / "b.rec")
        io.write_recording(path, rec, encoding="binary")
        back = io.read_recording(path)
        for a, b in zip(rec.channels, back.channels):
            assert np.array_equal(a.samples.astype("<f4").astype(float), b.samples)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "c.rec"
        path.write_text("version: 99\nencoding: text\nsample_rate: 100\n"
                        "channels: A\nt0: 0\nn_samples: 1\n\n\n0.0\n")
        with pytest.raises(FormatError):
            io.read_recording(str(path))

    def test_zero_sample_rate(self, tmp_path):
        path = tmp_path / "d.rec"
        path.write_text("version: 1\nencoding: text\nsample_rate: 0\n"
                        "channels: A\nt0: 0\nn_samples: 1\n\n\n0.0\n")
        with pytest.raises(FormatError):
            io.read_recording(str(path))

    def test_truncated_row_named(self, tmp_path):
        path = tmp_path / "e.rec"
        path.write_text("version: 1\nencoding: text\nsample_rate: 100\n"
                        "channels: A,B\nt0: 0\nn_samples: 2\n\n\n"
                        "0.0,1.0\n0.5\n")
        with pytest.raises(IntegrityError, match="row 1"):
            io.read_recording(str(path))

    def test_truncated_binary_payload(self, tmp_path):
        rec = small_recording()
        path = str(tmp_path / "f.rec")
        io.write_recording(path, rec, encoding="binary")
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:-3])
        with pytest.raises(IntegrityError):
            io.read_recording(path)

    def test_nonfinite_named_row(self, tmp_path):
        path = tmp_path / "g.rec"
        path.write_text("version: 1\nencoding: text\nsample_rate: 100\n"
                        "channels: A\nt0: 0\nn_samples: 2\n\n\n1.0\nnan\n")
        with pytest.raises(DataError, match="row 1"):
            io.read_recording(str(path))

    def test_channel_lookup(self):
        rec = small_recording()
        assert rec.channel("EMG_AFF").channel == "EMG_AFF"
        with pytest.raises(DataError):
            rec.channel("MISSING")


class TestTables:
    def test_empty_table_is_header_only(self, tmp_path):
        path = str(tmp_path / "t.csv")
        io.write_table(path, [])
        assert open(path).read() == "subject,day,group,metric,value,qualifiers\n"
        assert io.read_table(path) == []

    def test_roundtrip_full_precision(self, tmp_path):
        rows = [io.TableRow("s", 1, "g", "mpf", 130.123456789012345, "t=0.0"),
                io.TableRow("s", 1, "g", "mpf", 1e-17, "")]
        path = str(tmp_path / "t.csv")
        io.write_table(path, rows)
        back = io.read_table(path)
        assert [r.value for r in back] == [rows[0].value, rows[1].value]

    def test_duplicates_preserved(self, tmp_path):
        rows = [io.TableRow("s", 1, "g", "mnss", 7.0)] * 3
        path = str(tmp_path / "t.csv")
        io.write_table(path, rows)
        assert len(io.read_table(path)) == 3

    def test_unknown_metric_rejected(self):
        with pytest.raises(RegistryError):
            io.TableRow("s", 1, "g", "made_up_metric", 1.0)

    def test_append(self, tmp_path):
        path = str(tmp_path / "t.csv")
        io.write_table(path, [io.TableRow("s", 1, "g", "mnss", 7.0)])
        io.write_table(path, [io.TableRow("s", 2, "g", "mnss", 6.0)], append=True)
        assert len(io.read_table(path)) == 2

    def test_qualifier_helpers(self):
        q = io.format_qualifiers({"band": "beta", "phase": "early"})
        assert io.parse_qualifiers(q) == {"band": "beta", "phase": "early"}


class TestConfig:
    def test_plant_roundtrip(self, tmp_path):
        cfg = PlantConfig(baseline_centroid=145.0, min_centroid=90.0,
                          fatigue_gain=0.0031, recovery_rate=0.0123,
                          noise_bandwidth=(62.0, 198.0), amplitude=87.5,
                          seed=42, bump_std=22.0)
        path = str(tmp_path / "c.ini")
        io.save_config(path, io.plant_to_config(cfg))
        back = io.plant_from_config(io.load_config(path))
        assert back == cfg

    def test_mvar_roundtrip(self, tmp_path):
        spec = unidirectional_coupling_spec(f_res=18.0, coupling=0.7)
        path = str(tmp_path / "m.ini")
        io.save_config(path, io.mvar_to_config(spec))
        back = io.mvar_from_config(io.load_config(path))
        assert back.order == spec.order
        assert np.array_equal(back.coeffs, spec.coeffs)
        assert back.noise_var == spec.noise_var

    def test_session_roundtrip(self, tmp_path):
        cfg = SessionConfig(mode=Mode.FOR_T, target_running=900.0, threshold=9.5,
                            baseline_rule=BaselineRule("first-bout", 4))
        path = str(tmp_path / "s.ini")
        io.save_config(path, io.session_to_config(cfg))
        back = io.session_from_config(io.load_config(path))
        assert back == cfg

    def test_combined_sections(self, tmp_path):
        cp = configparser.ConfigParser()
        io.session_to_config(SessionConfig(), cp)
        io.plant_to_config(PlantConfig(), cp)
        path = str(tmp_path / "both.ini")
        io.save_config(path, cp)
        loaded = io.load_config(path)
        assert io.session_from_config(loaded) == SessionConfig()
        assert io.plant_from_config(loaded) == PlantConfig()

    def test_unknown_config_version_rejected(self, tmp_path):
        path = tmp_path / "v.ini"
        path.write_text("[meta]\nversion = 99\n\n[plant]\nseed = 1\n")
        with pytest.raises(FormatError):
            io.load_config(str(path))
