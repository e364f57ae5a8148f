"""File formats, result tables and configuration.

Signal files carry a ``key: value`` text header (version first), a blank
line, then either comma-separated sample rows (text encoding) or raw
little-endian float32 frames (binary encoding). Result tables are long-format
CSV with a fixed column order and a registry of metric names. Configuration
uses INI sections readable by :mod:`configparser`.
"""
from __future__ import annotations

import configparser
import csv
import io as _io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DataError, FormatError, IntegrityError,
                     RegistryError)
from .fatigue import BaselineRule
from .signals import PreprocessConfig, TimeSeries
from .synth import MvarSpec, PlantConfig

FORMAT_VERSION = 1
RECORDING_STATES = ("awake", "training", "resting")

#: Metric names accepted in result tables (values are short descriptions).
METRICS = {
    "mnss": "modified neurological severity score (opaque numeric input)",
    "mpf": "EMG mean power frequency, Hz",
    "mpf_baseline": "baseline MPF of a bout, Hz",
    "mpf_drop_rate": "MPF drop rate, percent",
    "lzc": "normalized Lempel-Ziv complexity of one epoch",
    "lzc_drop_rate": "LZC drop rate over a trial, percent",
    "psd_slope": "resting-state EEG PSD slope",
    "psd_slope_si": "interhemispheric PSD-slope symmetry index",
    "dcmc": "masked+normalized directed coherence at one frequency",
    "dcmc_band_mean": "mean normalized dCMC over a band and phase",
    "dcmc_sig_threshold": "surrogate significance threshold",
    "amino_ratio": "plasma amino-acid ratio (opaque numeric input)",
    "amino_change_rate": "change rate of an amino-acid ratio",
    "session_duration": "session wall-clock, simulated seconds",
    "rest_count": "number of rests in a session",
    "accumulated_running": "accumulated running seconds at termination",
}

TABLE_COLUMNS = ("subject", "day", "group", "metric", "value", "qualifiers")


@dataclass
class Recording:
    """Channels sharing one clock plus session metadata and rejected spans."""

    channels: list[TimeSeries]
    subject: str = ""
    day: int = 0
    state: str = "training"
    group: str = ""
    rejected_spans: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.channels:
            raise DataError("recording needs at least one channel")
        first = self.channels[0]
        for ch in self.channels[1:]:
            if ch.sample_rate != first.sample_rate or ch.samples.size != first.samples.size:
                raise IntegrityError("channels differ in sample rate or length")
            if ch.t0 != first.t0:
                raise IntegrityError("channels differ in t0")
        if self.state not in RECORDING_STATES:
            raise DataError(f"state must be one of {RECORDING_STATES}")
        dur = first.duration
        for a, b in self.rejected_spans:
            if not (first.t0 <= a < b <= first.t0 + dur + 1e-9):
                raise DataError(f"rejected span ({a}, {b}) outside the recording")

    @property
    def sample_rate(self) -> float:
        return self.channels[0].sample_rate

    @property
    def t0(self) -> float:
        return self.channels[0].t0

    @property
    def duration(self) -> float:
        return self.channels[0].duration

    def channel(self, label: str) -> TimeSeries:
        for ch in self.channels:
            if ch.channel == label:
                return ch
        raise DataError(f"no channel {label!r} in recording "
                        f"(have {[c.channel for c in self.channels]})")


@dataclass
class TableRow:
    subject: str
    day: int
    group: str
    metric: str
    value: float
    qualifiers: str = ""

    def __post_init__(self):
        if self.metric not in METRICS:
            raise RegistryError(f"unknown metric {self.metric!r}; "
                                f"registered: {sorted(METRICS)}")
        self.value = float(self.value)
        if not np.isfinite(self.value):
            raise DataError(f"non-finite value for metric {self.metric}")


def atomic_write(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _fmt(x: float) -> str:
    return repr(float(x))


def _spans_str(spans) -> str:
    return ";".join(f"{_fmt(a)}-{_fmt(b)}" for a, b in spans)


def _parse_spans(text: str) -> list[tuple[float, float]]:
    spans = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        a, _, b = part.partition("-")
        spans.append((float(a), float(b)))
    return spans


def write_recording(path: str, rec: Recording, encoding: str = "text") -> None:
    """Serialize a recording; ``encoding`` is "text" (CSV rows) or "binary"
    (little-endian float32 frames)."""
    if encoding not in ("text", "binary"):
        raise ConfigError(f"unknown encoding {encoding!r}")
    n = rec.channels[0].samples.size
    header = [
        f"version: {FORMAT_VERSION}",
        f"encoding: {encoding}",
        f"sample_rate: {_fmt(rec.sample_rate)}",
        f"channels: {','.join(ch.channel for ch in rec.channels)}",
        f"t0: {_fmt(rec.t0)}",
        f"n_samples: {n}",
        f"subject: {rec.subject}",
        f"day: {rec.day}",
        f"state: {rec.state}",
        f"group: {rec.group}",
        f"rejected_spans: {_spans_str(rec.rejected_spans)}",
        "",
        "",
    ]
    head = "\n".join(header).encode()
    data = np.column_stack([ch.samples for ch in rec.channels])
    if encoding == "text":
        body = "\n".join(",".join(_fmt(v) for v in row) for row in data)
        payload = head + body.encode() + b"\n"
    else:
        payload = head + data.astype("<f4").tobytes()
    atomic_write(path, payload)


def read_recording(path: str) -> Recording:
    """Parse and validate a recording file (either encoding)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise FormatError("missing blank line after header")
    header: dict[str, str] = {}
    lines = blob[:sep].decode(errors="replace").splitlines()
    for line in lines:
        key, colon, value = line.partition(":")
        if not colon:
            raise FormatError(f"malformed header line {line!r}")
        header[key.strip()] = value.strip()
    if not lines or not lines[0].startswith("version"):
        raise FormatError("file does not start with a version line")
    if header.get("version") != str(FORMAT_VERSION):
        raise FormatError(f"unsupported version {header.get('version')!r}")
    encoding = header.get("encoding", "text")
    if encoding not in ("text", "binary"):
        raise FormatError(f"unknown encoding {encoding!r}")
    try:
        rate = float(header["sample_rate"])
        t0 = float(header.get("t0", "0"))
        n_samples = int(header["n_samples"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad or missing header field: {exc}") from exc
    if rate <= 0:
        raise FormatError(f"sample_rate must be positive, got {rate}")
    labels = [c.strip() for c in header.get("channels", "").split(",") if c.strip()]
    if not labels:
        raise FormatError("no channel labels declared")
    body = blob[sep + 2:]
    if encoding == "text":
        rows = []
        for line in body.decode(errors="replace").splitlines():
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(labels):
                raise IntegrityError(
                    f"row {len(rows)}: expected {len(labels)} columns, "
                    f"got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise IntegrityError(
                    f"row {len(rows)}: unparseable value ({exc})") from exc
        data = np.asarray(rows, dtype=float)
    else:
        frame = 4 * len(labels)
        if len(body) % frame != 0:
            raise IntegrityError(
                f"truncated binary payload at row {len(body) // frame}")
        data = np.frombuffer(body, dtype="<f4").astype(float).reshape(-1, len(labels))
    if data.shape[0] != n_samples:
        raise IntegrityError(
            f"header declares {n_samples} samples, payload has {data.shape[0]}")
    bad = ~np.isfinite(data)
    if np.any(bad):
        row = int(np.argwhere(bad)[0][0])
        raise DataError(f"non-finite value at row {row}")
    channels = [TimeSeries(data[:, j].copy(), rate, channel=lab, t0=t0)
                for j, lab in enumerate(labels)]
    return Recording(
        channels,
        subject=header.get("subject", ""),
        day=int(header.get("day", "0") or 0),
        state=header.get("state", "training"),
        group=header.get("group", ""),
        rejected_spans=_parse_spans(header.get("rejected_spans", "")),
    )


def write_table(path: str, rows: list[TableRow], append: bool = False) -> None:
    """Long-format CSV; deterministic column order, rows kept in input order."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    exists = os.path.exists(path)
    if not (append and exists):
        writer.writerow(TABLE_COLUMNS)
    for r in rows:
        writer.writerow([r.subject, r.day, r.group, r.metric, _fmt(r.value),
                         r.qualifiers])
    payload = buf.getvalue().encode("utf-8")
    if append and exists:
        with open(path, "ab") as fh:
            fh.write(payload)
    else:
        atomic_write(path, payload)


def read_table(path: str) -> list[TableRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise FormatError("empty table file") from None
        if tuple(head) != TABLE_COLUMNS:
            raise FormatError(f"unexpected table header {head}")
        rows = []
        for rec in reader:
            if not rec:
                continue
            if len(rec) != len(TABLE_COLUMNS):
                raise IntegrityError(f"table row {len(rows)}: wrong column count")
            rows.append(TableRow(rec[0], int(rec[1]), rec[2], rec[3],
                                 float(rec[4]), rec[5]))
    return rows


def parse_qualifiers(text: str) -> dict[str, str]:
    out = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        k, _, v = part.partition("=")
        out[k.strip()] = v.strip()
    return out


def format_qualifiers(pairs: dict[str, str]) -> str:
    return ";".join(f"{k}={v}" for k, v in pairs.items())


# --- configuration ----------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(p) for p in text.replace(",", " ").split()]


def load_config(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    # hand-written configs may omit [meta]; a declared version must be known
    if "meta" in cp and cp["meta"].get("version") != str(FORMAT_VERSION):
        raise FormatError(
            f"unsupported config version {cp['meta'].get('version')!r}")
    return cp


def save_config(path: str, cp: configparser.ConfigParser) -> None:
    if "meta" not in cp:
        cp["meta"] = {"version": str(FORMAT_VERSION)}
    buf = _io.StringIO()
    cp.write(buf)
    atomic_write(path, buf.getvalue().encode("utf-8"))


def plant_to_config(cfg: PlantConfig, cp: configparser.ConfigParser | None = None):
    cp = cp or configparser.ConfigParser()
    cp["plant"] = {
        "baseline_centroid": _fmt(cfg.baseline_centroid),
        "min_centroid": _fmt(cfg.min_centroid),
        "fatigue_gain": _fmt(cfg.fatigue_gain),
        "recovery_rate": _fmt(cfg.recovery_rate),
        "noise_bandwidth": f"{_fmt(cfg.noise_bandwidth[0])}, {_fmt(cfg.noise_bandwidth[1])}",
        "amplitude": _fmt(cfg.amplitude),
        "seed": str(cfg.seed),
        "bump_std": _fmt(cfg.bump_std),
    }
    return cp


def plant_from_config(cp: configparser.ConfigParser) -> PlantConfig:
    if "plant" not in cp:
        raise ConfigError("config has no [plant] section")
    s = cp["plant"]
    band = _floats(s.get("noise_bandwidth", "60, 200"))
    return PlantConfig(
        baseline_centroid=s.getfloat("baseline_centroid", 130.0),
        min_centroid=s.getfloat("min_centroid", 85.0),
        fatigue_gain=s.getfloat("fatigue_gain", 0.002),
        recovery_rate=s.getfloat("recovery_rate", 0.005),
        noise_bandwidth=(band[0], band[1]),
        amplitude=s.getfloat("amplitude", 100.0),
        seed=s.getint("seed", 0),
        bump_std=s.getfloat("bump_std", 25.0),
    )


def mvar_to_config(spec: MvarSpec, cp: configparser.ConfigParser | None = None):
    cp = cp or configparser.ConfigParser()
    section = {"order": str(spec.order),
               "noise_var": f"{_fmt(spec.noise_var[0])}, {_fmt(spec.noise_var[1])}"}
    for k in range(spec.order):
        section[f"a{k + 1}"] = ", ".join(_fmt(v) for v in spec.coeffs[k].ravel())
    cp["mvar"] = section
    return cp


def mvar_from_config(cp: configparser.ConfigParser) -> MvarSpec:
    if "mvar" not in cp:
        raise ConfigError("config has no [mvar] section")
    s = cp["mvar"]
    order = s.getint("order")
    coeffs = []
    for k in range(1, order + 1):
        vals = _floats(s[f"a{k}"])
        if len(vals) != 4:
            raise ConfigError(f"a{k} needs 4 values (row-major 2x2)")
        coeffs.append(np.asarray(vals).reshape(2, 2))
    nv = _floats(s.get("noise_var", "1, 1"))
    return MvarSpec(order=order, coeffs=np.stack(coeffs), noise_var=(nv[0], nv[1]))


def session_to_config(cfg, cp: configparser.ConfigParser | None = None):
    cp = cp or configparser.ConfigParser()
    cp["session"] = {
        "mode": cfg.mode.value,
        "speed": _fmt(cfg.speed),
        "target_running": _fmt(cfg.target_running),
        "rest_duration": _fmt(cfg.rest_duration),
        "threshold": _fmt(cfg.threshold),
        "window": _fmt(cfg.window),
        "baseline_scope": cfg.baseline_rule.scope,
        "baseline_windows": str(cfg.baseline_rule.n_windows),
    }
    return cp


def session_from_config(cp: configparser.ConfigParser):
    from .controller import SessionConfig  # local import avoids a cycle

    if "session" not in cp:
        return SessionConfig()
    s = cp["session"]
    return SessionConfig(
        mode=s.get("mode", "fat-c"),
        speed=s.getfloat("speed", 16.0),
        target_running=s.getfloat("target_running", 1800.0),
        rest_duration=s.getfloat("rest_duration", 180.0),
        threshold=s.getfloat("threshold", 11.0),
        window=s.getfloat("window", 4.0),
        baseline_rule=BaselineRule(
            scope=s.get("baseline_scope", "per-bout"),
            n_windows=s.getint("baseline_windows", 3),
        ),
    )


def preprocess_from_config(cp: configparser.ConfigParser) -> PreprocessConfig:
    if "preprocess" not in cp:
        return PreprocessConfig()
    s = cp["preprocess"]
    band = _floats(s.get("band", "2, 200"))
    notch = _floats(s.get("notch", "49, 51"))
    return PreprocessConfig(
        target_rate=s.getfloat("target_rate", 1000.0),
        band=(band[0], band[1]),
        notch=(notch[0], notch[1]),
        order=s.getint("order", 4),
    )
