"""Command-line surface tying the modules into reproducible pipelines.

Subcommands: preprocess, mpf, simulate, lzc, psd-slope, dcmc, stats, plot.
All accept --seed (default from NEUROLOOP_SEED, else 0) and --config. Exit
codes: 0 success, 1 usage/configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import complexity, dcmc, io, slope, stats
from .controller import Mode, SessionConfig, simulate_session
from .errors import ConfigError, DataError, NeuroloopError
from .fatigue import BaselineRule, stream_mpf
from .signals import PreprocessConfig, preprocess, segment
from .synth import PlantConfig, gen_powerlaw_noise


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1 instead of 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_help()}")


def _pair(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return float(parts[0]), float(parts[1])


def _default_seed() -> int:
    env = os.environ.get("NEUROLOOP_SEED")
    return int(env) if env else 0


def _load_cfg(args):
    return io.load_config(args.config) if args.config else None


def build_parser() -> _Parser:
    parser = _Parser(prog="neuroloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (default: NEUROLOOP_SEED or 0)")
        p.add_argument("--config", help="INI configuration file")

    p = sub.add_parser("preprocess", help="resample + band-pass + notch a recording")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--band", type=_pair, default=None)
    p.add_argument("--notch", type=_pair, default=None)
    p.add_argument("--encoding", choices=["text", "binary"], default="text")
    common(p)

    p = sub.add_parser("mpf", help="windowed MPF and drop rates of one channel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--channel", default="EMG_AFF")
    p.add_argument("--window", type=float, default=4.0)
    p.add_argument("--band", type=_pair, default=(60.0, 200.0))
    p.add_argument("--baseline-rule", choices=["per-bout", "first-bout"],
                   default="per-bout")
    p.add_argument("--baseline-windows", type=int, default=3)
    common(p)

    p = sub.add_parser("simulate",
                       help="closed-loop session -> JSON-lines log + synthetic recording")
    p.add_argument("--mode", choices=["fat-c", "for-t"], default=None)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--target-running", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--encoding", choices=["text", "binary"], default="binary")
    p.add_argument("--subject", default="sim")
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--eeg-coupling", type=float, default=0.3,
                   help="beta-band EEG->EMG injection gain in the synthetic recording")
    common(p)

    p = sub.add_parser("lzc", help="per-epoch LZC and the trial drop rate")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--channel", default="EEG_AFF")
    p.add_argument("--epoch-len", type=float, default=5.0)
    common(p)

    p = sub.add_parser("psd-slope", help="resting-state PSD slope per channel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--channel", action="append", default=None,
                   help="repeatable; default: all channels")
    p.add_argument("--si", type=str, default=None,
                   help="AFF,UN channel pair for the symmetry index")
    p.add_argument("--fit-space", choices=["loglog", "loglin"], default="loglog")
    common(p)

    p = sub.add_parser("dcmc", help="directed corticomuscular coherence of a channel pair")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--eeg-channel", default="EEG_AFF")
    p.add_argument("--emg-channel", default="EMG_AFF")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--auto-order", action="store_true",
                   help="select the order by BIC over 2..10")
    p.add_argument("--beta", type=_pair, default=dcmc.BETA_BAND)
    p.add_argument("--gamma", type=_pair, default=dcmc.GAMMA_BAND)
    p.add_argument("--n-sim", type=int, default=50)
    p.add_argument("--trial-len", type=float, default=1.0)
    p.add_argument("--rectify-emg", action="store_true",
                   help="full-wave rectify the EMG channel before fitting")
    common(p)

    p = sub.add_parser("stats", help="run a statistical test over a result table")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--test", required=True,
                   choices=["ks", "ttest", "ttest-paired", "anova1", "anova2"])
    p.add_argument("--metric", required=True)
    p.add_argument("--by", default="group",
                   help="grouping column or qualifier key (ttest/anova1)")
    p.add_argument("--factors", default="group,day",
                   help="two factor columns for anova2, comma separated")
    p.add_argument("--posthoc", action="store_true")
    p.add_argument("--where", action="append", default=[],
                   help="key=value filter on columns or qualifiers; repeatable")
    common(p)

    p = sub.add_parser("plot", help="render metric figures from result tables")
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--output-dir", required=True)
    common(p)

    return parser


# --- subcommand implementations ---------------------------------------------

def _cmd_preprocess(args) -> int:
    cp = _load_cfg(args)
    cfg = io.preprocess_from_config(cp) if cp else PreprocessConfig()
    if args.rate is not None:
        cfg = replace(cfg, target_rate=args.rate)
    if args.band is not None:
        cfg = replace(cfg, band=args.band)
    if args.notch is not None:
        cfg = replace(cfg, notch=args.notch)
    rec = io.read_recording(args.input)
    out = io.Recording(
        [preprocess(ch, cfg) for ch in rec.channels],
        subject=rec.subject, day=rec.day, state=rec.state, group=rec.group,
        rejected_spans=rec.rejected_spans,
    )
    io.write_recording(args.output, out, encoding=args.encoding)
    return 0


def _mpf_rows(rec, ts, args):
    rule = BaselineRule(scope=args.baseline_rule, n_windows=args.baseline_windows)
    rows = []
    for w in stream_mpf(ts, window=args.window, baseline_rule=rule, band=args.band):
        quals = {"t": io._fmt(w.window_start), "channel": ts.channel}
        if w.is_baseline_window:
            quals["baseline"] = "1"
        if w.mpf is not None:
            rows.append(io.TableRow(rec.subject, rec.day, rec.group, "mpf",
                                    w.mpf, io.format_qualifiers(quals)))
        if w.drop_rate is not None:
            rows.append(io.TableRow(rec.subject, rec.day, rec.group, "mpf_drop_rate",
                                    w.drop_rate, io.format_qualifiers(quals)))
    return rows


def _cmd_mpf(args) -> int:
    rec = io.read_recording(args.input)
    rows = _mpf_rows(rec, rec.channel(args.channel), args)
    io.write_table(args.output, rows)
    return 0


def _cmd_simulate(args, seed: int) -> int:
    cp = _load_cfg(args)
    session = io.session_from_config(cp) if cp else SessionConfig()
    plant = io.plant_from_config(cp) if cp and "plant" in cp else PlantConfig()
    if args.mode is not None:
        session = replace(session, mode=Mode(args.mode))
    if args.target_running is not None:
        session = replace(session, target_running=args.target_running)
    if args.threshold is not None:
        session = replace(session, threshold=args.threshold)
    os.makedirs(args.output_dir, exist_ok=True)

    log, emg = simulate_session(session, plant, seed)
    io.atomic_write(os.path.join(args.output_dir, "session_log.jsonl"),
                    log.to_jsonl().encode())

    # synthetic EEG: pink-ish 2-45 Hz background; a delayed beta-band copy is
    # injected into the EMG so the descending dCMC pathway is exercised. The
    # injection sits below the 60-200 Hz MPF band, so gating is untouched.
    eeg = gen_powerlaw_noise(-1.0, emg.duration, emg.sample_rate,
                             seed=seed + 1, band=(2.0, 45.0), amplitude=50.0)
    eeg = replace(eeg, channel="EEG_AFF")
    emg_x = emg.samples.copy()
    if args.eeg_coupling > 0 and emg.samples.size > 40:
        from scipy import signal as sps
        nyq = emg.sample_rate / 2.0
        sos = sps.butter(4, [15.0 / nyq, 30.0 / nyq], btype="bandpass", output="sos")
        beta = sps.sosfiltfilt(sos, eeg.samples)
        delay = int(round(0.02 * emg.sample_rate))
        shifted = np.zeros_like(beta)
        shifted[delay:] = beta[:-delay]
        rms_emg = float(np.sqrt(np.mean(emg_x ** 2)))
        rms_beta = float(np.sqrt(np.mean(beta ** 2))) or 1.0
        emg_x = emg_x + args.eeg_coupling * (rms_emg / rms_beta) * shifted
    rec = io.Recording(
        [eeg, replace(emg, samples=emg_x)],
        subject=args.subject, day=args.day, state="training",
        group=session.mode.value,
    )
    io.write_recording(os.path.join(args.output_dir, "recording.rec"), rec,
                       encoding=args.encoding)

    rests = sum(1 for e in log.events if e.kind == "rest_start")
    terminal = log.events[-1]
    rows = [
        io.TableRow(args.subject, args.day, session.mode.value, "session_duration",
                    terminal.t),
        io.TableRow(args.subject, args.day, session.mode.value, "rest_count", rests),
        io.TableRow(args.subject, args.day, session.mode.value, "accumulated_running",
                    terminal.data.get("accumulated_running", 0.0)),
    ]
    io.write_table(os.path.join(args.output_dir, "session_summary.csv"), rows)
    return 0


def _cmd_lzc(args) -> int:
    rec = io.read_recording(args.input)
    ts = rec.channel(args.channel)
    epochs = segment(ts, args.epoch_len, reject_spans=tuple(rec.rejected_spans))
    results = [complexity.lzc(ep) for ep in epochs if ep.accepted]
    if not results:
        raise DataError("no accepted epochs")
    rows = [io.TableRow(rec.subject, rec.day, rec.group, "lzc", r.c_norm,
                        io.format_qualifiers({"t": io._fmt(r.epoch_start),
                                              "channel": ts.channel}))
            for r in results]
    try:
        drop = complexity.lzc_drop_rate(results, ts.duration)
        rows.append(io.TableRow(rec.subject, rec.day, rec.group, "lzc_drop_rate",
                                drop, f"channel={ts.channel}"))
    except DataError as exc:
        print(f"note: drop rate skipped ({exc})", file=sys.stderr)
    io.write_table(args.output, rows)
    return 0


def _cmd_psd_slope(args) -> int:
    rec = io.read_recording(args.input)
    labels = args.channel or [ch.channel for ch in rec.channels]
    rows = []
    slopes = {}
    spans = tuple(rec.rejected_spans)
    for label in labels:
        res = slope.psd_slope(rec.channel(label), fit_space=args.fit_space,
                              reject_spans=spans)
        slopes[label] = res.slope
        rows.append(io.TableRow(
            rec.subject, rec.day, rec.group, "psd_slope", res.slope,
            io.format_qualifiers({
                "channel": label, "r2": f"{res.r2:.6f}",
                "n_segments": str(res.n_segments), "fit_space": res.fit_space})))
    if args.si:
        aff, un = (s.strip() for s in args.si.split(","))
        for label in (aff, un):
            if label not in slopes:
                slopes[label] = slope.psd_slope(rec.channel(label),
                                                fit_space=args.fit_space,
                                                reject_spans=spans).slope
        rows.append(io.TableRow(
            rec.subject, rec.day, rec.group, "psd_slope_si",
            slope.slope_si(slopes[aff], slopes[un]),
            io.format_qualifiers({"aff": aff, "un": un})))
    io.write_table(args.output, rows)
    return 0


def _cmd_dcmc(args, seed: int) -> int:
    if args.order is None and not args.auto_order:
        raise UsageError("dcmc: --order N is required unless --auto-order is given")
    rec = io.read_recording(args.input)
    eeg = rec.channel(args.eeg_channel)
    emg = rec.channel(args.emg_channel)
    if args.rectify_emg:
        emg = replace(emg, samples=np.abs(emg.samples))
    spans = tuple(rec.rejected_spans)
    ep_eeg = segment(eeg, args.trial_len, reject_spans=spans, auto_reject=False)
    ep_emg = segment(emg, args.trial_len, reject_spans=spans, auto_reject=False)
    pairs = [(a, b) for a, b in zip(ep_eeg, ep_emg) if a.accepted and b.accepted]
    if not pairs:
        raise DataError("no accepted trial pairs")
    trials = [np.vstack([a.samples, b.samples]) for a, b in pairs]
    starts = [a.start_time - eeg.t0 for a, _ in pairs]
    trial_len = trials[0].shape[1]
    order = (dcmc.select_order(trials, candidates=range(2, 11))
             if args.auto_order else args.order)

    thr = dcmc.significance_threshold(len(trials), trial_len, order,
                                      n_sim=args.n_sim, seed=seed,
                                      sample_rate=eeg.sample_rate)
    pooled = dcmc.mask_and_normalize(
        dcmc.directed_coherence(dcmc.fit_mvar(trials, order),
                                sample_rate=eeg.sample_rate), thr)
    quals_base = {"eeg": args.eeg_channel, "emg": args.emg_channel,
                  "order": str(order)}
    rows = [io.TableRow(rec.subject, rec.day, rec.group, "dcmc_sig_threshold",
                        thr, io.format_qualifiers(quals_base))]
    for direction, values in (("descending", pooled.norm_desc),
                              ("ascending", pooled.norm_asc)):
        for f, v in zip(pooled.freqs, values):
            rows.append(io.TableRow(
                rec.subject, rec.day, rec.group, "dcmc", v,
                io.format_qualifiers({**quals_base, "direction": direction,
                                      "freq": io._fmt(f)})))

    # early/late band summaries need a time-resolved (per-trial) pipeline
    duration = eeg.duration
    if duration >= 240.0:
        thr1 = dcmc.significance_threshold(1, trial_len, order, n_sim=args.n_sim,
                                           seed=seed + 1,
                                           sample_rate=eeg.sample_rate)
        per_trial = [dcmc.directed_coherence(dcmc.fit_mvar([t], order),
                                             sample_rate=eeg.sample_rate)
                     for t in trials]
        normalized = dcmc.mask_and_normalize_set(per_trial, thr1)
        for name, band in (("beta", args.beta), ("gamma", args.gamma)):
            desc, asc = dcmc.band_summary(normalized, starts, band, duration,
                                          label=name)
            for summary in (desc, asc):
                for phase, value in (("early", summary.early_mean),
                                     ("late", summary.late_mean)):
                    rows.append(io.TableRow(
                        rec.subject, rec.day, rec.group, "dcmc_band_mean", value,
                        io.format_qualifiers({**quals_base, "band": name,
                                              "direction": summary.direction,
                                              "phase": phase})))
    io.write_table(args.output, rows)
    return 0


def _match(row: io.TableRow, filters: list[str]) -> bool:
    quals = io.parse_qualifiers(row.qualifiers)
    for f in filters:
        key, _, want = f.partition("=")
        have = {"subject": row.subject, "day": str(row.day),
                "group": row.group}.get(key, quals.get(key))
        if have != want:
            return False
    return True


def _key_of(row: io.TableRow, column: str) -> str | None:
    if column in ("subject", "day", "group"):
        return str(getattr(row, column))
    return io.parse_qualifiers(row.qualifiers).get(column)


def _stat_rows(result: stats.StatResult, test: str, metric: str, term: str):
    df = result.df
    df_text = (";".join(str(d) for d in df) if isinstance(df, tuple) else str(df))
    eff = "" if result.effect_size is None else io._fmt(result.effect_size)
    return [test, metric, term, io._fmt(result.statistic), df_text,
            io._fmt(result.p_value), eff]


def _cmd_stats(args) -> int:
    rows = [r for r in io.read_table(args.input)
            if r.metric == args.metric and _match(r, args.where)]
    if not rows:
        raise DataError(f"no rows for metric {args.metric!r} after filtering")
    out_rows = []
    if args.test == "ks":
        res = stats.ks_normality([r.value for r in rows])
        out_rows.append(_stat_rows(res, "ks", args.metric, "all"))
    elif args.test in ("ttest", "ttest-paired"):
        levels = sorted({_key_of(r, args.by) or "" for r in rows})
        if len(levels) != 2:
            raise DataError(f"--by {args.by} must split rows into exactly two "
                            f"groups, found {levels}")
        a = [r.value for r in rows if (_key_of(r, args.by) or "") == levels[0]]
        b = [r.value for r in rows if (_key_of(r, args.by) or "") == levels[1]]
        res = stats.t_test(a, b, paired=(args.test == "ttest-paired"))
        out_rows.append(_stat_rows(res, args.test, args.metric,
                                   f"{levels[0]}-vs-{levels[1]}"))
    elif args.test == "anova1":
        levels = sorted({_key_of(r, args.by) or "" for r in rows})
        groups = [[r.value for r in rows if (_key_of(r, args.by) or "") == lv]
                  for lv in levels]
        result = stats.anova_oneway(groups, posthoc=args.posthoc)
        out_rows.append(_stat_rows(result.overall, "anova1", args.metric, "between"))
        if result.posthoc is not None:
            for i in range(len(levels)):
                for j in range(i + 1, len(levels)):
                    out_rows.append(["anova1-posthoc", args.metric,
                                     f"{levels[i]}-vs-{levels[j]}", "",
                                     "", io._fmt(result.posthoc[i, j]), ""])
    else:  # anova2
        fa, fb = (s.strip() for s in args.factors.split(","))
        a_levels = sorted({_key_of(r, fa) or "" for r in rows})
        b_levels = sorted({_key_of(r, fb) or "" for r in rows})
        cells = [[[r.value for r in rows
                   if (_key_of(r, fa) or "") == la and (_key_of(r, fb) or "") == lb]
                  for lb in b_levels] for la in a_levels]
        counts = {len(c) for row_ in cells for c in row_}
        if len(counts) != 1 or 0 in counts:
            raise DataError("unbalanced two-way design (unequal cell counts)")
        result = stats.anova_twoway(cells)
        for term, res in ((fa, result.factor_a), (fb, result.factor_b),
                          ("interaction", result.interaction)):
            if res is not None:
                out_rows.append(_stat_rows(res, "anova2", args.metric, term))
    header = ["test", "metric", "term", "statistic", "df", "p_value", "effect_size"]
    lines = [",".join(header)] + [",".join(str(c) for c in r) for r in out_rows]
    io.atomic_write(args.output, ("\n".join(lines) + "\n").encode())
    return 0


def _cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = []
    for path in args.input:
        rows.extend(io.read_table(path))
    os.makedirs(args.output_dir, exist_ok=True)
    made = 0
    for metric in sorted({r.metric for r in rows}):
        sub = [r for r in rows if r.metric == metric]
        quals = [io.parse_qualifiers(r.qualifiers) for r in sub]
        fig, ax = plt.subplots(figsize=(6, 4))
        if any("phase" in q for q in quals):
            # grouped bars per (direction, band), one bar group per phase
            keys = sorted({(q.get("direction", ""), q.get("band", "")) for q in quals})
            phases = sorted({q["phase"] for q in quals if "phase" in q})
            width = 0.8 / max(1, len(phases))
            for k, phase in enumerate(phases):
                vals = []
                for key in keys:
                    vs = [r.value for r, q in zip(sub, quals)
                          if (q.get("direction", ""), q.get("band", "")) == key
                          and q.get("phase") == phase]
                    vals.append(np.mean(vs) if vs else np.nan)
                ax.bar(np.arange(len(keys)) + k * width, vals, width, label=phase)
            ax.set_xticks(np.arange(len(keys)) + width * (len(phases) - 1) / 2)
            ax.set_xticklabels([f"{d}\n{b}" for d, b in keys], fontsize=8)
            ax.legend()
        elif any("freq" in q for q in quals):
            for direction in sorted({q.get("direction", "") for q in quals}):
                pts = sorted((float(q["freq"]), r.value)
                             for r, q in zip(sub, quals)
                             if q.get("direction", "") == direction and "freq" in q)
                if pts:
                    f, v = zip(*pts)
                    ax.plot(f, v, label=direction or None)
            ax.set_xlabel("frequency (Hz)")
            if ax.get_legend_handles_labels()[0]:
                ax.legend()
        else:
            groups = sorted({r.group for r in sub})
            days = sorted({r.day for r in sub})
            for g in groups:
                means, sems = [], []
                for d in days:
                    vs = [r.value for r in sub if r.group == g and r.day == d]
                    means.append(np.mean(vs) if vs else np.nan)
                    sems.append(np.std(vs) / np.sqrt(len(vs)) if len(vs) > 1 else 0.0)
                ax.errorbar(days, means, yerr=sems, marker="o", capsize=3,
                            label=g or None)
            ax.set_xlabel("day")
            if ax.get_legend_handles_labels()[0]:
                ax.legend()
        ax.set_ylabel(metric)
        ax.set_title(metric)
        fig.tight_layout()
        fig.savefig(os.path.join(args.output_dir, f"{metric}.png"), dpi=120)
        plt.close(fig)
        made += 1
    print(f"wrote {made} figure(s) to {args.output_dir}")
    return 0


def run_cli(argv=None) -> int:
    """Parse and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        seed = args.seed if args.seed is not None else _default_seed()
        if args.command == "preprocess":
            return _cmd_preprocess(args)
        if args.command == "mpf":
            return _cmd_mpf(args)
        if args.command == "simulate":
            return _cmd_simulate(args, seed)
        if args.command == "lzc":
            return _cmd_lzc(args)
        if args.command == "psd-slope":
            return _cmd_psd_slope(args)
        if args.command == "dcmc":
            return _cmd_dcmc(args, seed)
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "plot":
            return _cmd_plot(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NeuroloopError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
