"""Command-line entry point: ``tarasim {thresholds,run,analyze,scenario-dump}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import analysis
from .channel import build_threshold_table, snr_distance_csv
from .config import ConfigError, RunConfig, load_config, parse_seeds
from .kinematics import generate_scenario, scenario_to_csv
from .simulator import LINKS, run_batch

log = logging.getLogger("tarasim")

OUT_ENV = "TARASIM_OUT"
SUMMARY_COLUMNS = ["seed", "algorithm", "link", "mean_throughput_bps", "drops"]
RUN_COLUMNS = ["time_s", "link", "delivered_bits", "distance_m", "first_stage_mcs"]


class RuntimeFailure(Exception):
    pass


def run_csv_name(seed, algorithm):
    return f"seed{seed:04d}_{algorithm}.csv"


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _build_config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    if getattr(args, "seeds", None):
        try:
            overrides["seeds"] = parse_seeds(args.seeds)
        except ValueError as e:
            raise ConfigError(f"seeds: {e}") from None
    if getattr(args, "algorithms", None):
        overrides["algorithms"] = [a.strip().lower() for a in args.algorithms.split(",") if a.strip()]
    if getattr(args, "duration", None) is not None:
        overrides["run_duration"] = args.duration
        overrides["delta"] = min(cfg.delta, args.duration) if args.duration > 0 else cfg.delta
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    elif os.environ.get(OUT_ENV) and not getattr(args, "config", None):
        overrides["out_dir"] = os.environ[OUT_ENV]
    if getattr(args, "jobs", None):
        overrides["jobs"] = args.jobs
    if getattr(args, "target_ber", None) is not None:
        overrides["target_ber"] = args.target_ber
    return cfg.with_overrides(**overrides).validate()


# ------------------------------------------------------------------ commands

def cmd_thresholds(args):
    cfg = _build_config(args)
    table = build_threshold_table(cfg.target_ber)
    text = table.to_csv()
    if args.out:
        out = Path(args.out)
        _write(out / "thresholds.csv", text)
        distances = np.arange(10.0, 1001.0, 10.0)
        for link in LINKS:
            _write(out / f"snr_distance_{link}.csv", snr_distance_csv(cfg.radio(link), distances))
    else:
        sys.stdout.write(text)
    return 0


def cmd_scenario_dump(args):
    cfg = _build_config(args)
    text = scenario_to_csv(generate_scenario(cfg.scenario_config(cfg.seeds[0])))
    if args.out:
        _write(Path(args.out) / f"scenario_seed{cfg.seeds[0]:04d}.csv", text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args):
    cfg = _build_config(args)
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise RuntimeFailure(f"output directory {out} is not writable: {e}") from None

    _write(out / "config.txt", cfg.to_text())
    summary = []

    def on_result(seed, scenario, runs):
        _write(out / "scenarios" / f"seed{seed:04d}.csv", scenario_to_csv(scenario))
        for algo in cfg.algorithms:
            m = runs[algo]
            _write(out / "runs" / run_csv_name(seed, algo), m.to_csv())
            if args.traces:
                _write(out / "traces" / run_csv_name(seed, algo), m.trace_csv())
            summary.extend(m.summary_rows())
        log.info("seed %d done", seed)

    run_batch(cfg.scenario_config(), cfg.algorithms, cfg.seeds, cfg.simulation_config(),
              jobs=cfg.jobs, on_result=on_result)

    buf = io.StringIO()
    w = csv.DictWriter(buf, SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(summary)
    _write(out / "summary.csv", buf.getvalue())

    means = _means_from_summary(summary)
    _print_overview(means, cfg.algorithms)
    return 0


def _means_from_summary(rows):
    means = defaultdict(dict)  # algorithm -> {(seed, link): bps}
    for r in rows:
        means[r["algorithm"]][(int(r["seed"]), r["link"])] = float(r["mean_throughput_bps"])
    return means


def _print_overview(means, algorithms):
    for algo in algorithms:
        for link in LINKS:
            vals = [v for (s, l), v in means[algo].items() if l == link]
            print(f"{algo:9s} {link:6s} mean throughput {np.mean(vals) / 1e6:8.3f} Mb/s")
    if "tara" in means:
        for base in ("minstrel", "ideal"):
            if base not in means:
                continue
            for link in LINKS:
                g = analysis.gains(_link_only(means["tara"], link), _link_only(means[base], link))
                print(f"tara vs {base:8s} {link:6s} mean gain {g.mean_gain:+7.2f}%  "
                      f"positive in {100 * g.positive_fraction:5.1f}% of seeds")


def _link_only(d, link):
    return {k: v for k, v in d.items() if k[1] == link}


def _read_csv(path, columns):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(columns) - set(reader.fieldnames):
                raise RuntimeFailure(f"{path}: missing columns, expected {columns}")
            return list(reader)
    except OSError as e:
        raise RuntimeFailure(f"{path}: cannot read ({e})") from None


def load_batch(batch_dir):
    """Read a directory written by ``run``: summary rows and pooled per-second samples."""
    batch_dir = Path(batch_dir)
    summary = _read_csv(batch_dir / "summary.csv", SUMMARY_COLUMNS)
    if not summary:
        raise RuntimeFailure(f"{batch_dir / 'summary.csv'}: no rows")
    pooled = defaultdict(list)  # (algorithm, link) -> samples
    seen = sorted({(int(r["seed"]), r["algorithm"]) for r in summary})
    for seed, algo in seen:
        path = batch_dir / "runs" / run_csv_name(seed, algo)
        for row in _read_csv(path, RUN_COLUMNS):
            try:
                pooled[(algo, row["link"])].append(float(row["delivered_bits"]))
            except ValueError:
                raise RuntimeFailure(f"{path}: corrupt delivered_bits {row['delivered_bits']!r}") from None
    try:
        means = _means_from_summary(summary)
    except (KeyError, ValueError) as e:
        raise RuntimeFailure(f"{batch_dir / 'summary.csv'}: corrupt row ({e})") from None
    return means, {k: np.array(v) for k, v in pooled.items()}


def cmd_analyze(args):
    batch_dir = Path(args.batch_dir)
    means, pooled = load_batch(batch_dir)
    out = Path(args.out) if args.out else batch_dir / "analysis"
    algorithms = sorted(means)

    rows = [["algorithm", "link", "value", "ccdf"]]
    for (algo, link), samples in sorted(pooled.items()):
        c = analysis.ccdf(samples)
        rows += [[algo, link, f"{v:.9g}", f"{p:.9g}"] for v, p in zip(c.values, c.probs)]
    _write(out / "ccdf.csv", _csv_text(rows))

    rows = [["algorithm", "link", "p70", "p50", "p30"]]
    for (algo, link), samples in sorted(pooled.items()):
        c = analysis.ccdf(samples)
        rows.append([algo, link, *(f"{analysis.ccdf_percentile(c, q):.9g}" for q in (70, 50, 30))])
    _write(out / "percentiles.csv", _csv_text(rows))

    rows = [["algorithm", "link", "n", "mean_bps", "half_width_99_bps"]]
    for algo in algorithms:
        for link in LINKS:
            vals = [v for (s, l), v in sorted(means[algo].items()) if l == link]
            if len(vals) >= 2:
                m, h = analysis.mean_ci99(vals)
                rows.append([algo, link, len(vals), f"{m:.9g}", f"{h:.9g}"])
    _write(out / "ci.csv", _csv_text(rows))

    gain_rows = [["baseline", "seed", "link", "gain_pct"]]
    summary_rows = [["baseline", "link", "n", "excluded", "mean_gain_pct", "positive_fraction"]]
    gain_ccdf_rows = [["baseline", "link", "gain_pct", "ccdf"]]
    if "tara" in means:
        for base in (b for b in ("minstrel", "ideal") if b in means):
            for link in LINKS:
                g = analysis.gains(_link_only(means["tara"], link), _link_only(means[base], link))
                gain_rows += [[base, r.seed, r.link, f"{r.gain_vs_baseline:.9g}"] for r in g.records]
                summary_rows.append([base, link, len(g.records), g.excluded,
                                     f"{g.mean_gain:.9g}", f"{g.positive_fraction:.9g}"])
                if g.records:
                    c = g.ccdf()
                    gain_ccdf_rows += [[base, link, f"{v:.9g}", f"{p:.9g}"] for v, p in zip(c.values, c.probs)]
    _write(out / "gains.csv", _csv_text(gain_rows))
    _write(out / "gain_summary.csv", _csv_text(summary_rows))
    _write(out / "gain_ccdf.csv", _csv_text(gain_ccdf_rows))
    print(f"wrote statistics to {out}")
    return 0


def _csv_text(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------------------ parser

def build_parser():
    p = argparse.ArgumentParser(prog="tarasim", description="Trajectory-aware rate adaptation simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("thresholds", help="dump the SNR threshold table and SNR-vs-distance curves")
    common(sp)
    sp.add_argument("--target-ber", type=float)
    sp.set_defaults(func=cmd_thresholds)

    sp = sub.add_parser("run", help="simulate a seed sweep")
    common(sp)
    sp.add_argument("--seeds", help="A..B, or a comma list")
    sp.add_argument("--algorithms", help="comma list of minstrel,tara,ideal")
    sp.add_argument("--duration", type=float, help="run duration in seconds")
    sp.add_argument("--jobs", type=int, help="worker processes")
    sp.add_argument("--traces", action="store_true", help="also write per-tau decision traces")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("analyze", help="statistics for a directory written by run")
    sp.add_argument("batch_dir")
    sp.add_argument("--out", help="defaults to BATCH_DIR/analysis")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("scenario-dump", help="write one seed's trajectories as CSV")
    common(sp)
    sp.add_argument("--seeds", help="seed to dump (first of the list)")
    sp.add_argument("--duration", type=float)
    sp.set_defaults(func=cmd_scenario_dump)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (RuntimeFailure, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
