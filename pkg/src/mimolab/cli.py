"""Command-line front-end: train, eval, compare, sweep, plot.

Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, plots
from .config import ConfigError, load_config
from .ddpg import DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


def _add_common(p):
    p.add_argument("--config", required=True, help="path to the YAML config")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seeds", default=None,
                   help="comma-separated seed list (default: eval.seeds)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-v", "--verbose", action="count", default=0)


def _parse_seeds(text):
    if text is None:
        return None
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad --seeds value: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimolab",
        description="Desk-scale massive MIMO scheduling/precoding lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the dynamic selection agent")
    _add_common(p)
    p.add_argument("--seed", type=int, default=None, help="training seed")

    p = sub.add_parser("eval", help="evaluate one policy over seeds")
    _add_common(p)
    p.add_argument("--policy", required=True,
                   help="triple name, baseline (orfa|ublaa|lwdf-pf), or checkpoint")

    p = sub.add_parser("compare", help="compare two or more policies")
    _add_common(p)
    p.add_argument("--policies", required=True,
                   help="comma-separated policy specs")

    p = sub.add_parser("sweep", help="sweep antennas or total UEs")
    _add_common(p)
    p.add_argument("--axis", choices=["antennas", "ues"], required=True)
    p.add_argument("--values", required=True, help="comma-separated ascending values")
    p.add_argument("--policies", required=True)

    p = sub.add_parser("plot", help="re-render SVG figures from an output dir")
    p.add_argument("--dir", dest="in_dir", required=True)
    return parser


def _out_dir(args, cfg, default_name):
    base = Path(args.out) if args.out else Path(cfg.run.out_dir) / default_name
    base.mkdir(parents=True, exist_ok=True)
    return base


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg, "train")
    progress = None
    if args.verbose:
        progress = lambda e, r: print(f"epoch {e}: mean return {r:.3f}")
    try:
        agent, result = harness.train_agent(cfg, seed=args.seed, progress=progress)
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    ckpt = harness.write_train_result(out, agent, result, cfg)
    print(f"checkpoint: {ckpt}")
    print(f"epochs: {result.epochs_run} (converged={result.converged})")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg, "eval")
    report = harness.evaluate_policy(cfg, args.policy,
                                     seeds=_parse_seeds(args.seeds),
                                     workers=args.workers)
    harness.write_run_report(out, report, cfg)
    print(f"policy {report.policy}: utility {report.utility_mean:.4f}, "
          f"throughput {report.throughput_mean_bps / 1e6:.2f} Mb/s")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg, "compare")
    specs = [s.strip() for s in args.policies.split(",") if s.strip()]
    reports = harness.compare_policies(cfg, specs, seeds=_parse_seeds(args.seeds),
                                       workers=args.workers)
    rows = []
    for spec, rep in reports.items():
        harness.write_run_report(out / rep.policy.replace(" ", "_").replace("/", "-"),
                                 rep, cfg)
        rows.append({"policy": rep.policy, "utility": rep.utility_mean,
                     "throughput_bps": rep.throughput_mean_bps,
                     "config_hash": rep.config_hash})
        print(f"{rep.policy:32s} utility {rep.utility_mean:.4f} "
              f"throughput {rep.throughput_mean_bps / 1e6:.2f} Mb/s")
    harness._write_csv(out / "comparison.csv", rows,
                       ["policy", "utility", "throughput_bps", "config_hash"])
    names = [r["policy"] for r in rows]
    plots.bar_chart(out / "utility_bar.svg", names,
                    {"normalized utility": [r["utility"] for r in rows]},
                    ylabel="normalized utility")
    plots.bar_chart(out / "throughput_bar.svg", names,
                    {"throughput (Mb/s)": [r["throughput_bps"] / 1e6 for r in rows]},
                    ylabel="throughput (Mb/s)")
    cdf_data = {rep.policy: [s["utility"] for s in rep.short_term_samples]
                for rep in reports.values()}
    plots.cdf_plot(out / "short_term_cdf.svg", cdf_data,
                   xlabel="short-term average utility")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg, "sweep")
    try:
        values = [int(v) for v in args.values.split(",")]
    except ValueError:
        raise ConfigError(f"bad --values: {args.values!r}") from None
    specs = [s.strip() for s in args.policies.split(",") if s.strip()]
    rows = harness.sweep(cfg, args.axis, values, specs,
                         seeds=_parse_seeds(args.seeds), workers=args.workers)
    flat = [{"axis": r["axis"], "value": r["value"], "policy": r["policy"],
             "utility_mean": r["utility_mean"],
             "throughput_mean_bps": r["throughput_mean_bps"],
             "config_hash": cfg.hash()} for r in rows]
    harness._write_csv(out / "trend.csv", flat,
                       ["axis", "value", "policy", "utility_mean",
                        "throughput_mean_bps", "config_hash"])
    series: dict[str, list] = {}
    for r in rows:
        series.setdefault(r["policy"], []).append(r["utility_mean"])
    plots.line_plot(out / "trend.svg", values, series,
                    xlabel=args.axis, ylabel="normalized utility")
    for r in rows:
        print(f"{r['axis']}={r['value']:4d} {r['policy']:32s} "
              f"utility {r['utility_mean']:.4f}")
    return EXIT_OK


def cmd_plot(args) -> int:
    import csv as _csv

    in_dir = Path(args.in_dir)
    if not in_dir.exists():
        raise ConfigError(f"no such directory: {in_dir}")
    done = 0
    for csv_path in sorted(in_dir.glob("*.csv")):
        with open(csv_path) as fh:
            reader = _csv.DictReader(fh)
            rows = list(reader)
        if not rows:
            continue
        cols = set(rows[0])
        svg = csv_path.with_suffix(".svg")
        if {"group", "series", "value"} <= cols:
            labels = list(dict.fromkeys(r["group"] for r in rows))
            series: dict[str, list] = {}
            for r in rows:
                series.setdefault(r["series"], []).append(float(r["value"]))
            plots.bar_chart(svg, labels, series, ylabel="value")
            done += 1
        elif {"series", "x", "cdf"} <= cols:
            samples: dict[str, list] = {}
            for r in rows:
                samples.setdefault(r["series"], []).append(float(r["x"]))
            plots.cdf_plot(svg, samples, xlabel="value")
            done += 1
        elif {"series", "x", "y"} <= cols:
            series = {}
            xs: list[float] = []
            for r in rows:
                series.setdefault(r["series"], []).append(float(r["y"]))
            xs = list(dict.fromkeys(float(r["x"]) for r in rows))
            plots.line_plot(svg, xs, series, xlabel="x", ylabel="y")
            done += 1
    print(f"rendered {done} figures in {in_dir}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
