"""Command-line entry point.

Subcommands::

    toy         simulate the toy example and monitor it with every method
    monitor     monitor an embedding CSV
    timing      per-query timing of depth / benchmark evaluations
    montecarlo  repeated runs with random reference samples
    simulate    write the toy dataset and its embeddings only

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

from depthmon import csvio
from depthmon.charting import ChartConfig
from depthmon.config import COMMANDS, RunConfig, load_config_file
from depthmon.errors import ConfigError, DataError, DepthmonError
from depthmon.pipeline import RunResult, build_references, monte_carlo_study, run_pipeline, validate_phase1
from depthmon.reference import EmbeddingRecord, Phase
from depthmon.simulate import gen_toy_data, toy_inputs, toy_records
from depthmon.svg import render_chart_svg
from depthmon.timing import TIMING_COLUMNS, summarize, time_queries

logger = logging.getLogger("depthmon")


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1, not argparse's default 2 (reserved for data errors)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; its values override flags")
    p.add_argument("--output-dir", dest="output_dir", help="directory for all outputs")
    p.add_argument("--seed", type=int, help="master seed (data, reference sampling, iForest)")
    p.add_argument("--alpha", type=float, help="false-alarm probability in (0, 1)")
    p.add_argument("--chart", choices=("r", "q"), help="r chart or Q chart")
    p.add_argument("--n", type=int, help="Q-chart batch size (>= 2)")
    p.add_argument(
        "--method",
        dest="methods",
        action="append",
        help="method label(s), comma separated or repeated: MD SD HDr PD1-3 PDa1-3 LOF KDEOS iForest MDis "
        "NOF, or the groups depths / benchmarks / all",
    )
    p.add_argument("--reference", choices=("confidence", "random", "merged"), help="reference sampling")
    p.add_argument("--size", type=int, help="reference size per class (total for merged)")
    p.add_argument("--ridge", action="store_true", default=None, help="regularize reference covariances")
    p.add_argument(
        "--leave-one-out",
        dest="leave_one_out",
        action="store_true",
        default=None,
        help="exclude each reference point from its own Phase I rank",
    )
    p.add_argument("--no-svg", dest="svg", action="store_false", default=None, help="skip chart rendering")
    p.add_argument("--direction-budget", dest="direction_budget", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--convergence-tol", dest="convergence_tol", type=float)
    p.add_argument("--depth-seed", dest="depth_seed", type=int)
    p.add_argument("--smoothing", type=float, help="halfspace smoothing width in MAD units")
    p.add_argument("--lof-k", dest="lof_k", type=int)
    p.add_argument("--kdeos-kernel", dest="kdeos_kernel", choices=("gaussian", "epanechnikov"))
    p.add_argument("--kdeos-k-min", dest="kdeos_k_min", type=int)
    p.add_argument("--kdeos-k-max", dest="kdeos_k_max", type=int)
    p.add_argument("--iforest-trees", dest="iforest_trees", type=int)
    p.add_argument("--iforest-subsample", dest="iforest_subsample", type=int)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depthmon", description="Depth-based rank control charts for network embeddings.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "toy": "simulate the toy example and monitor it",
        "monitor": "monitor an embedding CSV",
        "timing": "time per-query depth / score evaluation",
        "montecarlo": "repeat runs with random reference samples",
        "simulate": "write the toy dataset and embeddings",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        if name in ("monitor", "timing", "montecarlo"):
            required = name == "monitor"
            p.add_argument("--input", required=required, help="embedding CSV" + ("" if required else " (default: toy)"))
        if name in ("toy", "simulate"):
            p.add_argument("--arch", help="layer sizes, e.g. 7,10,3,1")
        if name == "montecarlo":
            p.add_argument("--runs", type=int, help="number of runs (>= 2)")
        if name == "timing":
            p.add_argument("--queries", type=int, help="cap on timed queries")
        _common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Flags first, then the config file on top."""
    values = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "verbose")}
    if "arch" in values:
        try:
            values["arch"] = tuple(int(a) for a in values["arch"].split(","))
        except ValueError:
            raise ConfigError(f"--arch must be comma separated integers, got {values['arch']!r}") from None
    if args.config:
        file_values = load_config_file(args.config)
        if file_values.get("command", args.command) != args.command:
            raise ConfigError(f"config file is for {file_values['command']!r}, not {args.command!r}")
        values.update(file_values)
    return RunConfig.from_dict(values)


# ---------------------------------------------------------------- commands


def _load_records(cfg: RunConfig) -> list[EmbeddingRecord]:
    if cfg.input is not None:
        try:
            return csvio.parse_embeddings_csv(cfg.input)
        except OSError as exc:
            raise DataError(f"cannot read {cfg.input}: {exc}") from None
    records, _, _ = toy_records(cfg.seed, layer_sizes=cfg.arch)
    return records


def _write_run(out: Path, cfg: RunConfig, result: RunResult, chart: ChartConfig, records) -> dict:
    label = csvio.safe_label(result.method_label)
    csvio.write_signals_csv(out / f"signals_{label}.csv", result.signals)
    extra = {}
    for key, ref in result.references.items():
        extra[str(key)] = {"size": ref.size, "indices": list(ref.indices)}
    payload = {
        "method": result.method_label,
        "lcl": chart.lcl,
        "report": result.report.to_dict(),
        "references": extra,
        "removed_phase1": result.removed_phase1,
        "config": cfg.to_dict(),
    }
    if any(getattr(f, "capped", False) for f in result.fitted.values()):
        payload["nof_capped"] = True
    csvio.write_json(out / f"report_{label}.json", payload)
    if cfg.svg:
        mis = [r.index for r in records if r.phase is not Phase.PHASE_I and r.misclassified]
        svg = render_chart_svg(result.signals, chart.lcl, f"{result.method_label} ({cfg.chart} chart)", mis)
        (out / f"chart_{label}.svg").write_text(svg, encoding="utf-8")
    return payload["report"]


def _monitor_all(cfg: RunConfig, records, out: Path) -> dict:
    chart = cfg.chart_config()
    summary = {}
    for method in cfg.method_objects():
        logger.info("running %s", method.label)
        result = run_pipeline(records, method, chart, cfg.reference_plan(), cfg.leave_one_out)
        summary[method.label] = _write_run(out, cfg, result, chart, records)
    csvio.write_json(out / "summary.json", {"config": cfg.to_dict(), "lcl": chart.lcl, "methods": summary})
    return summary


def _print_summary(summary: dict):
    def fmt(x):
        return "  -  " if x is None else f"{x:.3f}"

    print(f"{'method':8s} {'FAR':>6s} {'SR':>6s} {'CDR':>6s}")
    for label, rep in summary.items():
        print(f"{label:8s} {fmt(rep['far']):>6s} {fmt(rep['sr_weighted']):>6s} {fmt(rep['cdr']):>6s}")


def _write_toy_data(cfg: RunConfig, out: Path):
    data = gen_toy_data(cfg.seed)
    records, data, net = toy_records(cfg.seed, data, layer_sizes=cfg.arch)
    x, phases, labels = toy_inputs(data)
    csvio.write_dataset_csv(out / "dataset.csv", x, phases, labels)
    csvio.write_embeddings_csv(out / "embeddings.csv", records)
    return records


def cmd_toy(cfg: RunConfig, out: Path) -> int:
    records = _write_toy_data(cfg, out)
    _print_summary(_monitor_all(cfg, records, out))
    return 0


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    records = _write_toy_data(cfg, out)
    print(f"wrote {len(records)} records to {out / 'embeddings.csv'}")
    return 0


def cmd_monitor(cfg: RunConfig, out: Path) -> int:
    _print_summary(_monitor_all(cfg, _load_records(cfg), out))
    return 0


def cmd_montecarlo(cfg: RunConfig, out: Path) -> int:
    records = _load_records(cfg)
    chart = cfg.chart_config()
    results = {}
    for method in cfg.method_objects():
        logger.info("monte carlo %s", method.label)
        results[method.label] = monte_carlo_study(
            records, method, chart, cfg.runs, cfg.seed, cfg.size, ridge=cfg.ridge
        )
    csvio.write_json(out / "montecarlo.json", {"config": cfg.to_dict(), "methods": results})
    print(f"{'method':8s} {'metric':12s} {'mean':>7s} {'std':>7s}")
    for label, res in results.items():
        for metric, v in res.items():
            mean = "-" if v["mean"] is None else f"{v['mean']:.3f}"
            std = "-" if v["std"] is None else f"{v['std']:.3f}"
            print(f"{label:8s} {metric:12s} {mean:>7s} {std:>7s}")
    return 0


def cmd_timing(cfg: RunConfig, out: Path) -> int:
    records = _load_records(cfg)
    kept, _ = validate_phase1([r for r in records if r.phase is Phase.PHASE_I])
    refs = build_references(kept, cfg.reference_plan(), strict=False)
    stream = [r for r in records if r.phase is not Phase.PHASE_I]
    if cfg.queries is not None:
        stream = stream[: cfg.queries]
    if not stream:
        raise DataError("no Phase II records to time")
    methods = cfg.method_objects()
    if any(getattr(m, "feature", "embedding") != "embedding" for m in methods):
        raise ConfigError("timing runs on embeddings; MDis and NOF on softmax output are not supported here")
    rows = []
    for key, ref in sorted(refs.items()):
        group = [r for r in stream if r.predicted_label == key or len(refs) == 1]
        if group:
            queries = [r.embedding for r in group]
            rows.extend(time_queries(methods, ref, queries, [r.index for r in group]))
    with open(out / "timing.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for r in rows:
            w.writerow([r.method, r.duration_ns, r.query_index, r.ref_size, r.dim])
    summary = summarize(rows)
    csvio.write_json(out / "timing_summary.json", {"config": cfg.to_dict(), "summary": summary})
    print(f"{'method':8s} {'median_us':>10s} {'p95_us':>10s}")
    for label, s in summary.items():
        print(f"{label:8s} {s['median'] / 1e3:10.1f} {s['p95'] / 1e3:10.1f}")
    return 0


COMMAND_FUNCS = {
    "toy": cmd_toy,
    "monitor": cmd_monitor,
    "timing": cmd_timing,
    "montecarlo": cmd_montecarlo,
    "simulate": cmd_simulate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = config_from_args(args)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.render(), encoding="utf-8")
        return COMMAND_FUNCS[cfg.command](cfg, out)
    except DepthmonError as exc:
        print(f"depthmon: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"depthmon: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
