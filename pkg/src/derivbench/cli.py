"""Command-line entry point.

Subcommands mirror the pipeline stages: `generate` benchmark fields,
`contaminate` them, `diff`erentiate a field CSV, `discover` an equation,
run a full `sweep` from a TOML config, and re-`report` aggregates from an
existing records.csv.  Exit code 0 on success, 1 with a diagnostic line on
runtime errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import discovery as dsc
from .annsmooth import AnnConfig
from .benchmarks import BENCHMARK_NAMES, make_benchmark
from .core import make_uniform_grid, masked_mse, read_field_csv, write_field_csv
from .diffapi import DiffRequest, DiffResult, FiniteDiffConfig, differentiate
from .harness import (
    ExperimentConfig,
    emit_report,
    parse_records,
    run_experiment,
    stable_seed,
    summarize,
    write_plotdata,
)
from .noise import NoiseSpec, contaminate
from .savgol import SavGolConfig
from .spectral import SpectralConfig
from .totalvar import TvConfig

METHOD_CHOICES = ("fd", "savgol", "spectral", "ann", "tv")


def _parse_grid(text: str) -> list[tuple[float, float, int]]:
    """Axis extents like '0,25,1000' or '0,1,101;0,1,101'."""
    axes = []
    for part in text.split(";"):
        start, stop, n = part.split(",")
        axes.append((float(start), float(stop), int(n)))
    return axes


def _add_method_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=METHOD_CHOICES, default="fd")
    parser.add_argument("--scheme", default="central", help="fd: forward|central")
    parser.add_argument("--window-half", type=int, default=15, help="savgol: M")
    parser.add_argument("--poly-order", type=int, default=4, help="savgol: n")
    parser.add_argument("--retained", type=int, default=10, help="spectral: kept frequencies")
    parser.add_argument("--steepness", type=int, default=4, help="spectral: filter steepness")
    parser.add_argument("--detrend", action="store_true", help="spectral: endpoint-line detrend")
    parser.add_argument("--epochs", type=int, default=20000, help="ann: training epochs")
    parser.add_argument("--hidden-sizes", default="64,64", help="ann: comma-separated widths")
    parser.add_argument("--learning-rate", type=float, default=0.01, help="ann")
    parser.add_argument("--mu", type=float, default=100.0, help="tv: fidelity weight")
    parser.add_argument("--iterations", type=int, default=60, help="tv: solver iterations")
    parser.add_argument("--epsilon", type=float, default=1e-6, help="tv: |.| smoothing")


def _method_config(args, seed: int = 0):
    if args.method == "fd":
        return FiniteDiffConfig(scheme=args.scheme)
    if args.method == "savgol":
        return SavGolConfig(window_half=args.window_half, poly_order=args.poly_order)
    if args.method == "spectral":
        return SpectralConfig(
            retained=args.retained, steepness=args.steepness, detrend=args.detrend
        )
    if args.method == "ann":
        hidden = tuple(int(h) for h in args.hidden_sizes.split(","))
        return AnnConfig(
            hidden_sizes=hidden,
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            seed=seed,
        )
    return TvConfig(mu=args.mu, iterations=args.iterations, epsilon=args.epsilon)


def _cmd_generate(args) -> int:
    grid = make_uniform_grid(_parse_grid(args.grid)) if args.grid else None
    bm = make_benchmark(args.benchmark, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, field in {**bm.fields, **bm.truth_derivs}.items():
        write_field_csv(field, out / f"{name}.csv")
    print(f"wrote {len(bm.fields) + len(bm.truth_derivs)} fields to {out}")
    return 0


def _cmd_contaminate(args) -> int:
    field = read_field_csv(args.input)
    noisy = contaminate(field, NoiseSpec(args.kappa, args.seed))
    write_field_csv(noisy, args.output)
    print(f"wrote {args.output}")
    return 0


def _cmd_diff(args) -> int:
    field = read_field_csv(args.input)
    req = DiffRequest(axis=args.axis, order=args.order)
    result = differentiate(field, req, _method_config(args, seed=args.seed))
    write_field_csv(result.derivative, args.output)
    print(f"wrote {args.output}")
    if args.truth:
        truth = read_field_csv(args.truth)
        err = masked_mse(result.derivative.values, truth.values, result.valid_mask)
        print(f"mse {err!r}")
    return 0


def _cmd_discover(args) -> int:
    grid = make_uniform_grid(_parse_grid(args.grid)) if args.grid else None
    bm = make_benchmark(args.benchmark, grid)
    if args.benchmark == "linear2d":
        raise ValueError("discover drives the single-equation benchmarks; use sweep for linear2d")
    data = bm.fields["u"]
    if args.kappa > 0:
        data = contaminate(data, NoiseSpec(args.kappa, args.seed))

    terms, target = dsc.benchmark_pool(args.benchmark)
    needed = {target.id}
    for term in terms:
        needed.update(term.source_labels())
    estimates: dict[str, DiffResult] = {}
    for label in sorted(needed - set(bm.fields)):
        if args.analytic:
            estimates[label] = DiffResult(
                bm.truth_derivs[label], np.ones(bm.grid.shape, dtype=bool)
            )
        else:
            axis = 0 if label.endswith("t") else 1
            order = len(label.split("_")[1])
            estimates[label] = differentiate(
                data, DiffRequest(axis, order), _method_config(args, seed=args.seed)
            )

    lib = dsc.build_library({"u": data}, estimates, target, terms=terms)
    if args.backend == "stlsq":
        model = dsc.stlsq(lib, args.threshold)
        doc = model.to_dict()
    else:
        params = dsc.EvolutionParams(
            population=args.population, generations=args.generations, seed=args.seed
        )
        front = dsc.evolutionary_discover(lib, params)
        best = min(front.individuals, key=lambda m: (m.residual_mse, m.complexity))
        doc = {
            "front": [m.to_dict() for m in front.individuals],
            "best": best.to_dict(),
            "correct_share": dsc.pareto_correct_share(front, bm.references[0]),
        }
    text = json.dumps(doc, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_toml(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.output_dir = args.out
    report = run_experiment(cfg)
    paths = emit_report(report, cfg.output_dir, fmt=args.format)
    n_err = sum(1 for r in report.records if r["error"])
    print(f"wrote {paths['records']} ({len(report.records)} records, {n_err} errors)")
    return 0


def _cmd_report(args) -> int:
    records = parse_records(args.records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.json", "w") as fh:
        json.dump(summarize(records), fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_plotdata(records, out / "plotdata")
    print(f"wrote {out / 'summary.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="derivbench",
        description="Noise-robust differentiation and equation-discovery benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write benchmark fields and truth derivatives as CSV")
    p.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    p.add_argument("--grid", help="axis extents 'start,stop,n[;start,stop,n]'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("contaminate", help="add state-scaled Gaussian noise to a field CSV")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_contaminate)

    p = sub.add_parser("diff", help="differentiate a field CSV")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--order", type=int, default=1, choices=(1, 2))
    p.add_argument("--axis", type=int, default=0)
    p.add_argument("--truth", help="truth derivative CSV; prints masked MSE")
    p.add_argument("--seed", type=int, default=0)
    _add_method_flags(p)
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("discover", help="recover an equation from one benchmark")
    p.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    p.add_argument("--grid")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--analytic", action="store_true", help="use exact derivative fields")
    p.add_argument("--backend", choices=("stlsq", "evolution"), default="evolution")
    p.add_argument("--threshold", type=float, default=0.05, help="stlsq threshold")
    p.add_argument("--population", type=int, default=30)
    p.add_argument("--generations", type=int, default=60)
    p.add_argument("--out", help="write the model JSON here instead of stdout")
    _add_method_flags(p)
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("sweep", help="run a full experiment from a TOML config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="override the config's base_seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="override the config's output_dir")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="recompute summaries from records.csv")
    p.add_argument("records")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
