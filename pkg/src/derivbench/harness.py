"""Configuration-driven experiment harness.

A sweep enumerates the Cartesian product of method parameter values, noise
levels, and repeated runs; every cell derives its noise and training seeds
from a stable hash of its coordinates, so adding a method or reordering
cells never perturbs another cell's realizations, and results are
byte-identical for a fixed base seed regardless of worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import discovery as dsc
from .annsmooth import AnnConfig
from .benchmarks import Benchmark, make_benchmark, make_uniform_grid
from .core import Field, masked_mse
from .diffapi import DiffRequest, DiffResult, FiniteDiffConfig, differentiate
from .noise import NoiseSpec, contaminate
from .savgol import SavGolConfig
from .spectral import SpectralConfig
from .totalvar import TvConfig

SCHEMA_VERSION = 1
WORKERS_ENV = "DERIVBENCH_WORKERS"

DEFAULT_KAPPAS = [0.0, 0.01, 0.03, 0.05, 0.1]

RECORD_COLUMNS = [
    "schema_version",
    "benchmark",
    "backend",
    "method",
    "param_name",
    "param_value",
    "kappa",
    "run",
    "seed",
    "target",
    "mse_d1",
    "mse_d2",
    "mse_dx2",
    "fitness",
    "proc_error",
    "structure_ok",
    "correct_share",
    "front_size",
    "model_json",
    "error",
]

METHOD_DEFAULTS = {
    "fd": {"scheme": "central"},
    "savgol": {"window_half": 15, "poly_order": 4},
    "spectral": {"retained": 10, "steepness": 4, "detrend": False},
    "ann": {"hidden_sizes": (64, 64), "epochs": 20000, "learning_rate": 0.01},
    "tv": {"mu": 100.0, "iterations": 60, "epsilon": 1e-6},
}


def stable_seed(*parts) -> int:
    """Platform-stable 63-bit seed from a tuple of cell coordinates."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


@dataclass(frozen=True)
class MethodSweep:
    """One method with exactly one swept parameter (or a single fixed cell).

    `values[i]` binds to `param_key`; anything else sits in `fixed`.  When no
    parameter is listed as a sweep, the method's leading parameter becomes a
    one-value "sweep" so every cell still has an x-coordinate in reports.
    """

    name: str
    param_key: str
    values: tuple
    fixed: dict

    @classmethod
    def from_table(cls, table: dict) -> "MethodSweep":
        table = dict(table)
        name = table.pop("name")
        if name not in METHOD_DEFAULTS:
            raise ValueError(f"unknown method {name!r}")
        for key in table:
            if key not in METHOD_DEFAULTS[name]:
                raise ValueError(f"method {name}: unknown parameter {key!r}")

        def is_sweep(key, value):
            if not isinstance(value, (list, tuple)):
                return False
            # hidden_sizes is itself a list; only a list of lists sweeps it
            if key == "hidden_sizes":
                return bool(value) and isinstance(value[0], (list, tuple))
            return True

        swept = {k: v for k, v in table.items() if is_sweep(k, v)}
        if len(swept) > 1:
            raise ValueError(f"method {name}: only one parameter may be a sweep list")
        fixed = dict(METHOD_DEFAULTS[name])
        fixed.update({k: v for k, v in table.items() if k not in swept})
        if swept:
            key, values = next(iter(swept.items()))
            fixed.pop(key, None)
        else:
            key = next(iter(METHOD_DEFAULTS[name]))
            values = (fixed.pop(key),)
        return cls(name, key, tuple(values), fixed)

    def param_name(self) -> str:
        return self.param_key

    def config(self, index: int, seed: int):
        params = dict(self.fixed)
        params[self.param_key] = self.values[index]
        if self.name == "fd":
            return FiniteDiffConfig(**params)
        if self.name == "savgol":
            return SavGolConfig(**params)
        if self.name == "spectral":
            return SpectralConfig(**params)
        if self.name == "ann":
            params["hidden_sizes"] = tuple(params["hidden_sizes"])
            return AnnConfig(**params, seed=seed)
        if self.name == "tv":
            return TvConfig(**params)
        raise ValueError(f"unknown method {self.name!r}")


@dataclass
class ExperimentConfig:
    benchmark: str
    methods: list[MethodSweep]
    kappas: list[float] = dc_field(default_factory=lambda: list(DEFAULT_KAPPAS))
    runs: int = 10
    base_seed: int = 0
    backend: str = "stlsq"
    discovery: dict = dc_field(default_factory=dict)
    output_dir: str = "out"
    grid: list[tuple[float, float, int]] | None = None
    benchmark_params: dict = dc_field(default_factory=dict)
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.methods:
            raise ValueError("at least one method sweep is required")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.backend not in ("stlsq", "evolution"):
            raise ValueError(f"unknown discovery backend {self.backend!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data.pop("schema_version", None)
        methods = [MethodSweep.from_table(t) for t in data.pop("methods")]
        grid = data.pop("grid", None)
        if grid is not None:
            grid = [tuple(ax) for ax in grid]
        disc = dict(data.pop("discovery", {}))
        backend = data.pop("backend", disc.pop("backend", "stlsq"))
        return cls(methods=methods, grid=grid, discovery=disc, backend=backend, **data)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def resolve_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[dict]


def _benchmark_for(cfg: ExperimentConfig) -> Benchmark:
    grid = make_uniform_grid(cfg.grid) if cfg.grid is not None else None
    return make_benchmark(cfg.benchmark, grid, **cfg.benchmark_params)


def _required_derivatives(benchmark: str) -> dict[str, tuple[str, DiffRequest]]:
    """Derivative label -> (source variable, request) per benchmark."""
    if benchmark == "linear2d":
        return {
            "x_t": ("x", DiffRequest(0, 1)),
            "y_t": ("y", DiffRequest(0, 1)),
        }
    if benchmark == "oscillator":
        return {
            "u_t": ("u", DiffRequest(0, 1)),
            "u_tt": ("u", DiffRequest(0, 2)),
        }
    if benchmark == "wave":
        return {
            "u_t": ("u", DiffRequest(0, 1)),
            "u_tt": ("u", DiffRequest(0, 2)),
            "u_x": ("u", DiffRequest(1, 1)),
            "u_xx": ("u", DiffRequest(1, 2)),
        }
    raise ValueError(f"unknown benchmark {benchmark!r}")


def process_representation_error(model: dsc.EquationModel, bm: Benchmark) -> float:
    """Residual MSE of a fitted equation evaluated on clean truth columns."""
    columns = {name: f.flat for name, f in bm.fields.items()}
    columns.update({name: f.flat for name, f in bm.truth_derivs.items()})
    resid = model.lhs.evaluate(columns).copy()
    for term, coef in zip(model.terms, model.coefficients):
        if coef != 0.0:
            resid -= coef * term.evaluate(columns)
    return float(np.mean(resid * resid))


def _base_record(cfg: ExperimentConfig, sweep: MethodSweep, value, kappa, run, seed) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "benchmark": cfg.benchmark,
        "backend": cfg.backend,
        "method": sweep.name,
        "param_name": sweep.param_name(),
        "param_value": value,
        "kappa": kappa,
        "run": run,
        "seed": seed,
        "target": "",
        "mse_d1": "",
        "mse_d2": "",
        "mse_dx2": "",
        "fitness": "",
        "proc_error": "",
        "structure_ok": "",
        "correct_share": "",
        "front_size": "",
        "model_json": "",
        "error": "",
    }


def _reported_model(front: dsc.ParetoFront) -> dsc.EquationModel:
    return min(front.individuals, key=lambda m: (m.residual_mse, m.complexity))


def _run_linear2d(cfg, bm, sweep, param_idx, kappa_idx, run_idx) -> list[dict]:
    kappa = cfg.kappas[kappa_idx]
    value = sweep.values[param_idx]
    records = []
    threshold = float(cfg.discovery.get("threshold", 0.05))
    max_iter = int(cfg.discovery.get("max_iter", 20))
    degree = int(cfg.discovery.get("degree", 2))
    for var_idx, (label, (var, req)) in enumerate(sorted(_required_derivatives("linear2d").items())):
        seed = stable_seed(cfg.base_seed, cfg.benchmark, sweep.name, param_idx, kappa_idx, run_idx, var_idx)
        rec = _base_record(cfg, sweep, value, kappa, run_idx, seed)
        rec["target"] = label
        try:
            noisy = contaminate(bm.fields[var], NoiseSpec(kappa, seed))
            method_cfg = sweep.config(param_idx, stable_seed(seed, "ann"))
            est = differentiate(noisy, req, method_cfg)
            rec["mse_d1"] = masked_mse(
                est.derivative.values, bm.truth_derivs[label].values, est.valid_mask
            )
            target_term = dsc.deriv_term(var, 0, 1)
            lib = dsc.build_library(bm.fields, {label: est}, target_term, degree=degree)
            model = dsc.stlsq(lib, threshold, max_iter)
            ref = next(r for r in bm.references if r.lhs_term == label)
            rec["fitness"] = model.residual_mse
            rec["proc_error"] = process_representation_error(model, bm)
            rec["structure_ok"] = int(dsc.structure_match(model, ref))
            rec["model_json"] = model.to_json()
        except Exception as exc:  # crash isolation: other cells keep running
            rec["error"] = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    return records


def _run_evolution(cfg, bm, sweep, param_idx, kappa_idx, run_idx) -> list[dict]:
    kappa = cfg.kappas[kappa_idx]
    value = sweep.values[param_idx]
    seed = stable_seed(cfg.base_seed, cfg.benchmark, sweep.name, param_idx, kappa_idx, run_idx, 0)
    rec = _base_record(cfg, sweep, value, kappa, run_idx, seed)
    try:
        noisy = contaminate(bm.fields["u"], NoiseSpec(kappa, seed))
        method_cfg = sweep.config(param_idx, stable_seed(seed, "ann"))
        estimates: dict[str, DiffResult] = {}
        for label, (var, req) in _required_derivatives(cfg.benchmark).items():
            estimates[label] = differentiate(noisy, req, method_cfg)
        rec["mse_d1"] = masked_mse(
            estimates["u_t"].derivative.values,
            bm.truth_derivs["u_t"].values,
            estimates["u_t"].valid_mask,
        )
        rec["mse_d2"] = masked_mse(
            estimates["u_tt"].derivative.values,
            bm.truth_derivs["u_tt"].values,
            estimates["u_tt"].valid_mask,
        )
        if cfg.benchmark == "wave":
            rec["mse_dx2"] = masked_mse(
                estimates["u_xx"].derivative.values,
                bm.truth_derivs["u_xx"].values,
                estimates["u_xx"].valid_mask,
            )

        terms, target = dsc.benchmark_pool(cfg.benchmark)
        rec["target"] = target.id
        lib = dsc.build_library({"u": noisy}, estimates, target, terms=terms)
        params = dsc.EvolutionParams(
            population=int(cfg.discovery.get("population", 30)),
            generations=int(cfg.discovery.get("generations", 60)),
            mutation_rate=float(cfg.discovery.get("mutation_rate", 0.1)),
            crossover_rate=float(cfg.discovery.get("crossover_rate", 0.9)),
            seed=stable_seed(seed, "evolution"),
        )
        front = dsc.evolutionary_discover(lib, params)
        ref = bm.references[0]
        model = _reported_model(front)
        rec["fitness"] = model.residual_mse
        rec["proc_error"] = process_representation_error(model, bm)
        rec["structure_ok"] = int(any(dsc.structure_match(m, ref) for m in front.individuals))
        rec["correct_share"] = dsc.pareto_correct_share(front, ref)
        rec["front_size"] = len(front.individuals)
        rec["model_json"] = model.to_json()
    except Exception as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return [rec]


def _run_cell(cfg: ExperimentConfig, bm: Benchmark, job) -> list[dict]:
    method_idx, param_idx, kappa_idx = job
    sweep = cfg.methods[method_idx]
    records = []
    for run_idx in range(cfg.runs):
        if cfg.backend == "stlsq":
            if cfg.benchmark != "linear2d":
                raise ValueError("the stlsq backend is wired to the linear2d protocol")
            records.extend(_run_linear2d(cfg, bm, sweep, param_idx, kappa_idx, run_idx))
        else:
            records.extend(_run_evolution(cfg, bm, sweep, param_idx, kappa_idx, run_idx))
    return records


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute every (method-param, kappa, run) cell; never aborts on one."""
    bm = _benchmark_for(cfg)
    jobs = [
        (mi, pi, ki)
        for mi, sweep in enumerate(cfg.methods)
        for pi in range(len(sweep.values))
        for ki in range(len(cfg.kappas))
    ]
    workers = cfg.resolve_workers()
    if workers == 1:
        results = [_run_cell(cfg, bm, job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_cell(cfg, bm, job), jobs))
    records = [rec for cell in results for rec in cell]
    return ExperimentReport(cfg, records)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    return str(value)


def write_records_csv(records: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow([_format_cell(rec[col]) for col in RECORD_COLUMNS])


def parse_records(path) -> list[dict]:
    """Read records.csv back with numeric coercion (inverse of the writer)."""
    numeric = {
        "kappa", "mse_d1", "mse_d2", "mse_dx2", "fitness", "proc_error",
        "correct_share",
    }
    integer = {"schema_version", "run", "seed", "structure_ok", "front_size"}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for key, val in row.items():
                if val == "":
                    rec[key] = ""
                elif key in numeric:
                    rec[key] = float(val)
                elif key in integer:
                    rec[key] = int(val)
                else:
                    rec[key] = val
            out.append(rec)
    return out


def _median(values) -> float | str:
    vals = [v for v in values if v != ""]
    return float(np.median(vals)) if vals else ""


def summarize(records: list[dict]) -> dict:
    """Aggregate statistics per cell; recomputable from records.csv alone."""
    cells: dict[tuple, list[dict]] = {}
    for rec in records:
        key = (
            rec["benchmark"], rec["backend"], rec["method"],
            rec["param_name"], str(rec["param_value"]), float(rec["kappa"]),
        )
        cells.setdefault(key, []).append(rec)

    summary_cells = []
    for key in sorted(cells, key=str):
        recs = cells[key]
        ok = [r for r in recs if r["error"] == ""]
        entry = {
            "benchmark": key[0],
            "backend": key[1],
            "method": key[2],
            "param_name": key[3],
            "param_value": key[4],
            "kappa": key[5],
            "n_records": len(recs),
            "n_errors": len(recs) - len(ok),
            "median_mse_d1": _median([r["mse_d1"] for r in ok]),
            "median_mse_d2": _median([r["mse_d2"] for r in ok]),
            "median_fitness": _median([r["fitness"] for r in ok]),
            "median_proc_error": _median([r["proc_error"] for r in ok]),
            "median_share": _median([r["correct_share"] for r in ok]),
            "structure_rate": _median([r["structure_ok"] for r in ok]),
        }
        coef_stats = _coefficient_summary(ok)
        if coef_stats:
            entry["coefficients"] = coef_stats
        summary_cells.append(entry)
    return {"schema_version": SCHEMA_VERSION, "cells": summary_cells}


def _coefficient_summary(records: list[dict]) -> dict:
    """Per-target coefficient order statistics parsed out of model_json."""
    by_target: dict[str, dict[str, list[float]]] = {}
    vocab: dict[str, set[str]] = {}
    for rec in records:
        if not rec["model_json"]:
            continue
        doc = json.loads(rec["model_json"])
        target = doc["lhs"]
        coefs = {t["id"]: t["coefficient"] for t in doc["terms"]}
        vocab.setdefault(target, set()).update(coefs)
        by_target.setdefault(target, {})
        for term, val in coefs.items():
            by_target[target].setdefault(term, []).append(val)
    out = {}
    for target, term_values in sorted(by_target.items()):
        n_models = sum(1 for r in records if r["model_json"] and json.loads(r["model_json"])["lhs"] == target)
        stats = {}
        for term in sorted(vocab[target]):
            values = term_values.get(term, [])
            values = values + [0.0] * (n_models - len(values))  # inactive -> 0
            arr = np.asarray(values)
            stats[term] = {
                "median": float(np.median(arr)),
                "q25": float(np.percentile(arr, 25)),
                "q75": float(np.percentile(arr, 75)),
                "min": float(arr.min()),
                "max": float(arr.max()),
            }
        out[target] = stats
    return out


def write_plotdata(records: list[dict], out_dir: Path) -> list[Path]:
    """Per-(method, kappa) CSVs: sweep value on x, statistics as columns."""
    summary = summarize(records)
    groups: dict[tuple, list[dict]] = {}
    for cell in summary["cells"]:
        groups.setdefault((cell["benchmark"], cell["method"], cell["kappa"]), []).append(cell)

    paths = []
    out_dir.mkdir(parents=True, exist_ok=True)
    for (benchmark, method, kappa), cells in sorted(groups.items(), key=str):
        path = out_dir / f"{benchmark}_{method}_kappa{kappa:g}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "param_value", "median_mse_d1", "median_mse_d2", "median_fitness",
                "median_proc_error", "median_share", "structure_rate",
            ])
            for cell in cells:
                writer.writerow([
                    _format_cell(cell[k]) for k in (
                        "param_value", "median_mse_d1", "median_mse_d2",
                        "median_fitness", "median_proc_error", "median_share",
                        "structure_rate",
                    )
                ])
        paths.append(path)
    return paths


def emit_report(report: ExperimentReport, out_dir, fmt: str = "csv") -> dict[str, Path]:
    """Write records.(csv|json), summary.json, and plotdata/ under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    if fmt == "csv":
        paths["records"] = out / "records.csv"
        write_records_csv(report.records, paths["records"])
    elif fmt == "json":
        paths["records"] = out / "records.json"
        with open(paths["records"], "w") as fh:
            json.dump(report.records, fh, sort_keys=True, indent=1)
    else:
        raise ValueError(f"unknown report format {fmt!r}")

    paths["summary"] = out / "summary.json"
    with open(paths["summary"], "w") as fh:
        json.dump(summarize(report.records), fh, sort_keys=True, indent=2)
        fh.write("\n")

    for p in write_plotdata(report.records, out / "plotdata"):
        paths[p.name] = p
    return paths
