"""Benchmark command line: run experiment grids, verify the release gate,
list bundled models.

``run`` executes a grid of (integrator, step size, trajectory length,
replication) cells from a YAML config, each cell on its own RNG substream,
and writes three artifacts to the output directory:

* ``summary.csv`` — one row per cell (acceptance, ESS, ESS/sec, fidelity
  percentiles), plus mean/stderr aggregate rows when replications > 1;
* ``probes.csv`` — per-probe reversibility/volume scatter at each fixed-point
  tolerance in the sweep;
* ``manifest.yaml`` — config echo and the exact seed of every cell.

Exit codes: 0 success, 1 configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import acceptance, diagnostics
from .core import IntegratorConfig
from .errors import RmhmcError
from .integrators import Integrator
from .models import MODEL_NAMES, make_model
from .sampler import ChainConfig, run_chain

DEFAULT_TOLERANCES = (1e-9, 1e-6, 1e-3)


class ConfigError(Exception):
    """Invalid experiment configuration."""


@dataclass
class ExperimentSpec:
    model: str
    integrators: list[str]
    step_sizes: list[float]
    num_steps: list[int]
    num_samples: int
    model_params: dict = field(default_factory=dict)
    tolerances: list[float] = field(default_factory=lambda: list(DEFAULT_TOLERANCES))
    sampling_tolerance: float = 1e-6
    burn_in: int = 100
    replications: int = 1
    seed: int = 0
    fidelity_probes: int = 20
    fd_step: float = 1e-5
    max_fixed_point_iters: int = 1000
    out: str = "results"

    def __post_init__(self):
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_NAMES)}")
        if not self.integrators:
            raise ConfigError("integrators list must be non-empty")
        for name in self.integrators:
            try:
                Integrator(name)
            except ValueError:
                raise ConfigError(f"unknown integrator {name!r}") from None
        if not self.step_sizes or any(e <= 0 for e in self.step_sizes):
            raise ConfigError("step_sizes must be a non-empty list of positive numbers")
        if not self.num_steps or any(l < 1 for l in self.num_steps):
            raise ConfigError("num_steps must be a non-empty list of positive integers")
        if not self.tolerances or any(d < 0 for d in self.tolerances):
            raise ConfigError("tolerances must be a non-empty list of non-negative numbers")
        if self.num_samples < 1:
            raise ConfigError("num_samples must be >= 1")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be non-negative")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.fidelity_probes < 0:
            raise ConfigError("fidelity_probes must be non-negative")
        if self.fd_step <= 0:
            raise ConfigError("fd_step must be positive")

    @property
    def cells(self):
        """All grid cells in deterministic report order."""
        return [
            (integrator, eps, length, rep)
            for integrator in self.integrators
            for eps in self.step_sizes
            for length in self.num_steps
            for rep in range(self.replications)
        ]


def _set_nested(mapping: dict, dotted_key: str, value):
    keys = dotted_key.split(".")
    target = mapping
    for key in keys[:-1]:
        target = target.setdefault(key, {})
        if not isinstance(target, dict):
            raise ConfigError(f"cannot override {dotted_key!r}: {key!r} is not a mapping")
    target[keys[-1]] = value


def load_spec(config_path, overrides: dict) -> ExperimentSpec:
    raw = {}
    if config_path is not None:
        try:
            with open(config_path) as handle:
                raw = yaml.safe_load(handle) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping at the top level")
    for dotted_key, value in overrides.items():
        _set_nested(raw, dotted_key, value)
    known = {f.name for f in ExperimentSpec.__dataclass_fields__.values()}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    missing = {"model", "integrators", "step_sizes", "num_steps", "num_samples"} - set(raw)
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(sorted(missing))}")
    try:
        return ExperimentSpec(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


SUMMARY_COLUMNS = [
    "model",
    "integrator",
    "step_size",
    "num_steps",
    "tolerance",
    "replication",
    "seed",
    "status",
    "acceptance",
    "mean_ess",
    "min_ess",
    "mean_ess_per_sec",
    "min_ess_per_sec",
    "wall_time_sec",
    "nonconvergent_rejections",
    "reversibility_p10",
    "reversibility_p50",
    "reversibility_p90",
    "volume_p10",
    "volume_p50",
    "volume_p90",
    "energy_p10",
    "energy_p50",
    "energy_p90",
]

PROBE_COLUMNS = [
    "model",
    "integrator",
    "step_size",
    "num_steps",
    "tolerance",
    "replication",
    "probe_index",
    "reversibility_violation",
    "volume_violation",
    "energy_error",
]


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _run_cell(spec: ExperimentSpec, model, cell, cell_seed: int):
    """One grid cell: sample a chain, then fidelity probes at every delta.

    Returns (summary_row, probe_rows). A chain failure yields an error row
    and no probes so the rest of the grid still completes.
    """
    integrator_name, eps, length, rep = cell
    integrator = Integrator(integrator_name)
    base = {
        "model": spec.model,
        "integrator": integrator_name,
        "step_size": eps,
        "num_steps": length,
        "tolerance": spec.sampling_tolerance,
        "replication": rep,
        "seed": cell_seed,
    }
    config = IntegratorConfig(
        eps, length, spec.sampling_tolerance, spec.max_fixed_point_iters
    )
    try:
        report = run_chain(
            model,
            model.initial_position(),
            ChainConfig(
                num_samples=spec.num_samples,
                burn_in=spec.burn_in,
                integrator=integrator,
                integrator_config=config,
                seed=cell_seed,
            ),
        )
        ess = diagnostics.effective_sample_size(report.samples)
    except (RmhmcError, ValueError) as exc:
        row = dict.fromkeys(SUMMARY_COLUMNS, "")
        row.update(base, status=f"error: {exc}")
        return row, []

    row = dict(base)
    row.update(
        status="ok",
        acceptance=report.acceptance_rate,
        mean_ess=float(ess.mean()),
        min_ess=float(ess.min()),
        mean_ess_per_sec=float(ess.mean()) / report.wall_time,
        min_ess_per_sec=float(ess.min()) / report.wall_time,
        wall_time_sec=report.wall_time,
        nonconvergent_rejections=report.rejected_for_nonconvergence,
    )

    probe_rows = []
    if spec.fidelity_probes > 0:
        probe_rng = np.random.default_rng(np.random.SeedSequence([cell_seed, 1]))
        indices = probe_rng.choice(
            report.samples.shape[0],
            size=min(spec.fidelity_probes, report.samples.shape[0]),
            replace=False,
        )
        positions = report.samples[indices]
        summary = None
        summary_delta = (
            spec.sampling_tolerance
            if spec.sampling_tolerance in spec.tolerances
            else min(spec.tolerances)
        )
        for delta in spec.tolerances:
            probe_config = IntegratorConfig(eps, length, delta, spec.max_fixed_point_iters)
            records = diagnostics.run_fidelity_probes(
                model,
                integrator,
                probe_config,
                positions,
                np.random.default_rng(np.random.SeedSequence([cell_seed, 2])),
                spec.fd_step,
            )
            for record in records:
                probe_rows.append(
                    {
                        **base,
                        "tolerance": delta,
                        "probe_index": record.probe_index,
                        "reversibility_violation": record.reversibility_violation,
                        "volume_violation": record.volume_violation,
                        "energy_error": record.energy_error,
                    }
                )
            if delta == summary_delta:
                summary = diagnostics.summarize(records)
        row.update(
            reversibility_p10=summary.reversibility[0],
            reversibility_p50=summary.reversibility[1],
            reversibility_p90=summary.reversibility[2],
            volume_p10=summary.volume[0],
            volume_p50=summary.volume[1],
            volume_p90=summary.volume[2],
            energy_p10=summary.energy[0],
            energy_p50=summary.energy[1],
            energy_p90=summary.energy[2],
        )
    else:
        for column in SUMMARY_COLUMNS:
            row.setdefault(column, "")
    return row, probe_rows


def _aggregate_rows(spec: ExperimentSpec, rows):
    """Mean and standard-error rows per grid cell across replications."""
    aggregates = []
    numeric = [c for c in SUMMARY_COLUMNS if c not in
               ("model", "integrator", "step_size", "num_steps", "tolerance",
                "replication", "seed", "status")]
    for integrator in spec.integrators:
        for eps in spec.step_sizes:
            for length in spec.num_steps:
                members = [
                    r for r in rows
                    if r["integrator"] == integrator
                    and r["step_size"] == eps
                    and r["num_steps"] == length
                    and r["status"] == "ok"
                ]
                if not members:
                    continue
                for label, reducer in (
                    ("mean", lambda v: float(np.mean(v))),
                    ("stderr", lambda v: float(np.std(v, ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0),
                ):
                    row = {
                        "model": spec.model,
                        "integrator": integrator,
                        "step_size": eps,
                        "num_steps": length,
                        "tolerance": spec.sampling_tolerance,
                        "replication": label,
                        "seed": "",
                        "status": f"aggregate({len(members)})",
                    }
                    for column in numeric:
                        values = [float(m[column]) for m in members if m[column] != ""]
                        row[column] = reducer(values) if values else ""
                    aggregates.append(row)
    return aggregates


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format(v) for k, v in row.items() if k in columns})


def run_experiment(spec: ExperimentSpec, threads: int | None = None) -> int:
    """Execute the grid and write summary.csv, probes.csv, manifest.yaml."""
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = make_model(spec.model, **spec.model_params)

    cells = spec.cells
    children = np.random.SeedSequence(spec.seed).spawn(len(cells))
    cell_seeds = [int(child.generate_state(2, np.uint32).view(np.uint64)[0]) for child in children]

    workers = threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(
            pool.map(lambda args: _run_cell(spec, model, *args), zip(cells, cell_seeds))
        )

    summary_rows = [row for row, _ in outcomes]
    probe_rows = [p for _, probes in outcomes for p in probes]
    if spec.replications > 1:
        summary_rows.extend(_aggregate_rows(spec, summary_rows))

    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    _write_csv(out_dir / "probes.csv", PROBE_COLUMNS, probe_rows)

    manifest = {
        "config": {
            f.name: getattr(spec, f.name)
            for f in ExperimentSpec.__dataclass_fields__.values()
        },
        "cells": [
            {
                "integrator": integrator,
                "step_size": eps,
                "num_steps": length,
                "replication": rep,
                "seed": seed,
            }
            for (integrator, eps, length, rep), seed in zip(cells, cell_seeds)
        ],
    }
    with open(out_dir / "manifest.yaml", "w", encoding="utf-8") as handle:
        yaml.safe_dump(manifest, handle, sort_keys=False)
    return 0


def _parse_overrides(tokens) -> dict:
    overrides = {}
    for token in tokens:
        if not token.startswith("--") or "=" not in token:
            raise ConfigError(f"unrecognized argument {token!r}; overrides look like --key=value")
        key, _, raw_value = token[2:].partition("=")
        if not key:
            raise ConfigError(f"empty override key in {token!r}")
        overrides[key] = yaml.safe_load(raw_value)
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rmhmc",
        description="Riemannian-manifold HMC integrator benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser(
        "run",
        help="run an experiment grid from a YAML config",
        epilog="Any additional --key=value flag overrides the matching config "
        "entry (nested keys use dots, e.g. --model_params.n=200).",
    )
    run_parser.add_argument("--config", help="YAML experiment config")
    run_parser.add_argument("--out", help="output directory (overrides config)")
    run_parser.add_argument("--threads", type=int, help="worker pool size")
    run_parser.add_argument("--seed", type=int, help="base seed (overrides config)")

    sub.add_parser("verify", help="run the release-gate criterion battery")
    sub.add_parser("list-models", help="list bundled target models")

    args, extra = parser.parse_known_args(argv)

    if args.command == "list-models":
        for name in MODEL_NAMES:
            print(name)
        return 0

    if args.command == "verify":
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        results = acceptance.run_all()
        failures = [r for r in results if not r.passed]
        print(f"{len(results) - len(failures)}/{len(results)} criteria passed")
        return 2 if failures else 0

    try:
        overrides = _parse_overrides(extra)
        if args.out is not None:
            overrides["out"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.config is None and not overrides:
            raise ConfigError("run requires --config and/or --key=value overrides")
        spec = load_spec(args.config, overrides)
        return run_experiment(spec, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
