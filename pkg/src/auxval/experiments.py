"""End-to-end validation-strategy study.

One circuit is instrumented at every validation candidate and a single shot
batch is drawn. Each strategy then sees its own subset of the measurement
record, so strategies and thresholds are compared on identical shots.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .circuit import Circuit, parse_circuit, validation_candidates, with_measurements
from .early_abort import AbortReport, abort_report, run_with_abort
from .estimator import BiasVarianceEstimate, SelectionStats, bias_variance, selection_stats
from .generator import AuxReuse, GeneratorConfig, generate
from .lightcone import LightconeSet, lightcone_set
from .noise import DEFAULT_CHUNK, NoiseParams, ShotBatch, sample_batch
from .postselect import PostSelectPolicy, Strategy, decide_batch, visible_mask

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "ReportCell",
    "ExperimentReport",
    "CSV_COLUMNS",
    "load_config",
    "dump_config",
    "prepare_circuit",
    "run_experiment",
    "emit_report",
    "calibrate",
    "CalibrationPoint",
]

STRATEGY_ORDER = (Strategy.NONE, Strategy.FINAL, Strategy.ALL)
CSV_COLUMNS = (
    "strategy",
    "threshold",
    "fp_rate",
    "fn_rate",
    "f_retain",
    "bias",
    "variance_inflation",
    "aborted_fraction",
    "mean_gates_saved",
)


@dataclass(frozen=True)
class ExperimentConfig:
    generator: Optional[GeneratorConfig] = field(default_factory=GeneratorConfig)
    circuit_path: Optional[str] = None
    noise: NoiseParams = NoiseParams(1e-3, 0.5, 1e-2)
    strategies: tuple[Strategy, ...] = STRATEGY_ORDER
    thresholds: tuple[float, ...] = (0.5,)
    n_shots: int = 10_000
    seed: int = 0
    delta: float = 1.0
    sigma_sq: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if (self.generator is None) == (self.circuit_path is None):
            raise ValueError("give exactly one of a generator config or a circuit path")
        if self.n_shots < 1:
            raise ValueError("n_shots must be positive")
        ths = list(self.thresholds)
        if any(not 0 <= t <= 1 for t in ths) or ths != sorted(ths):
            raise ValueError("thresholds must be sorted ascending within [0, 1]")
        if not self.strategies:
            raise ValueError("no strategies selected")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    def echo(self) -> dict[str, Any]:
        """Flat key/value view, the same keys the config file uses."""
        d: dict[str, Any] = {}
        if self.generator is not None:
            g = self.generator
            d.update(
                blocks=g.n_blocks,
                data=g.data_qubits,
                aux=g.aux_qubits,
                half_gates=g.gates_per_block_half,
                reuse=g.aux_reuse.value,
                generator_seed=g.seed,
            )
            if g.aux_per_block is not None:
                d["aux_per_block"] = g.aux_per_block
            if g.data_per_block is not None:
                d["data_per_block"] = g.data_per_block
        else:
            d["circuit"] = self.circuit_path
        d.update(p=self.noise.p, r=self.noise.r, q=self.noise.q)
        if self.noise.delta_flip_prob is not None:
            d["delta_flip_prob"] = self.noise.delta_flip_prob
        d.update(
            strategies=[s.value for s in self.strategies],
            thresholds=list(self.thresholds),
            shots=self.n_shots,
            seed=self.seed,
            delta=self.delta,
            sigma2=self.sigma_sq,
        )
        return d


_KNOWN_KEYS = {
    "blocks", "data", "aux", "half_gates", "reuse", "generator_seed", "aux_per_block",
    "data_per_block", "circuit", "p", "r", "q", "delta_flip_prob", "strategies",
    "thresholds", "shots", "seed", "delta", "sigma2", "workers",
}


def config_from_mapping(d: dict[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    unknown = set(d) - _KNOWN_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    generator = None
    circuit_path = None
    if "circuit" in d:
        path = Path(d["circuit"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        circuit_path = str(path)
    else:
        defaults = GeneratorConfig()
        generator = GeneratorConfig(
            n_blocks=int(d.get("blocks", defaults.n_blocks)),
            data_qubits=int(d.get("data", defaults.data_qubits)),
            aux_qubits=int(d.get("aux", defaults.aux_qubits)),
            gates_per_block_half=int(d.get("half_gates", defaults.gates_per_block_half)),
            aux_reuse=AuxReuse(d.get("reuse", defaults.aux_reuse.value)),
            seed=int(d.get("generator_seed", defaults.seed)),
            aux_per_block=d.get("aux_per_block"),
            data_per_block=d.get("data_per_block"),
        )
    noise = NoiseParams(float(d["p"]), float(d.get("r", 0.5)), float(d["q"]), d.get("delta_flip_prob"))
    strategies = tuple(Strategy(s) for s in d.get("strategies", [s.value for s in STRATEGY_ORDER]))
    return ExperimentConfig(
        generator=generator,
        circuit_path=circuit_path,
        noise=noise,
        strategies=strategies,
        thresholds=tuple(float(t) for t in d.get("thresholds", [0.5])),
        n_shots=int(d.get("shots", 10_000)),
        seed=int(d.get("seed", 0)),
        delta=float(d.get("delta", 1.0)),
        sigma_sq=float(d.get("sigma2", 1.0)),
        workers=int(d.get("workers", 1)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_mapping(data, base_dir=path.parent)


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dump_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_toml_value(v)}\n" for k, v in cfg.echo().items())


# --- running ----------------------------------------------------------------


@dataclass(frozen=True)
class ReportCell:
    strategy: Strategy
    threshold: float
    stats: SelectionStats
    estimate: BiasVarianceEstimate
    abort: Optional[AbortReport]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "threshold": self.threshold,
            "stats": self.stats.to_dict(),
            "estimate": self.estimate.to_dict(),
            "abort": None if self.abort is None else self.abort.to_dict(),
        }


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple[ReportCell, ...]
    metadata: dict

    def cell(self, strategy: Strategy, threshold: float) -> ReportCell:
        for c in self.cells:
            if c.strategy is strategy and c.threshold == threshold:
                return c
        raise KeyError((strategy, threshold))

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "cells": [c.to_dict() for c in self.cells]}


def prepare_circuit(cfg: ExperimentConfig) -> Circuit:
    """The study circuit, instrumented at every validation candidate."""
    if cfg.generator is not None:
        base = generate(cfg.generator)
    else:
        base = parse_circuit(Path(cfg.circuit_path).read_text(encoding="utf-8"))
    return with_measurements(base, validation_candidates(base))


def _abort_decisions(c, lcs, noise, policy, n_shots, seed, workers):
    bounds = [np.arange(s, min(s + DEFAULT_CHUNK, n_shots)) for s in range(0, n_shots, DEFAULT_CHUNK)]

    def run(idx):
        return run_with_abort(c, lcs, noise, policy, idx, seed)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    return np.concatenate([a for a, _ in parts]), np.concatenate([e for _, e in parts])


def evaluate_cell(shots: ShotBatch, lcs: LightconeSet, noise: NoiseParams, strategy: Strategy, threshold: float):
    """Accept flags and selection statistics of one (strategy, threshold) cell."""
    policy = PostSelectPolicy(threshold, strategy)
    accepted, _ = decide_batch(shots.m, lcs, noise, policy)
    detectable = shots.detectable_within(lcs.union_mask(visible_mask(lcs, strategy)))
    return accepted, selection_stats(shots, accepted, detectable=detectable)


def run_experiment(cfg: ExperimentConfig, *, with_abort: bool = True) -> ExperimentReport:
    c = prepare_circuit(cfg)
    lcs = lightcone_set(c)
    shots = sample_batch(c, lcs, cfg.noise, cfg.n_shots, cfg.seed, workers=cfg.workers)

    cells = []
    for strategy in STRATEGY_ORDER:
        if strategy not in cfg.strategies:
            continue
        for th in cfg.thresholds:
            accepted, stats = evaluate_cell(shots, lcs, cfg.noise, strategy, th)
            abort = None
            if with_abort and strategy is not Strategy.NONE:
                policy = PostSelectPolicy(th, strategy)
                acc, executed = _abort_decisions(c, lcs, cfg.noise, policy, cfg.n_shots, cfg.seed, cfg.workers)
                abort = abort_report(acc, executed, accepted, c.n_gates)
            cells.append(
                ReportCell(strategy, th, stats, bias_variance(stats, cfg.delta, cfg.sigma_sq), abort)
            )

    metadata = {
        "tool": "auxval",
        "version": __version__,
        "config": cfg.echo(),
        "circuit": {
            "n_qubits": c.n_qubits,
            "n_gates": c.n_gates,
            "measurements": lcs.k,
            "final_measurements": int(visible_mask(lcs, Strategy.FINAL).sum()),
            "union_coverage": lcs.coverage(),
            "final_coverage": float(lcs.union_mask(visible_mask(lcs, Strategy.FINAL)).mean()),
        },
    }
    return ExperimentReport(tuple(cells), metadata)


# --- output -----------------------------------------------------------------


def _clean(obj):
    """NaN and infinities become null so the JSON stays standard."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def csv_row(cell: dict) -> dict:
    """Project one JSON cell onto the CSV columns."""
    abort = cell["abort"] or {}
    return {
        "strategy": cell["strategy"],
        "threshold": cell["threshold"],
        "fp_rate": cell["stats"]["fp_rate"],
        "fn_rate": cell["stats"]["fn_rate"],
        "f_retain": cell["stats"]["f_retain"],
        "bias": cell["estimate"]["bias"],
        "variance_inflation": cell["estimate"]["variance_inflation"],
        "aborted_fraction": abort.get("aborted_fraction"),
        "mean_gates_saved": abort.get("mean_gates_saved"),
    }


def emit_report(r: ExperimentReport, fmt: str = "json") -> str:
    data = _clean(r.to_dict())
    if fmt == "json":
        return json.dumps(data, indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for cell in data["cells"]:
        row = csv_row(cell)
        writer.writerow(["" if row[col] is None else repr(row[col]) if isinstance(row[col], float) else row[col]
                         for col in CSV_COLUMNS])
    return buf.getvalue()


# --- calibration ------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationPoint:
    p: float
    q: float
    threshold: float
    fn_none: float
    fn_final: float
    fn_all: float
    fp_final: float
    fp_all: float

    @property
    def fn_reduction(self) -> float:
        return self.fn_none - self.fn_all

    def meets_target(self, lo=0.08, hi=0.12, fp_max=0.02) -> bool:
        return (
            lo <= self.fn_reduction <= hi
            and self.fp_all <= fp_max
            and self.fn_all < self.fn_final < self.fn_none
            and 0.0 < self.fp_final < self.fp_all
        )

    def distance(self) -> float:
        d = abs(self.fn_reduction - 0.10) + abs(self.fp_all - 0.01)
        return math.inf if math.isnan(d) else d

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["fn_reduction"] = self.fn_reduction
        d["meets_target"] = self.meets_target()
        return d


def calibrate(
    base: ExperimentConfig,
    p_grid: Sequence[float],
    q_grid: Sequence[float],
    thresholds: Sequence[float],
) -> list[CalibrationPoint]:
    """Sweep (p, q, threshold) at the base config's r; best matches first.

    Points meeting the headline target (8-12 point false-negative reduction,
    at most 2% false positives, final-only strictly in between) sort ahead of
    the rest, each group ordered by distance from (10 points, 1%).
    """
    c = prepare_circuit(base)
    lcs = lightcone_set(c)
    points = []
    for p in p_grid:
        for q in q_grid:
            noise = replace(base.noise, p=p, q=q)
            shots = sample_batch(c, lcs, noise, base.n_shots, base.seed, workers=base.workers)
            for th in thresholds:
                s = {st: evaluate_cell(shots, lcs, noise, st, th)[1] for st in STRATEGY_ORDER}
                points.append(
                    CalibrationPoint(
                        p, q, th,
                        fn_none=s[Strategy.NONE].fn_rate,
                        fn_final=s[Strategy.FINAL].fn_rate,
                        fn_all=s[Strategy.ALL].fn_rate,
                        fp_final=s[Strategy.FINAL].fp_rate,
                        fp_all=s[Strategy.ALL].fp_rate,
                    )
                )
    points.sort(key=lambda pt: (not pt.meets_target(), pt.distance()))
    return points
