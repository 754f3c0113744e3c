"""Command line interface: ``auxval <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CircuitError, check_uncomputation_structure, parse_circuit, serialize_circuit, with_measurements
from .early_abort import simulate_with_abort
from .estimator import bias_variance, predicted_f_retain, selection_stats
from .experiments import _clean, calibrate, dump_config, emit_report, load_config, run_experiment
from .generator import AuxReuse, GeneratorConfig, generate
from .lightcone import lightcone_set
from .noise import NoiseParams, ShotRecord, sample_batch
from .placement import PlacementConfig, select_placements
from .postselect import PostSelectPolicy, Strategy, decide


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _read_circuit(path: str):
    return parse_circuit(Path(path).read_text(encoding="utf-8"))


def _read_jsonl(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _noise(args) -> NoiseParams:
    return NoiseParams(args.p, args.r, args.q, getattr(args, "delta_flip_prob", None))


def _add_noise(sp, required=True) -> None:
    sp.add_argument("--p", type=float, required=required, help="per-gate failure probability")
    sp.add_argument("--r", type=float, default=0.5, help="flip probability per failed gate in a lightcone")
    sp.add_argument("--q", type=float, required=required, help="readout error probability")


def cmd_generate(args) -> None:
    cfg = GeneratorConfig(
        n_blocks=args.blocks,
        data_qubits=args.data,
        aux_qubits=args.aux,
        gates_per_block_half=args.half_gates,
        aux_reuse=AuxReuse(args.reuse),
        seed=args.seed,
        aux_per_block=args.aux_per_block,
        data_per_block=args.data_per_block,
    )
    _write(args.out, serialize_circuit(generate(cfg)))


def cmd_check(args) -> None:
    verdicts = check_uncomputation_structure(_read_circuit(args.circuit))
    _write(args.out, json.dumps({str(b): v.value for b, v in verdicts}, indent=2) + "\n")


def cmd_lightcone(args) -> None:
    lcs = lightcone_set(_read_circuit(args.circuit))
    _write(args.out, json.dumps(lcs.to_dict(), indent=2) + "\n")


def cmd_simulate(args) -> None:
    c = _read_circuit(args.circuit)
    lcs = lightcone_set(c)
    batch = sample_batch(c, lcs, _noise(args), args.shots, args.seed, workers=args.workers)
    lines = []
    for j, rec in enumerate(batch):
        lines.append(json.dumps({"shot": j, **rec.to_dict()}, sort_keys=True))
    _write(args.out, "\n".join(lines) + "\n")


def cmd_filter(args) -> None:
    c = _read_circuit(args.circuit)
    lcs = lightcone_set(c)
    noise = _noise(args)
    policy = PostSelectPolicy(args.threshold, Strategy(args.strategy))
    out = []
    for j, row in enumerate(_read_jsonl(args.shots)):
        rec = ShotRecord.from_dict(row)
        d = decide(rec, lcs, noise, policy)
        out.append(json.dumps({"shot": row.get("shot", j), "accept": d.accepted, "likelihood": d.likelihood}))
    _write(args.out, "\n".join(out) + "\n")


def cmd_stats(args) -> None:
    shots = [ShotRecord.from_dict(row) for row in _read_jsonl(args.shots)]
    decisions = [bool(row["accept"]) for row in _read_jsonl(args.decisions)]
    stats = selection_stats(shots, decisions)
    est = bias_variance(stats, args.delta, args.sigma2)
    doc = {
        "stats": stats.to_dict(),
        "predicted_f_retain": predicted_f_retain(stats),
        "estimate": est.to_dict(),
    }
    _write(args.out, json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")


def cmd_place(args) -> None:
    c = _read_circuit(args.circuit)
    chosen = select_placements(c, PlacementConfig(args.budget, args.overlap_penalty))
    _write(args.out, serialize_circuit(with_measurements(c, chosen)))


def cmd_abort_sim(args) -> None:
    c = _read_circuit(args.circuit)
    lcs = lightcone_set(c)
    policy = PostSelectPolicy(args.threshold, Strategy(args.strategy))
    report = simulate_with_abort(c, lcs, _noise(args), policy, args.shots, args.seed)
    _write(args.out, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def cmd_run(args) -> None:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    fmt = "csv" if args.out and args.out.endswith(".csv") else "json"
    if args.format:
        fmt = args.format
    _write(args.out, emit_report(run_experiment(cfg), fmt))


def cmd_calibrate(args) -> None:
    base = load_config(args.config)
    if args.shots is not None:
        base = replace(base, n_shots=args.shots)
    thresholds = args.thresholds or sorted(set(np.round(np.geomspace(1e-4, 0.99, 60), 6).tolist()))
    points = calibrate(base, args.p_grid, args.q_grid, thresholds)
    best = points[0]
    doc = {
        "found": best.meets_target(),
        "best": best.to_dict(),
        "n_meeting_target": sum(p.meets_target() for p in points),
        "top": [p.to_dict() for p in points[: args.top]],
        "base_config": base.echo(),
    }
    _write(args.out, json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    if args.write_config:
        ths = sorted(set(base.thresholds) | {best.threshold})
        found = replace(base, noise=replace(base.noise, p=best.p, q=best.q), thresholds=tuple(ths))
        Path(args.write_config).write_text(dump_config(found), encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auxval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"auxval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", help="write a synthetic compute/uncompute circuit")
    sp.add_argument("--blocks", type=int, default=4)
    sp.add_argument("--data", type=int, default=6)
    sp.add_argument("--aux", type=int, default=3)
    sp.add_argument("--half-gates", type=int, default=20)
    sp.add_argument("--reuse", choices=["across", "fresh"], default="across")
    sp.add_argument("--aux-per-block", type=int)
    sp.add_argument("--data-per-block", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("check", help="verify per-block uncomputation structure")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("lightcone", help="print lightcone sizes and overlaps as JSON")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_lightcone)

    sp = sub.add_parser("simulate", help="sample shots to JSON lines")
    sp.add_argument("--circuit", required=True)
    _add_noise(sp)
    sp.add_argument("--delta-flip-prob", type=float)
    sp.add_argument("--shots", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("filter", help="accept/reject sampled shots")
    sp.add_argument("--shots", required=True)
    sp.add_argument("--circuit", required=True, help="circuit the shots were sampled from")
    _add_noise(sp)
    sp.add_argument("--threshold", type=float, required=True)
    sp.add_argument("--strategy", choices=[s.value for s in Strategy], default="all")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("stats", help="selection statistics, bias and variance")
    sp.add_argument("--shots", required=True)
    sp.add_argument("--decisions", required=True)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--sigma2", type=float, default=1.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("place", help="choose validation measurement points")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--budget", type=int, required=True)
    sp.add_argument("--overlap-penalty", type=float, default=0.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_place)

    sp = sub.add_parser("abort-sim", help="simulate with early abort")
    sp.add_argument("--circuit", required=True)
    _add_noise(sp)
    sp.add_argument("--threshold", type=float, required=True)
    sp.add_argument("--strategy", choices=["final", "all"], default="all")
    sp.add_argument("--shots", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_abort_sim)

    sp = sub.add_parser("run", help="run a full strategy/threshold study")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=["json", "csv"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("calibrate", help="search (p, q, threshold) for the headline tradeoff")
    sp.add_argument("--config", required=True)
    sp.add_argument("--p-grid", type=float, nargs="+", default=[2e-4, 5e-4, 1e-3, 2e-3])
    sp.add_argument("--q-grid", type=float, nargs="+", default=[0.03, 0.05, 0.1, 0.15])
    sp.add_argument("--thresholds", type=float, nargs="+")
    sp.add_argument("--shots", type=int)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--out")
    sp.add_argument("--write-config", help="also write the found regime as a run config")
    sp.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CircuitError, ValueError, KeyError, OSError) as exc:
        print(f"auxval {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
