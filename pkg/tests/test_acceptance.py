"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` (the lines are
printed even when output capture is on).
"""
import itertools
import math
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

import auxval
from auxval.circuit import Circuit, Gate, Kind, MeasurementPoint, Qubit, Role, validation_candidates, with_measurements
from auxval.cli import main as cli_main
from auxval.early_abort import simulate_with_abort
from auxval.estimator import predicted_f_retain, variance_estimate
from auxval.experiments import ExperimentConfig, evaluate_cell, load_config, prepare_circuit, run_experiment
from auxval.generator import AuxReuse, GeneratorConfig, generate
from auxval.lightcone import Lightcone, LightconeSet, backward_lightcone, lightcone_set
from auxval.noise import NoiseParams, ShotRecord, sample_batch
from auxval.placement import PlacementConfig, select_placements, union_coverage
from auxval.postselect import PostSelectPolicy, Strategy, decide, shot_likelihood

from conftest import random_circuit, reachability_cone

pytestmark = pytest.mark.acceptance

HEADLINE = Path(auxval.__file__).parent / "configs" / "headline.toml"


@pytest.fixture
def verdict(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def sigma_ok(hits: int, n: int, prob: float) -> bool:
    return abs(hits - n * prob) <= 3 * math.sqrt(n * prob * (1 - prob)) + 1e-9


def sized_lightcones(sizes) -> LightconeSet:
    """LightconeSet with the given cone sizes on a synthetic gate axis."""
    sizes = np.asarray(sizes, dtype=np.int64)
    n = int(sizes.max(initial=0))
    membership = np.arange(n)[None, :] < sizes[:, None]
    ms = tuple(MeasurementPoint(i + 1, i, None, Kind.FINAL) for i in range(len(sizes)))
    cones = tuple(Lightcone(mp.id, frozenset(range(int(g)))) for mp, g in zip(ms, sizes))
    as_int = membership.astype(np.int64)
    return LightconeSet(ms, cones, membership, as_int @ as_int.T, n, n)


# 1 -------------------------------------------------------------------------


def test_criterion_1_likelihood_exactness(verdict):
    rng = random.Random(1)
    cases = []
    for _ in range(10_000):
        k = rng.randint(1, 20)
        sizes = [rng.randint(0, 500) for _ in range(k)]
        m = [rng.randint(0, 1) for _ in range(k)]
        noise = NoiseParams(10 ** rng.uniform(-6, -1), rng.random(), 10 ** rng.uniform(-4, math.log10(0.5)))
        cases.append((m, sized_lightcones(sizes), sizes, noise))

    t0 = time.perf_counter()
    got = [shot_likelihood(m, lcs, noise) for m, lcs, _, noise in cases]
    elapsed = time.perf_counter() - t0

    worst = 0.0
    for value, (m, _, sizes, noise) in zip(got, cases):
        # exact rational evaluation of the product over the flagged measurements
        p, r, q = Fraction(noise.p), Fraction(noise.r), Fraction(noise.q)
        exact = Fraction(1)
        for bit, g in zip(m, sizes):
            if bit:
                exact *= q / (g * r * p + q)
        worst = max(worst, abs(Fraction(value) - exact) / exact)
    worst = float(worst)
    verdict(1, worst <= 1e-12 and elapsed < 1.0, f"max rel err {worst:.2e} over 10^4 tuples, {elapsed:.3f}s")


# 2 -------------------------------------------------------------------------


def test_criterion_2_single_error_oracle(verdict):
    base = generate(GeneratorConfig(4, 6, 3, 20, AuxReuse.ACROSS, seed=7))
    c = with_measurements(base, validation_candidates(base))
    assert c.n_gates <= 200
    lcs = lightcone_set(c)
    r = 0.3
    noise = NoiseParams(1e-3, r, 0.0)
    n = 100_000
    t0 = time.perf_counter()
    bad = []
    gates = [c.gate_ids[0], c.gate_ids[len(c.gate_ids) // 2], c.gate_ids[-1]]
    checks = 0
    for g in gates:
        batch = sample_batch(c, lcs, noise, n, 100 + g, forced_failures=[g])
        for i, cone in enumerate(lcs.cones):
            hits = int(batch.m[:, i].sum())
            checks += 1
            if g in cone.gate_ids:
                ok = sigma_ok(hits, n, r)
            else:
                ok = hits == 0
            if not ok:
                bad.append((g, i, hits))
    elapsed = time.perf_counter() - t0
    verdict(
        2,
        not bad and elapsed < 60,
        f"{checks} (gate, measurement) rates on {c.n_gates}-gate circuit, mismatches={bad}, {elapsed:.1f}s",
    )


# 3 -------------------------------------------------------------------------


def test_criterion_3_lightcone_oracle(verdict):
    rng = random.Random(3)
    t0 = time.perf_counter()
    mismatches = 0
    compared = 0
    sizes = []
    for _ in range(100):
        c = random_circuit(rng, max_gates=500, max_qubits=16, n_meas=rng.randint(1, 8))
        sizes.append(c.n_gates)
        for mp in c.measurements:
            compared += 1
            if backward_lightcone(c, mp).gate_ids != reachability_cone(c, mp):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    verdict(
        3,
        mismatches == 0 and max(sizes) <= 500 and elapsed < 60,
        f"{compared} cones on 100 circuits (max {max(sizes)} gates), {mismatches} mismatches, {elapsed:.1f}s",
    )


# 4 -------------------------------------------------------------------------


def test_criterion_4_count_threshold(verdict):
    rng = random.Random(4)
    checked = 0
    disagreements = 0
    for k in range(1, 11):
        g = rng.randint(1, 200)
        qubits = [Qubit(i, Role.AUX) for i in range(k)]
        gates = [Gate(i * g + j, "x", (i,)) for i in range(k) for j in range(g)]
        ms = [MeasurementPoint(i + 1, i, gates[-1].id, Kind.FINAL) for i in range(k)]
        lcs = lightcone_set(Circuit(qubits, gates, ms, []))
        for _ in range(3):
            noise = NoiseParams(10 ** rng.uniform(-5, -2), rng.uniform(0.05, 1), rng.uniform(1e-3, 0.3))
            factor = noise.q / (g * noise.r * noise.p + noise.q)
            for th in (rng.random(), rng.uniform(0.9, 1), 0.5):
                limit = math.floor(math.log(th) / math.log(factor))
                policy = PostSelectPolicy(th)
                for m in itertools.product((0, 1), repeat=k):
                    shot = ShotRecord(frozenset(), m, m, False, False, False)
                    checked += 1
                    if decide(shot, lcs, noise, policy).accepted != (sum(m) <= limit):
                        disagreements += 1
    verdict(4, disagreements == 0, f"{checked} exhaustive vectors over k=1..10, {disagreements} disagreements")


# 5 -------------------------------------------------------------------------


def test_criterion_5_formula_consistency(verdict):
    gen = GeneratorConfig(4, 8, 4, 12, AuxReuse.FRESH, seed=5, aux_per_block=1, data_per_block=2)
    noise = NoiseParams(2e-3, 0.5, 0.05)
    n = 100_000
    c = prepare_circuit(ExperimentConfig(generator=gen, noise=noise))
    lcs = lightcone_set(c)
    shots = sample_batch(c, lcs, noise, n, 55)

    cells = [(s, th) for s in (Strategy.FINAL, Strategy.ALL) for th in (0.3, 0.7, 0.9)]
    retain_bad = []
    for s, th in cells:
        _, stats = evaluate_cell(shots, lcs, noise, s, th)
        pred = predicted_f_retain(stats)
        sd = math.sqrt(max(pred * (1 - pred), 1e-12) / n)
        if abs(stats.f_retain - pred) > 3 * sd:
            retain_bad.append((s.value, th, stats.f_retain, pred))

    # bootstrap of the mean of a +-1 observable over retained shots
    rng = np.random.default_rng(5)
    sign = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    obs = sign * np.where(shots.final_output_flipped, -1.0, 1.0)
    ratios = []
    for s, th in [(Strategy.ALL, 0.7), (Strategy.ALL, 0.95)]:
        accepted, stats = evaluate_cell(shots, lcs, noise, s, th)
        sigma_sq = float(obs[accepted].var())
        predicted = variance_estimate(sigma_sq, n, stats.f_retain)
        means = []
        for _ in range(50):
            idx = rng.integers(0, n, size=(100, n))
            kept = accepted[idx]
            means.append((obs[idx] * kept).sum(axis=1) / kept.sum(axis=1))
        boot = float(np.concatenate(means).var(ddof=1))
        ratios.append(boot / predicted)
    boot_ok = all(abs(x - 1) <= 0.10 for x in ratios)
    verdict(
        5,
        not retain_bad and boot_ok and len(cells) >= 5,
        f"{len(cells)} cells, f_retain outside 3 sigma: {retain_bad}; bootstrap/formula ratios "
        + ", ".join(f"{x:.3f}" for x in ratios),
    )


# 6 -------------------------------------------------------------------------


def test_criterion_6_headline(verdict):
    cfg = load_config(HEADLINE)
    assert cfg.n_shots == 100_000
    t0 = time.perf_counter()
    report = run_experiment(cfg, with_abort=False)
    elapsed = time.perf_counter() - t0
    th = 0.85
    none, final, all_ = (report.cell(s, th).stats for s in (Strategy.NONE, Strategy.FINAL, Strategy.ALL))
    reduction = none.fn_rate - all_.fn_rate
    ok = (
        0.08 <= reduction <= 0.12
        and all_.fp_rate <= 0.02
        and all_.fn_rate < final.fn_rate < none.fn_rate
        and none.fp_rate < final.fp_rate < all_.fp_rate
        and elapsed < 300
    )
    verdict(
        6,
        ok,
        f"threshold {th}: fn none/final/all = {none.fn_rate:.4f}/{final.fn_rate:.4f}/{all_.fn_rate:.4f} "
        f"(reduction {100 * reduction:.1f} points), fp none/final/all = "
        f"{none.fp_rate:.4f}/{final.fp_rate:.4f}/{all_.fp_rate:.4f}, {elapsed:.1f}s",
    )


# 7 -------------------------------------------------------------------------


def test_criterion_7_abort_soundness(verdict):
    cfg = load_config(HEADLINE)
    c = prepare_circuit(cfg)
    lcs = lightcone_set(c)
    runs = [
        (cfg.noise, 0.85),
        (cfg.noise, 0.99),
        (NoiseParams(2e-3, 0.5, 0.05), 0.9),
    ]
    lines = []
    ok = True
    exercised = False
    for noise, th in runs:
        rep = simulate_with_abort(c, lcs, noise, PostSelectPolicy(th, Strategy.ALL), 100_000, cfg.seed)
        ok &= rep.decisions_consistent
        if rep.aborted_fraction > 0:
            exercised = True
            ok &= rep.mean_gates_saved > 0
        lines.append(
            f"(p={noise.p}, q={noise.q}, th={th}) consistent={rep.decisions_consistent} "
            f"aborted={rep.aborted_fraction:.4f} saved={rep.mean_gates_saved:.2f}"
        )
    verdict(7, ok and exercised, "1e5 shots each: " + "; ".join(lines))


# 8 -------------------------------------------------------------------------


def test_criterion_8_monotonicity(verdict):
    rng = random.Random(8)
    nrng = np.random.default_rng(8)

    # threshold sweeps on fixed batches
    sweep_cases = sweep_bad = 0
    for case in range(1000):
        cfg = GeneratorConfig(
            rng.randint(1, 4), rng.randint(2, 6), rng.randint(1, 3), rng.randint(1, 6),
            AuxReuse.ACROSS, seed=case,
        )
        base = generate(cfg)
        c = with_measurements(base, validation_candidates(base))
        lcs = lightcone_set(c)
        noise = NoiseParams(rng.uniform(1e-3, 0.05), rng.random(), rng.uniform(0.0, 0.3))
        shots = sample_batch(c, lcs, noise, 200, case)
        ths = sorted(rng.random() for _ in range(6))
        for s in Strategy:
            stats = [evaluate_cell(shots, lcs, noise, s, th)[1] for th in ths]
            fp = [x.fp_rate for x in stats]
            fn = [x.fn_rate for x in stats]
            fp_ok = all(a <= b for a, b in zip(fp, fp[1:]) if not (math.isnan(a) or math.isnan(b)))
            fn_ok = all(a >= b for a, b in zip(fn, fn[1:]) if not (math.isnan(a) or math.isnan(b)))
            sweep_bad += not (fp_ok and fn_ok)
        sweep_cases += 1

    # flipping any outcome 0 -> 1
    flip_cases = flip_bad = 0
    for _ in range(1000):
        k = rng.randint(1, 30)
        lcs = sized_lightcones(nrng.integers(0, 300, size=k))
        noise = NoiseParams(rng.uniform(0, 0.05), rng.random(), rng.uniform(0, 0.3))
        m = nrng.integers(0, 2, size=k)
        base_like = shot_likelihood(m, lcs, noise)
        for i in np.flatnonzero(m == 0):
            up = m.copy()
            up[i] = 1
            flip_bad += shot_likelihood(up, lcs, noise) > base_like
        flip_cases += 1

    # placement coverage against budget
    place_cases = place_bad = 0
    for _ in range(1000):
        c = random_circuit(rng, max_gates=40, max_qubits=6, n_meas=rng.randint(1, 8))
        lam = rng.choice([0.0, 0.0, rng.uniform(0, 1)])
        covs = [
            union_coverage(c, select_placements(c, PlacementConfig(b, lam)))
            for b in range(len(c.candidate_resets) + 2)
        ]
        place_bad += any(a > b for a, b in zip(covs, covs[1:]))
        place_cases += 1

    verdict(
        8,
        sweep_bad == 0 and flip_bad == 0 and place_bad == 0 and min(sweep_cases, flip_cases, place_cases) >= 1000,
        f"threshold sweeps {sweep_cases} cases ({sweep_bad} bad), outcome flips {flip_cases} cases "
        f"({flip_bad} bad), placement budgets {place_cases} cases ({place_bad} bad)",
    )


# 9 -------------------------------------------------------------------------


def test_criterion_9_reproducibility(verdict, tmp_path):
    outs = {}
    for name, extra in [("a", []), ("b", []), ("w1", ["--workers", "1"]), ("w8", ["--workers", "8"])]:
        path = tmp_path / f"{name}.csv"
        assert cli_main(["run", "--config", str(HEADLINE), "--out", str(path), *extra]) == 0
        outs[name] = path.read_bytes()
    same_runs = outs["a"] == outs["b"]
    same_workers = outs["w1"] == outs["w8"]
    rows = outs["a"].decode().count("\n") - 1
    verdict(9, same_runs and same_workers, f"two runs identical={same_runs}, 1 vs 8 workers identical={same_workers}, {rows} rows")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
