"""Aborting shots as soon as the observed prefix already forces rejection.

Every likelihood factor is at most 1, so once the running product over the
measurements seen so far drops below the threshold the full-run likelihood is
below it too. The executor here walks each shot forward through the circuit,
drawing gate failures only for gates that actually run, and stops at the
first visible measurement that crosses the threshold. It consumes the same
random slots as ``sample_batch``, so its decisions can be compared shot by
shot against a full run.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuit import Circuit
from .lightcone import LightconeSet
from .noise import DEFAULT_CHUNK, NoiseParams, SlotLayout, sample_batch
from .postselect import PostSelectPolicy, Strategy, decide_batch, log_factors, visible_mask
from .rng import stream_keys, uniforms

__all__ = ["AbortReport", "prefix_likelihood", "run_with_abort", "simulate_with_abort"]


@dataclass(frozen=True)
class AbortReport:
    n_shots: int
    total_gates: int
    aborted_fraction: float
    mean_gates_executed: float
    mean_gates_saved: float
    decisions_consistent: bool

    def to_dict(self) -> dict:
        return asdict(self)


def prefix_likelihood(m_prefix: Sequence[int], lcs: LightconeSet, noise: NoiseParams) -> float:
    """Likelihood product over the first ``len(m_prefix)`` measurements."""
    j = len(m_prefix)
    if j > lcs.k:
        raise ValueError(f"prefix of length {j} exceeds {lcs.k} measurements")
    logs = log_factors(lcs.sizes[:j], noise)
    log_like = 0.0
    for bit, value in zip(m_prefix, logs):
        if bit:
            log_like += value
    return math.exp(log_like)


def run_with_abort(
    c: Circuit,
    lcs: LightconeSet,
    noise: NoiseParams,
    policy: PostSelectPolicy,
    shots: np.ndarray,
    seed: int,
    forced_failures: Optional[Iterable[int]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Execute the given shot indices with early abort.

    Returns ``(accepted, gates_executed)`` per shot.
    """
    shots = np.asarray(shots, dtype=np.int64)
    n, k = c.n_gates, lcs.k
    slots = SlotLayout(n, k)
    keys = stream_keys(seed, shots)
    size = len(shots)

    forced = None
    if forced_failures is not None:
        index = {g: j for j, g in enumerate(c.gate_ids)}
        forced = np.zeros(n, bool)
        forced[[index[g] for g in forced_failures]] = True

    logs = log_factors(lcs.sizes, noise)
    log_th = policy.log_threshold
    visible = visible_mask(lcs, policy.strategy)

    failed = np.zeros((size, n), bool)
    log_like = np.zeros(size)
    alive = np.ones(size, bool)
    executed = np.full(size, n, dtype=np.int64)
    done = 0  # gates executed so far by every live shot

    for i, mp in enumerate(lcs.measurements):
        if not visible[i]:
            continue
        reach = c.executed_before(mp.after_gate)
        rows = np.flatnonzero(alive)
        if reach > done:
            seg = np.arange(done, reach)
            if forced is None:
                failed[np.ix_(rows, seg)] = uniforms(keys[rows][:, None], seg[None, :]) < noise.p
            else:
                failed[np.ix_(rows, seg)] = forced[seg][None, :]
            done = reach

        cone = lcs.membership[i]
        r_idx, g_idx = np.nonzero(failed[rows][:, cone])
        gpos = np.flatnonzero(cone)[g_idx]
        flips = uniforms(keys[rows[r_idx]], slots.flip(gpos, i)) < noise.r
        parity = np.bincount(r_idx[flips], minlength=len(rows)) & 1
        readout = uniforms(keys[rows], slots.readout(i)) < noise.q
        bit = (parity == 1) ^ readout

        log_like[rows] += np.where(bit, logs[i], 0.0)
        stop = rows[log_like[rows] < log_th]
        alive[stop] = False
        executed[stop] = reach

    return alive.copy(), executed


def simulate_with_abort(
    c: Circuit,
    lcs: LightconeSet,
    noise: NoiseParams,
    policy: PostSelectPolicy,
    n_shots: int,
    seed: int,
    *,
    forced_failures: Optional[Iterable[int]] = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> AbortReport:
    """Run ``n_shots`` with early abort and check them against a full run."""
    if policy.strategy is Strategy.NONE:
        raise ValueError("early abort needs a validating strategy")
    if n_shots < 1:
        raise ValueError("n_shots must be positive")
    accepted_parts, executed_parts = [], []
    for start in range(0, n_shots, chunk_size):
        idx = np.arange(start, min(start + chunk_size, n_shots))
        acc, ex = run_with_abort(c, lcs, noise, policy, idx, seed, forced_failures)
        accepted_parts.append(acc)
        executed_parts.append(ex)
    accepted = np.concatenate(accepted_parts)
    executed = np.concatenate(executed_parts)

    full = sample_batch(c, lcs, noise, n_shots, seed, forced_failures=forced_failures, chunk_size=chunk_size)
    full_accepted, _ = decide_batch(full.m, lcs, noise, policy)
    return abort_report(accepted, executed, full_accepted, c.n_gates)


def abort_report(accepted, executed, full_accepted, total_gates: int) -> AbortReport:
    executed = np.asarray(executed)
    mean_exec = float(executed.mean())
    return AbortReport(
        n_shots=len(executed),
        total_gates=total_gates,
        aborted_fraction=float(np.mean(executed < total_gates) if total_gates else 0.0),
        mean_gates_executed=mean_exec,
        mean_gates_saved=float((total_gates - executed).mean()),
        decisions_consistent=bool(np.array_equal(accepted, full_accepted)),
    )
