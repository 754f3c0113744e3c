from __future__ import annotations

import random

import pytest

from auxval.circuit import Circuit, Gate, Kind, MeasurementPoint, Qubit, Role
from auxval.generator import AuxReuse, GeneratorConfig, generate


def reachability_cone(c: Circuit, mp: MeasurementPoint) -> set[int]:
    """Brute-force backward lightcone via the explicit dependency relation.

    u -> v whenever u precedes v and they share an operand; the cone is every
    gate on the measured qubit up to the measurement, plus all their ancestors.
    """
    n = c.n_gates
    parents = [
        [u for u in range(v) if set(c.gates[u].operands) & set(c.gates[v].operands)]
        for v in range(n)
    ]
    seeds = []
    for pos, g in enumerate(c.gates):
        if mp.after_gate is None:
            break
        if g.id <= mp.after_gate and mp.qubit in g.operands:
            seeds.append(pos)
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        v = stack.pop()
        for u in parents[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return {c.gates[pos].id for pos in seen}


def random_circuit(rng: random.Random, max_gates: int = 60, max_qubits: int = 8, n_meas: int | None = None) -> Circuit:
    """Random circuit with random measurement points on auxiliary qubits."""
    nq = rng.randint(2, max_qubits)
    n_aux = rng.randint(1, nq - 1)
    aux = set(rng.sample(range(nq), n_aux))
    qubits = [Qubit(i, Role.AUX if i in aux else Role.DATA) for i in range(nq)]
    n_gates = rng.randint(0, max_gates)
    gates = []
    gid = 0
    for _ in range(n_gates):
        gid += rng.randint(1, 3)  # ids increase but need not be contiguous
        arity = rng.choice([1, 1, 2, 2, 2, 3])
        arity = min(arity, nq)
        gates.append(Gate(gid, rng.choice(["h", "cx", "ccx", "t"]), tuple(rng.sample(range(nq), arity))))
    positions = [None] + [g.id for g in gates]
    sites = set()
    k = n_meas if n_meas is not None else rng.randint(1, 6)
    while len(sites) < k:
        sites.add((rng.choice(sorted(aux)), rng.choice(positions)))
        if len(sites) >= len(aux) * len(positions):
            break
    points = [MeasurementPoint(i, q, a) for i, (q, a) in enumerate(sorted(sites, key=lambda s: (-1 if s[1] is None else s[1], s[0])), start=1)]
    return Circuit(qubits, gates, points, points)


@pytest.fixture
def three_block():
    """Generated 3-block circuit with auxiliary reuse, ~120 gates."""
    return generate(GeneratorConfig(n_blocks=3, data_qubits=4, aux_qubits=2, gates_per_block_half=10, seed=3))


@pytest.fixture
def fresh_circuit():
    return generate(
        GeneratorConfig(
            n_blocks=4, data_qubits=8, aux_qubits=4, aux_per_block=1, data_per_block=2,
            aux_reuse=AuxReuse.FRESH, gates_per_block_half=8, seed=5,
        )
    )


def final_point(c: Circuit, qubit: int) -> MeasurementPoint:
    return MeasurementPoint(1, qubit, c.gates[-1].id, Kind.FINAL)
