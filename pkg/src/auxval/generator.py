"""Synthetic compute/uncompute circuits with auxiliary reuse.

Each block applies a random forward sequence ``F`` over its auxiliary and
data qubits, then the mirrored inverse. The first forward gate of a block
touches every auxiliary of the block plus one data qubit; every other forward
gate touches one auxiliary and one or two data qubits. The mirrored first gate
therefore closes the block and ties all of the block's qubits into the
lightcone of each auxiliary reset point.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Optional

from .circuit import Circuit, Gate, Kind, MeasurementPoint, Qubit, Role, inverse_label

__all__ = ["AuxReuse", "GeneratorConfig", "generate"]


class AuxReuse(enum.Enum):
    ACROSS = "across"
    FRESH = "fresh"


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of a generated circuit.

    ``aux_per_block`` defaults to every auxiliary under ``ACROSS`` reuse and
    to ``aux_qubits // n_blocks`` under ``FRESH``. ``data_per_block`` defaults
    to every data qubit.
    """

    n_blocks: int = 4
    data_qubits: int = 6
    aux_qubits: int = 3
    gates_per_block_half: int = 20
    aux_reuse: AuxReuse = AuxReuse.ACROSS
    seed: int = 0
    aux_per_block: Optional[int] = None
    data_per_block: Optional[int] = None
    toffoli_fraction: float = 0.3

    def __post_init__(self):
        for name in ("n_blocks", "data_qubits", "aux_qubits", "gates_per_block_half"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.toffoli_fraction <= 1.0:
            raise ValueError("toffoli_fraction must lie in [0, 1]")
        if self.block_aux < 1:
            raise ValueError(
                f"fresh auxiliaries need aux_qubits >= n_blocks ({self.aux_qubits} < {self.n_blocks})"
            )
        if self.aux_reuse is AuxReuse.FRESH and self.block_aux * self.n_blocks > self.aux_qubits:
            raise ValueError("fresh auxiliaries need aux_qubits >= n_blocks * aux_per_block")
        if self.block_aux > self.aux_qubits:
            raise ValueError("aux_per_block exceeds aux_qubits")
        if not 1 <= self.block_data <= self.data_qubits:
            raise ValueError("data_per_block must lie in [1, data_qubits]")

    @property
    def block_aux(self) -> int:
        if self.aux_per_block is not None:
            return self.aux_per_block
        if self.aux_reuse is AuxReuse.ACROSS:
            return self.aux_qubits
        return self.aux_qubits // self.n_blocks

    @property
    def block_data(self) -> int:
        return self.data_qubits if self.data_per_block is None else self.data_per_block


def generate(cfg: GeneratorConfig) -> Circuit:
    rng = random.Random(cfg.seed)
    data = list(range(cfg.data_qubits))
    aux = list(range(cfg.data_qubits, cfg.data_qubits + cfg.aux_qubits))
    qubits = [Qubit(q, Role.DATA) for q in data] + [Qubit(q, Role.AUX) for q in aux]

    gates: list[Gate] = []
    resets: list[MeasurementPoint] = []
    used_aux: set[int] = set()
    for b in range(cfg.n_blocks):
        if cfg.aux_reuse is AuxReuse.FRESH:
            block_aux = aux[b * cfg.block_aux:(b + 1) * cfg.block_aux]
        else:
            block_aux = sorted(rng.sample(aux, cfg.block_aux))
        block_data = sorted(rng.sample(data, cfg.block_data))

        forward = []
        for j in range(cfg.gates_per_block_half):
            if j == 0:
                operands = (*block_aux, rng.choice(block_data))
            elif len(block_data) > 1 and rng.random() < cfg.toffoli_fraction:
                operands = (rng.choice(block_aux), *rng.sample(block_data, 2))
            else:
                operands = (rng.choice(block_aux), rng.choice(block_data))
            forward.append((f"g{b}_{j}", operands))
        sequence = forward + [(inverse_label(label), ops) for label, ops in reversed(forward)]
        for label, ops in sequence:
            gates.append(Gate(len(gates), label, ops, b))

        end = gates[-1].id
        resets += [MeasurementPoint(0, a, end) for a in block_aux]
        used_aux.update(block_aux)

    end = gates[-1].id
    finals = [
        MeasurementPoint(i, a, end, Kind.FINAL) for i, a in enumerate(sorted(used_aux), start=1)
    ]
    return Circuit(qubits, gates, finals, resets)
