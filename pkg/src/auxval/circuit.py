"""Circuit representation and the line-oriented circuit file format.

A circuit is a strict total order of gates over a fixed register of data and
auxiliary qubits. Gate labels are opaque strings. Validation measurements and
candidate reset points refer to positions in that order by gate id, with
``None`` standing for the position before the first gate ("start").

File format::

    qubits <n>
    role <qubit_id> data|aux
    gate <gate_id> <label> <q0> [<q1> ...] [block=<b>]
    reset_candidate <qubit_id> after <gate_id>|start
    measure <meas_id> <qubit_id> after <gate_id>|start kind mid|final

Everything after ``#`` on a line is a comment.
"""
from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Optional

__all__ = [
    "Role",
    "Kind",
    "Verdict",
    "Qubit",
    "Gate",
    "MeasurementPoint",
    "Circuit",
    "CircuitError",
    "CircuitSyntaxError",
    "parse_circuit",
    "serialize_circuit",
    "check_uncomputation_structure",
    "inverse_label",
    "validation_candidates",
    "with_measurements",
]

INVERSE_SUFFIX = "_inv"


class CircuitError(ValueError):
    """Semantic problem with a circuit (bad reference, role misuse, ordering)."""


class CircuitSyntaxError(CircuitError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Role(enum.Enum):
    DATA = "data"
    AUX = "aux"


class Kind(enum.Enum):
    MID = "mid"
    FINAL = "final"


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass(frozen=True)
class Qubit:
    id: int
    role: Role = Role.DATA


@dataclass(frozen=True)
class Gate:
    id: int
    label: str
    operands: tuple[int, ...]
    block_id: Optional[int] = None


@dataclass(frozen=True)
class MeasurementPoint:
    """A location where an auxiliary qubit is (or could be) measured.

    ``after_gate`` is the id of the gate the measurement follows; ``None``
    places it before every gate.
    """

    id: int
    qubit: int
    after_gate: Optional[int]
    kind: Kind = Kind.MID

    @property
    def site(self) -> tuple[int, Optional[int]]:
        return (self.qubit, self.after_gate)

    def sort_key(self) -> tuple[int, int]:
        return (-1 if self.after_gate is None else self.after_gate, self.id)


@dataclass(frozen=True)
class Circuit:
    qubits: tuple[Qubit, ...]
    gates: tuple[Gate, ...] = ()
    measurements: tuple[MeasurementPoint, ...] = ()
    candidate_resets: tuple[MeasurementPoint, ...] = ()

    def __post_init__(self):
        # Accept any sequence, store tuples; keep points in circuit order.
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(
            self, "measurements", tuple(sorted(self.measurements, key=MeasurementPoint.sort_key))
        )
        # Candidate ids carry no meaning; renumber 1..n in (position, qubit) order.
        cands = sorted(self.candidate_resets, key=_site_order)
        object.__setattr__(
            self, "candidate_resets", tuple(replace(mp, id=i) for i, mp in enumerate(cands, start=1))
        )
        self._validate()

    def _validate(self) -> None:
        for i, q in enumerate(self.qubits):
            if q.id != i:
                raise CircuitError(f"qubit ids must be contiguous from 0, got {q.id} at index {i}")
        n = len(self.qubits)
        prev = -1
        for g in self.gates:
            if g.id <= prev:
                raise CircuitError(f"gate ids must be strictly increasing: {g.id} after {prev}")
            prev = g.id
            if not g.operands:
                raise CircuitError(f"gate {g.id} has no operands")
            if len(set(g.operands)) != len(g.operands):
                raise CircuitError(f"gate {g.id} repeats an operand")
            for q in g.operands:
                if not 0 <= q < n:
                    raise CircuitError(f"gate {g.id} acts on unknown qubit {q}")
        gate_ids = set(self.gate_ids)

        def check_point(mp: MeasurementPoint, what: str) -> None:
            if not 0 <= mp.qubit < n:
                raise CircuitError(f"{what} on unknown qubit {mp.qubit}")
            if self.qubits[mp.qubit].role is not Role.AUX:
                raise CircuitError(f"{what} on data qubit {mp.qubit}")
            if mp.after_gate is not None and mp.after_gate not in gate_ids:
                raise CircuitError(f"{what} after unknown gate {mp.after_gate}")

        seen_sites = set()
        for mp in self.candidate_resets:
            check_point(mp, "reset candidate")
            if mp.site in seen_sites:
                raise CircuitError(f"duplicate reset candidate at {mp.site}")
            seen_sites.add(mp.site)

        seen_sites = set()
        for mp in self.measurements:
            check_point(mp, f"measurement {mp.id}")
            if mp.site in seen_sites:
                raise CircuitError(f"duplicate measurement at {mp.site}")
            seen_sites.add(mp.site)
        ids = sorted(mp.id for mp in self.measurements)
        if ids != list(range(1, len(ids) + 1)):
            raise CircuitError(f"measurement ids must be 1..k, got {ids}")
        candidate_sites = {mp.site for mp in self.candidate_resets}
        for mp in self.measurements:
            if mp.kind is not Kind.FINAL and mp.site not in candidate_sites:
                raise CircuitError(
                    f"mid-circuit measurement {mp.id} is not at a reset candidate"
                )

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    @cached_property
    def gate_ids(self) -> tuple[int, ...]:
        return tuple(g.id for g in self.gates)

    @cached_property
    def aux_qubits(self) -> tuple[int, ...]:
        return tuple(q.id for q in self.qubits if q.role is Role.AUX)

    def executed_before(self, after_gate: Optional[int]) -> int:
        """Number of gates executed when a point at ``after_gate`` is reached."""
        if after_gate is None:
            return 0
        return bisect.bisect_right(self.gate_ids, after_gate)

    def measurement(self, meas_id: int) -> MeasurementPoint:
        for mp in self.measurements:
            if mp.id == meas_id:
                return mp
        raise KeyError(meas_id)


def _site_order(mp: MeasurementPoint) -> tuple[int, int]:
    return (-1 if mp.after_gate is None else mp.after_gate, mp.qubit)


def inverse_label(label: str) -> str:
    if label.endswith(INVERSE_SUFFIX):
        return label[: -len(INVERSE_SUFFIX)]
    return label + INVERSE_SUFFIX


# --- parsing --------------------------------------------------------------


def _int(tok: str, lineno: int, what: str) -> int:
    try:
        value = int(tok)
    except ValueError:
        raise CircuitSyntaxError(lineno, f"expected integer {what}, got {tok!r}") from None
    if value < 0:
        raise CircuitSyntaxError(lineno, f"{what} must be non-negative, got {value}")
    return value


def _position(tok: str, lineno: int) -> Optional[int]:
    return None if tok == "start" else _int(tok, lineno, "gate id")


def parse_circuit(text: str) -> Circuit:
    """Parse the line-oriented circuit format into a validated ``Circuit``."""
    n_qubits: Optional[int] = None
    roles: dict[int, Role] = {}
    gates: list[Gate] = []
    resets: list[tuple[int, Optional[int]]] = []
    measures: list[MeasurementPoint] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head, args = toks[0], toks[1:]
        if head != "qubits" and n_qubits is None:
            raise CircuitSyntaxError(lineno, "'qubits' must come before any other statement")

        def known_qubit(tok: str) -> int:
            q = _int(tok, lineno, "qubit id")
            if q >= n_qubits:
                raise CircuitError(f"line {lineno}: unknown qubit {q}")
            return q

        if head == "qubits":
            if n_qubits is not None:
                raise CircuitSyntaxError(lineno, "duplicate 'qubits' statement")
            if len(args) != 1:
                raise CircuitSyntaxError(lineno, "usage: qubits <n>")
            n_qubits = _int(args[0], lineno, "qubit count")
        elif head == "role":
            if len(args) != 2 or args[1] not in ("data", "aux"):
                raise CircuitSyntaxError(lineno, "usage: role <qubit_id> data|aux")
            roles[known_qubit(args[0])] = Role(args[1])
        elif head == "gate":
            block = None
            if args and args[-1].startswith("block="):
                block = _int(args[-1][len("block="):], lineno, "block id")
                args = args[:-1]
            if len(args) < 3:
                raise CircuitSyntaxError(lineno, "usage: gate <gate_id> <label> <q0> [<q1> ...] [block=<b>]")
            gid = _int(args[0], lineno, "gate id")
            if gates and gid <= gates[-1].id:
                raise CircuitError(f"line {lineno}: non-monotone gate id {gid} after {gates[-1].id}")
            operands = tuple(known_qubit(t) for t in args[2:])
            if len(set(operands)) != len(operands):
                raise CircuitError(f"line {lineno}: gate {gid} repeats an operand")
            gates.append(Gate(gid, args[1], operands, block))
        elif head == "reset_candidate":
            if len(args) != 3 or args[1] != "after":
                raise CircuitSyntaxError(lineno, "usage: reset_candidate <qubit_id> after <gate_id>|start")
            resets.append((known_qubit(args[0]), _position(args[2], lineno)))
        elif head == "measure":
            if len(args) != 6 or args[2] != "after" or args[4] != "kind" or args[5] not in ("mid", "final"):
                raise CircuitSyntaxError(
                    lineno, "usage: measure <meas_id> <qubit_id> after <gate_id>|start kind mid|final"
                )
            measures.append(
                MeasurementPoint(
                    _int(args[0], lineno, "measurement id"),
                    known_qubit(args[1]),
                    _position(args[3], lineno),
                    Kind(args[5]),
                )
            )
        else:
            raise CircuitSyntaxError(lineno, f"unknown statement {head!r}")

    if n_qubits is None:
        raise CircuitSyntaxError(1, "missing 'qubits' statement")
    qubits = tuple(Qubit(i, roles.get(i, Role.DATA)) for i in range(n_qubits))
    candidates = [MeasurementPoint(i, q, a) for i, (q, a) in enumerate(resets, start=1)]
    return Circuit(qubits, gates, measures, candidates)


def serialize_circuit(c: Circuit) -> str:
    def pos(after: Optional[int]) -> str:
        return "start" if after is None else str(after)

    lines = [f"qubits {c.n_qubits}"]
    lines += [f"role {q.id} {q.role.value}" for q in c.qubits]
    for g in c.gates:
        parts = ["gate", str(g.id), g.label, *map(str, g.operands)]
        if g.block_id is not None:
            parts.append(f"block={g.block_id}")
        lines.append(" ".join(parts))
    lines += [f"reset_candidate {mp.qubit} after {pos(mp.after_gate)}" for mp in c.candidate_resets]
    lines += [
        f"measure {mp.id} {mp.qubit} after {pos(mp.after_gate)} kind {mp.kind.value}"
        for mp in c.measurements
    ]
    return "\n".join(lines) + "\n"


# --- structure ------------------------------------------------------------


def check_uncomputation_structure(c: Circuit) -> list[tuple[int, Verdict]]:
    """Check that every block is a forward sequence followed by its mirror.

    A block passes when its gates read ``F`` then ``F`` reversed with each
    label inverted and operands unchanged, and every auxiliary qubit it
    touches has a reset candidate (or final measurement) right after the
    block's last gate.
    """
    missing = [g.id for g in c.gates if g.block_id is None]
    if missing:
        raise CircuitError(f"gates without block ids: {missing[:10]}")
    blocks: dict[int, list[Gate]] = {}
    for g in c.gates:
        blocks.setdefault(g.block_id, []).append(g)

    sites = {mp.site for mp in c.candidate_resets} | {mp.site for mp in c.measurements}
    aux = set(c.aux_qubits)
    result = []
    for b in sorted(blocks):
        seq = blocks[b]
        ok = len(seq) % 2 == 0 and all(
            fwd.label == inverse_label(bwd.label) and fwd.operands == bwd.operands
            for fwd, bwd in zip(seq, reversed(seq))
        )
        if ok:
            end = seq[-1].id
            touched = {q for g in seq for q in g.operands if q in aux}
            ok = all((q, end) in sites for q in touched)
        result.append((b, Verdict.PASS if ok else Verdict.FAIL))
    return result


def validation_candidates(c: Circuit) -> list[MeasurementPoint]:
    """All instrumentable points: final measurements plus reset candidates.

    A reset candidate sitting exactly where a final measurement already is
    collapses into that final measurement. Ids are renumbered 1..k in circuit
    order.
    """
    finals = [mp for mp in c.measurements if mp.kind is Kind.FINAL]
    final_sites = {mp.site for mp in finals}
    points = finals + [mp for mp in c.candidate_resets if mp.site not in final_sites]
    points.sort(key=_site_order)
    return [replace(mp, id=i) for i, mp in enumerate(points, start=1)]


def with_measurements(c: Circuit, points: Iterable[MeasurementPoint]) -> Circuit:
    """Return ``c`` instrumented with exactly ``points``, renumbered in circuit order."""
    pts = sorted(points, key=_site_order)
    renumbered = [replace(mp, id=i) for i, mp in enumerate(pts, start=1)]
    return Circuit(c.qubits, c.gates, renumbered, c.candidate_resets)
