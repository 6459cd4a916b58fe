"""Circuit intermediate representation and the text format.

A circuit is a straight-line instruction list over ``n_qubits`` qubits: each
instruction executes at most once, in order.  ``rewind`` restores the quantum
state captured by an earlier ``snapshot`` — it never moves the program
counter, so retry patterns are written as explicit conditional chains.

Text format (one instruction per line, ``#`` starts a comment)::

    qubits 2
    gate h 0
    gate cz 0 1
    gate hk -2 1
    gate rz 0.75 0
    snapshot pre
    measure 0 -> m1
    rewind pre if m1 == 1
    measure 0 -> m2 if m1 == 1
    postselect 1 = 0
    clone pre
    accept 0

Any instruction except ``accept`` may carry an ``if`` suffix: a conjunction
of ``<label> == <bit>`` clauses joined by ``&&``, referring to earlier
measurement labels.

A :class:`ClassicalDescription` is the replayable classical record of how a
state was built from |0...0>: the gate prefix with every measurement resolved
to a projector onto its recorded outcome.  Replaying it (see
``statevector.clone_from_description``) reconstructs the state exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from .gates import Gate, gate as make_gate


class CircuitSyntaxError(ValueError):
    """Raised by the parser; carries the 1-based offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class CircuitValidationError(ValueError):
    """A structurally well-formed circuit that breaks a static rule."""


class RecordError(ValueError):
    """A measurement record is inconsistent with the circuit or itself."""


class DescriptionBudgetError(ValueError):
    """A classical description exceeded the circuit's bit budget."""


@dataclass(frozen=True)
class GateOp:
    gate: Gate
    targets: tuple[int, ...]


@dataclass(frozen=True)
class Measure:
    qubit: int
    label: str


@dataclass(frozen=True)
class Postselect:
    qubit: int
    bit: int


@dataclass(frozen=True)
class Snapshot:
    label: str


@dataclass(frozen=True)
class Rewind:
    label: str


@dataclass(frozen=True)
class Clone:
    label: str


@dataclass(frozen=True)
class Accept:
    qubit: int


@dataclass(frozen=True)
class Project:
    """Projector onto ``qubit == bit`` followed by renormalisation.

    Appears only inside classical descriptions, never in source circuits.
    """

    qubit: int
    bit: int


_Plain = Union[GateOp, Measure, Postselect, Snapshot, Rewind, Clone, Accept]


@dataclass(frozen=True)
class Conditional:
    """Wrapper executing ``inner`` only when every (label, bit) clause holds."""

    predicate: tuple[tuple[str, int], ...]
    inner: _Plain


Instruction = Union[_Plain, Conditional]


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    instructions: tuple[Instruction, ...]
    name: str | None = None
    description_bits: int | None = None  # budget for snapshot descriptions

    def __iter__(self) -> Iterator[Instruction]:
        return iter(self.instructions)


class MeasurementRecord:
    """Ordered (label, bit, branch-probability) triples with unique labels."""

    def __init__(self):
        self.entries: list[tuple[str, int, float]] = []
        self._bits: dict[str, int] = {}

    def add(self, label: str, bit: int, prob: float) -> None:
        if label in self._bits:
            raise RecordError(f"duplicate measurement label {label!r}")
        if bit not in (0, 1):
            raise RecordError(f"recorded bit for {label!r} must be 0 or 1")
        if not (0.0 < prob <= 1.0):
            raise RecordError(
                f"branch probability for {label!r} must lie in (0, 1], got {prob!r}"
            )
        self.entries.append((label, bit, prob))
        self._bits[label] = bit

    def bit(self, label: str) -> int:
        if label not in self._bits:
            raise RecordError(f"no recorded outcome for label {label!r}")
        return self._bits[label]

    def __contains__(self, label: str) -> bool:
        return label in self._bits

    def __len__(self) -> int:
        return len(self.entries)

    def outcome_string(self) -> str:
        return "".join(str(b) for _, b, _ in self.entries)


def predicate_holds(predicate: tuple[tuple[str, int], ...], record: MeasurementRecord) -> bool:
    return all(record.bit(label) == bit for label, bit in predicate)


@dataclass(frozen=True)
class ClassicalDescription:
    """Replayable construction of a pure state from |0...0>.

    ``ops`` is the operator prefix (gates and outcome projectors, in order);
    ``outcomes`` lists the (label, bit) pairs the projectors came from.
    """

    n_qubits: int
    ops: tuple[GateOp | Project, ...]
    outcomes: tuple[tuple[str, int], ...] = ()

    def serialize(self) -> str:
        lines = [f"qubits {self.n_qubits}"]
        for op in self.ops:
            if isinstance(op, Project):
                lines.append(f"project {op.qubit} = {op.bit}")
            else:
                lines.append(_format_gate(op))
        return "\n".join(lines) + "\n"

    def bit_length(self) -> int:
        """Size of the canonical serialization, in bits."""
        return 8 * len(self.serialize())


# ---------------------------------------------------------------------------
# parsing


def _parse_predicate(text: str, lineno: int) -> tuple[tuple[str, int], ...]:
    clauses = []
    for clause in text.split("&&"):
        parts = clause.split()
        if len(parts) != 3 or parts[1] != "==" or parts[2] not in ("0", "1"):
            raise CircuitSyntaxError(lineno, f"bad condition clause {clause.strip()!r}")
        clauses.append((parts[0], int(parts[2])))
    return tuple(clauses)


def _parse_targets(parts: list[str], lineno: int) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise CircuitSyntaxError(lineno, f"qubit indices must be integers: {parts}") from None


def parse_circuit(text: str, name: str | None = None) -> Circuit:
    """Parse the text format into a validated :class:`Circuit`."""
    n_qubits = None
    instructions: list[Instruction] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if n_qubits is None:
            parts = line.split()
            if len(parts) != 2 or parts[0] != "qubits":
                raise CircuitSyntaxError(lineno, "expected 'qubits N' header")
            n_qubits = int(parts[1])
            continue

        predicate = None
        if " if " in line:
            line, _, cond_text = line.partition(" if ")
            predicate = _parse_predicate(cond_text, lineno)
            line = line.strip()

        parts = line.split()
        kind = parts[0]
        instr: _Plain
        if kind == "gate":
            if len(parts) < 3:
                raise CircuitSyntaxError(lineno, "gate needs a name and targets")
            gname = parts[1]
            try:
                if gname == "hk":
                    g = make_gate("hk", int(parts[2]))
                    targets = _parse_targets(parts[3:], lineno)
                elif gname == "rz":
                    g = make_gate("rz", float(parts[2]))
                    targets = _parse_targets(parts[3:], lineno)
                else:
                    g = make_gate(gname)
                    targets = _parse_targets(parts[2:], lineno)
            except ValueError as exc:
                raise CircuitSyntaxError(lineno, str(exc)) from None
            if len(targets) != g.arity:
                raise CircuitSyntaxError(
                    lineno, f"gate {gname} expects {g.arity} target(s), got {len(targets)}"
                )
            instr = GateOp(g, targets)
        elif kind == "measure":
            if len(parts) != 4 or parts[2] != "->":
                raise CircuitSyntaxError(lineno, "expected 'measure <q> -> <label>'")
            instr = Measure(int(parts[1]), parts[3])
        elif kind == "postselect":
            if len(parts) != 4 or parts[2] != "=" or parts[3] not in ("0", "1"):
                raise CircuitSyntaxError(lineno, "expected 'postselect <q> = <0|1>'")
            instr = Postselect(int(parts[1]), int(parts[3]))
        elif kind == "snapshot":
            if len(parts) != 2:
                raise CircuitSyntaxError(lineno, "expected 'snapshot <label>'")
            instr = Snapshot(parts[1])
        elif kind == "rewind":
            if len(parts) != 2:
                raise CircuitSyntaxError(lineno, "expected 'rewind <label>'")
            instr = Rewind(parts[1])
        elif kind == "clone":
            if len(parts) != 2:
                raise CircuitSyntaxError(lineno, "expected 'clone <label>'")
            instr = Clone(parts[1])
        elif kind == "accept":
            if len(parts) != 2:
                raise CircuitSyntaxError(lineno, "expected 'accept <q>'")
            if predicate is not None:
                raise CircuitSyntaxError(lineno, "accept cannot be conditional")
            instr = Accept(int(parts[1]))
        else:
            raise CircuitSyntaxError(lineno, f"unknown instruction {kind!r}")

        instructions.append(Conditional(predicate, instr) if predicate else instr)

    if n_qubits is None:
        raise CircuitSyntaxError(1, "missing 'qubits N' header")
    circuit = Circuit(n_qubits, tuple(instructions), name=name)
    validate(circuit)
    return circuit


def _format_gate(op: GateOp) -> str:
    targets = " ".join(str(t) for t in op.targets)
    if op.gate.param is not None:
        return f"gate {op.gate.name} {op.gate.param!r} {targets}"
    return f"gate {op.gate.name} {targets}"


def _format_plain(instr: _Plain) -> str:
    if isinstance(instr, GateOp):
        return _format_gate(instr)
    if isinstance(instr, Measure):
        return f"measure {instr.qubit} -> {instr.label}"
    if isinstance(instr, Postselect):
        return f"postselect {instr.qubit} = {instr.bit}"
    if isinstance(instr, Snapshot):
        return f"snapshot {instr.label}"
    if isinstance(instr, Rewind):
        return f"rewind {instr.label}"
    if isinstance(instr, Clone):
        return f"clone {instr.label}"
    if isinstance(instr, Accept):
        return f"accept {instr.qubit}"
    raise TypeError(f"not an instruction: {instr!r}")


def serialize_circuit(circuit: Circuit) -> str:
    """Inverse of :func:`parse_circuit` (modulo comments and blank lines)."""
    lines = [f"qubits {circuit.n_qubits}"]
    for instr in circuit.instructions:
        if isinstance(instr, Conditional):
            cond = " && ".join(f"{label} == {bit}" for label, bit in instr.predicate)
            lines.append(f"{_format_plain(instr.inner)} if {cond}")
        else:
            lines.append(_format_plain(instr))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# static validation


def validate(circuit: Circuit) -> None:
    """Static checks; raises :class:`CircuitValidationError` on the first failure."""
    n = circuit.n_qubits
    if n < 1:
        raise CircuitValidationError("circuit needs at least one qubit")

    def check_qubit(q: int) -> None:
        if not (0 <= q < n):
            raise CircuitValidationError(f"qubit index {q} out of range for {n} qubits")

    measure_labels: set[str] = set()
    snapshot_labels: set[str] = set()
    accept_seen = False
    for instr in circuit.instructions:
        inner = instr.inner if isinstance(instr, Conditional) else instr
        if isinstance(instr, Conditional):
            if isinstance(inner, (Conditional, Accept)):
                raise CircuitValidationError("conditional accept/nesting is not allowed")
            for label, bit in instr.predicate:
                if label not in measure_labels:
                    raise CircuitValidationError(
                        f"condition references undefined measurement label {label!r}"
                    )
                if bit not in (0, 1):
                    raise CircuitValidationError("condition bits must be 0 or 1")
        if isinstance(inner, GateOp):
            for q in inner.targets:
                check_qubit(q)
            if len(set(inner.targets)) != len(inner.targets):
                raise CircuitValidationError(
                    f"gate {inner.gate.name} targets must be distinct: {inner.targets}"
                )
        elif isinstance(inner, Measure):
            check_qubit(inner.qubit)
            if inner.label in measure_labels:
                raise CircuitValidationError(f"duplicate measurement label {inner.label!r}")
            measure_labels.add(inner.label)
        elif isinstance(inner, Postselect):
            check_qubit(inner.qubit)
            if inner.bit not in (0, 1):
                raise CircuitValidationError("postselect bit must be 0 or 1")
        elif isinstance(inner, Snapshot):
            if inner.label in snapshot_labels:
                raise CircuitValidationError(f"duplicate snapshot label {inner.label!r}")
            snapshot_labels.add(inner.label)
        elif isinstance(inner, (Rewind, Clone)):
            if inner.label not in snapshot_labels:
                raise CircuitValidationError(
                    f"{type(inner).__name__.lower()} references undefined snapshot "
                    f"label {inner.label!r}"
                )
        elif isinstance(inner, Accept):
            check_qubit(inner.qubit)
            if accept_seen:
                raise CircuitValidationError("at most one accept declaration is allowed")
            accept_seen = True
        else:
            raise CircuitValidationError(f"unknown instruction {inner!r}")


def accept_qubit(circuit: Circuit) -> int | None:
    """The declared accept qubit, or None."""
    for instr in circuit.instructions:
        if isinstance(instr, Accept):
            return instr.qubit
    return None


# ---------------------------------------------------------------------------
# classical descriptions


@dataclass
class _PrefixState:
    ops: list[GateOp | Project] = field(default_factory=list)
    outcomes: list[tuple[str, int]] = field(default_factory=list)

    def copy(self) -> "_PrefixState":
        return _PrefixState(list(self.ops), list(self.outcomes))


def description_of_prefix(
    circuit: Circuit,
    record: MeasurementRecord,
    snapshot_label: str | None = None,
) -> ClassicalDescription:
    """Classical description of the state at ``snapshot_label``.

    Replays the circuit's control flow classically, resolving every
    measurement to a projector onto the bit stored in ``record``.  With
    ``snapshot_label=None`` the description covers the full circuit.  The
    record must contain every measurement that executes before the target
    point under its own recorded control flow.
    """
    validate(circuit)
    cur = _PrefixState()
    snaps: dict[str, _PrefixState] = {}
    found = snapshot_label is None
    for instr in circuit.instructions:
        if isinstance(instr, Conditional):
            if not predicate_holds(instr.predicate, record):
                continue
            instr = instr.inner
        if isinstance(instr, GateOp):
            cur.ops.append(instr)
        elif isinstance(instr, Measure):
            bit = record.bit(instr.label)
            cur.ops.append(Project(instr.qubit, bit))
            cur.outcomes.append((instr.label, bit))
        elif isinstance(instr, Postselect):
            cur.ops.append(Project(instr.qubit, instr.bit))
        elif isinstance(instr, Snapshot):
            snaps[instr.label] = cur.copy()
            if instr.label == snapshot_label:
                found = True
                break
        elif isinstance(instr, (Rewind, Clone)):
            if instr.label not in snaps:
                raise RecordError(
                    f"snapshot {instr.label!r} was not reached under this record"
                )
            cur = snaps[instr.label].copy()
        # Accept carries no state information.
    if not found:
        raise RecordError(f"snapshot {snapshot_label!r} was not reached under this record")
    description = ClassicalDescription(circuit.n_qubits, tuple(cur.ops), tuple(cur.outcomes))
    if circuit.description_bits is not None:
        used = description.bit_length()
        if used > circuit.description_bits:
            raise DescriptionBudgetError(
                f"description needs {used} bits, budget is {circuit.description_bits}"
            )
    return description
