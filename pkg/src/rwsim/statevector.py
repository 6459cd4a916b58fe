"""Dense statevector backend with snapshots, rewinding and cloning.

Conventions
-----------
* Qubit 0 is the MOST significant bit of the basis index: on 2 qubits the
  amplitude order is |00>, |01>, |10>, |11> with qubit 0 first.
* All operations are functional — they return new states and never mutate
  their input, so a snapshot is safe to keep by reference.
* ``rewind`` in strict mode refuses inputs it cannot certify: the state being
  rewound must equal (up to global phase) the stored snapshot projected onto
  some single-qubit outcome and renormalised.  Permissive mode skips the
  check and returns the stored state unconditionally.

The default width cap is 24 qubits; the environment variable
``RWSIM_MAX_QUBITS`` overrides it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .circuit import (
    Accept,
    Circuit,
    ClassicalDescription,
    Clone,
    Conditional,
    GateOp,
    Measure,
    MeasurementRecord,
    Postselect,
    Project,
    Rewind,
    Snapshot,
    description_of_prefix,
    predicate_holds,
    validate,
)
from .gates import Gate
from .rng import SplitMix64

_DEFAULT_MAX_QUBITS = 24
_ZERO_TOL = 1e-30  # squared-amplitude threshold for "this branch is empty"


class QubitBudgetError(ValueError):
    """Requested width exceeds the configured qubit cap."""


class InvalidPostselectionError(ValueError):
    """Postselected on an outcome of probability zero."""


class PostselectThresholdError(ValueError):
    """Postselection succeeded but below the required minimum probability."""


class RewindConsistencyError(ValueError):
    """Strict rewind input is not a one-outcome collapse of the snapshot."""


class UnknownSnapshotError(KeyError):
    """Rewind/clone referenced a label the registry has never seen."""


class ReplayError(ValueError):
    """A classical description hit a zero-probability projector on replay."""


class RewindBudgetError(RuntimeError):
    """A run used more rewinds than its budget allows."""


def max_qubits() -> int:
    value = os.environ.get("RWSIM_MAX_QUBITS")
    return int(value) if value else _DEFAULT_MAX_QUBITS


@dataclass
class PureState:
    """Normalised pure state on ``n`` qubits."""

    n: int
    amps: np.ndarray

    def copy(self) -> "PureState":
        return PureState(self.n, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


def init(n: int) -> PureState:
    """|0...0> on ``n`` qubits."""
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > max_qubits():
        raise QubitBudgetError(f"{n} qubits exceeds the cap of {max_qubits()}")
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = 1.0
    return PureState(n, amps)


def from_amplitudes(amps: np.ndarray | list) -> PureState:
    """Wrap and normalise an explicit amplitude vector."""
    arr = np.asarray(amps, dtype=complex)
    n = int(arr.size).bit_length() - 1
    if 1 << n != arr.size:
        raise ValueError("amplitude vector length must be a power of two")
    norm = np.linalg.norm(arr)
    if norm < 1e-12:
        raise ValueError("cannot normalise a zero vector")
    return PureState(n, arr / norm)


def apply_matrix(state: PureState, mat: np.ndarray, targets: tuple[int, ...]) -> PureState:
    """Apply a dense (2^k x 2^k) matrix to the listed target qubits.

    The matrix basis is big-endian in ``targets`` (first target = most
    significant bit), matching :meth:`rwsim.gates.Gate.unitary`.
    """
    n, k = state.n, len(targets)
    if mat.shape != (1 << k, 1 << k):
        raise ValueError("matrix shape does not match target count")
    tensor = state.amps.reshape([2] * n)
    rest = [q for q in range(n) if q not in targets]
    tensor = tensor.transpose(list(targets) + rest).reshape(1 << k, -1)
    tensor = mat @ tensor
    tensor = tensor.reshape([2] * n)
    inverse = np.argsort(list(targets) + rest)
    return PureState(n, tensor.transpose(inverse).reshape(-1))


def apply_gate(state: PureState, g: Gate, targets: tuple[int, ...]) -> PureState:
    if len(targets) != g.arity:
        raise ValueError(f"gate {g.name} expects {g.arity} targets")
    return apply_matrix(state, g.unitary(), targets)


def _qubit_slices(state: PureState, qubit: int):
    """View of the amplitudes as (prefix, qubit, suffix) axes."""
    if not (0 <= qubit < state.n):
        raise ValueError(f"qubit {qubit} out of range")
    return state.amps.reshape(1 << qubit, 2, -1)


def prob_of_bit(state: PureState, qubit: int, bit: int) -> float:
    """Probability of reading ``bit`` on ``qubit`` (no collapse).

    Summed directly over the matching amplitudes, so tiny probabilities keep
    full relative precision (never computed as 1 - p).
    """
    view = _qubit_slices(state, qubit)[:, bit, :]
    return float(np.sum(np.abs(view) ** 2))


def _collapse(state: PureState, qubit: int, bit: int, prob: float) -> PureState:
    tensor = _qubit_slices(state, qubit).copy()
    tensor[:, 1 - bit, :] = 0.0
    tensor /= math.sqrt(prob)
    return PureState(state.n, tensor.reshape(-1))


def measure(state: PureState, qubit: int, rng: SplitMix64) -> tuple[int, float, PureState]:
    """Z-measure one qubit: returns (bit, branch probability, collapsed state)."""
    p0 = prob_of_bit(state, qubit, 0)
    p1 = prob_of_bit(state, qubit, 1)
    total = p0 + p1
    bit = 1 if rng.uniform() * total < p1 else 0
    prob = (p1 if bit else p0) / total
    return bit, prob, _collapse(state, qubit, bit, prob * total)


def measure_register(
    state: PureState, qubits, rng: SplitMix64
) -> tuple[int, float, PureState]:
    """Measure several qubits at once: (value, joint probability, state).

    Equivalent in distribution to measuring the listed qubits one by one in
    order (the value reads them most-significant first), but samples the
    joint marginal in a single pass, which is much cheaper on wide states.
    """
    qubits = list(qubits)
    n, k = state.n, len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    tensor = state.amps.reshape([2] * n).transpose(qubits + rest).reshape(1 << k, -1)
    probs = np.sum(np.abs(tensor) ** 2, axis=1)
    total = float(probs.sum())
    u = rng.uniform() * total
    value = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    value = min(value, (1 << k) - 1)
    prob = float(probs[value]) / total
    collapsed = np.zeros_like(tensor)
    collapsed[value] = tensor[value] / math.sqrt(float(probs[value]))
    inverse = np.argsort(qubits + rest)
    amps = collapsed.reshape([2] * n).transpose(inverse).reshape(-1)
    return value, prob, PureState(n, amps)


def postselect(
    state: PureState, qubit: int, bit: int, min_prob: float = 0.0
) -> tuple[float, PureState]:
    """Project onto ``qubit == bit`` and renormalise; returns (prob, state)."""
    p = prob_of_bit(state, qubit, bit)
    if p <= _ZERO_TOL:
        raise InvalidPostselectionError(
            f"outcome {bit} on qubit {qubit} has probability {p:.3e}"
        )
    if p < min_prob:
        raise PostselectThresholdError(
            f"postselection probability {p:.6g} below required {min_prob:.6g}"
        )
    return p, _collapse(state, qubit, bit, p)


class SnapshotRegistry:
    """Label -> (state copy, optional classical description)."""

    def __init__(self):
        self._entries: dict[str, tuple[PureState, ClassicalDescription | None]] = {}
        self._counter = 0

    def store(self, label: str, state: PureState, description: ClassicalDescription | None):
        if label in self._entries:
            raise ValueError(f"snapshot label {label!r} already in use")
        self._entries[label] = (state.copy(), description)

    def state(self, label: str) -> PureState:
        if label not in self._entries:
            raise UnknownSnapshotError(label)
        return self._entries[label][0]

    def description(self, label: str) -> ClassicalDescription | None:
        if label not in self._entries:
            raise UnknownSnapshotError(label)
        return self._entries[label][1]

    def fresh_label(self, base: str) -> str:
        """A label guaranteed unused in this registry (for protocol code)."""
        self._counter += 1
        return f"{base}.{self._counter}"

    def __contains__(self, label: str) -> bool:
        return label in self._entries

    def __len__(self) -> int:
        return len(self._entries)


def snapshot(
    state: PureState,
    registry: SnapshotRegistry,
    label: str,
    description: ClassicalDescription | None = None,
) -> None:
    """Store a copy of ``state`` (and optionally its construction recipe)."""
    registry.store(label, state, description)


def states_equal(a: PureState, b: PureState, tol: float = 1e-9) -> bool:
    """Equality up to global phase: 1 - |<a|b>| <= tol."""
    if a.n != b.n:
        return False
    return 1.0 - abs(np.vdot(a.amps, b.amps)) <= tol


def fidelity(a: PureState, b: PureState) -> float:
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)


def _is_collapse_of(stored: PureState, post: PureState, tol: float) -> bool:
    """Is ``post`` = (projector onto some qubit outcome) stored, renormalised?

    Works on per-qubit slice views, so no candidate allocates a full vector.
    A match requires the projected overlap to account for all of ``post``:
    |<post| P |stored>| = ||P stored|| and the complementary slice of
    ``post`` to be empty.
    """
    for qubit in range(stored.n):
        stored_view = _qubit_slices(stored, qubit)
        post_view = _qubit_slices(post, qubit)
        for bit in (0, 1):
            norm_sq = float(np.sum(np.abs(stored_view[:, bit, :]) ** 2))
            if norm_sq <= 1e-30:
                continue
            other = float(np.sum(np.abs(post_view[:, 1 - bit, :]) ** 2))
            if other > tol:
                continue  # post has weight outside the projected slice
            overlap = abs(np.vdot(post_view[:, bit, :], stored_view[:, bit, :]))
            if 1.0 - overlap / math.sqrt(norm_sq) <= tol:
                return True
    return False


def rewind(
    post_state: PureState,
    registry: SnapshotRegistry,
    label: str,
    mode: str = "strict",
) -> PureState:
    """Undo a single-qubit measurement: return the snapshot stored at ``label``.

    Strict mode certifies the input first: ``post_state`` must be the stored
    state collapsed onto one outcome of one qubit (up to global phase), which
    is exactly the domain on which measurement-undoing is well defined.
    """
    if mode not in ("strict", "permissive"):
        raise ValueError(f"unknown rewind mode {mode!r}")
    stored = registry.state(label)
    if mode == "strict":
        if post_state.n != stored.n:
            raise RewindConsistencyError("qubit count differs from the snapshot")
        if not _is_collapse_of(stored, post_state, 1e-9):
            raise RewindConsistencyError(
                f"state is not a one-outcome collapse of snapshot {label!r}"
            )
    return stored.copy()


def clone_from_description(description: ClassicalDescription) -> PureState:
    """Rebuild a state from its classical description by replaying it."""
    state = init(description.n_qubits)
    for op in description.ops:
        if isinstance(op, GateOp):
            state = apply_gate(state, op.gate, op.targets)
        else:  # Project
            p = prob_of_bit(state, op.qubit, op.bit)
            if p <= _ZERO_TOL:
                raise ReplayError(
                    f"projector onto qubit {op.qubit} = {op.bit} has zero probability"
                )
            state = _collapse(state, op.qubit, op.bit, p)
    return state


@dataclass
class RunResult:
    record: MeasurementRecord
    accept_bit: int | None
    final_state: PureState
    rewinds_used: int


def run(
    circuit: Circuit,
    rng: SplitMix64,
    mode: str = "strict",
    max_rewinds: int | None = None,
    min_postselect_prob: float = 0.0,
) -> RunResult:
    """Execute a circuit once, sampling measurements from ``rng``."""
    validate(circuit)
    state = init(circuit.n_qubits)
    record = MeasurementRecord()
    registry = SnapshotRegistry()
    rewinds_used = 0
    accept_q: int | None = None
    for instr in circuit.instructions:
        if isinstance(instr, Conditional):
            if not predicate_holds(instr.predicate, record):
                continue
            instr = instr.inner
        if isinstance(instr, GateOp):
            state = apply_gate(state, instr.gate, instr.targets)
        elif isinstance(instr, Measure):
            bit, prob, state = measure(state, instr.qubit, rng)
            record.add(instr.label, bit, prob)
        elif isinstance(instr, Postselect):
            _, state = postselect(state, instr.qubit, instr.bit, min_postselect_prob)
        elif isinstance(instr, Snapshot):
            description = description_of_prefix(circuit, record, instr.label)
            snapshot(state, registry, instr.label, description)
        elif isinstance(instr, Rewind):
            rewinds_used += 1
            if max_rewinds is not None and rewinds_used > max_rewinds:
                raise RewindBudgetError(
                    f"rewind budget {max_rewinds} exhausted at label {instr.label!r}"
                )
            state = rewind(state, registry, instr.label, mode)
        elif isinstance(instr, Clone):
            description = registry.description(instr.label)
            if description is None:
                raise ReplayError(f"snapshot {instr.label!r} stores no description")
            state = clone_from_description(description)
        elif isinstance(instr, Accept):
            accept_q = instr.qubit
    accept_bit: int | None = None
    if accept_q is not None:
        accept_bit, _, state = measure(state, accept_q, rng)
    return RunResult(record, accept_bit, state, rewinds_used)


# ---------------------------------------------------------------------------
# exact enumeration (deterministic oracle used by tests and the CLI)


def _outcome_key(record: MeasurementRecord) -> str:
    return ",".join(f"{label}={bit}" for label, bit, _ in record.entries)


def _copy_record(record: MeasurementRecord) -> MeasurementRecord:
    out = MeasurementRecord()
    for label, bit, prob in record.entries:
        out.add(label, bit, prob)
    return out


def _enumerate(circuit, idx, state, record, snaps, weight, accept_q, leaves):
    instructions = circuit.instructions
    i = idx
    while i < len(instructions):
        instr = instructions[i]
        if isinstance(instr, Conditional):
            if not predicate_holds(instr.predicate, record):
                i += 1
                continue
            instr = instr.inner
        if isinstance(instr, GateOp):
            state = apply_gate(state, instr.gate, instr.targets)
        elif isinstance(instr, Measure):
            for bit in (0, 1):
                p = min(prob_of_bit(state, instr.qubit, bit), 1.0)  # clamp fp drift
                if p <= _ZERO_TOL:
                    continue
                sub_record = _copy_record(record)
                sub_record.add(instr.label, bit, p)
                _enumerate(
                    circuit,
                    i + 1,
                    _collapse(state, instr.qubit, bit, p),
                    sub_record,
                    dict(snaps),
                    weight * p,
                    accept_q,
                    leaves,
                )
            return
        elif isinstance(instr, Postselect):
            p = prob_of_bit(state, instr.qubit, instr.bit)
            if p <= _ZERO_TOL:
                return  # branch impossible under this postselection
            state = _collapse(state, instr.qubit, instr.bit, p)
        elif isinstance(instr, Snapshot):
            snaps[instr.label] = state
        elif isinstance(instr, Rewind):
            state = snaps[instr.label]
        elif isinstance(instr, Clone):
            state = snaps[instr.label]
        elif isinstance(instr, Accept):
            accept_q = instr.qubit
        i += 1
    accept_p = prob_of_bit(state, accept_q, 1) if accept_q is not None else 0.0
    leaves.append((_outcome_key(record), weight, accept_p))


def exact_outcome_distribution(circuit: Circuit) -> dict[str, float]:
    """Exact outcome probabilities q_z by full branch enumeration.

    Keys are ``label=bit`` pairs joined by commas, in execution order.
    Postselections renormalise within a branch; branches where a
    postselection has probability zero are dropped.
    """
    validate(circuit)
    leaves: list[tuple[str, float, float]] = []
    _enumerate(circuit, 0, init(circuit.n_qubits), MeasurementRecord(), {}, 1.0, None, leaves)
    dist: dict[str, float] = {}
    for key, weight, _ in leaves:
        dist[key] = dist.get(key, 0.0) + weight
    return dist


def exact_acceptance(circuit: Circuit) -> float:
    """Exact P(accept qubit reads 1) = sum_z q_z * P(accept=1 | z)."""
    validate(circuit)
    leaves: list[tuple[str, float, float]] = []
    _enumerate(circuit, 0, init(circuit.n_qubits), MeasurementRecord(), {}, 1.0, None, leaves)
    return float(sum(weight * accept_p for _, weight, accept_p in leaves))


# ---------------------------------------------------------------------------
# register helpers used by the protocol modules


def attach_zero(state: PureState) -> PureState:
    """Append a fresh |0> qubit as the new least significant qubit."""
    if state.n + 1 > max_qubits():
        raise QubitBudgetError(f"{state.n + 1} qubits exceeds the cap of {max_qubits()}")
    amps = np.zeros(2 * state.amps.size, dtype=complex)
    amps[0::2] = state.amps
    return PureState(state.n + 1, amps)


def slice_qubit(state: PureState, qubit: int, bit: int) -> PureState:
    """Drop a qubit that is in the definite state |bit> (post-measurement)."""
    view = _qubit_slices(state, qubit)[:, bit, :]
    amps = view.reshape(-1).copy()
    norm = np.linalg.norm(amps)
    assert norm > 1.0 - 1e-6, "sliced qubit was not in a definite state"
    return PureState(state.n - 1, amps / norm)
