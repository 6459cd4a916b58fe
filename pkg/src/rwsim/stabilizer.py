"""Stabilizer tableau backend for the Clifford subset {h, s, cz, x}.

The tableau keeps ``n`` stabilizer rows (no destabilizers): row i is the
Pauli (-1)^{r_i} prod_j i^{x_{ij} z_{ij}} X^{x_{ij}} Z^{z_{ij}}.  X and Z bits
are packed into uint64 words, one row per array row, so gate updates are a
handful of word operations regardless of width.

Measurement of qubit a:

* some row anticommutes with Z_a (has an X bit at a): the outcome is a fair
  coin.  The lowest-index such row becomes the pivot, is multiplied into every
  other anticommuting row, and is replaced by (-1)^outcome Z_a.
* no row anticommutes: the outcome is determined.  Z_a is expressed over the
  rows by GF(2) elimination and the sign of the corresponding product gives
  the outcome (worst case O(n^3)).

``stab_strong_probability`` enumerates the branch tree of a Clifford circuit
(conditionals, snapshots and rewinds included) with exact dyadic weights and
returns the probability of a computational-basis projector as a Fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .circuit import (
    Accept,
    Circuit,
    Clone,
    Conditional,
    GateOp,
    Measure,
    MeasurementRecord,
    Postselect,
    Rewind,
    Snapshot,
    predicate_holds,
    validate,
)
from .gates import CLIFFORD_NAMES, Gate
from .rng import SplitMix64


class GateSetError(ValueError):
    """Gate outside the stabilizer backend's set {h, s, cz, x}."""


class UnsupportedInstructionError(ValueError):
    """Instruction kind the stabilizer backend does not model (postselect)."""


class DepthLimitError(RuntimeError):
    """Branch tree exceeded the random-measurement depth limit."""


class RewindConsistencyError(ValueError):
    """Strict rewind input is not a one-outcome collapse of the snapshot."""


class UnknownSnapshotError(KeyError):
    pass


@dataclass
class StabilizerTableau:
    n: int
    X: np.ndarray  # (n, words) uint64
    Z: np.ndarray  # (n, words) uint64
    r: np.ndarray  # (n,) uint8 sign bits

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.n, self.X.copy(), self.Z.copy(), self.r.copy())


TableauSnapshot = StabilizerTableau  # a snapshot is simply an owned copy


def stab_init(n: int) -> StabilizerTableau:
    """Tableau of |0...0>: rows Z_0 ... Z_{n-1}."""
    if n < 1:
        raise ValueError("need at least one qubit")
    words = (n + 63) // 64
    X = np.zeros((n, words), dtype=np.uint64)
    Z = np.zeros((n, words), dtype=np.uint64)
    for i in range(n):
        Z[i, i // 64] = np.uint64(1) << np.uint64(i % 64)
    return StabilizerTableau(n, X, Z, np.zeros(n, dtype=np.uint8))


def _col(arr: np.ndarray, qubit: int) -> np.ndarray:
    """Extract qubit's bit from every row as a 0/1 uint64 vector."""
    w, sh = divmod(qubit, 64)
    return (arr[:, w] >> np.uint64(sh)) & np.uint64(1)


def _flip_col(arr: np.ndarray, qubit: int, mask: np.ndarray) -> None:
    """XOR the 0/1 vector ``mask`` into qubit's bit column."""
    w, sh = divmod(qubit, 64)
    arr[:, w] ^= mask << np.uint64(sh)


def stab_apply(tab: StabilizerTableau, g: Gate, targets: tuple[int, ...]) -> StabilizerTableau:
    """Apply a Clifford gate in place (returns the same tableau)."""
    if g.name not in CLIFFORD_NAMES:
        raise GateSetError(
            f"gate {g.name!r} is outside the stabilizer set {{h, s, cz, x}}"
        )
    if g.name == "h":
        (a,) = targets
        xa, za = _col(tab.X, a), _col(tab.Z, a)
        tab.r ^= (xa & za).astype(np.uint8)
        diff = xa ^ za
        _flip_col(tab.X, a, diff)
        _flip_col(tab.Z, a, diff)
    elif g.name == "s":
        (a,) = targets
        xa, za = _col(tab.X, a), _col(tab.Z, a)
        tab.r ^= (xa & za).astype(np.uint8)
        _flip_col(tab.Z, a, xa)
    elif g.name == "x":
        (a,) = targets
        tab.r ^= _col(tab.Z, a).astype(np.uint8)
    else:  # cz
        a, b = targets
        xa, za = _col(tab.X, a), _col(tab.Z, a)
        xb, zb = _col(tab.X, b), _col(tab.Z, b)
        tab.r ^= (xa & xb & (za ^ zb)).astype(np.uint8)
        _flip_col(tab.Z, a, xb)
        _flip_col(tab.Z, b, xa)
    return tab


def _phase_exponent(x1, z1, r1, x2, z2, r2) -> int:
    """Sign exponent of the product of two commuting packed Pauli rows.

    Returns e in {0, 1} with product sign (-1)^e; the intermediate
    i-exponent is tracked mod 4 and must come out even.
    """
    plus = (
        (x1 & z1 & z2 & ~x2)
        | (x1 & ~z1 & z2 & x2)
        | (~x1 & z1 & x2 & ~z2)
    )
    minus = (
        (x1 & z1 & x2 & ~z2)
        | (x1 & ~z1 & z2 & ~x2)
        | (~x1 & z1 & x2 & z2)
    )
    s = int(np.bitwise_count(plus).sum()) - int(np.bitwise_count(minus).sum())
    e = (2 * int(r1) + 2 * int(r2) + s) % 4
    assert e % 2 == 0, "product of anticommuting rows"
    return e // 2


def _rowmul(tab: StabilizerTableau, q: int, p: int) -> None:
    """row_q := row_p * row_q (rows commute, so order is immaterial)."""
    tab.r[q] = _phase_exponent(tab.X[p], tab.Z[p], tab.r[p], tab.X[q], tab.Z[q], tab.r[q])
    tab.X[q] ^= tab.X[p]
    tab.Z[q] ^= tab.Z[p]


def _row_as_int(tab: StabilizerTableau, i: int) -> int:
    words = tab.X.shape[1]
    x = int.from_bytes(tab.X[i].tobytes(), "little")
    z = int.from_bytes(tab.Z[i].tobytes(), "little")
    return x | (z << (64 * words))


def _deterministic_outcome(tab: StabilizerTableau, qubit: int) -> int:
    """Outcome of measuring ``qubit`` when Z_qubit is in the row span."""
    words = tab.X.shape[1]
    target = 1 << (64 * words + qubit)
    # GF(2) elimination over (row-vector, row-combination) pairs.
    basis: list[tuple[int, int]] = []
    for i in range(tab.n):
        v, c = _row_as_int(tab, i), 1 << i
        for bv, bc in basis:
            if v ^ bv < v:
                v ^= bv
                c ^= bc
        if v:
            basis.append((v, c))
            basis.sort(key=lambda e: -e[0])
    combo = 0
    v = target
    for bv, bc in basis:
        if v ^ bv < v:
            v ^= bv
            combo ^= bc
    if v:
        raise AssertionError("deterministic measurement without Z_a in the span")
    # Multiply the selected rows; the accumulated sign is the outcome.
    sx = np.zeros(words, dtype=np.uint64)
    sz = np.zeros(words, dtype=np.uint64)
    sr = 0
    for i in range(tab.n):
        if (combo >> i) & 1:
            sr = _phase_exponent(sx, sz, sr, tab.X[i], tab.Z[i], tab.r[i])
            sx ^= tab.X[i]
            sz ^= tab.Z[i]
    return sr


def stab_measure(
    tab: StabilizerTableau, qubit: int, rng: SplitMix64 | None, force: int | None = None
) -> tuple[int, float, StabilizerTableau]:
    """Z-measure in place: (bit, probability in {1/2, 1}, same tableau).

    ``force`` overrides the coin for random outcomes (used by the exact
    enumerators); deterministic outcomes ignore it.
    """
    anticommuting = np.nonzero(_col(tab.X, qubit))[0]
    if anticommuting.size == 0:
        return _deterministic_outcome(tab, qubit), 1.0, tab
    pivot = int(anticommuting[0])  # lowest index, by convention
    for q in anticommuting[1:]:
        _rowmul(tab, int(q), pivot)
    if force is not None:
        outcome = force
    else:
        outcome = 1 if rng.uniform() < 0.5 else 0
    tab.X[pivot] = 0
    tab.Z[pivot] = 0
    tab.Z[pivot, qubit // 64] = np.uint64(1) << np.uint64(qubit % 64)
    tab.r[pivot] = outcome
    return outcome, 0.5, tab


def _same_state(a: StabilizerTableau, b: StabilizerTableau) -> bool:
    """Do two full-rank tableaux stabilize the same state (signs included)?"""
    if a.n != b.n:
        return False
    words = a.X.shape[1]
    basis: list[tuple[int, int]] = []
    for i in range(a.n):
        v, c = _row_as_int(a, i), 1 << i
        for bv, bc in basis:
            if v ^ bv < v:
                v ^= bv
                c ^= bc
        if v:
            basis.append((v, c))
            basis.sort(key=lambda e: -e[0])
    for j in range(b.n):
        v, combo = _row_as_int(b, j), 0
        for bv, bc in basis:
            if v ^ bv < v:
                v ^= bv
                combo ^= bc
        if v:
            return False  # b's row not in a's group
        sx = np.zeros(words, dtype=np.uint64)
        sz = np.zeros(words, dtype=np.uint64)
        sr = 0
        for i in range(a.n):
            if (combo >> i) & 1:
                sr = _phase_exponent(sx, sz, sr, a.X[i], a.Z[i], a.r[i])
                sx ^= a.X[i]
                sz ^= a.Z[i]
        if sr != int(b.r[j]):
            return False
    return True


class TableauRegistry:
    """Label -> tableau snapshot copies."""

    def __init__(self):
        self._entries: dict[str, StabilizerTableau] = {}
        self._counter = 0

    def store(self, label: str, tab: StabilizerTableau) -> None:
        if label in self._entries:
            raise ValueError(f"snapshot label {label!r} already in use")
        self._entries[label] = tab.copy()

    def state(self, label: str) -> StabilizerTableau:
        if label not in self._entries:
            raise UnknownSnapshotError(label)
        return self._entries[label]

    def fresh_label(self, base: str) -> str:
        self._counter += 1
        return f"{base}.{self._counter}"

    def __contains__(self, label: str) -> bool:
        return label in self._entries


def stab_snapshot(tab: StabilizerTableau, registry: TableauRegistry, label: str) -> None:
    registry.store(label, tab)


def stab_rewind(
    post: StabilizerTableau, registry: TableauRegistry, label: str, mode: str = "strict"
) -> StabilizerTableau:
    """Undo one measurement: return a copy of the snapshot stored at ``label``.

    Strict mode verifies that ``post`` equals the snapshot collapsed onto one
    outcome of one qubit (possibly trivially, for deterministic outcomes).
    """
    if mode not in ("strict", "permissive"):
        raise ValueError(f"unknown rewind mode {mode!r}")
    stored = registry.state(label)
    if mode == "strict":
        ok = False
        for qubit in range(stored.n):
            for bit in (0, 1):
                trial = stored.copy()
                outcome, _, trial = stab_measure(trial, qubit, None, force=bit)
                if outcome == bit and _same_state(trial, post):
                    ok = True
                    break
            if ok:
                break
        if not ok:
            raise RewindConsistencyError(
                f"tableau is not a one-outcome collapse of snapshot {label!r}"
            )
    return stored.copy()


@dataclass
class StabRunResult:
    record: MeasurementRecord
    accept_bit: int | None
    tableau: StabilizerTableau
    rewinds_used: int


def stab_run(circuit: Circuit, rng: SplitMix64, mode: str = "strict") -> StabRunResult:
    """Sample one execution of a Clifford circuit on the tableau backend.

    ``clone`` restores the snapshot copy directly (the rebuilt state is
    identical, so no replay is needed at tableau level).  ``postselect`` is
    outside this backend's instruction set and raises.
    """
    validate(circuit)
    tab = stab_init(circuit.n_qubits)
    record = MeasurementRecord()
    registry = TableauRegistry()
    rewinds_used = 0
    accept_q: int | None = None
    for instr in circuit.instructions:
        if isinstance(instr, Conditional):
            if not predicate_holds(instr.predicate, record):
                continue
            instr = instr.inner
        if isinstance(instr, GateOp):
            tab = stab_apply(tab, instr.gate, instr.targets)
        elif isinstance(instr, Measure):
            bit, prob, tab = stab_measure(tab, instr.qubit, rng)
            record.add(instr.label, bit, prob)
        elif isinstance(instr, Postselect):
            raise UnsupportedInstructionError(
                "postselect is not part of the stabilizer backend's instruction set"
            )
        elif isinstance(instr, Snapshot):
            stab_snapshot(tab, registry, instr.label)
        elif isinstance(instr, Rewind):
            rewinds_used += 1
            tab = stab_rewind(tab, registry, instr.label, mode)
        elif isinstance(instr, Clone):
            tab = registry.state(instr.label).copy()
        elif isinstance(instr, Accept):
            accept_q = instr.qubit
    accept_bit: int | None = None
    if accept_q is not None:
        accept_bit, _, tab = stab_measure(tab, accept_q, rng)
    return StabRunResult(record, accept_bit, tab, rewinds_used)


# ---------------------------------------------------------------------------
# exact branch-tree enumeration


def _projector_weight(tab: StabilizerTableau, projector) -> Fraction:
    """Exact probability that measuring the listed qubits gives the listed bits."""
    weight = Fraction(1)
    work = tab.copy()
    for qubit, bit in projector:
        outcome, prob, work = stab_measure(work, qubit, None, force=bit)
        if prob == 1.0:
            if outcome != bit:
                return Fraction(0)
        else:
            weight /= 2
    return weight


def _tree(circuit, idx, tab, record, snaps, weight, depth, max_depth, projector, leaves):
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
            tab = stab_apply(tab, instr.gate, instr.targets)
        elif isinstance(instr, Measure):
            probe = np.nonzero(_col(tab.X, instr.qubit))[0]
            if probe.size == 0:
                bit = _deterministic_outcome(tab, instr.qubit)
                record.add(instr.label, bit, 1.0)
            else:
                if depth >= max_depth:
                    raise DepthLimitError(
                        f"random-measurement depth exceeded {max_depth}"
                    )
                for bit in (0, 1):
                    sub_tab = tab.copy()
                    _, _, sub_tab = stab_measure(sub_tab, instr.qubit, None, force=bit)
                    sub_record = MeasurementRecord()
                    for label, b, p in record.entries:
                        sub_record.add(label, b, p)
                    sub_record.add(instr.label, bit, 0.5)
                    _tree(
                        circuit, i + 1, sub_tab, sub_record, dict(snaps),
                        weight / 2, depth + 1, max_depth, projector, leaves,
                    )
                return
        elif isinstance(instr, Postselect):
            raise UnsupportedInstructionError(
                "postselect is not part of the stabilizer backend's instruction set"
            )
        elif isinstance(instr, Snapshot):
            snaps[instr.label] = tab.copy()
        elif isinstance(instr, (Rewind, Clone)):
            tab = snaps[instr.label].copy()
        elif isinstance(instr, Accept):
            pass
        i += 1
    key = ",".join(f"{label}={bit}" for label, bit, _ in record.entries)
    leaves.append((key, weight, _projector_weight(tab, projector)))


def stab_strong_probability(
    circuit: Circuit,
    projector: dict[int, int] | list[tuple[int, int]],
    max_depth: int = 20,
) -> Fraction:
    """Exact probability of reading ``projector`` bits after the circuit.

    The result is sum_z q_z * P(projector | z) as an exact dyadic Fraction,
    where z ranges over the circuit's own measurement outcomes.
    """
    validate(circuit)
    proj = sorted(projector.items()) if isinstance(projector, dict) else list(projector)
    leaves: list[tuple[str, Fraction, Fraction]] = []
    _tree(
        circuit, 0, stab_init(circuit.n_qubits), MeasurementRecord(), {},
        Fraction(1), 0, max_depth, proj, leaves,
    )
    return sum((w * p for _, w, p in leaves), start=Fraction(0))


def stab_outcome_distribution(
    circuit: Circuit, max_depth: int = 20
) -> dict[str, Fraction]:
    """Exact q_z per outcome key (same key format as the other backends)."""
    validate(circuit)
    leaves: list[tuple[str, Fraction, Fraction]] = []
    _tree(
        circuit, 0, stab_init(circuit.n_qubits), MeasurementRecord(), {},
        Fraction(1), 0, max_depth, [], leaves,
    )
    dist: dict[str, Fraction] = {}
    for key, weight, _ in leaves:
        dist[key] = dist.get(key, Fraction(0)) + weight
    return dist
