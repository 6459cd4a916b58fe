"""Measurement-based computation on brickwork graph states, with retries.

A brickwork state on an n x m grid (m = 5 mod 8) prepares every vertex in
|+> and applies CZ along:

* horizontal edges (i, j)-(i, j+1) in every row;
* vertical edges (i, j)-(i+1, j) and (i, j+2)-(i+1, j+2) for odd i at
  columns j = 3 mod 8, and for even i at columns j = 7 mod 8.

Measured set M = all columns but the last; output set O = the last column.
A pattern entry (qubit, theta) measures the qubit in the rotated X basis:
apply rz(-theta), then h, then a Z measurement.  On brickwork states each
such measurement is a fair coin, so a per-qubit retry budget b (rewind to
the pre-measurement snapshot and re-measure) drives the all-zeros outcome
probability to (1 - 2^-(b+1)) per qubit.  A qubit that exhausts its budget
keeps outcome 1 and the run continues with all_zero = False.

``iqp_fanout_amplify`` is the related fan-out gadget: each round entangles a
|+> ancilla onto a distinguished control qubit with CH and retries its
measurement to 0, doubling the control qubit's 1-vs-0 probability odds per
round (2^q overall).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gates import CH, CZ, H, rz
from .rng import SplitMix64
from .statevector import (
    PureState,
    QubitBudgetError,
    SnapshotRegistry,
    apply_gate,
    attach_zero,
    init,
    max_qubits,
    measure,
    prob_of_bit,
    rewind,
    slice_qubit,
    snapshot,
)

_DEFAULT_GRID_MAX = 14


@dataclass(frozen=True)
class BrickworkSpec:
    """Grid geometry; rows and columns are 1-indexed."""

    n_rows: int
    m_cols: int

    def __post_init__(self):
        if self.n_rows < 1:
            raise ValueError("need at least one row")
        if self.m_cols % 8 != 5:
            raise ValueError("column count must be 5 mod 8")

    def qubit_index(self, i: int, j: int) -> int:
        if not (1 <= i <= self.n_rows and 1 <= j <= self.m_cols):
            raise ValueError(f"vertex ({i}, {j}) outside the grid")
        return (i - 1) * self.m_cols + (j - 1)

    def edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        out = []
        for i in range(1, self.n_rows + 1):
            for j in range(1, self.m_cols):
                out.append(((i, j), (i, j + 1)))
        for i in range(1, self.n_rows):
            anchor = 3 if i % 2 == 1 else 7
            for j in range(1, self.m_cols + 1):
                if j % 8 != anchor:
                    continue
                out.append(((i, j), (i + 1, j)))
                if j + 2 <= self.m_cols:
                    out.append(((i, j + 2), (i + 1, j + 2)))
        return out

    def measured_qubits(self) -> list[int]:
        """Column-major flat indices of M (every column but the last)."""
        return [
            self.qubit_index(i, j)
            for j in range(1, self.m_cols)
            for i in range(1, self.n_rows + 1)
        ]

    def output_qubits(self) -> list[int]:
        return [self.qubit_index(i, self.m_cols) for i in range(1, self.n_rows + 1)]


@dataclass(frozen=True)
class MeasurementPattern:
    """Flat (qubit, angle) entries, applied in list order."""

    entries: tuple[tuple[int, float], ...]

    @classmethod
    def from_grid(
        cls, spec: BrickworkSpec, angles: list[tuple[int, int, float]]
    ) -> "MeasurementPattern":
        """Map (row, col, theta) triples to flat qubits, column-major order."""
        ordered = sorted(angles, key=lambda e: (e[1], e[0]))
        return cls(tuple((spec.qubit_index(i, j), theta) for i, j, theta in ordered))

    @classmethod
    def identity(cls, spec: BrickworkSpec) -> "MeasurementPattern":
        return cls(tuple((q, 0.0) for q in spec.measured_qubits()))


def build_brickwork(spec: BrickworkSpec, max_width: int = _DEFAULT_GRID_MAX) -> PureState:
    """|+>^{nm} with CZ along the brickwork edges."""
    total = spec.n_rows * spec.m_cols
    if total > min(max_width, max_qubits()):
        raise QubitBudgetError(
            f"{spec.n_rows}x{spec.m_cols} grid needs {total} qubits, "
            f"cap is {min(max_width, max_qubits())}"
        )
    state = init(total)
    for q in range(total):
        state = apply_gate(state, H, (q,))
    for (a, b) in spec.edges():
        state = apply_gate(state, CZ, (spec.qubit_index(*a), spec.qubit_index(*b)))
    return state


def mbqc_run_rewind(
    state: PureState,
    pattern: MeasurementPattern,
    retry_budget: int,
    rng: SplitMix64,
) -> tuple[PureState, bool]:
    """Measure the pattern qubits, retrying each toward outcome 0.

    Each entry rotates (rz(-theta), h), snapshots, measures, and rewinds on
    outcome 1 up to ``retry_budget`` times; a qubit that exhausts its budget
    keeps outcome 1 and the run continues.  Returns the state on the
    unmeasured qubits and the all-zeros flag.
    """
    qubits = [q for q, _ in pattern.entries]
    if len(set(qubits)) != len(qubits):
        raise ValueError("pattern measures a qubit twice")
    if any(not (0 <= q < state.n) for q in qubits):
        raise ValueError("pattern qubit outside the state")
    if len(qubits) >= state.n:
        raise ValueError("pattern must leave at least one output qubit")
    registry = SnapshotRegistry()
    outcomes: dict[int, int] = {}
    all_zero = True
    for qubit, theta in pattern.entries:
        if theta:
            state = apply_gate(state, rz(-theta), (qubit,))
        state = apply_gate(state, H, (qubit,))
        label = registry.fresh_label(f"m{qubit}")
        snapshot(state, registry, label)
        bit, _, state = measure(state, qubit, rng)
        retries = 0
        while bit == 1 and retries < retry_budget:
            state = rewind(state, registry, label, "strict")
            bit, _, state = measure(state, qubit, rng)
            retries += 1
        outcomes[qubit] = bit
        if bit == 1:
            all_zero = False
    for qubit in sorted(outcomes, reverse=True):
        state = slice_qubit(state, qubit, outcomes[qubit])
    return state, all_zero


def postselect_pattern_zero(state: PureState, qubits) -> tuple[float, PureState]:
    """One-shot oracle: project all listed qubits onto 0 simultaneously.

    Implemented by direct index masking (not via the measurement ops), so it
    is an independent route to the all-zeros branch.  Returns the branch
    probability and the renormalised state on the remaining qubits.
    """
    qubits = sorted(qubits)
    n = state.n
    tensor = state.amps.reshape([2] * n)
    index = tuple(0 if q in set(qubits) else slice(None) for q in range(n))
    block = np.ascontiguousarray(tensor[index]).reshape(-1)
    prob = float(np.sum(np.abs(block) ** 2))
    if prob <= 0.0:
        raise ValueError("all-zeros branch has probability zero")
    return prob, PureState(n - len(qubits), block / np.sqrt(prob))


def target_odds(state: PureState, qubit: int) -> float:
    """P(qubit = 1) / P(qubit = 0), both summed directly from amplitudes."""
    return prob_of_bit(state, qubit, 1) / prob_of_bit(state, qubit, 0)


def iqp_fanout_amplify(
    base_state: PureState,
    q: int,
    registry: SnapshotRegistry | None = None,
    rng: SplitMix64 | None = None,
    control_qubit: int = 1,
    retry_budget: int = 64,
) -> PureState:
    """q CH-ancilla rounds, each retried to ancilla outcome 0.

    Per round the control qubit's probability odds P(1)/P(0) double (the
    control-0 branch is damped by 1/2), so the returned state satisfies
    odds_out = 2^q * odds_in up to float error.  Ancillas are measured off,
    so the width returns to the input's.
    """
    if rng is None:
        raise ValueError("iqp_fanout_amplify needs an explicit rng")
    if registry is None:
        registry = SnapshotRegistry()
    if not (0 <= control_qubit < base_state.n):
        raise ValueError("control qubit outside the state")
    state = base_state
    for _ in range(q):
        ancilla = state.n
        work = attach_zero(state)
        work = apply_gate(work, H, (ancilla,))
        work = apply_gate(work, CH, (control_qubit, ancilla))
        label = registry.fresh_label("fanout")
        snapshot(work, registry, label)
        bit, _, work = measure(work, ancilla, rng)
        attempts = 1
        while bit == 1:
            if attempts > retry_budget:
                raise RuntimeError("fan-out retry budget exhausted")
            work = rewind(work, registry, label, "strict")
            bit, _, work = measure(work, ancilla, rng)
            attempts += 1
        state = slice_qubit(work, ancilla, 0)
    return state
