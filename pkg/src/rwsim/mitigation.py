"""Amplitude mitigation: boosting a flagged target branch by rewinding.

A *flagged state* is a two-branch pure state

    sqrt(p) |psi_perp>|0>_flag  +  sqrt(1-p) |psi_t>|1>_flag

where flag = 1 marks the target branch and ``p`` is the nontarget
probability.  One mitigation round attaches a |0> ancilla and applies
X(flag) - CH(flag -> ancilla) - X(flag), so the ancilla reads |+> on the
nontarget branch and |0> on the target branch.  Measuring the ancilla:

* z = 0 (prob 1 - p/2): the target odds double — p -> p / (2 - p);
* z = 1 (prob p/2): the state collapses fully onto the nontarget branch;
  rewinding to the pre-measurement snapshot restores it, and the round is
  retried.

``mitigate`` runs 2n+3 rounds with at most 3n attempts each; exhausting the
attempts halts with a ``random_fallback`` marker.  The exact success
probability of the whole schedule has a closed form
(:func:`success_probability_exact`), valid for any admissible
``p <= p_max(n)``.

``mitigate_postselect`` is the measurement-free variant: each of m rounds
entangles a coin via a controlled rotation on the nontarget branch and
postselects the coin on 0, scaling the nontarget amplitude by sqrt(q) per
round at per-round success probability 1 - p(1-q) >= q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gates import CH, X, hk
from .rng import SplitMix64
from .statevector import (
    PureState,
    SnapshotRegistry,
    apply_gate,
    apply_matrix,
    attach_zero,
    measure,
    postselect,
    prob_of_bit,
    rewind,
    slice_qubit,
    snapshot,
)

SUCCESS = "success"
RANDOM_FALLBACK = "random_fallback"


@dataclass
class FlaggedState:
    """Two-branch state with a designated flag qubit (1 = target branch)."""

    state: PureState
    flag_qubit: int
    p: float  # nontarget probability P(flag = 0)


@dataclass
class MitigationTrace:
    """Per-attempt events (level i, attempt c within the level, outcome z).

    ``i`` increments exactly when z = 0; ``c`` restarts at 1 on each level.
    """

    events: list[tuple[int, int, int]]
    outcome: str  # SUCCESS or RANDOM_FALLBACK


def flag_odds(fs: FlaggedState) -> float:
    """Target odds P(flag=1) / P(flag=0), each summed directly from
    amplitudes so tiny branch weights keep full relative precision."""
    p1 = prob_of_bit(fs.state, fs.flag_qubit, 1)
    p0 = prob_of_bit(fs.state, fs.flag_qubit, 0)
    return p1 / p0


def nontarget_probability(fs: FlaggedState) -> float:
    """P(flag = 0) read from the amplitudes."""
    p0 = prob_of_bit(fs.state, fs.flag_qubit, 0)
    p1 = prob_of_bit(fs.state, fs.flag_qubit, 1)
    return p0 / (p0 + p1)


def p_max(n: int) -> Fraction:
    """Admissibility edge: mitigation is guaranteed for p <= 1 - 1/(2(4^n+1))."""
    return 1 - Fraction(1, 2 * (4**n + 1))


def advance_nontarget(p):
    """One z=0 round: p -> p / (2 - p) (target odds double)."""
    return p / (2 - p)


def nontarget_at_level(p, i: int):
    """Closed form after i successful rounds: p_i = p 2^-i / (1 - (1-2^-i) p)."""
    if isinstance(p, Fraction):
        w = Fraction(1, 2**i)
    else:
        w = 2.0**-i
    return p * w / (1 - (1 - w) * p)


def rounds_needed(p: float) -> int:
    """Smallest N with target odds >= 1 after N rounds: ceil(log2(p/(1-p)))."""
    if p <= 0.5:
        return 0
    return math.ceil(math.log2(p / (1.0 - p)))


def level_success_probability(p, i: int):
    """q_i: probability a single attempt at level i reads z = 0."""
    if isinstance(p, Fraction):
        w = Fraction(1, 2 ** (i + 1))
        wi = Fraction(1, 2**i)
    else:
        w = 2.0 ** -(i + 1)
        wi = 2.0**-i
    return (p * w + (1 - p)) / (1 - (1 - wi) * p)


def success_probability_exact(p, n: int):
    """P(the 2n+3-level schedule finishes without fallback).

    Exact when ``p`` is a Fraction; each level independently succeeds with
    probability 1 - (1 - q_i)^{3n}.
    """
    one = Fraction(1) if isinstance(p, Fraction) else 1.0
    prod = one
    for i in range(2 * n + 3):
        q_i = level_success_probability(p, i)
        prod *= one - (one - q_i) ** (3 * n)
    return prod


def success_probability_lower_bound(n: int) -> Fraction:
    """The guaranteed floor 1 - 5n/8^n for any admissible p."""
    return 1 - Fraction(5 * n, 8**n)


# ---------------------------------------------------------------------------
# state construction


def _fwht(v: np.ndarray) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform (in place on a copy)."""
    v = v.astype(float).copy()
    h = 1
    while h < v.size:
        v = v.reshape(-1, 2 * h)
        a = v[:, :h].copy()
        b = v[:, h:].copy()
        v[:, :h] = a + b
        v[:, h:] = a - b
        v = v.reshape(-1)
        h *= 2
    return v


def preparation_state(table) -> PureState:
    """The n+1 qubit state sum_x (H^n |x>)|f(x)> / sqrt(2^n) for a 0/1 table."""
    size = len(table)
    n = size.bit_length() - 1
    if 1 << n != size:
        raise ValueError("truth table length must be a power of two")
    ind1 = np.array(table, dtype=float)
    if np.any((ind1 != 0) & (ind1 != 1)):
        raise ValueError("truth table entries must be 0 or 1")
    scale = 1.0 / size
    amps = np.zeros(2 * size, dtype=complex)
    amps[0::2] = _fwht(1.0 - ind1) * scale  # output bit 0
    amps[1::2] = _fwht(ind1) * scale        # output bit 1
    return PureState(n + 1, amps)


def prep_success_probability(table) -> float:
    """P(the first register reads all zeros), from the built amplitudes."""
    state = preparation_state(table)
    return float(abs(state.amps[0]) ** 2 + abs(state.amps[1]) ** 2)


def prepare_psi(
    table, rng: SplitMix64, max_attempts: int | None = None
) -> tuple[PureState | None, int]:
    """Measure the input register of the preparation state until all-zeros.

    Success leaves the output qubit in ((2^n - s)|0> + s|1>) (normalised),
    where s is the table weight; the per-attempt success probability is
    always >= 1/2, so ``max_attempts`` defaults to n.  Returns
    (state-or-None, attempts used).
    """
    size = len(table)
    n = size.bit_length() - 1
    attempts_cap = n if max_attempts is None else max_attempts
    base = preparation_state(table)
    for attempt in range(1, attempts_cap + 1):
        state = base.copy()
        all_zero = True
        for qubit in range(n):
            bit, _, state = measure(state, qubit, rng)
            if bit:
                all_zero = False
                break  # failed attempt; re-prepare from scratch
        if all_zero:
            for _ in range(n):
                state = slice_qubit(state, 0, 0)
            return state, attempt
    return None, attempts_cap


def make_flagged(psi: PureState, k: int, n: int) -> FlaggedState:
    """Attach the hk(k)|0> coin and CH it onto ``psi``; flag = second qubit.

    ``psi`` must be a single-qubit state; |k| <= n keeps the coin inside the
    schedule's admissible range.
    """
    if psi.n != 1:
        raise ValueError("make_flagged expects a single-qubit state")
    if abs(k) > n:
        raise ValueError(f"|k| = {abs(k)} exceeds n = {n}")
    coin = hk(k).unitary()[:, 0]  # hk(k)|0>
    amps = np.kron(coin, psi.amps)
    state = apply_gate(PureState(2, amps), CH, (0, 1))
    # Flag is the psi-side qubit: 0 marks the nontarget branch.
    fs = FlaggedState(state, 1, 0.0)
    fs.p = nontarget_probability(fs)
    return fs


def synthetic_flagged(p: float) -> FlaggedState:
    """sqrt(p)|00> + sqrt(1-p)|11>: orthogonal branches with known weights."""
    if not (0.0 <= p < 1.0):
        raise ValueError("need 0 <= p < 1")
    amps = np.zeros(4, dtype=complex)
    amps[0b00] = math.sqrt(p)
    amps[0b11] = math.sqrt(1.0 - p)
    return FlaggedState(PureState(2, amps), 1, p)


# ---------------------------------------------------------------------------
# the mitigation loops


def _mitigation_round(work: PureState, flag: int, ancilla: int) -> PureState:
    work = apply_gate(work, X, (flag,))
    work = apply_gate(work, CH, (flag, ancilla))
    return apply_gate(work, X, (flag,))


def mitigate(
    fs: FlaggedState,
    n: int,
    registry: SnapshotRegistry | None = None,
    rng: SplitMix64 | None = None,
) -> tuple[FlaggedState, MitigationTrace]:
    """Run the full 2n+3-level schedule with <= 3n attempts per level.

    Returns the final flagged state and the attempt trace.  On fallback the
    state at the halt point is returned as-is (its collapsed ancilla sliced
    off); the caller decides what "random" means for its protocol.
    """
    if rng is None:
        raise ValueError("mitigate needs an explicit rng")
    if registry is None:
        registry = SnapshotRegistry()
    state = fs.state
    flag = fs.flag_qubit
    events: list[tuple[int, int, int]] = []
    for i in range(2 * n + 3):
        ancilla = state.n
        work = _mitigation_round(attach_zero(state), flag, ancilla)
        label = registry.fresh_label(f"level{i}")
        snapshot(work, registry, label)
        c = 0
        while True:
            c += 1
            z, _, work = measure(work, ancilla, rng)
            events.append((i, c, z))
            if z == 0:
                state = slice_qubit(work, ancilla, 0)
                break
            if c == 3 * n:
                final = FlaggedState(slice_qubit(work, ancilla, 1), flag, 1.0)
                final.p = nontarget_probability(final)
                return final, MitigationTrace(events, RANDOM_FALLBACK)
            work = rewind(work, registry, label, "strict")
    final = FlaggedState(state, flag, 0.0)
    final.p = nontarget_probability(final)
    return final, MitigationTrace(events, SUCCESS)


def extract_target(
    fs: FlaggedState,
    n: int,
    registry: SnapshotRegistry | None = None,
    rng: SplitMix64 | None = None,
) -> PureState | None:
    """Measure the flag, rewinding on 0, up to n tries; return the target.

    After successful mitigation P(flag = 1) >= 1/2, so the failure
    probability is <= 2^-n.
    """
    if rng is None:
        raise ValueError("extract_target needs an explicit rng")
    if registry is None:
        registry = SnapshotRegistry()
    label = registry.fresh_label("extract")
    snapshot(fs.state, registry, label)
    work = fs.state
    for _ in range(n):
        bit, _, work = measure(work, fs.flag_qubit, rng)
        if bit == 1:
            return slice_qubit(work, fs.flag_qubit, 1)
        work = rewind(work, registry, label, "strict")
    return None


def postselect_rounds(p: float, q: float) -> int:
    """m*: coins needed so the target branch reaches probability >= 1/2."""
    if p <= 0.5:
        return 0
    return math.ceil(math.log2(p / (1.0 - p)) / math.log2(1.0 / q))


def mitigate_postselect(fs: FlaggedState, q: float, m: int) -> FlaggedState:
    """Adaptive-postselection variant: m coin rounds at rotation parameter q.

    Each round leaves the state (up to normalisation) with the nontarget
    amplitude scaled by sqrt(q); the coin postselection is required to
    succeed with probability >= q (enforced via the postselect threshold,
    with a hair of slack for float rounding).
    """
    if not (0.0 < q < 1.0):
        raise ValueError("need 0 < q < 1")
    root_q = math.sqrt(q)
    root_1q = math.sqrt(1.0 - q)
    coin_u = np.array([[root_q, -root_1q], [root_1q, root_q]], dtype=complex)
    controlled = np.eye(4, dtype=complex)
    controlled[2:, 2:] = coin_u
    state = fs.state
    flag = fs.flag_qubit
    for _ in range(m):
        coin = state.n
        work = attach_zero(state)
        work = apply_gate(work, X, (flag,))
        work = apply_matrix(work, controlled, (flag, coin))
        work = apply_gate(work, X, (flag,))
        _, work = postselect(work, coin, 0, min_prob=q * (1.0 - 1e-9))
        state = slice_qubit(work, coin, 0)
    out = FlaggedState(state, flag, 0.0)
    out.p = nontarget_probability(out)
    return out
