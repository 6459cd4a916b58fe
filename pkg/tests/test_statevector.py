"""Dense-amplitude backend: kernels, collapse, rewinding, cloning, oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwsim.circuit import parse_circuit
from rwsim.gates import CH, CZ, H, S, SWAP, X, hk, rz
from rwsim.rng import SplitMix64, stream_seed
from rwsim.statevector import (
    InvalidPostselectionError,
    PostselectThresholdError,
    PureState,
    QubitBudgetError,
    RewindConsistencyError,
    SnapshotRegistry,
    UnknownSnapshotError,
    apply_gate,
    apply_matrix,
    attach_zero,
    clone_from_description,
    exact_acceptance,
    exact_outcome_distribution,
    fidelity,
    from_amplitudes,
    init,
    measure,
    measure_register,
    postselect,
    prob_of_bit,
    rewind,
    run,
    slice_qubit,
    snapshot,
    states_equal,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def plus_state(n: int) -> PureState:
    state = init(n)
    for q in range(n):
        state = apply_gate(state, H, (q,))
    return state


def test_init_is_all_zeros():
    state = init(3)
    assert state.n == 3
    assert state.amps[0] == 1.0
    assert np.allclose(state.amps[1:], 0.0)


def test_init_rejects_bad_sizes(monkeypatch):
    with pytest.raises(ValueError):
        init(0)
    monkeypatch.setenv("RWSIM_MAX_QUBITS", "4")
    with pytest.raises(QubitBudgetError):
        init(5)


def test_from_amplitudes_normalises_and_validates():
    state = from_amplitudes([1.0, 1.0])
    assert state.n == 1
    assert np.linalg.norm(state.amps) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        from_amplitudes([0.0, 0.0])
    with pytest.raises(ValueError):
        from_amplitudes([1.0, 0.0, 0.0])


def test_qubit_zero_is_most_significant():
    # X on qubit 0 of two qubits must set amplitude index 2 (binary 10).
    state = apply_gate(init(2), X, (0,))
    assert state.amps[2] == pytest.approx(1.0)
    state = apply_gate(init(2), X, (1,))
    assert state.amps[1] == pytest.approx(1.0)


def test_hadamard_on_second_qubit_worked_example():
    state = apply_gate(init(2), H, (1,))
    assert np.allclose(state.amps, [INV_SQRT2, INV_SQRT2, 0.0, 0.0], atol=1e-15)


def test_cz_on_plus_plus_worked_example():
    state = apply_gate(plus_state(2), CZ, (0, 1))
    assert np.allclose(state.amps, [0.5, 0.5, 0.5, -0.5], atol=1e-15)


def test_swap_reverses_target_order_effect():
    a = apply_gate(apply_gate(init(2), X, (1,)), SWAP, (0, 1))
    assert a.amps[2] == pytest.approx(1.0)


def test_ch_only_acts_when_control_is_one():
    idle = apply_gate(init(2), CH, (0, 1))
    assert idle.amps[0] == pytest.approx(1.0)
    active = apply_gate(apply_gate(init(2), X, (0,)), CH, (0, 1))
    assert np.allclose(active.amps, [0, 0, INV_SQRT2, INV_SQRT2], atol=1e-15)


@given(st.integers(min_value=-8, max_value=8))
def test_hk_amplitudes_match_closed_form(k):
    state = apply_gate(init(1), hk(k), (0,))
    w = 2.0**k
    norm = math.sqrt(1.0 + w * w)
    assert state.amps[0] == pytest.approx(1.0 / norm)
    assert state.amps[1] == pytest.approx(w / norm)


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_random_two_qubit_matrix_preserves_norm(seed):
    rng = np.random.default_rng(seed)
    block = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    unitary, _ = np.linalg.qr(block)
    state = apply_matrix(plus_state(3), unitary, (2, 0))
    assert np.linalg.norm(state.amps) == pytest.approx(1.0, abs=1e-12)


def test_apply_gate_is_functional_not_in_place():
    state = init(1)
    before = state.amps.copy()
    apply_gate(state, X, (0,))
    assert np.array_equal(state.amps, before)


def test_prob_of_bit_sums_amplitudes_directly():
    state = apply_gate(init(1), hk(-20), (0,))
    tiny = prob_of_bit(state, 0, 1)
    # p1 = 4^-20 / (1 + 4^-20): relative precision survives
    expected = 4.0**-20 / (1.0 + 4.0**-20)
    assert tiny == pytest.approx(expected, rel=1e-12)


def test_measure_collapses_and_reports_branch_probability():
    rng = SplitMix64(5)
    bits = {measure(plus_state(1), 0, rng)[0] for _ in range(64)}
    assert bits == {0, 1}
    bit, prob, post = measure(plus_state(1), 0, SplitMix64(1))
    assert prob == pytest.approx(0.5)
    assert post.amps[bit] == pytest.approx(1.0)


def test_measure_register_matches_sequential_collapse():
    base = apply_gate(apply_gate(plus_state(3), CZ, (0, 1)), CH, (1, 2))
    value, prob, joint = measure_register(base, [0, 2], SplitMix64(77))
    bits = ((value >> 1) & 1, value & 1)
    seq = base
    seq_prob = 1.0
    for qubit, bit in zip((0, 2), bits):
        p = prob_of_bit(seq, qubit, bit)
        seq_prob *= p
        _, seq = postselect(seq, qubit, bit)
    assert prob == pytest.approx(seq_prob, rel=1e-12)
    assert states_equal(joint, seq, tol=1e-12)


def test_measure_register_frequencies_match_probabilities():
    base = apply_gate(apply_gate(plus_state(3), CZ, (0, 1)), CH, (1, 2))
    tensor = np.abs(base.amps.reshape(2, 2, 2)) ** 2
    exact = tensor.sum(axis=1).reshape(-1)  # joint over qubits (0, 2)
    counts = np.zeros(4)
    trials = 4000
    for i in range(trials):
        value, _, _ = measure_register(base, [0, 2], SplitMix64(stream_seed(3, i)))
        counts[value] += 1
    for v in range(4):
        sigma = math.sqrt(exact[v] * (1 - exact[v]) / trials)
        assert abs(counts[v] / trials - exact[v]) <= 4 * sigma + 1e-9


def test_postselect_renormalises_and_validates():
    state = apply_gate(plus_state(2), CZ, (0, 1))
    prob, kept = postselect(state, 0, 1)
    assert prob == pytest.approx(0.5)
    assert np.linalg.norm(kept.amps) == pytest.approx(1.0)
    with pytest.raises(InvalidPostselectionError):
        postselect(init(1), 0, 1)  # zero-probability branch
    with pytest.raises(PostselectThresholdError):
        postselect(plus_state(1), 0, 0, min_prob=0.9)


def test_snapshot_rewind_round_trip():
    registry = SnapshotRegistry()
    state = plus_state(2)
    snapshot(state, registry, "s")
    bit, _, collapsed = measure(state, 0, SplitMix64(2))
    restored = rewind(collapsed, registry, "s", "strict")
    assert states_equal(restored, state, tol=1e-12)


def test_strict_rewind_refuses_non_collapse():
    registry = SnapshotRegistry()
    state = apply_gate(plus_state(2), CZ, (0, 1))  # entangled
    snapshot(state, registry, "s")
    stranger = apply_gate(apply_gate(init(2), X, (0,)), X, (1,))
    with pytest.raises(RewindConsistencyError):
        rewind(stranger, registry, "s", "strict")
    # permissive mode restores regardless
    assert states_equal(rewind(stranger, registry, "s", "permissive"), state)


def test_strict_rewind_accepts_any_single_qubit_collapse():
    registry = SnapshotRegistry()
    state = apply_gate(plus_state(2), CH, (0, 1))
    snapshot(state, registry, "s")
    for qubit in (0, 1):
        for bit in (0, 1):
            _, collapsed = postselect(state, qubit, bit)
            assert states_equal(rewind(collapsed, registry, "s", "strict"), state)


def test_strict_rewind_ignores_global_phase():
    registry = SnapshotRegistry()
    state = plus_state(1)
    snapshot(state, registry, "s")
    _, collapsed = postselect(state, 0, 1)
    rotated = PureState(1, collapsed.amps * np.exp(0.75j))
    assert states_equal(rewind(rotated, registry, "s", "strict"), state)


def test_rewind_unknown_label():
    with pytest.raises(UnknownSnapshotError):
        rewind(init(1), SnapshotRegistry(), "ghost", "strict")


def test_attach_and_slice_are_inverse():
    state = apply_gate(plus_state(2), CZ, (0, 1))
    grown = attach_zero(state)
    assert grown.n == 3
    assert prob_of_bit(grown, 2, 0) == pytest.approx(1.0)
    back = slice_qubit(grown, 2, 0)
    assert states_equal(back, state, tol=1e-12)


def test_slice_rejects_undetermined_qubit():
    with pytest.raises(AssertionError):
        slice_qubit(plus_state(1), 0, 0)


def test_fidelity_on_known_pair():
    assert fidelity(plus_state(1), init(1)) == pytest.approx(0.5)
    assert fidelity(plus_state(2), plus_state(2)) == pytest.approx(1.0)


RETRY = """
qubits 1
gate h 0
snapshot fresh
measure 0 -> t1
rewind fresh if t1 == 1
measure 0 -> t2 if t1 == 1
rewind fresh if t1 == 1 && t2 == 1
measure 0 -> t3 if t1 == 1 && t2 == 1
accept 0
"""


def test_exact_distribution_of_retry_chain():
    dist = exact_outcome_distribution(parse_circuit(RETRY))
    assert dist["t1=0"] == pytest.approx(0.5, abs=1e-12)
    assert dist["t1=1,t2=0"] == pytest.approx(0.25, abs=1e-12)
    assert dist["t1=1,t2=1,t3=0"] == pytest.approx(0.125, abs=1e-12)
    assert dist["t1=1,t2=1,t3=1"] == pytest.approx(0.125, abs=1e-12)
    assert exact_acceptance(parse_circuit(RETRY)) == pytest.approx(1.0 / 8.0, abs=1e-12)


def test_run_samples_match_exact_distribution():
    circuit = parse_circuit(RETRY)
    trials = 2000
    ones = 0
    for i in range(trials):
        result = run(circuit, SplitMix64(stream_seed(11, i)))
        ones += result.accept_bit
    freq = ones / trials
    sigma = math.sqrt(0.125 * 0.875 / trials)
    assert abs(freq - 0.125) <= 4 * sigma


def test_run_respects_min_postselect_prob():
    circuit = parse_circuit("qubits 1\ngate h 0\npostselect 0 = 0\naccept 0\n")
    run(circuit, SplitMix64(1), min_postselect_prob=0.4)
    with pytest.raises(PostselectThresholdError):
        run(circuit, SplitMix64(1), min_postselect_prob=0.9)


def test_clone_rebuilds_state_from_description():
    circuit = parse_circuit(
        "qubits 2\ngate h 0\ngate h 1\ngate cz 0 1\ngate h 1\nmeasure 0 -> m\n"
        "snapshot here\nclone here\nmeasure 1 -> check\n"
    )
    for i in range(24):
        result = run(circuit, SplitMix64(stream_seed(21, i)))
        # after the entangler, qubit 1 mirrors qubit 0 exactly
        assert result.record.bit("check") == result.record.bit("m")


def test_clone_from_description_equals_direct_state():
    circuit = parse_circuit("qubits 2\ngate h 0\nsnapshot s\nmeasure 0 -> m\n")
    result = run(circuit, SplitMix64(9))
    from rwsim.circuit import description_of_prefix

    description = description_of_prefix(circuit, result.record)
    rebuilt = clone_from_description(description)
    assert states_equal(rebuilt, result.final_state, tol=1e-12)


def test_exact_distribution_weights_sum_to_one():
    circuit = parse_circuit(
        "qubits 3\ngate h 0\ngate ch 0 1\ngate ccz 0 1 2\ngate hk 2 2\n"
        "measure 0 -> a\nmeasure 2 -> b\n"
    )
    dist = exact_outcome_distribution(circuit)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
