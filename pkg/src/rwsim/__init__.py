"""Quantum-circuit simulation with first-class rewinding, cloning, and
adaptive postselection, plus the protocols built on them: amplitude
mitigation, acceptance-count decision, collision finding with one rewind,
statistical-difference decision, stabilizer rewinding, and brickwork
measurement patterns with retries."""

from __future__ import annotations

from .circuit import Circuit, parse_circuit, serialize_circuit
from .gates import Gate, gate, hk, rz
from .rng import SplitMix64, stream_seed
from .statevector import PureState, SnapshotRegistry, apply_gate, init, measure, postselect, rewind, run, snapshot

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "Gate",
    "PureState",
    "SnapshotRegistry",
    "SplitMix64",
    "__version__",
    "apply_gate",
    "gate",
    "hk",
    "init",
    "measure",
    "parse_circuit",
    "postselect",
    "rewind",
    "run",
    "rz",
    "serialize_circuit",
    "snapshot",
    "stream_seed",
]
