"""Dense state-vector engine for small qubit registers.

A register mixes at most one ancilla with photon qubits. The tensor
convention is big-endian: the first-declared qubit is the most significant
bit of the amplitude index, so kets read left to right in register order.
Operators may be non-unitary (trace-decreasing); states stay unnormalized
until a caller renormalizes explicitly.

States are immutable after construction; every operation returns a new
StateVector, so values can be shared freely across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

MAX_QUBITS = 22

_PAULI_MATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class RegisterError(ValueError):
    """Register construction, lookup, or compatibility failure."""


class ImpossibleOutcome(ValueError):
    """Requested measurement outcome has (numerically) zero probability."""


@dataclass(frozen=True, order=True)
class QubitId:
    """Identifier for the ancilla or the k-th photon (k >= 1)."""

    kind: str  # "a" (ancilla) or "p" (photon)
    index: int  # 0 for the ancilla, photon number otherwise

    def __post_init__(self) -> None:
        if self.kind not in ("a", "p"):
            raise ValueError(f"unknown qubit kind {self.kind!r}")
        if self.kind == "p" and self.index < 1:
            raise ValueError("photon index must be >= 1")
        if self.kind == "a" and self.index != 0:
            raise ValueError("ancilla carries no index")

    @staticmethod
    def ancilla() -> "QubitId":
        return QubitId("a", 0)

    @staticmethod
    def photon(k: int) -> "QubitId":
        return QubitId("p", k)

    @property
    def is_ancilla(self) -> bool:
        return self.kind == "a"

    def to_json(self) -> object:
        return "a" if self.is_ancilla else self.index

    @staticmethod
    def from_json(obj: object) -> "QubitId":
        if obj == "a":
            return QubitId.ancilla()
        if isinstance(obj, bool) or not isinstance(obj, (int, str)):
            raise ValueError(f"cannot parse qubit id {obj!r}")
        return QubitId.photon(int(obj))

    def __str__(self) -> str:
        return "a" if self.is_ancilla else f"p{self.index}"


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis; implicit identity elsewhere.

    The empty string is the identity operator.
    """

    ops: tuple[tuple[QubitId, str], ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for q, p in self.ops:
            if p not in _PAULI_MATS:
                raise ValueError(f"unknown Pauli {p!r}")
            if q in seen:
                raise ValueError(f"duplicate qubit {q} in Pauli string")
            seen.add(q)

    @classmethod
    def from_map(cls, m: Mapping[QubitId, str]) -> "PauliString":
        return cls(tuple(sorted(m.items())))

    def as_map(self) -> dict[QubitId, str]:
        return dict(self.ops)

    def __str__(self) -> str:
        if not self.ops:
            return "I"
        return " ".join(f"{p}{q}" for q, p in self.ops)


def _validate_register(qubits: tuple[QubitId, ...]) -> None:
    if len(qubits) < 1:
        raise RegisterError("register must hold at least one qubit")
    if len(qubits) > MAX_QUBITS:
        raise RegisterError(
            f"register too large: {len(qubits)} qubits exceeds the dense cap of "
            f"{MAX_QUBITS}; use the stabilizer tableau path for larger ideal circuits"
        )
    if len(set(qubits)) != len(qubits):
        raise RegisterError("duplicate qubit identifiers in register")
    if sum(q.is_ancilla for q in qubits) > 1:
        raise RegisterError("register holds more than one ancilla")


@dataclass(frozen=True)
class StateVector:
    """Amplitudes over an ordered qubit register, possibly unnormalized.

    The squared norm must be positive; zero-norm states are rejected at
    construction. Gate application keeps the squared norm <= 1 for
    reflection magnitudes <= 1, but closed-form constructions may carry
    larger norms, so no upper bound is enforced here.
    """

    amplitudes: np.ndarray = field(repr=False)
    labels: tuple[QubitId, ...]

    def __post_init__(self) -> None:
        _validate_register(self.labels)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (2 ** len(self.labels),):
            raise ValueError(
                f"amplitude length {amps.size} does not match 2^{len(self.labels)}"
            )
        if not np.all(np.isfinite(amps.view(float))):
            raise ValueError("non-finite amplitude")
        if np.vdot(amps, amps).real <= 0.0:
            raise ValueError("zero-norm state is not a valid value")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def qubit_count(self) -> int:
        return len(self.labels)

    def axis(self, q: QubitId) -> int:
        try:
            return self.labels.index(q)
        except ValueError:
            raise RegisterError(f"qubit {q} not in register") from None

    def squared_norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / np.sqrt(self.squared_norm()), self.labels)

    def tensor(self) -> np.ndarray:
        """Read-only view shaped (2, 2, ..., 2) in register order."""
        return self.amplitudes.reshape([2] * self.qubit_count)


def new_register(qubits: Iterable[QubitId]) -> StateVector:
    """All-|0> product state over the given qubits, norm exactly 1."""
    labels = tuple(qubits)
    _validate_register(labels)
    amps = np.zeros(2 ** len(labels), dtype=complex)
    amps[0] = 1.0
    return StateVector(amps, labels)


def _apply_on_axis(tensor: np.ndarray, m: np.ndarray, axis: int) -> np.ndarray:
    # tensordot contracts the qubit axis with the matrix column index and
    # prepends the row index, which moveaxis puts back in place.
    return np.moveaxis(np.tensordot(m, tensor, axes=([1], [axis])), 0, axis)


def apply_1q(state: StateVector, q: QubitId, m: np.ndarray) -> StateVector:
    """Apply a 2x2 operator (not necessarily unitary) to one qubit."""
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("single-qubit operator must be 2x2")
    out = _apply_on_axis(state.tensor(), m, state.axis(q))
    return StateVector(out.reshape(-1), state.labels)


def apply_ctrl2(
    state: StateVector,
    control: QubitId,
    target: QubitId,
    m0: np.ndarray,
    m1: np.ndarray,
) -> StateVector:
    """Control-block-diagonal two-qubit operator.

    Applies m0 on the target where the control is |0> and m1 where it is
    |1>. m1 may be non-unitary, in which case the norm decreases.
    """
    if control == target:
        raise RegisterError("control and target must differ")
    m0 = np.asarray(m0, dtype=complex)
    m1 = np.asarray(m1, dtype=complex)
    if m0.shape != (2, 2) or m1.shape != (2, 2):
        raise ValueError("control-block operator factors must be 2x2")
    c_ax = state.axis(control)
    t_ax = state.axis(target)
    tens = state.tensor()
    sub0 = np.take(tens, 0, axis=c_ax)
    sub1 = np.take(tens, 1, axis=c_ax)
    t_sub = t_ax if t_ax < c_ax else t_ax - 1
    out = np.stack(
        [_apply_on_axis(sub0, m0, t_sub), _apply_on_axis(sub1, m1, t_sub)],
        axis=c_ax,
    )
    return StateVector(out.reshape(-1), state.labels)


def project(state: StateVector, q: QubitId, outcome: int) -> tuple[StateVector, float]:
    """Collapse qubit q to the given outcome.

    Returns the renormalized post-measurement state on the full register
    (q collapsed in place) and the outcome probability. Probabilities are
    quoted against the state's current norm, so the two outcomes sum to
    the squared norm of the input.
    """
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    ax = state.axis(q)
    tens = state.tensor()
    branch = np.take(tens, outcome, axis=ax)
    prob = float(np.vdot(branch, branch).real)
    if prob < 1e-15:
        raise ImpossibleOutcome(
            f"impossible outcome: qubit {q} has probability {prob:.3e} for outcome {outcome}"
        )
    post = np.zeros_like(tens)
    idx: list[object] = [slice(None)] * state.qubit_count
    idx[ax] = outcome
    post[tuple(idx)] = branch / np.sqrt(prob)
    return StateVector(post.reshape(-1), state.labels), prob


def discard_qubit(state: StateVector, q: QubitId) -> StateVector:
    """Drop a collapsed qubit from the register.

    The qubit must be deterministically |0> or |1> (the other branch below
    1e-12 in squared norm); otherwise discarding would not be a pure-state
    operation.
    """
    ax = state.axis(q)
    if state.qubit_count == 1:
        raise RegisterError("cannot discard the last qubit")
    tens = state.tensor()
    norms = [float(np.vdot(b, b).real) for b in (np.take(tens, 0, axis=ax), np.take(tens, 1, axis=ax))]
    keep = int(norms[1] > norms[0])
    if norms[1 - keep] > 1e-12 * max(norms[keep], 1e-300):
        raise RegisterError(f"qubit {q} is not collapsed; cannot discard")
    labels = tuple(l for l in state.labels if l != q)
    return StateVector(np.take(tens, keep, axis=ax).reshape(-1), labels)


def permute_register(state: StateVector, new_labels: Iterable[QubitId]) -> StateVector:
    """Reorder the register (same qubits, new declaration order)."""
    new_labels = tuple(new_labels)
    if set(new_labels) != set(state.labels) or len(new_labels) != state.qubit_count:
        raise RegisterError("permutation must reuse exactly the register's qubits")
    perm = [state.axis(q) for q in new_labels]
    return StateVector(state.tensor().transpose(perm).reshape(-1), new_labels)


def inner(state_a: StateVector, state_b: StateVector) -> complex:
    """<a|b> for two states over identical registers (same order)."""
    if state_a.labels != state_b.labels:
        raise RegisterError("register mismatch in inner product")
    return complex(np.vdot(state_a.amplitudes, state_b.amplitudes))


def fidelity(state_a: StateVector, state_b: StateVector) -> float:
    """Global-phase-invariant fidelity |<a|b>|^2 / (||a||^2 ||b||^2)."""
    ov = inner(state_a, state_b)
    return abs(ov) ** 2 / (state_a.squared_norm() * state_b.squared_norm())


def expect_pauli(state: StateVector, p: PauliString) -> float:
    """Expectation <psi|P|psi> of a Pauli string on a normalized state."""
    if abs(state.squared_norm() - 1.0) > 1e-9:
        raise ValueError("unnormalized input: expect_pauli requires a normalized state")
    tens = state.tensor()
    for q, name in p.ops:
        tens = _apply_on_axis(tens, _PAULI_MATS[name], state.axis(q))
    val = complex(np.vdot(state.amplitudes, tens.reshape(-1)))
    if abs(val.imag) > 1e-12:
        raise ValueError(f"non-real Pauli expectation {val}")
    return val.real


def dump_state(state: StateVector) -> dict:
    """JSON-ready dump: register labels plus [re, im] amplitude pairs."""
    return {
        "labels": [q.to_json() for q in state.labels],
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def load_state(obj: dict) -> StateVector:
    labels = tuple(QubitId.from_json(l) for l in obj["labels"])
    amps = np.array([complex(re, im) for re, im in obj["amplitudes"]], dtype=complex)
    return StateVector(amps, labels)


def dumps_state(state: StateVector) -> str:
    return json.dumps(dump_state(state), indent=2, sort_keys=True)
