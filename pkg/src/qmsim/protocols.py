"""Builders for the chain, tree, and 2D cluster protocols plus closed-form
tree fidelity.

All builders share one convention: the ancilla is the control of every
two-qubit gate, chains are grown by interleaving ancilla Hadamards with
ancilla-to-photon CNOTs, and the ancilla is measured (outcome 0 kept) or
transferred onto a fresh photon by the inheritance gate. Scripts are the
serializable form of the same sequences and feed both the dense executor
here and the stabilizer-tableau executor.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import gates
from .state import (
    ImpossibleOutcome,
    QubitId,
    RegisterError,
    StateVector,
    apply_1q,
    discard_qubit,
    fidelity,
    inner,
    new_register,
    project,
)

DENSE_QUBIT_CAP = 21

# Numerator of the seven-qubit tree fidelity, ascending powers of r. The
# k-th coefficient counts computational basis states of the ideal tree
# whose construction path crosses k reflection events; the same
# coefficients over |r|^2 give the squared norm of the lossy ket.
TREE7_FIDELITY_COEFFS = (2, 10, 23, 32, 29, 18, 9, 4, 1)

_GATE_KINDS = ("h", "x", "z", "cnot", "cz", "e", "measure")
_TWO_QUBIT_KINDS = ("cnot", "cz", "e")


@dataclass(frozen=True)
class NoisyGateSpec:
    """One protocol step: a gate, a local correction, or a measurement.

    Two-qubit kinds ("cnot", "cz", "e") are controlled by the ancilla and
    carry the reflection amplitude r; "h", "x", "z" are ideal single-qubit
    steps; "measure" collapses its target, preferring `postselect`.
    """

    kind: str
    target: QubitId
    control: QubitId | None = None
    r: complex = 1.0
    postselect: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in _GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        gates.check_reflection(self.r)
        if self.kind in _TWO_QUBIT_KINDS:
            if self.control is None:
                raise ValueError(f"{self.kind} requires a control qubit")
            if not self.control.is_ancilla:
                raise ValueError(f"{self.kind} control must be the ancilla")
            if self.control == self.target:
                raise ValueError("control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")
        if self.postselect not in (None, 0, 1):
            raise ValueError("postselect must be 0, 1, or None")
        if self.postselect is not None and self.kind != "measure":
            raise ValueError("postselect only applies to measure steps")

    def to_json(self) -> dict:
        rec: dict = {
            "kind": self.kind,
            "control": None if self.control is None else self.control.to_json(),
            "target": self.target.to_json(),
            "r": _complex_to_json(complex(self.r)),
        }
        if self.kind == "measure":
            rec["postselect"] = self.postselect
        return rec

    @staticmethod
    def from_json(rec: dict) -> "NoisyGateSpec":
        control = rec.get("control")
        return NoisyGateSpec(
            kind=rec["kind"],
            target=QubitId.from_json(rec["target"]),
            control=None if control is None else QubitId.from_json(control),
            r=_complex_from_json(rec.get("r", 1.0)),
            postselect=rec.get("postselect"),
        )


def _complex_to_json(z: complex) -> object:
    return z.real if z.imag == 0.0 else [z.real, z.imag]


def _complex_from_json(obj: object) -> complex:
    if isinstance(obj, (list, tuple)):
        re, im = obj
        return complex(re, im)
    return complex(obj)  # type: ignore[arg-type]


@dataclass(frozen=True)
class ProtocolScript:
    """Ordered gate/measurement steps over a declared register."""

    register: tuple[QubitId, ...]
    steps: tuple[NoisyGateSpec, ...]

    def __post_init__(self) -> None:
        if len(self.register) < 1:
            raise ValueError("script register is empty")
        if len(set(self.register)) != len(self.register):
            raise ValueError("duplicate qubits in script register")
        if sum(q.is_ancilla for q in self.register) > 1:
            raise ValueError("script register holds more than one ancilla")
        declared = set(self.register)
        for step in self.steps:
            for q in (step.target, step.control):
                if q is not None and q not in declared:
                    raise ValueError(f"step references undeclared qubit {q}")

    @property
    def qubit_count(self) -> int:
        return len(self.register)

    def is_clifford(self) -> bool:
        """True when every step is an ideal (r = 1) Clifford operation."""
        return all(s.kind != "e" and complex(s.r) == 1.0 for s in self.steps)

    def to_json(self) -> dict:
        return {
            "register": [q.to_json() for q in self.register],
            "steps": [s.to_json() for s in self.steps],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @staticmethod
    def from_json(obj: dict) -> "ProtocolScript":
        return ProtocolScript(
            register=tuple(QubitId.from_json(q) for q in obj["register"]),
            steps=tuple(NoisyGateSpec.from_json(s) for s in obj["steps"]),
        )

    @staticmethod
    def loads(text: str) -> "ProtocolScript":
        return ProtocolScript.from_json(json.loads(text))


@dataclass(frozen=True)
class MeasurementRecord:
    qubit: QubitId
    outcome: int
    probability: float


def run_script_dense(
    script: ProtocolScript, qubit_cap: int = DENSE_QUBIT_CAP
) -> tuple[StateVector, list[MeasurementRecord]]:
    """Execute a script on the dense engine.

    Measurement steps project onto the preferred outcome (default 0),
    falling back to the other outcome when the preferred one is
    impossible. Returns the final state (unnormalized if gates were lossy
    after the last measurement) and the measurement log.
    """
    if script.qubit_count > qubit_cap:
        raise RegisterError(
            f"register too large for the dense path ({script.qubit_count} > "
            f"{qubit_cap} qubits); use the stabilizer tableau path"
        )
    state = new_register(script.register)
    log: list[MeasurementRecord] = []
    for step in script.steps:
        if step.kind == "h":
            state = apply_1q(state, step.target, gates.HADAMARD)
        elif step.kind == "x":
            state = apply_1q(state, step.target, gates.PAULI_X)
        elif step.kind == "z":
            state = apply_1q(state, step.target, gates.PAULI_Z)
        elif step.kind == "cnot":
            state = gates.noisy_cnot(state, step.r, step.control, step.target)
        elif step.kind == "cz":
            state = gates.noisy_cz(state, step.r, step.control, step.target)
        elif step.kind == "e":
            state = gates.e_gate(state, step.r, step.control, step.target)
        else:  # measure
            prefer = 0 if step.postselect is None else step.postselect
            try:
                state, prob = project(state, step.target, prefer)
                outcome = prefer
            except ImpossibleOutcome:
                state, prob = project(state, step.target, 1 - prefer)
                outcome = 1 - prefer
            log.append(MeasurementRecord(step.target, outcome, prob))
    return state, log


# ---------------------------------------------------------------------------
# Chain of three photons


def chain3_script(
    r: complex,
    photons: Sequence[int] = (1, 2, 3),
    measure: bool = True,
) -> ProtocolScript:
    """Interleaved Hadamard/CNOT sequence growing a three-photon chain."""
    a = QubitId.ancilla()
    ps = tuple(QubitId.photon(k) for k in photons)
    steps: list[NoisyGateSpec] = []
    for p in ps:
        steps.append(NoisyGateSpec("h", a))
        steps.append(NoisyGateSpec("cnot", p, control=a, r=r))
    steps.append(NoisyGateSpec("h", a))
    if measure:
        steps.append(NoisyGateSpec("measure", a, postselect=0))
    return ProtocolScript(register=(a,) + ps, steps=tuple(steps))


def _grow_chain(
    state: StateVector, ancilla: QubitId, photons: Sequence[QubitId], r: complex
) -> StateVector:
    for p in photons:
        state = gates.hadamard_ancilla(state, ancilla)
        state = gates.noisy_cnot(state, r, ancilla, p)
    return gates.hadamard_ancilla(state, ancilla)


@dataclass(frozen=True)
class Chain3Result:
    """Renormalized post-measurement chain states for both ancilla outcomes.

    Probabilities are quoted against the pre-measurement norm, so they sum
    to the squared norm of the (lossy) pre-measurement state. The outcome-1
    state equals the outcome-0 state after a local Z on the last photon.
    """

    outcome0: StateVector
    outcome1: StateVector
    prob0: float
    prob1: float

    def outcome1_corrected(self) -> StateVector:
        last = self.outcome1.labels[-1]
        return apply_1q(self.outcome1, last, gates.PAULI_Z)


def build_chain3(r: complex, photons: Sequence[int] = (1, 2, 3)) -> Chain3Result:
    """Grow a three-photon chain and measure the ancilla in both outcomes."""
    gates.check_reflection(r)
    a = QubitId.ancilla()
    ps = tuple(QubitId.photon(k) for k in photons)
    pre = _grow_chain(new_register((a,) + ps), a, ps, r)
    out0, p0 = project(pre, a, 0)
    out1, p1 = project(pre, a, 1)
    return Chain3Result(
        outcome0=discard_qubit(out0, a),
        outcome1=discard_qubit(out1, a),
        prob0=p0,
        prob1=p1,
    )


# ---------------------------------------------------------------------------
# Seven-photon tree

TREE7_LABEL_ORDER = (7, 1, 5, 2, 3, 6, 4)  # register order of the emitted state


def tree7_script(r_path1: complex, r_path2: complex) -> ProtocolScript:
    """Two chains, root entanglement, and ancilla transfer onto photon 7.

    Chain CNOTs and the inheritance gate ride optical path 1; the two
    root CZs ride optical path 2. The trailing X pair prepares photon 7 in
    |1> for the transfer and restores the polarization labeling afterwards
    so the emitted state matches the tree's stabilizer convention.
    """
    a = QubitId.ancilla()
    p = {k: QubitId.photon(k) for k in range(1, 8)}
    steps: list[NoisyGateSpec] = []
    for chain in ((1, 5, 2), (3, 6, 4)):
        for k in chain:
            steps.append(NoisyGateSpec("h", a))
            steps.append(NoisyGateSpec("cnot", p[k], control=a, r=r_path1))
        steps.append(NoisyGateSpec("h", a))
        steps.append(NoisyGateSpec("measure", a, postselect=0))
    steps.append(NoisyGateSpec("h", a))
    steps.append(NoisyGateSpec("cz", p[5], control=a, r=r_path2))
    steps.append(NoisyGateSpec("cz", p[6], control=a, r=r_path2))
    steps.append(NoisyGateSpec("x", p[7]))
    steps.append(NoisyGateSpec("e", p[7], control=a, r=r_path1))
    steps.append(NoisyGateSpec("x", p[7]))
    register = (a,) + tuple(p[k] for k in TREE7_LABEL_ORDER)
    return ProtocolScript(register=register, steps=tuple(steps))


def build_tree7(r_path1: complex, r_path2: complex) -> StateVector:
    """Seven-photon tree state; ancilla consumed by the inheritance gate.

    Returns the renormalized state with register order |7 1 5 2 3 6 4>,
    i.e. the transferred root first, then the two chains.
    """
    gates.check_reflection(r_path1)
    gates.check_reflection(r_path2)
    state, _ = run_script_dense(tree7_script(r_path1, r_path2))
    state = discard_qubit(state, QubitId.ancilla())
    return state.normalized()


def closed_form_tree_state(
    r: complex, branch: int, photons: Sequence[int] = (1, 2, 3)
) -> StateVector:
    """Three-photon branch state of the lossy tree, exactly as written.

    Branch 0 is the post-measurement chain attached to the ancilla-ground
    component; branch 1 differs by the root CZ's diag(1, -r) on the middle
    photon. The amplitudes are unnormalized (norm 2 per branch at r = 1).
    """
    r = gates.check_reflection(r)
    if branch not in (0, 1):
        raise ValueError("branch must be 0 or 1")
    s = 1.0 / np.sqrt(2.0)
    if branch == 0:
        amps = np.array([1, 1, r, -r, r, r, -(r**2), r**2], dtype=complex) * s
    else:
        amps = np.array([1, 1, -(r**2), r**2, r, r, r**3, -(r**3)], dtype=complex) * s
    return StateVector(amps, tuple(QubitId.photon(k) for k in photons))


@dataclass(frozen=True)
class TreeFidelityReport:
    """Closed-form tree fidelity with its internal consistency diagnostic.

    `fidelity` comes from the printed polynomial route and satisfies
    fidelity = |numerator_poly_value|^2 / (2^7 * n_r) by construction.
    `inner_product_fidelity` re-derives the same quantity from the branch
    state lists via explicit inner products; `poly_inner_delta` is the
    absolute difference between the two routes and `consistent` flags
    whether it stays below 1e-9. A disagreement is reported, never
    silently discarded.
    """

    r: complex
    numerator_poly_value: complex
    n_r: float
    fidelity: float
    inner_product_fidelity: float
    poly_inner_delta: float
    consistent: bool


def _tree7_closed_form_state(r: complex) -> StateVector:
    """Seven-qubit ket |0>|b0>^x2 + |1>|b1>^x2 from the branch state lists."""
    b0 = closed_form_tree_state(r, 0, photons=(1, 5, 2)).amplitudes
    b1 = closed_form_tree_state(r, 1, photons=(1, 5, 2)).amplitudes
    e0 = np.array([1, 0], dtype=complex)
    e1 = np.array([0, 1], dtype=complex)
    amps = np.kron(e0, np.kron(b0, b0)) + np.kron(e1, np.kron(b1, b1))
    labels = (QubitId.ancilla(),) + tuple(QubitId.photon(k) for k in (1, 5, 2, 3, 6, 4))
    return StateVector(amps, labels)


def tree_fidelity_closed_form(r: complex) -> TreeFidelityReport:
    """Closed-form fidelity of the lossy seven-qubit tree against the ideal.

    The canonical value evaluates the printed numerator polynomial P(r)
    and normalization N = P(|r|^2): fidelity = |P(r)|^2 / (2^7 N). The
    diagnostic route rebuilds both kets from the branch state lists,
    normalizes them, and takes |<ideal|lossy>|^2; both routes give exactly
    1 at r = 1.
    """
    r = gates.check_reflection(r)
    coeffs = np.array(TREE7_FIDELITY_COEFFS, dtype=complex)
    pv = complex(npoly.polyval(r, coeffs))
    n_r = float(npoly.polyval(abs(r) ** 2, coeffs).real)
    fid = abs(pv) ** 2 / (2**7 * n_r)

    # norm-invariant form so r = 1 (identical kets) gives exactly 1.0
    fid_inner = fidelity(_tree7_closed_form_state(1.0), _tree7_closed_form_state(r))
    delta = abs(fid - fid_inner)
    return TreeFidelityReport(
        r=r,
        numerator_poly_value=pv,
        n_r=n_r,
        fidelity=fid,
        inner_product_fidelity=fid_inner,
        poly_inner_delta=delta,
        consistent=delta <= 1e-9,
    )


def ideal_tree7_state() -> StateVector:
    """Ideal seven-photon tree in the builder's register order."""
    b = closed_form_tree_state(1.0, 0, photons=(1, 5, 2)).amplitudes / np.sqrt(2.0)
    c = closed_form_tree_state(1.0, 1, photons=(1, 5, 2)).amplitudes / np.sqrt(2.0)
    e0 = np.array([1, 0], dtype=complex)
    e1 = np.array([0, 1], dtype=complex)
    amps = np.kron(e0, np.kron(b, b)) + np.kron(e1, np.kron(c, c))
    labels = tuple(QubitId.photon(k) for k in TREE7_LABEL_ORDER)
    return StateVector(amps, labels).normalized()


def tree_fidelity_simulated(r_path1: complex, r_path2: complex) -> float:
    """Gate-level tree fidelity against the ideal tree."""
    return fidelity(build_tree7(r_path1, r_path2), ideal_tree7_state())


# ---------------------------------------------------------------------------
# 2D cluster


def twod_script(width_n: int, nodes: int, r: complex = 1.0) -> ProtocolScript:
    """Per-node Hadamard/CZ/CNOT sequence growing a 2D cluster of width N.

    Step i applies H on the ancilla, CZ onto photon i, and CNOT onto
    photon i + N; the sweep stops at nodes - N so no gate targets a photon
    beyond the register.
    """
    if width_n < 1:
        raise ValueError("width must be >= 1")
    if nodes < width_n:
        raise ValueError("nodes must be >= width")
    a = QubitId.ancilla()
    photons = tuple(QubitId.photon(k) for k in range(1, nodes + 1))
    steps: list[NoisyGateSpec] = []
    for i in range(1, nodes - width_n + 1):
        steps.append(NoisyGateSpec("h", a))
        steps.append(NoisyGateSpec("cz", photons[i - 1], control=a, r=r))
        steps.append(NoisyGateSpec("cnot", photons[i + width_n - 1], control=a, r=r))
    return ProtocolScript(register=(a,) + photons, steps=tuple(steps))


def build_2d(width_n: int, nodes: int, r: complex) -> StateVector:
    """Dense 2D-cluster builder; unnormalized for r < 1, ancilla retained."""
    gates.check_reflection(r)
    script = twod_script(width_n, nodes, r)
    if script.qubit_count > DENSE_QUBIT_CAP:
        raise RegisterError(
            f"register too large for the dense path ({script.qubit_count} > "
            f"{DENSE_QUBIT_CAP} qubits); use the stabilizer tableau path"
        )
    state, _ = run_script_dense(script)
    return state


def fidelity_2d_scaling(per_photon_fidelity: float, n_photons: int) -> float:
    """Total fidelity of an n-photon cluster from a per-photon fidelity."""
    if not 0.0 <= per_photon_fidelity <= 1.0:
        raise ValueError("per-photon fidelity must lie in [0, 1]")
    if n_photons < 0:
        raise ValueError("photon count must be >= 0")
    return float(per_photon_fidelity) ** int(n_photons)
