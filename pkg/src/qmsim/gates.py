"""Metasurface-mediated gate models parameterized by a reflection amplitude.

The ancilla atom controls every two-qubit gate: its ground branch leaves
the photon untouched, while its excited (reflective) branch acts on the
photon with amplitude r, the array's complex reflection coefficient.
Imperfect reflection (|r| < 1) is modeled as coherent amplitude damping of
the reflected branch; states stay unnormalized until the caller
renormalizes, so post-selection is explicit.

The ancilla Hadamard is driven by control fields rather than photon
scattering and is therefore noiseless.
"""
from __future__ import annotations

import numpy as np

from .state import QubitId, StateVector, apply_1q, apply_ctrl2, fidelity

_SQRT2_INV = 1.0 / np.sqrt(2.0)

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
# Coherent relabel of the ancilla's excited branch onto its ground branch,
# modeling decay whose emitted photon carries no which-path information.
RELABEL_EXCITED_TO_GROUND = np.array([[1, 1], [0, 0]], dtype=complex)


def check_reflection(r: complex) -> complex:
    """Validate |r| <= 1 (tolerance 1e-9) and return r as a complex number."""
    r = complex(r)
    if abs(r) > 1.0 + 1e-9:
        raise ValueError(f"reflection coefficient magnitude {abs(r):.6g} exceeds 1")
    return r


def reflected_flip(r: complex) -> np.ndarray:
    """Photon operator in the reflective branch of the CNOT: r * X."""
    return check_reflection(r) * PAULI_X


def reflected_phase(r: complex) -> np.ndarray:
    """Photon operator in the reflective branch of the CZ: diag(1, -r)."""
    return np.array([[1, 0], [0, -check_reflection(r)]], dtype=complex)


def noisy_cnot(state: StateVector, r: complex, ancilla: QubitId, photon: QubitId) -> StateVector:
    """CNOT with the ancilla as control; the flip carries amplitude r."""
    return apply_ctrl2(state, ancilla, photon, IDENTITY_2, reflected_flip(r))


def noisy_cz(state: StateVector, r: complex, ancilla: QubitId, photon: QubitId) -> StateVector:
    """CZ with the ancilla as control; the phase branch carries amplitude -r."""
    return apply_ctrl2(state, ancilla, photon, IDENTITY_2, reflected_phase(r))


def hadamard_ancilla(state: StateVector, ancilla: QubitId) -> StateVector:
    """Noiseless Hadamard rotation of the ancilla."""
    return apply_1q(state, ancilla, HADAMARD)


def e_gate(state: StateVector, r: complex, ancilla: QubitId, photon: QubitId) -> StateVector:
    """Inheritance gate: transfer the ancilla's qubit state onto a photon.

    Implemented as the noisy CNOT followed by a coherent relabel of the
    ancilla's excited branch onto its ground branch, so the output carries
    no excited-ancilla amplitude. On the contract domain (photon prepared
    in |1>) the squared norm never increases; for other inputs the
    relabel's coherent addition can raise it.
    """
    out = noisy_cnot(state, r, ancilla, photon)
    return apply_1q(out, ancilla, RELABEL_EXCITED_TO_GROUND)


def cnot_matrix(r: complex = 1.0) -> np.ndarray:
    """4x4 matrix of the noisy CNOT, control as the leading tensor factor."""
    m = np.zeros((4, 4), dtype=complex)
    m[:2, :2] = IDENTITY_2
    m[2:, 2:] = reflected_flip(r)
    return m


def cz_matrix(r: complex = 1.0) -> np.ndarray:
    """4x4 matrix of the noisy CZ, control as the leading tensor factor."""
    m = np.zeros((4, 4), dtype=complex)
    m[:2, :2] = IDENTITY_2
    m[2:, 2:] = reflected_phase(r)
    return m


def gate_fidelity_path2(r: complex) -> float:
    """State fidelity of the CNOT-then-CZ gate pair against its ideal action.

    Averaged uniformly over the four inputs obtained by preparing the
    ancilla with one Hadamard (giving (|g> +- |r>)/sqrt(2)) and the photon
    in |0> or |1>. Each term is the global-phase-invariant fidelity of the
    normalized noisy output against the normalized ideal (r = 1) output.
    """
    r = check_reflection(r)
    op_noisy = cz_matrix(r) @ cnot_matrix(r)
    op_ideal = cz_matrix(1.0) @ cnot_matrix(1.0)
    plus = np.array([1, 1], dtype=complex) * _SQRT2_INV
    minus = np.array([1, -1], dtype=complex) * _SQRT2_INV
    e0 = np.array([1, 0], dtype=complex)
    e1 = np.array([0, 1], dtype=complex)
    total = 0.0
    for anc in (plus, minus):
        for ph in (e0, e1):
            psi_in = np.kron(anc, ph)
            out_n = op_noisy @ psi_in
            out_i = op_ideal @ psi_in
            nn = np.vdot(out_n, out_n).real
            ni = np.vdot(out_i, out_i).real
            total += abs(np.vdot(out_i, out_n)) ** 2 / (nn * ni)
    return total / 4.0


def state_fidelity(a: StateVector, b: StateVector) -> float:
    """Alias for the global-phase-invariant state fidelity."""
    return fidelity(a, b)
