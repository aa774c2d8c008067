import numpy as np
import pytest

from qmsim.state import (
    ImpossibleOutcome,
    PauliString,
    QubitId,
    RegisterError,
    StateVector,
    apply_1q,
    apply_ctrl2,
    discard_qubit,
    dump_state,
    expect_pauli,
    fidelity,
    inner,
    load_state,
    new_register,
    permute_register,
    project,
)

A = QubitId.ancilla()
P1, P2, P3 = QubitId.photon(1), QubitId.photon(2), QubitId.photon(3)

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
I2 = np.eye(2, dtype=complex)


def random_state(labels, rng):
    n = len(labels)
    amps = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    amps /= np.linalg.norm(amps)
    return StateVector(amps, tuple(labels))


class TestRegister:
    def test_single_ancilla(self):
        s = new_register([A])
        assert np.array_equal(s.amplitudes, [1, 0])

    def test_two_qubits(self):
        s = new_register([A, P1])
        assert np.array_equal(s.amplitudes, [1, 0, 0, 0])
        assert s.squared_norm() == 1.0

    def test_too_large(self):
        with pytest.raises(RegisterError, match="register too large"):
            new_register([QubitId.photon(k) for k in range(1, 24)])

    def test_duplicates(self):
        with pytest.raises(RegisterError, match="duplicate"):
            new_register([P1, P1])

    def test_two_ancillas_rejected(self):
        with pytest.raises(ValueError):
            QubitId("a", 1)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            StateVector(np.zeros(2), (P1,))

    def test_photon_index_positive(self):
        with pytest.raises(ValueError):
            QubitId.photon(0)


class TestApply1q:
    def test_hadamard(self):
        s = apply_1q(new_register([P1]), P1, H)
        assert np.allclose(s.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_x(self):
        s = apply_1q(new_register([P1]), P1, X)
        assert np.allclose(s.amplitudes, [0, 1])

    def test_hadamard_involution(self):
        s = apply_1q(apply_1q(new_register([P1]), P1, H), P1, H)
        assert np.allclose(s.amplitudes, [1, 0], atol=1e-15)

    def test_unknown_qubit(self):
        with pytest.raises(RegisterError, match="not in register"):
            apply_1q(new_register([P1]), P2, H)

    def test_unitary_preserves_norm(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            s = random_state([P1, P2, P3], rng)
            q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
            out = apply_1q(s, P2, q)
            assert abs(out.squared_norm() - 1.0) < 1e-12


class TestApplyCtrl2:
    def test_ideal_cnot(self):
        s = apply_1q(new_register([A, P1]), A, X)  # |10>
        out = apply_ctrl2(s, A, P1, I2, X)
        assert np.allclose(out.amplitudes, [0, 0, 0, 1])

    def test_ideal_cz(self):
        amps = np.zeros(4, dtype=complex)
        amps[2] = amps[3] = 1 / np.sqrt(2)  # (|10> + |11>)/sqrt2
        out = apply_ctrl2(StateVector(amps, (A, P1)), A, P1, I2, np.diag([1, -1]))
        assert np.allclose(out.amplitudes, [0, 0, 1 / np.sqrt(2), -1 / np.sqrt(2)])

    def test_damped_flip(self):
        # 0.5*X on the active branch: |10> -> 0.5|11>, squared norm 0.25
        s = apply_1q(new_register([A, P1]), A, X)
        out = apply_ctrl2(s, A, P1, I2, 0.5 * X)
        assert np.allclose(out.amplitudes, [0, 0, 0, 0.5])
        assert abs(out.squared_norm() - 0.25) < 1e-12

    def test_control_equals_target(self):
        with pytest.raises(RegisterError, match="differ"):
            apply_ctrl2(new_register([A, P1]), A, A, I2, X)

    @pytest.mark.parametrize("control_first", [True, False])
    def test_matches_direct_4x4(self, control_first):
        rng = np.random.default_rng(7)
        proj0, proj1 = np.diag([1, 0]).astype(complex), np.diag([0, 1]).astype(complex)
        for _ in range(25):
            s = random_state([A, P1], rng)
            m0 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            m1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            if control_first:
                out = apply_ctrl2(s, A, P1, m0, m1)
                direct = (np.kron(proj0, m0) + np.kron(proj1, m1)) @ s.amplitudes
            else:
                out = apply_ctrl2(s, P1, A, m0, m1)
                direct = (np.kron(m0, proj0) + np.kron(m1, proj1)) @ s.amplitudes
            assert np.allclose(out.amplitudes, direct, atol=1e-13)

    def test_damping_norm_identity(self):
        # m1 = r X removes (1 - |r|^2) of the control-excited population
        rng = np.random.default_rng(13)
        for _ in range(15):
            s = random_state([A, P1, P2], rng)
            r = 0.3 + 0.4j
            pop1 = float(np.sum(np.abs(s.tensor()[1]) ** 2))
            out = apply_ctrl2(s, A, P2, I2, r * X)
            drop = s.squared_norm() - out.squared_norm()
            assert abs(drop - (1 - abs(r) ** 2) * pop1) < 1e-12


class TestProject:
    def test_plus_state(self):
        s = apply_1q(new_register([P1]), P1, H)
        post, prob = project(s, P1, 0)
        assert abs(prob - 0.5) < 1e-12
        assert np.allclose(post.amplitudes, [1, 0])

    def test_probabilities_sum_to_squared_norm(self):
        rng = np.random.default_rng(3)
        s = random_state([A, P1, P2], rng)
        damped = apply_ctrl2(s, A, P1, I2, 0.6 * X)  # lossy, unnormalized
        _, p0 = project(damped, P2, 0)
        _, p1 = project(damped, P2, 1)
        assert abs((p0 + p1) - damped.squared_norm()) < 1e-12

    def test_impossible_outcome(self):
        s = apply_1q(new_register([P1]), P1, X)
        with pytest.raises(ImpossibleOutcome, match="impossible outcome"):
            project(s, P1, 0)

    def test_post_state_normalized(self):
        rng = np.random.default_rng(5)
        s = random_state([A, P1], rng)
        post, _ = project(s, A, 0)
        assert abs(post.squared_norm() - 1.0) < 1e-12


class TestInner:
    def test_basis_overlaps(self):
        zero = new_register([P1])
        one = apply_1q(zero, P1, X)
        plus = apply_1q(zero, P1, H)
        assert inner(zero, zero) == 1
        assert inner(zero, one) == 0
        assert abs(inner(plus, zero) - 1 / np.sqrt(2)) < 1e-15

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(21)
        a, b = random_state([P1, P2], rng), random_state([P1, P2], rng)
        assert abs(inner(a, b) - np.conj(inner(b, a))) < 1e-14

    def test_inner_equals_squared_norm(self):
        rng = np.random.default_rng(23)
        a = random_state([P1, P2], rng)
        assert abs(inner(a, a) - a.squared_norm()) < 1e-12

    def test_register_mismatch(self):
        with pytest.raises(RegisterError, match="mismatch"):
            inner(new_register([P1]), new_register([P2]))

    def test_order_mismatch(self):
        with pytest.raises(RegisterError, match="mismatch"):
            inner(new_register([P1, P2]), new_register([P2, P1]))


class TestExpectPauli:
    def test_z_on_zero(self):
        assert expect_pauli(new_register([P1]), PauliString.from_map({P1: "Z"})) == 1.0

    def test_x_on_plus(self):
        plus = apply_1q(new_register([P1]), P1, H)
        assert abs(expect_pauli(plus, PauliString.from_map({P1: "X"})) - 1.0) < 1e-12

    def test_bell_xx(self):
        s = apply_1q(new_register([P1, P2]), P1, H)
        s = apply_ctrl2(s, P1, P2, I2, X)
        assert abs(expect_pauli(s, PauliString.from_map({P1: "X", P2: "X"})) - 1.0) < 1e-12

    def test_identity_string(self):
        assert expect_pauli(new_register([P1]), PauliString()) == 1.0

    def test_unnormalized_rejected(self):
        s = StateVector(np.array([0.5, 0.0]), (P1,))
        with pytest.raises(ValueError, match="unnormalized"):
            expect_pauli(s, PauliString.from_map({P1: "Z"}))

    def test_range(self):
        rng = np.random.default_rng(31)
        paulis = ["X", "Y", "Z"]
        for _ in range(25):
            s = random_state([P1, P2, P3], rng)
            ops = {q: paulis[rng.integers(3)] for q in (P1, P2, P3) if rng.random() < 0.8}
            val = expect_pauli(s, PauliString.from_map(ops))
            assert -1.0 - 1e-12 <= val <= 1.0 + 1e-12


class TestHelpers:
    def test_discard_collapsed(self):
        s = new_register([A, P1])
        out = discard_qubit(s, A)
        assert out.labels == (P1,)
        assert np.allclose(out.amplitudes, [1, 0])

    def test_discard_uncollapsed_rejected(self):
        s = apply_1q(new_register([A, P1]), A, H)
        with pytest.raises(RegisterError, match="not collapsed"):
            discard_qubit(s, A)

    def test_permute(self):
        rng = np.random.default_rng(41)
        s = random_state([P1, P2, P3], rng)
        perm = permute_register(s, (P3, P1, P2))
        assert perm.labels == (P3, P1, P2)
        back = permute_register(perm, (P1, P2, P3))
        assert np.allclose(back.amplitudes, s.amplitudes)

    def test_fidelity_phase_invariant(self):
        rng = np.random.default_rng(43)
        s = random_state([P1, P2], rng)
        rotated = StateVector(np.exp(1.2j) * s.amplitudes, s.labels)
        assert abs(fidelity(s, rotated) - 1.0) < 1e-12

    def test_dump_load_roundtrip(self):
        rng = np.random.default_rng(47)
        s = random_state([A, P1], rng)
        back = load_state(dump_state(s))
        assert back.labels == s.labels
        assert np.allclose(back.amplitudes, s.amplitudes)

    def test_qubit_json(self):
        assert QubitId.from_json("a") == A
        assert QubitId.from_json(3) == P3
        assert P2.to_json() == 2
