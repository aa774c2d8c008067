import json

import numpy as np
import pytest

from qmsim.gates import PAULI_Z
from qmsim.protocols import (
    NoisyGateSpec,
    ProtocolScript,
    TREE7_LABEL_ORDER,
    build_2d,
    build_chain3,
    build_tree7,
    chain3_script,
    closed_form_tree_state,
    fidelity_2d_scaling,
    ideal_tree7_state,
    run_script_dense,
    tree7_script,
    tree_fidelity_closed_form,
    tree_fidelity_simulated,
    twod_script,
)
from qmsim.graphs import all_pass, path_graph, tree7_graph, verify_all
from qmsim.state import (
    PauliString,
    QubitId,
    RegisterError,
    StateVector,
    apply_1q,
    expect_pauli,
    fidelity,
)

A = QubitId.ancilla()
SQ8 = 1 / np.sqrt(8)
SQ2 = 1 / np.sqrt(2)

# eight-term chain states after the ancilla measurement, hand-expanded from
# the H/CNOT interleave on |0000>; index order |p_first p_mid p_last>
CHAIN_OUTCOME0 = np.array([1, 1, 1, -1, 1, 1, -1, 1], dtype=complex) * SQ8
CHAIN_OUTCOME1 = np.array([1, -1, 1, 1, 1, -1, -1, -1], dtype=complex) * SQ8


def kron_all(*vecs):
    out = np.array([1.0 + 0j])
    for v in vecs:
        out = np.kron(out, np.asarray(v, dtype=complex))
    return out


KET0 = np.array([1, 0])
KET1 = np.array([0, 1])
PLUS = np.array([1, 1]) * SQ2
MINUS = np.array([1, -1]) * SQ2


class TestChain3:
    def test_outcome0_amplitudes(self):
        res = build_chain3(1.0)
        assert np.allclose(res.outcome0.amplitudes, CHAIN_OUTCOME0, atol=1e-14)

    def test_outcome1_amplitudes(self):
        res = build_chain3(1.0)
        assert np.allclose(res.outcome1.amplitudes, CHAIN_OUTCOME1, atol=1e-14)

    def test_outcome_probabilities(self):
        res = build_chain3(1.0)
        assert res.prob0 == pytest.approx(0.5, abs=1e-12)
        assert res.prob1 == pytest.approx(0.5, abs=1e-12)

    def test_compact_forms_match(self):
        # 1/2 (|00+> + |10+> + |01-> - |11->) and (|+0+> + |-1->)/sqrt2
        compact_a = 0.5 * (
            kron_all(KET0, KET0, PLUS)
            + kron_all(KET1, KET0, PLUS)
            + kron_all(KET0, KET1, MINUS)
            - kron_all(KET1, KET1, MINUS)
        )
        compact_b = SQ2 * (kron_all(PLUS, KET0, PLUS) + kron_all(MINUS, KET1, MINUS))
        assert np.allclose(compact_a, CHAIN_OUTCOME0, atol=1e-14)
        assert np.allclose(compact_b, CHAIN_OUTCOME0, atol=1e-14)

    @pytest.mark.parametrize("r", [0.9, 0.5, 0.3 + 0.2j])
    def test_lossy_amplitude_pattern(self, r):
        # hand application of the interleave: each photon flip costs one r
        expected = np.array(
            [1, r, r, -(r**2), r, r**2, -(r**2), r**3], dtype=complex
        )
        expected /= np.linalg.norm(expected)
        res = build_chain3(r)
        assert fidelity(res.outcome0, StateVector(expected, res.outcome0.labels)) > 1 - 1e-12

    def test_chain_stabilizers_outcome0(self):
        res = build_chain3(1.0)
        p1, p2, p3 = res.outcome0.labels
        for ops in ({p1: "X", p2: "Z"}, {p1: "Z", p2: "X", p3: "Z"}, {p2: "Z", p3: "X"}):
            assert expect_pauli(res.outcome0, PauliString.from_map(ops)) == pytest.approx(1.0, abs=1e-12)

    def test_outcome1_corrected_by_z_on_last(self):
        res = build_chain3(1.0)
        corrected = res.outcome1_corrected()
        assert fidelity(corrected, res.outcome0) > 1 - 1e-12
        report = verify_all(corrected, path_graph([1, 2, 3]))
        assert all_pass(report, 1e-12)

    def test_custom_photon_numbers(self):
        res = build_chain3(1.0, photons=(3, 6, 4))
        assert res.outcome0.labels == (QubitId.photon(3), QubitId.photon(6), QubitId.photon(4))


class TestClosedFormTreeState:
    def test_unity_reflection_branch0(self):
        # sqrt2 (|+0+> + |-1->)
        expected = np.sqrt(2) * (kron_all(PLUS, KET0, PLUS) + kron_all(MINUS, KET1, MINUS))
        state = closed_form_tree_state(1.0, 0)
        assert np.allclose(state.amplitudes, expected, atol=1e-14)

    def test_zero_reflection_branch0(self):
        state = closed_form_tree_state(0.0, 0)
        expected = kron_all(KET0, KET0, PLUS)
        assert np.allclose(state.amplitudes, expected, atol=1e-14)

    @pytest.mark.parametrize("r", [0.7, 0.88, 0.4 + 0.3j])
    def test_branch1_is_middle_phase_map_of_branch0(self, r):
        b0 = closed_form_tree_state(r, 0)
        b1 = closed_form_tree_state(r, 1)
        mapped = apply_1q(b0, b0.labels[1], np.diag([1, -r]).astype(complex))
        assert np.allclose(mapped.amplitudes, b1.amplitudes, atol=1e-14)

    def test_invalid_branch(self):
        with pytest.raises(ValueError, match="branch"):
            closed_form_tree_state(0.5, 2)


class TestTreeFidelityClosedForm:
    def test_unity_exact(self):
        rep = tree_fidelity_closed_form(1.0)
        assert rep.fidelity == 1.0
        assert rep.inner_product_fidelity == 1.0
        assert rep.numerator_poly_value == 128 + 0j
        assert rep.n_r == 128.0
        assert rep.consistent

    def test_known_value(self):
        rep = tree_fidelity_closed_form(0.88)
        assert rep.fidelity == pytest.approx(0.962, abs=5e-4)

    def test_report_invariant(self):
        for r in (0.3, 0.88, 0.99, 0.5 + 0.2j):
            rep = tree_fidelity_closed_form(r)
            assert rep.fidelity == pytest.approx(
                abs(rep.numerator_poly_value) ** 2 / (2**7 * rep.n_r), abs=1e-12
            )

    def test_disagreement_is_reported(self):
        rep = tree_fidelity_closed_form(0.5)
        assert rep.poly_inner_delta == pytest.approx(
            abs(rep.fidelity - rep.inner_product_fidelity), abs=1e-15
        )
        assert rep.consistent == (rep.poly_inner_delta <= 1e-9)
        assert not rep.consistent  # the two printed routes genuinely differ

    def test_monotone_in_reflectivity(self):
        vals = [tree_fidelity_closed_form(r).fidelity for r in np.arange(0.0, 1.0 + 1e-9, 0.01)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_numerator_factorization(self):
        # P(r) = (1+r)^6 + (1+r)^4 (1+r^2)^2 reproduces the printed coefficients
        for r in (0.3, 0.7, 0.88, 0.2 + 0.6j):
            rep = tree_fidelity_closed_form(r)
            factored = (1 + r) ** 6 + (1 + r) ** 4 * (1 + r**2) ** 2
            assert rep.numerator_poly_value == pytest.approx(factored, abs=1e-9)

    def test_reflection_bound(self):
        with pytest.raises(ValueError, match="exceeds 1"):
            tree_fidelity_closed_form(1.5)


def simulated_tree_fidelity_oracle(r1, r2):
    """Path-counting closed form for the gate-level tree fidelity.

    Reflection events per basis state: one r1 per photon flip in the
    chains, one extra r1 for the transferred root, and one r2 per CZ on an
    excited middle photon. Summing r^events over the 128 ideal basis
    states factorizes per chain.
    """
    num = (1 + r1) ** 6 + r1 * (1 + r1) ** 4 * (1 + r1 * r2) ** 2
    x1, x12 = abs(r1) ** 2, abs(r1 * r2) ** 2
    den = (1 + x1) ** 6 + x1 * (1 + x1) ** 4 * (1 + x12) ** 2
    return abs(num) ** 2 / (2**7 * den)


class TestBuildTree7:
    def test_label_order(self):
        t = build_tree7(1.0, 1.0)
        assert t.labels == tuple(QubitId.photon(k) for k in TREE7_LABEL_ORDER)

    def test_all_stabilizers_at_unity(self):
        report = verify_all(build_tree7(1.0, 1.0), tree7_graph())
        assert all_pass(report, 1e-12)

    def test_matches_ideal_reference(self):
        assert fidelity(build_tree7(1.0, 1.0), ideal_tree7_state()) > 1 - 1e-12

    def test_ideal_reference_is_stabilizer_state(self):
        assert all_pass(verify_all(ideal_tree7_state(), tree7_graph()), 1e-12)

    @pytest.mark.parametrize(
        "r1,r2",
        [(0.88, 0.88), (0.9, 0.7), (1.0, 0.0), (0.5, 1.0), (0.95, 0.95j), (0.6 + 0.2j, 0.8)],
    )
    def test_fidelity_matches_path_counting(self, r1, r2):
        assert tree_fidelity_simulated(r1, r2) == pytest.approx(
            simulated_tree_fidelity_oracle(r1, r2), abs=1e-12
        )

    def test_closed_form_discrepancy_is_real(self):
        # the closed form treats the root transfer as lossless, the gate
        # simulation does not; the gap must be visible, not hidden
        r = 0.88
        gap = abs(tree_fidelity_closed_form(r).fidelity - tree_fidelity_simulated(r, r))
        assert gap > 1e-3

    def test_script_is_not_clifford(self):
        assert not tree7_script(1.0, 1.0).is_clifford()


class TestBuild2d:
    def test_unitary_at_unity(self):
        state = build_2d(2, 4, 1.0)
        assert abs(state.squared_norm() - 1.0) < 1e-12

    def test_lossy_norm_drops(self):
        state = build_2d(2, 4, 0.9)
        assert state.squared_norm() < 1.0

    def test_gate_transcript(self):
        script = twod_script(2, 4, 1.0)
        kinds = [s.kind for s in script.steps]
        assert kinds == ["h", "cz", "cnot", "h", "cz", "cnot"]
        cz_targets = [s.target.index for s in script.steps if s.kind == "cz"]
        cnot_targets = [s.target.index for s in script.steps if s.kind == "cnot"]
        assert cz_targets == [1, 2]
        assert cnot_targets == [3, 4]

    def test_register_cap(self):
        with pytest.raises(RegisterError, match="tableau"):
            build_2d(5, 25, 1.0)

    def test_nodes_below_width(self):
        with pytest.raises(ValueError, match="nodes"):
            twod_script(5, 3)


class TestFidelity2dScaling:
    def test_zero_photons(self):
        assert fidelity_2d_scaling(0.93, 0) == 1.0

    def test_perfect_gate(self):
        assert fidelity_2d_scaling(1.0, 1000) == 1.0

    def test_repeated_product(self):
        f = 0.987
        prod = 1.0
        for n in range(11):
            assert fidelity_2d_scaling(f, n) == pytest.approx(prod, rel=1e-14)
            prod *= f

    def test_log_linear(self):
        f = 0.9921
        for n in (1, 10, 100, 1000):
            assert np.log(fidelity_2d_scaling(f, n)) == pytest.approx(n * np.log(f), abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            fidelity_2d_scaling(1.2, 5)
        with pytest.raises(ValueError):
            fidelity_2d_scaling(0.9, -1)


class TestScripts:
    def test_json_roundtrip(self):
        script = tree7_script(0.9, 0.8 + 0.1j)
        back = ProtocolScript.loads(script.dumps())
        assert back == script

    def test_chain_script_runs(self):
        state, log = run_script_dense(chain3_script(1.0))
        assert len(log) == 1
        assert log[0].outcome == 0
        assert abs(state.squared_norm() - 1.0) < 1e-12

    def test_measure_fallback_outcome(self):
        a = QubitId.ancilla()
        script = ProtocolScript(
            register=(a,),
            steps=(
                NoisyGateSpec("x", a),
                NoisyGateSpec("measure", a, postselect=0),
            ),
        )
        _, log = run_script_dense(script)
        assert log[0].outcome == 1  # preferred 0 impossible after the flip

    def test_undeclared_qubit(self):
        with pytest.raises(ValueError, match="undeclared"):
            ProtocolScript(
                register=(A,),
                steps=(NoisyGateSpec("h", QubitId.photon(1)),),
            )

    def test_gate_spec_validation(self):
        with pytest.raises(ValueError, match="control"):
            NoisyGateSpec("cnot", QubitId.photon(1))
        with pytest.raises(ValueError, match="ancilla"):
            NoisyGateSpec("cz", QubitId.photon(1), control=QubitId.photon(2))
        with pytest.raises(ValueError, match="unknown gate kind"):
            NoisyGateSpec("swap", QubitId.photon(1))
        with pytest.raises(ValueError, match="postselect"):
            NoisyGateSpec("h", A, postselect=0)

    def test_dense_cap(self):
        big = twod_script(20, 1000, 1.0)
        with pytest.raises(RegisterError, match="tableau"):
            run_script_dense(big)

    def test_complex_r_json(self):
        spec = NoisyGateSpec("cnot", QubitId.photon(1), control=A, r=0.5 + 0.25j)
        back = NoisyGateSpec.from_json(json.loads(json.dumps(spec.to_json())))
        assert back == spec
