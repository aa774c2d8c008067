"""Simulation toolkit for metasurface-mediated photonic cluster-state
generation: coupled-dipole reflectivity of a sub-wavelength atom array,
reflection-parameterized gate models, protocol builders for chain, tree,
and 2D cluster states, and stabilizer verification."""

from .state import (
    MAX_QUBITS,
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
from .gates import (
    e_gate,
    gate_fidelity_path2,
    hadamard_ancilla,
    noisy_cnot,
    noisy_cz,
)
from .protocols import (
    Chain3Result,
    NoisyGateSpec,
    ProtocolScript,
    TreeFidelityReport,
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
from .graphs import (
    ClusterGraph,
    all_pass,
    ideal_cluster_state,
    path_graph,
    stabilizer,
    tree7_graph,
    verify_all,
)
from .tableau import GraphForm, StabilizerTableau, graph_form, tableau_run
from .blockade import (
    BlockadeParams,
    blockade_reflectivity,
    critical_radius,
    tree_fidelity_vs_separation,
)
from .dipole import (
    BeamSpec,
    DipoleLattice,
    DisorderSpec,
    EnsembleStats,
    ScatterSolution,
    disorder_ensemble,
    gaussian_beam_field,
    green_dyadic,
    reflection_coefficient,
    reflectivity_vs_disorder,
    resonant_polarizability,
    solve_scattering,
    total_field,
)

__version__ = "0.1.0"
