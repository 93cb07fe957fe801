"""Pauli/Clifford algebra, tableaux, stabilizer Rényi entropies and Clifford-enhanced MPS."""

from .cmps import (Cmps, StabilizerMpo, apply_dressed, auxiliary_spin_operator, build_stabilizer_mpo,
                   cmps_expect, dress_unitary)
from .dressed import candidate_cliffords, clifford_dressed_tdvp_step, disentangle, dressed_tdvp_evolve
from .sre import (enumerate_pauli_probabilities, find_stabilizer_group, pauli_probability,
                  sample_pauli_strings, sre_exact, sre_replica2, sre_sample)
from .tableau import (Tableau, enumerate_stabilizer_states, gf2_rank, random_clifford_gates,
                      stabilizer_entropy, stabilizer_state_count, state_from_tableau)

__all__ = [
    "Tableau", "gf2_rank", "random_clifford_gates", "stabilizer_entropy", "state_from_tableau",
    "stabilizer_state_count", "enumerate_stabilizer_states",
    "sre_exact", "sre_sample", "sre_replica2", "sample_pauli_strings", "pauli_probability",
    "enumerate_pauli_probabilities", "find_stabilizer_group",
    "Cmps", "cmps_expect", "StabilizerMpo", "build_stabilizer_mpo", "auxiliary_spin_operator",
    "dress_unitary", "apply_dressed",
    "candidate_cliffords", "disentangle", "clifford_dressed_tdvp_step", "dressed_tdvp_evolve",
]
