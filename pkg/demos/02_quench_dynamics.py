"""A Neel-state quench in the XXZ chain, run with TEBD and TDVP and compared
against exact diagonalization."""

# %%
import numpy as np

from tnq.mpo import OperatorSpec, build_mpo
from tnq.mps import all_bond_entropies, expect_pauli_string, make_named_state
from tnq.tdvp import tdvp_evolve
from tnq.tebd import evolve, trotterize

n, dt, steps = 8, 0.02, 50
spec = OperatorSpec.xxz(n, 1.0)
psi0 = make_named_state("product", n, "01" * (n // 2))

# %% TEBD, second-order brickwork
tebd_state, discarded, _ = evolve(psi0, trotterize(spec, dt, order=2), steps)
print("TEBD entropies:", np.round(all_bond_entropies(tebd_state), 4))

# %% Two-site TDVP on the MPO form of the same Hamiltonian
tdvp_state, rows = tdvp_evolve(psi0, build_mpo(spec), dt, steps, "two_site")
print("TDVP final energy:", round(rows[-1]["energy"], 10), "max bond:", rows[-1]["max_bond"])

# %% Compare the staggered magnetization profile with the dense answer
z_tebd = [expect_pauli_string(tebd_state, "I" * i + "Z" + "I" * (n - i - 1)).real for i in range(n)]
z_tdvp = [expect_pauli_string(tdvp_state, "I" * i + "Z" + "I" * (n - i - 1)).real for i in range(n)]
h = build_mpo(spec).to_dense().reshape(2**n, 2**n)
w, v = np.linalg.eigh(h)
psi = v @ (np.exp(-1j * w * dt * steps) * (v.conj().T @ psi0.to_dense().reshape(-1)))
zd = [np.real(np.vdot(psi, np.kron(np.kron(np.eye(2**i), np.diag([1, -1])), np.eye(2 ** (n - i - 1))) @ psi))
      for i in range(n)]
print("max |TEBD - exact|:", np.abs(np.subtract(z_tebd, zd)).max())
print("max |TDVP - exact|:", np.abs(np.subtract(z_tdvp, zd)).max())
