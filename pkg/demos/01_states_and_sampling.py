"""Building named states, reading off entanglement, and drawing samples."""

# %%
import numpy as np

from tnq.mps import all_bond_entropies, make_named_state, sample_bitstrings, to_staircase_circuit

n = 8
ghz = make_named_state("ghz", n)
w = make_named_state("w", n)
print("GHZ bonds:", ghz.bond_dims)
print("GHZ cut entropies / log 2:", np.round(np.array(all_bond_entropies(ghz)) / np.log(2), 12))
print("W entropies:", np.round(all_bond_entropies(w), 4))

# %% Exact samples, one conditional at a time
bits, probs = sample_bitstrings(w, 5, np.random.default_rng(0))
for b, p in zip(bits, probs):
    print("".join(map(str, b)), f"p={p:.4f}")

# %% A bond-2 state compiles to a staircase of two-qubit gates
gates = to_staircase_circuit(w)
print(f"W as {len(gates)} gates")
