"""Stabilizer tableaus, magic measured as stabilizer Renyi entropy, and
Clifford dressing of a TDVP quench."""

# %%
import numpy as np

from tnq.mpo import OperatorSpec
from tnq.mps import make_named_state, product_state, random_mps
from tnq.stabilizer import Tableau, dressed_tdvp_evolve, find_stabilizer_group, sre_exact, sre_replica2, sre_sample
from tnq.tensor import TruncationPolicy

t = Tableau.identity(2).apply("H", 0).apply("CNOT", 0, 1)
print("Bell stabilizers:", [p.to_text() for p in t.stabilizers()])
print(t.to_text())

# %% T states carry log(4/3) of magic each
t_ket = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
s = product_state([t_ket] * 4)
print("M2 exact", sre_exact(s, 2), "replica", sre_replica2(s), "4 log(4/3)", 4 * np.log(4 / 3))

# %% Sampling Pauli strings on a random state
r = random_mps(6, 4, 2)
est, err = sre_sample(r, 2, 5000, 0)
print(f"sampled M2 {est:.4f} +- {err:.4f}, exact {sre_exact(r, 2):.4f}")

# %% Recovering the stabilizer group of GHZ
res = find_stabilizer_group(make_named_state("ghz", 4))
print("GHZ generators:", [p.to_text() for p in res.generators])

# %% Dressing keeps the core less entangled than plain TDVP
n = 8
spec = OperatorSpec.tfi(n, 1.0, 1.0)
psi0 = make_named_state("product", n)
pol = TruncationPolicy(max_bond=16)
_, _, dressed = dressed_tdvp_evolve(psi0, spec, 0.05, 40, 1, 1, pol)
_, _, plain = dressed_tdvp_evolve(psi0, spec, 0.05, 40, 0, 0, pol)
print("max core entropy, dressed vs plain:", round(max(dressed[-1]["entropies"]), 3),
      round(max(plain[-1]["entropies"]), 3))
