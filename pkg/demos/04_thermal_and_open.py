"""Finite temperature and dissipation: an exact thermal MPO, purification by
imaginary time, METTS sampling, and a driven-dissipative chain."""

# %%
import numpy as np

from tnq.mpo import OperatorSpec, mpo_trace
from tnq.open_systems import (MettsConfig, classical_ising_thermal_mpo, density_observable,
                              hardcore_boson_spec, lindblad_evolve, metts_estimate, metts_run,
                              product_density, thermal_superket_evolve)
from tnq.tensor import TruncationPolicy

n, beta = 10, 0.7
z = mpo_trace(classical_ising_thermal_mpo(n, 1.0, 0.0, beta)).real
print("classical Ising Z:", z, "closed form:", 2**n * np.cosh(beta) ** (n - 1))

# %% Quantum chain: grow e^{-beta H} from the identity superket
rho, zq = thermal_superket_evolve(OperatorSpec.xxz(6, 1.0), 1.0, 0.05)
print("XXZ n=6, beta=1: Z =", round(zq, 6))

# %% METTS on a transverse-field Ising chain
spec = OperatorSpec.tfi(6, 1.0, 1.0, 0.2)
records = metts_run(spec, MettsConfig(1.0, samples=300, burn_in=10), ["ZIIIII", "IIZIII"], 3)
for j, name in enumerate(["Z_0", "Z_2"]):
    mean, err = metts_estimate(records, "observables", j)
    print(f"<{name}> = {mean:.4f} +- {err:.4f}")

# %% Loss twice as strong as gain drives every site to density 1/3
spec = hardcore_boson_spec(6, 1.0, 0.5)
r = lindblad_evolve(product_density([np.diag([0, 1.0])] * 6), spec, 0.05, 300, TruncationPolicy(max_bond=32))
print("site densities:", np.round([(1 - density_observable(r, "I" * j + "Z" + "I" * (5 - j))) / 2
                                   for j in range(6)], 6))
