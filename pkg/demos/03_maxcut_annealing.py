"""Max-Cut on a small graph: QUBO encoding, brute force, digitized annealing
and a short QAOA optimization."""

# %%
import numpy as np

from tnq import anneal as A

g = A.example_graph()
problem = A.encode_maxcut(g)
bits, value = A.brute_force_minimize(problem)
print("edges:", g.edges)
print("optimal cut", A.maxcut_from_value(value), "at", "".join(map(str, bits)))

# %% Longer schedules leave less residual energy
for P in (8, 32, 128):
    res = A.run_dqa(problem, A.DqaSchedule(P, 0.5 * P), chi=16)
    print(f"P={P:4d} residual energy {res.residual_energy:.3e}")

# %% Sampling the final state
best, best_val, top, top_val = A.best_of_samples(problem, res.state, 1024, np.random.default_rng(1))
print("best sample", "".join(map(str, best)), "cut", g.cut_value(best))

# %% Two QAOA layers started from a linear ramp
betas, gammas, e = A.qaoa_optimize(problem, [0.375, 0.125], [0.125, 0.375], None, 100)
print("QAOA p=2 energy", round(e, 4), "vs optimum", value)
