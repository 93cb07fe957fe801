"""Dense reference computations used as independent checks in the tests."""

from functools import reduce

import numpy as np
import scipy.linalg

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
LETTER = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_all(ops):
    return reduce(np.kron, ops)


def site_op(op, site, n):
    ops = [I2] * n
    ops[site] = op
    return kron_all(ops)


def pauli_dense(letters: str, coeff: complex = 1.0):
    return coeff * kron_all([LETTER[c] for c in letters])


def xxz_dense(n, delta, J=1.0):
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n - 1):
        for op, c in ((X, J), (Y, J), (Z, J * delta)):
            h += c * site_op(op, i, n) @ site_op(op, i + 1, n)
    return h


def tfi_dense(n, J=1.0, g=1.0, h=0.0):
    out = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n - 1):
        out -= J * site_op(Z, i, n) @ site_op(Z, i + 1, n)
    for i in range(n):
        out -= g * site_op(X, i, n) + h * site_op(Z, i, n)
    return out


def evolve_dense(h, psi, t):
    w, v = np.linalg.eigh(h)
    return v @ (np.exp(-1j * w * t) * (v.conj().T @ psi))


def expect_dense(psi, op):
    return complex(np.vdot(psi, op @ psi) / np.vdot(psi, psi))


def z_profile(psi, n):
    return np.array([expect_dense(psi, site_op(Z, i, n)).real for i in range(n)])


def thermal_average(h, op, beta):
    w, v = np.linalg.eigh(h)
    p = np.exp(-beta * (w - w.min()))
    rho = (v * p) @ v.conj().T
    return float(np.real(np.trace(rho @ op) / np.trace(rho)))


def entanglement_entropy(psi, n, cut):
    """Von Neumann entropy between the first ``cut`` qubits and the rest."""
    m = psi.reshape(2**cut, 2 ** (n - cut))
    s = np.linalg.svd(m, compute_uv=False) ** 2
    s = s[s > 1e-15] / s.sum()
    return float(-np.sum(s * np.log(s)))


def lindblad_generator(h, jumps):
    """Superoperator on row-major vec(ρ): ρ̇ = −i[H, ρ] + Σ γ(LρL† − ½{L†L, ρ})."""
    d = h.shape[0]
    eye = np.eye(d)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in jumps:
        ldl = op.conj().T @ op
        gen += rate * (np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T)))
    return gen


def lindblad_dense(rho0, h, jumps, t):
    d = rho0.shape[0]
    v = scipy.linalg.expm(lindblad_generator(h, jumps) * t) @ rho0.reshape(-1)
    return v.reshape(d, d)


def pauli_expectations_1q(psi):
    return [expect_dense(psi, m).real for m in (I2, X, Y, Z)]
