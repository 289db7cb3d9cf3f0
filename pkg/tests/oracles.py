"""Independent reference computations used to freeze expected values.

Nothing here touches the package's kernels: states are plain numpy vectors
indexed with the same MSB-first convention, and every operation is written
as an explicit loop over basis states.
"""

import itertools

import numpy as np
import scipy.linalg

S = 1 / np.sqrt(2)


def bits_of(index, n):
    return [(index >> (n - 1 - k)) & 1 for k in range(n)]


def index_of(bits):
    idx = 0
    for b in bits:
        idx = (idx << 1) | b
    return idx


def cnot_by_relabel(amps, control, target):
    """CNOT by permuting basis states: |..c..t..> -> |..c..(t xor c)..>."""
    n = int(np.log2(len(amps)))
    out = np.zeros_like(amps)
    for i, a in enumerate(amps):
        bits = bits_of(i, n)
        if bits[control]:
            bits[target] ^= 1
        out[index_of(bits)] += a
    return out


def partial_trace_loop(amps, keep):
    """Reduced density matrix by summing over every traced-out configuration."""
    n = int(np.log2(len(amps)))
    k = len(keep)
    rho = np.zeros((2**k, 2**k), dtype=complex)
    traced = [q for q in range(n) if q not in keep]
    for env in itertools.product((0, 1), repeat=len(traced)):
        for r in range(2**k):
            for c in range(2**k):
                br, bc = [0] * n, [0] * n
                for q, b in zip(keep, bits_of(r, k)):
                    br[q] = b
                for q, b in zip(keep, bits_of(c, k)):
                    bc[q] = b
                for q, b in zip(traced, env):
                    br[q] = bc[q] = b
                rho[r, c] += amps[index_of(br)] * np.conj(amps[index_of(bc)])
    return rho


def concurrence_sqrtm(rho):
    """Wootters concurrence through the Hermitian form sqrt(sqrt(rho) rho~ sqrt(rho))."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    rho_tilde = yy @ rho.conj() @ yy
    root = scipy.linalg.sqrtm(rho)
    r = scipy.linalg.sqrtm(root @ rho_tilde @ root)
    lam = np.sort(np.linalg.eigvalsh((r + r.conj().T) / 2))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def pure_concurrence(amps):
    """2|ad - bc| for a two-qubit pure state a|00> + b|01> + c|10> + d|11>."""
    a, b, c, d = amps
    return 2 * abs(a * d - b * c)


def t_tot_eff_exact(n, L0_over_c, eta_D, eta_M, eta_t):
    """Efficiency-based distribution time in exact rational arithmetic.

    Efficiencies are given as decimal strings so nothing is rounded before
    the final division.
    """
    from fractions import Fraction

    d, m, t = Fraction(eta_D), Fraction(eta_M), Fraction(eta_t)
    value = Fraction(3) ** (2 * n + 1) / Fraction(2) ** (n + 1) * Fraction(L0_over_c)
    return value / ((d * m) ** (3 * n + 2) * t ** (n + 1))
