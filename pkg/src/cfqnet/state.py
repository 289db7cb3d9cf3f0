"""Exact statevector simulation for small registers of labelled qubits.

Basis convention: the qubit at position 0 of the register is the most
significant bit of the amplitude index.  Under the binary relabelling used
throughout the package

    |pass> -> |0>_e    |block> -> |1>_e    |H> -> |0>_p    |V> -> |1>_p

and the electron energy levels map as ``|e'> = |pass> = |0>`` and
``|g> = |block> = |1>``.

Bell states use this naming, which swaps the usual textbook letters::

    psi_plus  = (|00> + |11>)/sqrt(2)      phi_plus  = (|01> + |10>)/sqrt(2)
    psi_minus = (|00> - |11>)/sqrt(2)      phi_minus = (|01> - |10>)/sqrt(2)
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 20
ATOL = 1e-10

_S = 1 / np.sqrt(2)


class Role(str, enum.Enum):
    ELECTRON = "electron"
    PHOTON = "photon"


@dataclass(frozen=True)
class QubitLabel:
    """A named qubit: integer id, physical role and the node that holds it."""

    id: int
    role: Role
    owner: str
    name: str = ""

    def __str__(self) -> str:
        return self.name or f"q{self.id}"

    @property
    def is_electron(self) -> bool:
        return self.role is Role.ELECTRON

    @property
    def is_photon(self) -> bool:
        return self.role is Role.PHOTON


def electron(id: int, owner: str, name: str = "") -> QubitLabel:
    return QubitLabel(id, Role.ELECTRON, owner, name)


def photon(id: int, owner: str, name: str = "") -> QubitLabel:
    return QubitLabel(id, Role.PHOTON, owner, name)


class BellOutcome(str, enum.Enum):
    PSI_PLUS = "psi_plus"
    PSI_MINUS = "psi_minus"
    PHI_PLUS = "phi_plus"
    PHI_MINUS = "phi_minus"

    @property
    def vector(self) -> np.ndarray:
        return _BELL_VECTORS[self].copy()

    @property
    def pauli(self) -> tuple[int, int]:
        """(x, z) exponents such that the state is (I ⊗ X^x Z^z)|psi_plus> up to phase."""
        return _BELL_PAULI[self]

    @classmethod
    def from_pauli(cls, x: int, z: int) -> "BellOutcome":
        return _PAULI_BELL[(x & 1, z & 1)]


BELL_ORDER = (
    BellOutcome.PSI_PLUS,
    BellOutcome.PSI_MINUS,
    BellOutcome.PHI_PLUS,
    BellOutcome.PHI_MINUS,
)

_BELL_VECTORS = {
    BellOutcome.PSI_PLUS: np.array([_S, 0, 0, _S], dtype=complex),
    BellOutcome.PSI_MINUS: np.array([_S, 0, 0, -_S], dtype=complex),
    BellOutcome.PHI_PLUS: np.array([0, _S, _S, 0], dtype=complex),
    BellOutcome.PHI_MINUS: np.array([0, _S, -_S, 0], dtype=complex),
}
_BELL_PAULI = {
    BellOutcome.PSI_PLUS: (0, 0),
    BellOutcome.PSI_MINUS: (0, 1),
    BellOutcome.PHI_PLUS: (1, 0),
    BellOutcome.PHI_MINUS: (1, 1),
}
_PAULI_BELL = {v: k for k, v in _BELL_PAULI.items()}
# rows are <bell|, so BELL_BRA @ pair_amplitudes gives the Bell components
_BELL_BRA = np.conj(np.stack([_BELL_VECTORS[b] for b in BELL_ORDER]))


class Gate(str, enum.Enum):
    I = "I"
    H = "H"
    X = "X"
    Z = "Z"
    CNOT = "CNOT"

    @property
    def arity(self) -> int:
        return 2 if self is Gate.CNOT else 1

    @property
    def matrix(self) -> np.ndarray:
        return GATE_MATRICES[self]


GATE_MATRICES = {
    Gate.I: np.eye(2, dtype=complex),
    Gate.H: np.array([[1, 1], [1, -1]], dtype=complex) * _S,
    Gate.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Gate.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    Gate.CNOT: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}
for _m in GATE_MATRICES.values():
    _m.setflags(write=False)


def _check_labels(labels: Sequence[QubitLabel]) -> tuple[QubitLabel, ...]:
    labels = tuple(labels)
    if not labels:
        raise ConfigurationError("a register needs at least one qubit")
    if len(labels) > MAX_QUBITS:
        raise ConfigurationError(f"register of {len(labels)} qubits exceeds the {MAX_QUBITS}-qubit cap")
    ids = [q.id for q in labels]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"duplicate qubit ids in register: {ids}")
    return labels


class StateVector:
    """Normalised pure state over an ordered register of :class:`QubitLabel`.

    Instances are treated as immutable; every operation returns a new one.
    """

    __slots__ = ("labels", "amplitudes", "_pos")

    def __init__(self, labels: Sequence[QubitLabel], amplitudes, *, check: bool = True):
        # check=False is the internal fast path: labels already validated
        labels = _check_labels(labels) if check else tuple(labels)
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if check:
            if amps.size != 1 << len(labels):
                raise ConfigurationError(
                    f"{len(labels)} qubits need {1 << len(labels)} amplitudes, got {amps.size}"
                )
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1.0) > ATOL:
                raise ConfigurationError(f"state is not normalised (norm^2 = {norm!r})")
        amps.setflags(write=False)
        self.labels = labels
        self.amplitudes = amps
        self._pos = {q.id: i for i, q in enumerate(labels)}

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def position(self, q: QubitLabel) -> int:
        try:
            pos = self._pos[q.id]
        except KeyError:
            raise ConfigurationError(f"qubit {q} is not in this register") from None
        if self.labels[pos] != q:
            raise ConfigurationError(f"qubit id {q.id} is registered as {self.labels[pos]!r}, not {q!r}")
        return pos

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def amplitude(self, bits: Sequence[int] | str) -> complex:
        """Amplitude of a computational basis state given as bits in register order."""
        if isinstance(bits, str):
            bits = [int(b) for b in bits]
        if len(bits) != self.num_qubits:
            raise ConfigurationError("bit string length does not match the register")
        idx = 0
        for b in bits:
            idx = (idx << 1) | int(b)
        return complex(self.amplitudes[idx])

    def nonzero(self, tol: float = ATOL) -> dict[str, complex]:
        """Basis-string -> amplitude for every amplitude with modulus above ``tol``."""
        n = self.num_qubits
        return {
            format(i, f"0{n}b"): complex(a)
            for i, a in enumerate(self.amplitudes)
            if abs(a) > tol
        }

    def reorder(self, labels: Sequence[QubitLabel]) -> "StateVector":
        """Same state with the register permuted into ``labels`` order."""
        labels = tuple(labels)
        if sorted(q.id for q in labels) != sorted(q.id for q in self.labels) or len(labels) != self.num_qubits:
            raise ConfigurationError("reorder needs a permutation of the register")
        perm = [self.position(q) for q in labels]
        amps = np.transpose(self.tensor(), perm).reshape(-1)
        return StateVector(labels, amps, check=False)

    def __repr__(self) -> str:
        terms = " + ".join(f"({a:.4g})|{k}>" for k, a in self.nonzero(1e-12).items())
        return f"StateVector([{', '.join(map(str, self.labels))}]: {terms})"


class DensityMatrix:
    """Mixed state over an ordered list of qubit labels (same index convention)."""

    __slots__ = ("labels", "entries")

    def __init__(self, labels: Sequence[QubitLabel], entries, *, check: bool = True, atol: float = ATOL):
        labels = tuple(labels)
        rho = np.asarray(entries, dtype=complex)
        dim = 1 << len(labels)
        if rho.shape != (dim, dim):
            raise ConfigurationError(f"density matrix over {len(labels)} qubits must be {dim}x{dim}")
        if check:
            if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
                raise ConfigurationError("density matrix is not Hermitian")
            tr = np.trace(rho).real
            if abs(tr - 1.0) > atol:
                raise ConfigurationError(f"density matrix trace is {tr!r}")
            if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -atol:
                raise ConfigurationError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        self.labels = labels
        self.entries = rho

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @classmethod
    def from_pure(cls, state: StateVector) -> "DensityMatrix":
        a = state.amplitudes
        return cls(state.labels, np.outer(a, a.conj()), check=False)


# -- construction ----------------------------------------------------------


def init_register(labels: Sequence[QubitLabel]) -> StateVector:
    """|0...0> over ``labels``.  Electrons start in |pass>, not |g>."""
    labels = _check_labels(labels)
    amps = np.zeros(1 << len(labels), dtype=complex)
    amps[0] = 1.0
    return StateVector(labels, amps, check=False)


def basis_state(labels: Sequence[QubitLabel], bits: Sequence[int] | str) -> StateVector:
    labels = _check_labels(labels)
    if isinstance(bits, str):
        bits = [int(b) for b in bits]
    if len(bits) != len(labels):
        raise ConfigurationError("bit string length does not match the register")
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    amps = np.zeros(1 << len(labels), dtype=complex)
    amps[idx] = 1.0
    return StateVector(labels, amps, check=False)


def from_terms(labels: Sequence[QubitLabel], terms: dict[str, complex]) -> StateVector:
    """Build a state from ``{"0101": amplitude, ...}``; the result must be normalised."""
    labels = _check_labels(labels)
    amps = np.zeros(1 << len(labels), dtype=complex)
    for bits, a in terms.items():
        if len(bits) != len(labels):
            raise ConfigurationError(f"term {bits!r} does not match a {len(labels)}-qubit register")
        amps[int(bits, 2)] += a
    return StateVector(labels, amps)


def product(*states: StateVector) -> StateVector:
    """Tensor product; the register is the concatenation of the factors' registers."""
    labels: list[QubitLabel] = []
    amps = np.ones(1, dtype=complex)
    for s in states:
        labels.extend(s.labels)
        amps = np.kron(amps, s.amplitudes)
    return StateVector(_check_labels(labels), amps, check=False)


# -- evolution -------------------------------------------------------------


@functools.lru_cache(maxsize=4096)
def _index_table(n: int, positions: tuple[int, ...]) -> np.ndarray:
    """Flat amplitude indices arranged as (2^k, 2^(n-k)): row = bits of ``positions``."""
    idx = np.arange(1 << n).reshape((2,) * n)
    k = len(positions)
    table = np.moveaxis(idx, positions, range(k)).reshape(1 << k, -1)
    table = np.ascontiguousarray(table)
    table.setflags(write=False)
    return table


def _apply_matrix(state: StateVector, matrix: np.ndarray, positions: Sequence[int]) -> StateVector:
    table = _index_table(state.num_qubits, tuple(positions))
    out = np.empty_like(state.amplitudes)
    out[table] = matrix @ state.amplitudes[table]
    return StateVector(state.labels, out, check=False)


def apply_gate(state: StateVector, gate: Gate | str, targets: Sequence[QubitLabel] | QubitLabel) -> StateVector:
    """Apply ``gate`` to ``targets``; CNOT takes ``(control, target)``."""
    gate = Gate(gate)
    if isinstance(targets, QubitLabel):
        targets = (targets,)
    targets = tuple(targets)
    if len(targets) != gate.arity:
        raise ConfigurationError(f"{gate.value} acts on {gate.arity} qubit(s), got {len(targets)}")
    positions = [state.position(q) for q in targets]
    if len(set(positions)) != len(positions):
        raise ConfigurationError("gate operands must be distinct qubits")
    return _apply_matrix(state, gate.matrix, positions)


def apply_unitary(state: StateVector, matrix, targets: Sequence[QubitLabel]) -> StateVector:
    """Apply an arbitrary 2^k x 2^k unitary to ``targets`` (first target = most significant)."""
    matrix = np.asarray(matrix, dtype=complex)
    targets = tuple(targets)
    if matrix.shape != (1 << len(targets),) * 2:
        raise ConfigurationError("matrix dimension does not match the number of targets")
    positions = [state.position(q) for q in targets]
    if len(set(positions)) != len(positions):
        raise ConfigurationError("targets must be distinct qubits")
    return _apply_matrix(state, matrix, positions)


# -- measurement -----------------------------------------------------------


def _bell_components(state: StateVector, a: QubitLabel, b: QubitLabel):
    ia, ib = state.position(a), state.position(b)
    if ia == ib:
        raise ConfigurationError("Bell measurement needs two distinct qubits")
    table = _index_table(state.num_qubits, (ia, ib))
    comps = _BELL_BRA @ state.amplitudes[table]
    probs = np.einsum("ij,ij->i", comps.conj(), comps).real
    return table, comps, probs


def bell_probabilities(state: StateVector, a: QubitLabel, b: QubitLabel) -> dict[BellOutcome, float]:
    """Born probabilities of the four Bell outcomes on qubits ``a``, ``b``."""
    _, _, probs = _bell_components(state, a, b)
    return {o: float(p) for o, p in zip(BELL_ORDER, probs)}


def _collapse(state, table, comps, probs, k: int) -> StateVector:
    rest = comps[k] / np.sqrt(probs[k])
    out = np.empty_like(state.amplitudes)
    out[table] = np.outer(_BELL_VECTORS[BELL_ORDER[k]], rest)
    return StateVector(state.labels, out, check=False)


def bell_branch(state: StateVector, a: QubitLabel, b: QubitLabel, outcome: BellOutcome) -> tuple[float, StateVector | None]:
    """Deterministic projection onto one Bell outcome.

    Returns the Born probability and the renormalised post-measurement state,
    or ``(0.0, None)`` when the branch has vanishing probability.
    """
    table, comps, probs = _bell_components(state, a, b)
    k = BELL_ORDER.index(BellOutcome(outcome))
    if probs[k] <= ATOL**2:
        return 0.0, None
    return float(probs[k]), _collapse(state, table, comps, probs, k)


def sample_index(probs: np.ndarray, u: float) -> int:
    """Index picked by a uniform ``u`` in [0, 1) against unnormalised weights ``probs``."""
    cum = np.cumsum(probs)
    k = min(int(np.searchsorted(cum, u * cum[-1], side="right")), len(probs) - 1)
    while probs[k] <= 0.0:  # landed on the edge of a zero-width bin
        k -= 1
    return k


def bell_project(state: StateVector, a: QubitLabel, b: QubitLabel, rng: np.random.Generator) -> tuple[BellOutcome, float, StateVector]:
    """Sample a Bell measurement on ``a``, ``b``.

    The measured qubits stay in the register, collapsed onto the observed
    Bell state.  Consumes exactly one uniform draw from ``rng``.
    """
    table, comps, probs = _bell_components(state, a, b)
    total = probs.sum()
    if total <= ATOL**2:
        raise ConfigurationError("cannot measure a zero-norm state")
    k = sample_index(probs, rng.random())
    p = float(probs[k] / total)
    return BELL_ORDER[k], p, _collapse(state, table, comps, probs, k)


def measure_computational(state: StateVector, qubits: Sequence[QubitLabel], rng: np.random.Generator) -> tuple[tuple[int, ...], float, StateVector]:
    """Joint Z-basis readout of ``qubits``; one uniform draw."""
    positions = tuple(state.position(q) for q in qubits)
    if len(set(positions)) != len(positions):
        raise ConfigurationError("duplicate qubits in readout")
    k = len(positions)
    table = _index_table(state.num_qubits, positions)
    flat = state.amplitudes[table]
    probs = np.einsum("ij,ij->i", flat.conj(), flat).real
    total = probs.sum()
    if total <= ATOL**2:
        raise ConfigurationError("cannot measure a zero-norm state")
    idx = sample_index(probs, rng.random())
    p = float(probs[idx] / total)
    out = np.zeros_like(state.amplitudes)
    out[table[idx]] = flat[idx] / np.sqrt(probs[idx])
    bits = tuple(int(c) for c in format(idx, f"0{k}b"))
    return bits, p, StateVector(state.labels, out, check=False)


def computational_branch(state: StateVector, qubits: Sequence[QubitLabel], bits: Sequence[int]) -> tuple[float, StateVector | None]:
    """Deterministic projection of ``qubits`` onto ``bits``; ``(0.0, None)`` if impossible."""
    positions = tuple(state.position(q) for q in qubits)
    if len(bits) != len(positions):
        raise ConfigurationError("one bit per measured qubit is required")
    table = _index_table(state.num_qubits, positions)
    idx = int("".join(str(int(b)) for b in bits), 2)
    row = state.amplitudes[table[idx]]
    p = float(np.vdot(row, row).real)
    if p <= ATOL**2:
        return 0.0, None
    out = np.zeros_like(state.amplitudes)
    out[table[idx]] = row / np.sqrt(p)
    return p, StateVector(state.labels, out, check=False)


# -- analysis --------------------------------------------------------------


def reduced_density(state: StateVector, keep: Iterable[QubitLabel]) -> DensityMatrix:
    """Partial trace of ``|state><state|`` onto ``keep`` (in the order given)."""
    keep = tuple(keep)
    if not keep:
        raise ConfigurationError("reduced_density needs at least one qubit to keep")
    positions = [state.position(q) for q in keep]
    if len(set(positions)) != len(positions):
        raise ConfigurationError("duplicate qubits in keep")
    psi = state.amplitudes[_index_table(state.num_qubits, tuple(positions))]
    rho = psi @ psi.conj().T
    return DensityMatrix(keep, rho, check=False)


_SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_SYSY = np.kron(_SIGMA_Y, _SIGMA_Y)


def concurrence(rho: DensityMatrix | np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    The square-rooted eigenvalues of ``rho (sy x sy) rho* (sy x sy)`` are taken
    as the singular values of ``W^T (sy x sy) W`` with ``rho = W W^dagger``,
    which avoids square roots of rounding noise for pure states.
    """
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise ConfigurationError(f"concurrence needs a 4x4 density matrix, got {m.shape}")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    # eigenvalues this small are rounding noise
    w = np.where(w > 1e-13, w, 0.0)
    weights = v * np.sqrt(w)
    tau = weights.T @ _SYSY @ weights
    lam = np.linalg.svd(tau, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity(rho: DensityMatrix | np.ndarray, target: StateVector | np.ndarray) -> float:
    """<target| rho |target> for a pure target."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    t = target.amplitudes if isinstance(target, StateVector) else np.asarray(target, dtype=complex)
    if m.shape != (t.size, t.size):
        raise ConfigurationError(f"dimension mismatch: rho {m.shape}, target {t.size}")
    return float(np.clip(np.vdot(t, m @ t).real, 0.0, 1.0))


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b>, after aligning ``b`` to ``a``'s register order."""
    if a.labels != b.labels:
        b = b.reorder(a.labels)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def equal_up_to_phase(a: StateVector, b: StateVector, atol: float = ATOL) -> bool:
    """True when ``a`` and ``b`` describe the same ray."""
    if a.labels != b.labels:
        b = b.reorder(a.labels)
    ov = np.vdot(a.amplitudes, b.amplitudes)
    if abs(ov) < 0.5:
        return False
    phase = ov / abs(ov)
    return bool(np.allclose(a.amplitudes * phase, b.amplitudes, atol=atol, rtol=0))


def bell_pair(a: QubitLabel, b: QubitLabel, outcome: BellOutcome = BellOutcome.PSI_PLUS) -> StateVector:
    return StateVector(_check_labels((a, b)), BellOutcome(outcome).vector, check=False)
