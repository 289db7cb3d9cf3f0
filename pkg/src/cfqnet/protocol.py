"""Three-party counterfactual entanglement transmission.

Charlie holds two electrons (e1, e2), Alice and Bob one photon each (p1, p2).
Charlie entangles his electrons, couples e1 -> p1 and e2 -> p2 through
counterfactual CNOTs and Bell-measures the electrons, which leaves the two
photons entangled even though they never interacted.

Checkpoints::

    T0  |g g>_e |H H>_p                      (binary |1 1 0 0>)
    T1  (|00> + |11>)_e / sqrt(2) |H H>_p
    T2  (|00>_e |00>_p + |11>_e |11>_p) / sqrt(2)
    T3  psi_plus_e psi_plus_p  or  psi_minus_e psi_minus_p, each with probability 1/2
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cfgate import IDEAL, CfGateModel, cf_cnot, cf_cnot_ideal
from .errors import ConfigurationError
from .state import (
    ATOL,
    BELL_ORDER,
    BellOutcome,
    DensityMatrix,
    Gate,
    QubitLabel,
    StateVector,
    apply_gate,
    apply_unitary,
    bell_branch,
    bell_project,
    computational_branch,
    concurrence,
    electron,
    fidelity,
    from_terms,
    init_register,
    measure_computational,
    photon,
    reduced_density,
)

MAX_GHZ_PARTIES = 8

POLARIZATIONS = {"H": (1.0 + 0j, 0.0 + 0j), "V": (0.0 + 0j, 1.0 + 0j)}


# -- operation log ---------------------------------------------------------


@dataclass(frozen=True)
class Op:
    """One executed operation: ``kind`` is prep, gate, cf_cnot, bell or readout."""

    kind: str
    name: str
    qubits: tuple[QubitLabel, ...]
    outcome: str | None = None


class Execution:
    """A state plus the log of everything done to it."""

    def __init__(self, state: StateVector):
        self.state = state
        self.log: list[Op] = []

    def gate(self, gate: Gate | str, *qubits: QubitLabel, kind: str = "gate") -> None:
        self.state = apply_gate(self.state, gate, qubits)
        self.log.append(Op(kind, Gate(gate).value, qubits))

    def prepare(self, q: QubitLabel, amps: tuple[complex, complex]) -> None:
        lam, mu = amps
        # unitary whose first column is (lam, mu)
        u = np.array([[lam, -np.conj(mu)], [mu, np.conj(lam)]], dtype=complex)
        self.state = apply_unitary(self.state, u, (q,))
        self.log.append(Op("prep", "rotate", (q,)))

    def cf_cnot(self, e: QubitLabel, p: QubitLabel, model: CfGateModel, rng) -> bool:
        res = cf_cnot(self.state, e, p, model, rng)
        self.log.append(Op("cf_cnot", "cf_cnot", (e, p), res.kind))
        if res.applied:
            self.state = res.state
        return res.applied

    def bell(self, a: QubitLabel, b: QubitLabel, rng, name: str = "bell") -> tuple[BellOutcome, float]:
        outcome, prob, self.state = bell_project(self.state, a, b, rng)
        self.log.append(Op("bell", name, (a, b), outcome.value))
        return outcome, prob


def photons_isolated(log: Sequence[Op], placements: dict[QubitLabel, QubitLabel]) -> bool:
    """True when no operation joins two photons and every photon is only
    touched by its own counterfactual CNOT (``placements`` maps photon -> electron)."""
    for op in log:
        photons = [q for q in op.qubits if q.is_photon]
        if op.kind == "prep":
            continue
        if len(photons) > 1:
            return False
        if not photons:
            continue
        p = photons[0]
        if op.kind != "cf_cnot" or placements.get(p) != op.qubits[0]:
            return False
    return True


# -- configuration ---------------------------------------------------------


def polarization(token) -> tuple[complex, complex]:
    """``'H'``, ``'V'`` or an explicit ``(lambda, mu)`` amplitude pair."""
    if isinstance(token, str):
        try:
            return POLARIZATIONS[token.upper()]
        except KeyError:
            raise ConfigurationError(f"unknown polarization {token!r}; expected H or V") from None
    lam, mu = (complex(x) for x in token)
    if abs(abs(lam) ** 2 + abs(mu) ** 2 - 1.0) > ATOL:
        raise ConfigurationError(f"polarization amplitudes ({lam}, {mu}) are not normalised")
    return lam, mu


@dataclass(frozen=True)
class ProtocolConfig:
    photon_polarizations: tuple = ("H", "H")
    gate_model: CfGateModel = IDEAL
    seed: int = 0

    def __post_init__(self):
        pols = tuple(self.photon_polarizations)
        if len(pols) != 2:
            raise ConfigurationError("exactly two photon polarizations are needed")
        object.__setattr__(self, "photon_polarizations", tuple(polarization(p) for p in pols))


@dataclass
class ProtocolResult:
    aborted: bool
    electron_outcome: BellOutcome | None = None
    outcome_probability: float | None = None
    photon_state: DensityMatrix | None = None
    photon_concurrence: float | None = None
    counterfactual_structure_ok: bool = True
    log: list[Op] = field(default_factory=list, repr=False)


class Register:
    """Qubits of the three-party protocol in the order e1, e2, p1, p2."""

    e1 = electron(0, "Charlie", "e1")
    e2 = electron(1, "Charlie", "e2")
    p1 = photon(2, "Alice", "p1")
    p2 = photon(3, "Bob", "p2")
    labels = (e1, e2, p1, p2)
    electrons = (e1, e2)
    photons = (p1, p2)


R = Register


def _prepare_t0(config: ProtocolConfig) -> Execution:
    run = Execution(init_register(R.labels))
    # |g> is binary |1>
    run.gate(Gate.X, R.e1, kind="prep")
    run.gate(Gate.X, R.e2, kind="prep")
    for q, amps in zip(R.photons, config.photon_polarizations):
        if amps != POLARIZATIONS["H"]:
            run.prepare(q, amps)
    return run


def energy_basis_entangle(run: Execution, electrons: Sequence[QubitLabel]) -> None:
    """Hadamard + CNOT fan-out written in Charlie's energy basis (|g> as the
    reference level), so ``|g...g>`` becomes ``(|g...g> + |e'...e'>)/sqrt(2)``.

    In binary labels this is the ordinary circuit conjugated by X on every
    electron.
    """
    for q in electrons:
        run.gate(Gate.X, q)
    run.gate(Gate.H, electrons[0])
    for q in electrons[1:]:
        run.gate(Gate.CNOT, electrons[0], q)
    for q in electrons:
        run.gate(Gate.X, q)


def checkpoint_states(config: ProtocolConfig | None = None) -> dict:
    """Exact joint states at T0, T1, T2 and every non-vanishing T3 branch.

    ``result["T3"]`` maps each possible electron outcome to
    ``(probability, post-measurement state)``.
    """
    config = config or ProtocolConfig()
    if config.gate_model.success_probability != 1.0:
        raise ConfigurationError("checkpoint states are defined for loss-free gates only")
    run = _prepare_t0(config)
    out = {"T0": run.state}
    energy_basis_entangle(run, R.electrons)
    out["T1"] = run.state
    t2 = cf_cnot_ideal(run.state, R.e1, R.p1)
    t2 = cf_cnot_ideal(t2, R.e2, R.p2)
    out["T2"] = t2
    branches = {}
    for outcome in BELL_ORDER:
        p, post = bell_branch(t2, R.e1, R.e2, outcome)
        if post is not None:
            branches[outcome] = (p, post)
    out["T3"] = branches
    return out


def expected_checkpoints(config: ProtocolConfig | None = None) -> dict:
    """Closed-form checkpoint states, written out term by term (no simulation).

    For photon amplitudes (lam, mu) the T2 state is
    ``sum_x |xx>_e (X^x photon1)(X^x photon2) / sqrt(2)`` and a T3 branch with
    electron Bell vector ``c`` leaves the photons in
    ``sum_x conj(c_xx) (X^x photon1)(X^x photon2)`` renormalised.
    """
    config = config or ProtocolConfig()
    (l1, m1), (l2, m2) = config.photon_polarizations
    s = 1 / np.sqrt(2)
    ph1 = {"0": l1, "1": m1}
    ph2 = {"0": l2, "1": m2}
    flip = {"0": "1", "1": "0"}

    def photons(x: str, a: str, b: str) -> tuple[str, str]:
        return (flip[a], flip[b]) if x == "1" else (a, b)

    t0 = {}
    t1 = {}
    t2 = {}
    for a, b in itertools.product("01", repeat=2):
        amp = ph1[a] * ph2[b]
        if amp == 0:
            continue
        t0["11" + a + b] = amp
        for x in "01":
            t1[x + x + a + b] = s * amp
            fa, fb = photons(x, a, b)
            t2[x + x + fa + fb] = t2.get(x + x + fa + fb, 0) + s * amp
    out = {
        "T0": from_terms(R.labels, t0),
        "T1": from_terms(R.labels, t1),
        "T2": from_terms(R.labels, t2),
    }
    branches = {}
    for outcome in BELL_ORDER:
        c = outcome.vector
        pair = {}
        for a, b in itertools.product("01", repeat=2):
            amp = ph1[a] * ph2[b]
            for x, cxx in (("0", c[0]), ("1", c[3])):
                fa, fb = photons(x, a, b)
                pair[fa + fb] = pair.get(fa + fb, 0) + np.conj(cxx) * s * amp
        w = sum(abs(v) ** 2 for v in pair.values())
        if w <= ATOL**2:
            continue
        norm = np.sqrt(w)
        terms = {}
        for i, ev in enumerate(c):
            if abs(ev) == 0:
                continue
            ebits = format(i, "02b")
            for pbits, v in pair.items():
                terms[ebits + pbits] = terms.get(ebits + pbits, 0) + ev * v / norm
        branches[outcome] = (float(w), from_terms(R.labels, terms))
    out["T3"] = branches
    return out


def run_transmission(config: ProtocolConfig | None = None) -> ProtocolResult:
    """One sampled run of the protocol, T0 through the electron Bell measurement."""
    config = config or ProtocolConfig()
    rng = np.random.default_rng(config.seed)
    run = _prepare_t0(config)
    energy_basis_entangle(run, R.electrons)
    placements = {R.p1: R.e1, R.p2: R.e2}
    for e, p in ((R.e1, R.p1), (R.e2, R.p2)):
        if not run.cf_cnot(e, p, config.gate_model, rng):
            return ProtocolResult(
                aborted=True,
                counterfactual_structure_ok=photons_isolated(run.log, placements),
                log=run.log,
            )
    outcome, prob = run.bell(R.e1, R.e2, rng)
    rho = reduced_density(run.state, R.photons)
    return ProtocolResult(
        aborted=False,
        electron_outcome=outcome,
        outcome_probability=prob,
        photon_state=rho,
        photon_concurrence=concurrence(rho),
        counterfactual_structure_ok=photons_isolated(run.log, placements),
        log=run.log,
    )


# -- GHZ generalisation ----------------------------------------------------


@dataclass
class GhzResult:
    k: int
    aborted: bool
    outcome_bits: tuple[int, ...] | None = None
    outcome_probability: float | None = None
    photon_state: DensityMatrix | None = None
    corrected_fidelity: float | None = None
    counterfactual_structure_ok: bool = True
    log: list[Op] = field(default_factory=list, repr=False)

    @property
    def bell_outcome(self) -> BellOutcome | None:
        """For k = 2 the GHZ-basis readout is a Bell measurement; map it back."""
        if self.k != 2 or self.outcome_bits is None:
            return None
        s, b = self.outcome_bits
        return BellOutcome.from_pauli(b, s)


def ghz_register(k: int) -> tuple[tuple[QubitLabel, ...], tuple[QubitLabel, ...]]:
    if not 2 <= k <= MAX_GHZ_PARTIES:
        raise ConfigurationError(f"GHZ transmission supports 2 <= k <= {MAX_GHZ_PARTIES}, got {k}")
    electrons = tuple(electron(i, "Charlie", f"e{i + 1}") for i in range(k))
    photons = tuple(photon(k + i, f"party{i + 1}", f"p{i + 1}") for i in range(k))
    return electrons, photons


def ghz_state(qubits: Sequence[QubitLabel]) -> StateVector:
    k = len(qubits)
    s = 1 / np.sqrt(2)
    return from_terms(qubits, {"0" * k: s, "1" * k: s})


def _ghz_prepared(k: int, electrons, photons) -> Execution:
    run = Execution(init_register(electrons + photons))
    for q in electrons:
        run.gate(Gate.X, q, kind="prep")
    energy_basis_entangle(run, electrons)
    return run


def _ghz_disentangle(run: Execution, electrons) -> None:
    for q in electrons[1:]:
        run.gate(Gate.CNOT, electrons[0], q)
    run.gate(Gate.H, electrons[0])


def ghz_frame_fidelity(state: StateVector, photons, bits: Sequence[int]) -> tuple[DensityMatrix, float]:
    """Photon reduced state and its fidelity to GHZ after undoing the Pauli frame.

    Readout bit 0 (sign) becomes a Z on the first photon; bit i > 0 becomes an
    X on photon i.
    """
    corrected = state
    for q, b in zip(photons[1:], bits[1:]):
        if b:
            corrected = apply_gate(corrected, Gate.X, q)
    if bits[0]:
        corrected = apply_gate(corrected, Gate.Z, photons[0])
    rho = reduced_density(state, photons)
    rho_c = reduced_density(corrected, photons)
    return rho, fidelity(rho_c, ghz_state(photons))


def run_ghz_transmission(k: int, config: ProtocolConfig | None = None) -> GhzResult:
    """Transmit a k-electron GHZ state onto k independent H photons."""
    config = config or ProtocolConfig()
    electrons, photons = ghz_register(k)
    rng = np.random.default_rng(config.seed)
    run = _ghz_prepared(k, electrons, photons)
    placements = dict(zip(photons, electrons))
    for e, p in zip(electrons, photons):
        if not run.cf_cnot(e, p, config.gate_model, rng):
            return GhzResult(k, True, counterfactual_structure_ok=photons_isolated(run.log, placements), log=run.log)
    _ghz_disentangle(run, electrons)
    bits, prob, run.state = measure_computational(run.state, electrons, rng)
    run.log.append(Op("readout", "z", electrons, "".join(map(str, bits))))
    rho, fid = ghz_frame_fidelity(run.state, photons, bits)
    return GhzResult(
        k,
        False,
        outcome_bits=bits,
        outcome_probability=prob,
        photon_state=rho,
        corrected_fidelity=fid,
        counterfactual_structure_ok=photons_isolated(run.log, placements),
        log=run.log,
    )


def ghz_branches(k: int) -> list[tuple[tuple[int, ...], float, float]]:
    """Every readout pattern with non-zero probability as ``(bits, probability, corrected fidelity)``."""
    electrons, photons = ghz_register(k)
    run = _ghz_prepared(k, electrons, photons)
    state = run.state
    for e, p in zip(electrons, photons):
        state = cf_cnot_ideal(state, e, p)
    run.state = state
    _ghz_disentangle(run, electrons)
    out = []
    for bits in itertools.product((0, 1), repeat=k):
        p, post = computational_branch(run.state, electrons, bits)
        if post is None:
            continue
        _, fid = ghz_frame_fidelity(post, photons, bits)
        out.append((bits, p, fid))
    return out
