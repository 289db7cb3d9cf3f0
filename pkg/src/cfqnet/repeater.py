"""Counterfactual repeater chain.

Layout for ``n``: Alice's photon, interior nodes C1 ... C_{2n+1}, Bob's photon.
Odd nodes hold an entangled electron pair, even nodes a pair of photons.
Each odd node's first electron drives a counterfactual CNOT on the photon
toward Alice, its second electron on the photon toward Bob (2n+2 gates).
The electron pairs are Bell-measured perfectly; the photon pairs at even
nodes go through linear-optical Bell measurements (LOBMs) that only resolve
two of the four Bell states.

Register order is chain order::

    A.p | C1.e1 C1.e2 | C2.p1 C2.p2 | ... | C_{2n+1}.e1 C_{2n+1}.e2 | B.p

Besides trial simulation this module evaluates the closed forms for the
one-shot success probability and the two distribution-time expressions.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cfgate import CfGateModel, cf_cnot_ideal
from .errors import ConfigurationError, DivergenceError
from .protocol import Execution, Op
from .state import (
    ATOL,
    BELL_ORDER,
    BellOutcome,
    Gate,
    QubitLabel,
    StateVector,
    _bell_components,
    _collapse,
    apply_gate,
    bell_pair,
    electron,
    fidelity,
    init_register,
    photon,
    reduced_density,
    sample_index,
)

MAX_CHAIN_N = 3
MAX_ANALYTIC_N = 64

# -- topology --------------------------------------------------------------


@dataclass(frozen=True)
class ChainTopology:
    n: int
    qubits: tuple[QubitLabel, ...]
    gate_placements: tuple[tuple[QubitLabel, QubitLabel], ...]
    electron_bsm_schedule: tuple[tuple[QubitLabel, QubitLabel], ...]
    lobm_schedule: tuple[tuple[QubitLabel, QubitLabel], ...]
    alice: QubitLabel
    bob: QubitLabel

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(f"C{i}" for i in range(1, 2 * self.n + 2))

    @property
    def num_gates(self) -> int:
        return len(self.gate_placements)


def build_chain(n: int) -> ChainTopology:
    """Topology of a chain with ``2n + 1`` interior nodes (``0 <= n <= 3``)."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 0 <= n <= MAX_CHAIN_N:
        raise ConfigurationError(f"chain size n must be an integer in [0, {MAX_CHAIN_N}], got {n!r}")
    n = int(n)
    ids = iter(range(4 * n + 4))
    alice = photon(next(ids), "Alice", "A.p")
    qubits = [alice]
    pairs: dict[int, tuple[QubitLabel, QubitLabel]] = {}
    for i in range(1, 2 * n + 2):
        node = f"C{i}"
        make = electron if i % 2 else photon
        suffix = "e" if i % 2 else "p"
        pair = (make(next(ids), node, f"{node}.{suffix}1"), make(next(ids), node, f"{node}.{suffix}2"))
        pairs[i] = pair
        qubits.extend(pair)
    bob = photon(next(ids), "Bob", "B.p")
    qubits.append(bob)

    placements = []
    for i in range(1, 2 * n + 2, 2):
        left = alice if i == 1 else pairs[i - 1][1]
        right = bob if i == 2 * n + 1 else pairs[i + 1][0]
        placements.append((pairs[i][0], left))
        placements.append((pairs[i][1], right))
    return ChainTopology(
        n=n,
        qubits=tuple(qubits),
        gate_placements=tuple(placements),
        electron_bsm_schedule=tuple(pairs[i] for i in range(1, 2 * n + 2, 2)),
        lobm_schedule=tuple(pairs[i] for i in range(2, 2 * n + 1, 2)),
        alice=alice,
        bob=bob,
    )


# -- trial models ----------------------------------------------------------


@dataclass(frozen=True)
class LobmModel:
    """Which two Bell outcomes a linear-optical analyser can identify."""

    distinguishable: frozenset = frozenset({BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS})

    def __post_init__(self):
        d = frozenset(BellOutcome(o) for o in self.distinguishable)
        if len(d) != 2:
            raise ConfigurationError("a linear-optical Bell measurement resolves exactly two Bell states")
        object.__setattr__(self, "distinguishable", d)


DEFAULT_LOBM = LobmModel()


def gate_models(topology: ChainTopology, models) -> tuple[CfGateModel, ...]:
    """Normalise a scalar probability, a single model, or a per-gate list."""
    if isinstance(models, CfGateModel):
        return (models,) * topology.num_gates
    if isinstance(models, (int, float)):
        return (CfGateModel(float(models)),) * topology.num_gates
    models = tuple(m if isinstance(m, CfGateModel) else CfGateModel(float(m)) for m in models)
    if len(models) == 1:
        return models * topology.num_gates
    if len(models) != topology.num_gates:
        raise ConfigurationError(f"need {topology.num_gates} gate models for n={topology.n}, got {len(models)}")
    return models


@dataclass
class TrialResult:
    success: bool
    failure_stage: str  # "gate", "lobm" or "none"
    outcomes: list[BellOutcome] = field(default_factory=list)
    pauli_frame: tuple[str, str] | None = None
    end_state_fidelity: float | None = None
    log: list[Op] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.success and self.end_state_fidelity is None:
            raise ConfigurationError("a successful trial must carry its end-state fidelity")


_FRAME_NAMES = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "XZ"}


def pauli_frame(outcomes: Sequence[BellOutcome]) -> tuple[int, int]:
    """Accumulated (x, z) frame on Bob's photon: every phi outcome adds an X,
    every minus outcome adds a Z."""
    x = z = 0
    for o in outcomes:
        dx, dz = o.pauli
        x ^= dx
        z ^= dz
    return x, z


def corrected_fidelity(state: StateVector, topology: ChainTopology, frame: tuple[int, int]) -> float:
    """Fidelity of the Alice-Bob pair to psi_plus after undoing ``frame`` on Bob."""
    x, z = frame
    if x:
        state = apply_gate(state, Gate.X, topology.bob)
    if z:
        state = apply_gate(state, Gate.Z, topology.bob)
    rho = reduced_density(state, (topology.alice, topology.bob))
    return fidelity(rho, bell_pair(topology.alice, topology.bob))


def _prepare(topology: ChainTopology) -> Execution:
    run = Execution(init_register(topology.qubits))
    for e1, e2 in topology.electron_bsm_schedule:
        run.gate(Gate.H, e1, kind="prep")
        run.gate(Gate.CNOT, e1, e2, kind="prep")
    return run


def _measurement_schedule(topology: ChainTopology):
    return [("electron_bsm", pair) for pair in topology.electron_bsm_schedule] + [
        ("lobm", pair) for pair in topology.lobm_schedule
    ]


def one_shot_trial(topology: ChainTopology, models, lobm: LobmModel = DEFAULT_LOBM, rng: np.random.Generator | None = None) -> TrialResult:
    """Single attempt at every gate and measurement, on the full statevector.

    Random draws, in order: one per gate whose success probability lies
    strictly inside (0, 1), then one per Bell measurement.
    """
    if rng is None:
        raise ConfigurationError("one_shot_trial needs an explicit random stream")
    models = gate_models(topology, models)
    run = _prepare(topology)
    for (e, p), model in zip(topology.gate_placements, models):
        if not run.cf_cnot(e, p, model, rng):
            return TrialResult(False, "gate", log=run.log)
    outcomes: list[BellOutcome] = []
    for kind, (a, b) in _measurement_schedule(topology):
        outcome, _ = run.bell(a, b, rng, name=kind)
        outcomes.append(outcome)
        if kind == "lobm" and outcome not in lobm.distinguishable:
            return TrialResult(False, "lobm", outcomes, log=run.log)
    frame = pauli_frame(outcomes)
    return TrialResult(
        True,
        "none",
        outcomes,
        pauli_frame=("I", _FRAME_NAMES[frame]),
        end_state_fidelity=corrected_fidelity(run.state, topology, frame),
        log=run.log,
    )


class ChainSimulator:
    """Memoised trial engine for one topology.

    Gate failures are state independent, so every trial whose gates all fire
    reaches the same pre-measurement state, and the state after a given
    prefix of measurement outcomes is always the same too.  Those states are
    computed once on the full statevector and reused; the random draws are
    consumed exactly as in :func:`one_shot_trial`, so both give identical
    results for the same stream.
    """

    def __init__(self, topology: ChainTopology, models, lobm: LobmModel = DEFAULT_LOBM):
        self.topology = topology
        self.models = gate_models(topology, models)
        self.lobm = lobm
        self.schedule = _measurement_schedule(topology)
        self._gated: StateVector | None = None
        self._nodes: dict[tuple[BellOutcome, ...], tuple] = {}
        self._leaf_fidelity: dict[tuple[BellOutcome, ...], float] = {}

    def gated_state(self) -> StateVector:
        if self._gated is None:
            state = _prepare(self.topology).state
            for e, p in self.topology.gate_placements:
                state = cf_cnot_ideal(state, e, p)
            self._gated = state
        return self._gated

    def _state_after(self, prefix: tuple[BellOutcome, ...]) -> StateVector:
        if not prefix:
            return self.gated_state()
        table, comps, probs, states = self._node(prefix[:-1])
        k = BELL_ORDER.index(prefix[-1])
        if states[k] is None:
            states[k] = _collapse(self._state_after(prefix[:-1]), table, comps, probs, k)
        return states[k]

    def _node(self, prefix: tuple[BellOutcome, ...]):
        node = self._nodes.get(prefix)
        if node is None:
            state = self._state_after(prefix)
            a, b = self.schedule[len(prefix)][1]
            table, comps, probs = _bell_components(state, a, b)
            node = (table, comps, probs, [None] * 4)
            self._nodes[prefix] = node
        return node

    def branch_probabilities(self, prefix: tuple[BellOutcome, ...]) -> np.ndarray:
        """Born probabilities of the next measurement given earlier outcomes."""
        probs = self._node(tuple(prefix))[2]
        return probs / probs.sum()

    def leaf_fidelity(self, outcomes: tuple[BellOutcome, ...]) -> float:
        fid = self._leaf_fidelity.get(outcomes)
        if fid is None:
            fid = corrected_fidelity(self._state_after(outcomes), self.topology, pauli_frame(outcomes))
            self._leaf_fidelity[outcomes] = fid
        return fid

    def _gate_log(self, attempts: int, failed: bool) -> list[Op]:
        log = []
        for j, (e, p) in enumerate(self.topology.gate_placements[:attempts]):
            ok = not (failed and j == attempts - 1)
            log.append(Op("cf_cnot", "cf_cnot", (e, p), "applied" if ok else "heralded_loss"))
        return log

    def trial(self, rng: np.random.Generator, keep_log: bool = False) -> TrialResult:
        attempts = 0
        for model in self.models:
            attempts += 1
            q = model.success_probability
            ok = True if q >= 1.0 else False if q <= 0.0 else rng.random() < q
            if not ok:
                return TrialResult(False, "gate", log=self._gate_log(attempts, True) if keep_log else [])
        log = self._gate_log(attempts, False) if keep_log else []
        prefix: tuple[BellOutcome, ...] = ()
        for kind, (a, b) in self.schedule:
            probs = self._node(prefix)[2]
            outcome = BELL_ORDER[sample_index(probs, rng.random())]
            prefix += (outcome,)
            if keep_log:
                log.append(Op("bell", kind, (a, b), outcome.value))
            if kind == "lobm" and outcome not in self.lobm.distinguishable:
                return TrialResult(False, "lobm", list(prefix), log=log)
        frame = pauli_frame(prefix)
        return TrialResult(
            True,
            "none",
            list(prefix),
            pauli_frame=("I", _FRAME_NAMES[frame]),
            end_state_fidelity=self.leaf_fidelity(prefix),
            log=log,
        )


@dataclass(frozen=True)
class Branch:
    outcomes: tuple[BellOutcome, ...]
    probability: float
    success: bool
    fidelity: float | None


def enumerate_branches(topology: ChainTopology, models=1.0, lobm: LobmModel = DEFAULT_LOBM) -> list[Branch]:
    """Exhaustive measurement tree of one trial (gate-stage failure excluded).

    Branch probabilities include the probability that every gate fires, so
    the successful branches sum to the one-shot success probability.
    """
    models = gate_models(topology, models)
    p_gates = math.prod(m.success_probability for m in models)
    schedule = _measurement_schedule(topology)
    state = _prepare(topology).state
    for e, p in topology.gate_placements:
        state = cf_cnot_ideal(state, e, p)
    out: list[Branch] = []

    def walk(state: StateVector, depth: int, prefix: tuple, prob: float) -> None:
        if depth == len(schedule):
            frame = pauli_frame(prefix)
            out.append(Branch(prefix, prob, True, corrected_fidelity(state, topology, frame)))
            return
        kind, (a, b) = schedule[depth]
        table, comps, probs = _bell_components(state, a, b)
        for k, outcome in enumerate(BELL_ORDER):
            if probs[k] <= ATOL**2:
                continue
            q = prob * float(probs[k])
            if kind == "lobm" and outcome not in lobm.distinguishable:
                out.append(Branch(prefix + (outcome,), q, False, None))
                continue
            walk(_collapse(state, table, comps, probs, k), depth + 1, prefix + (outcome,), q)

    walk(state, 0, (), p_gates)
    return out


# -- Monte Carlo -----------------------------------------------------------


@dataclass
class MonteCarloStats:
    trials: int
    successes: int
    success_rate: float
    stderr: float
    stage_breakdown: dict[str, int]
    mean_fidelity_given_success: float | None
    min_fidelity_given_success: float | None
    outcome_counts: dict[str, int]

    def z_score(self, expected: float) -> float:
        """Deviation from ``expected`` in binomial standard errors under ``expected``."""
        sigma = math.sqrt(expected * (1 - expected) / self.trials)
        diff = self.success_rate - expected
        if sigma == 0.0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / sigma


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for trial ``index``, fixed by ``(master_seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def _run_chunk(args) -> list[tuple]:
    n, models, lobm, master_seed, start, stop = args
    sim = ChainSimulator(build_chain(n), models, lobm)
    out = []
    for i in range(start, stop):
        r = sim.trial(trial_rng(master_seed, i))
        out.append((r.success, r.failure_stage, tuple(o.value for o in r.outcomes), r.end_state_fidelity))
    return out


def monte_carlo(topology: ChainTopology, models, trials: int, master_seed: int, lobm: LobmModel = DEFAULT_LOBM, workers: int = 1) -> MonteCarloStats:
    """Estimate the one-shot success rate from ``trials`` independent trials.

    Trial ``i`` uses the stream ``trial_rng(master_seed, i)``; records are
    reduced in trial order, so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ConfigurationError("monte_carlo needs at least one trial")
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    models = gate_models(topology, models)
    bounds = np.linspace(0, trials, min(workers, trials) + 1).astype(int)
    chunks = [(topology.n, models, lobm, master_seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    if len(chunks) == 1:
        records = _run_chunk(chunks[0])
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            records = [rec for part in pool.map(_run_chunk, chunks) for rec in part]

    stages = Counter({"none": 0, "gate": 0, "lobm": 0})
    outcome_counts = Counter({o.value: 0 for o in BELL_ORDER})
    fids = []
    for success, stage, outcomes, fid in records:
        stages[stage] += 1
        outcome_counts.update(outcomes)
        if success:
            fids.append(fid)
    successes = stages["none"]
    rate = successes / trials
    return MonteCarloStats(
        trials=trials,
        successes=successes,
        success_rate=rate,
        stderr=math.sqrt(rate * (1 - rate) / trials),
        stage_breakdown=dict(stages),
        mean_fidelity_given_success=math.fsum(fids) / len(fids) if fids else None,
        min_fidelity_given_success=min(fids) if fids else None,
        outcome_counts=dict(outcome_counts),
    )


# -- closed forms ----------------------------------------------------------


def _check_n(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 0 <= n <= MAX_ANALYTIC_N:
        raise ConfigurationError(f"n must be an integer in [0, {MAX_ANALYTIC_N}], got {n!r}")
    return int(n)


def _check_unit(name: str, values: Sequence[float]) -> None:
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ConfigurationError(f"{name} must lie in [0, 1], got {v!r}")


def _check_link(L0: float, c: float) -> None:
    if not L0 > 0 or not c > 0:
        raise ConfigurationError(f"L0 and c must be positive, got L0={L0!r}, c={c!r}")


def p_eff(n: int, gate_probs: Sequence[float]) -> float:
    """One-shot success probability: ``2**-n`` times the product of the 2n+2 gate probabilities."""
    n = _check_n(n)
    gate_probs = [float(p) for p in gate_probs]
    if len(gate_probs) != 2 * n + 2:
        raise ConfigurationError(f"n={n} needs {2 * n + 2} gate probabilities, got {len(gate_probs)}")
    _check_unit("gate probabilities", gate_probs)
    return math.prod(gate_probs) / 2**n


def t_tot_nodes(n: int, L0: float, c: float, node_probs: Sequence[float]) -> float:
    """Mean distribution time from per-node swap probabilities, in seconds:
    ``(3/2)**(2n+1) * L0/c / prod(node_probs)``."""
    n = _check_n(n)
    _check_link(L0, c)
    node_probs = [float(p) for p in node_probs]
    if len(node_probs) != 2 * n + 1:
        raise ConfigurationError(f"n={n} needs {2 * n + 1} node probabilities, got {len(node_probs)}")
    _check_unit("node probabilities", node_probs)
    denom = math.prod(node_probs)
    if denom == 0.0:
        raise DivergenceError("a node with zero swap probability never completes")
    t = 1.5 ** (2 * n + 1) * (L0 / c) / denom
    if not math.isfinite(t):
        raise DivergenceError("distribution time overflows")
    return t


def t_tot_eff(n: int, L0: float, c: float, eta_D: float, eta_M: float, eta_t: float) -> float:
    """Mean distribution time from detection, memory and transmission efficiencies, in seconds:
    ``3**(2n+1) / 2**(n+1) * L0/c / ((eta_D*eta_M)**(3n+2) * eta_t**(n+1))``."""
    n = _check_n(n)
    _check_link(L0, c)
    _check_unit("efficiencies", (eta_D, eta_M, eta_t))
    denom = (eta_D * eta_M) ** (3 * n + 2) * eta_t ** (n + 1)
    if denom == 0.0:
        raise DivergenceError("zero efficiency gives an infinite distribution time")
    t = 3.0 ** (2 * n + 1) / 2.0 ** (n + 1) * (L0 / c) / denom
    if not math.isfinite(t):
        raise DivergenceError("distribution time overflows")
    return t


def consistency_16_17(n: int, L0: float, c: float, eta_D: float, eta_M: float, eta_t: float) -> float:
    """Relative gap between the two time formulas when the node probabilities
    multiply to ``2**-n (eta_D eta_M)**(3n+2) eta_t**(n+1)``.

    The whole product is placed on the first node; the others are 1.
    """
    n = _check_n(n)
    target = t_tot_eff(n, L0, c, eta_D, eta_M, eta_t)
    first = (eta_D * eta_M) ** (3 * n + 2) * eta_t ** (n + 1) / 2**n
    nodes = [first] + [1.0] * (2 * n)
    return abs(t_tot_nodes(n, L0, c, nodes) - target) / target
