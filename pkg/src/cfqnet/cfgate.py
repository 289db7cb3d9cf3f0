"""Counterfactual CNOT gate layer.

The H- and V-variant CQZE setups act on an (electron, photon) pair:

    electron   photon    output
    pass       I         I
    pass       I+        loss  (photon never makes it out)
    block      I         I+
    block      I+        I

where ``I`` is H for the H-variant and V for the V-variant and ``I+`` is
the other polarisation.  Composing both variants gives the ideal
counterfactual CNOT, which in binary labels is a plain CNOT with the
electron as control.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .state import ATOL, Gate, QubitLabel, StateVector, _apply_matrix


class CqzeVariant(str, enum.Enum):
    H_VARIANT = "H"
    V_VARIANT = "V"

    @property
    def pass_bit(self) -> int:
        """Binary value of the photon polarisation that passes unchanged."""
        return 0 if self is CqzeVariant.H_VARIANT else 1


@dataclass(frozen=True)
class CfGateModel:
    """Heralded-failure model of a counterfactual CNOT.

    ``success_probability`` is the per-gate probability that the gate fires;
    otherwise the enclosing trial is aborted.
    """

    success_probability: float = 1.0
    failure_mode: str = "abort_trial"

    def __post_init__(self):
        p = self.success_probability
        if not (0.0 <= p <= 1.0) or p != p:
            raise ConfigurationError(f"success probability must lie in [0, 1], got {p!r}")
        if self.failure_mode != "abort_trial":
            raise ConfigurationError(f"unsupported failure mode {self.failure_mode!r}")


IDEAL = CfGateModel(1.0)


@dataclass(frozen=True)
class GateResult:
    """Outcome of a (possibly lossy) gate: either the new state or a heralded loss."""

    applied: bool
    state: StateVector | None = None

    def __post_init__(self):
        if self.applied != (self.state is not None):
            raise ConfigurationError("an applied GateResult carries a state; a loss carries none")

    @property
    def kind(self) -> str:
        return "applied" if self.applied else "heralded_loss"

    @classmethod
    def loss(cls) -> "GateResult":
        return cls(False, None)


def _check_roles(state: StateVector, e: QubitLabel, p: QubitLabel) -> tuple[int, int]:
    if not e.is_electron:
        raise ConfigurationError(f"control {e} must be an electron, not a {e.role.value}")
    if not p.is_photon:
        raise ConfigurationError(f"target {p} must be a photon, not a {p.role.value}")
    ie, ip = state.position(e), state.position(p)
    if ie == ip:
        raise ConfigurationError("control and target must differ")
    return ie, ip


def _pair_view(state: StateVector, ie: int, ip: int) -> np.ndarray:
    # axes 0, 1 = electron, photon
    return np.moveaxis(state.tensor(), (ie, ip), (0, 1))


def cqze_loss_probability(variant: CqzeVariant | str, state: StateVector, e: QubitLabel, p: QubitLabel) -> float:
    """Weight of the |pass>|I+> component, i.e. the chance the setup loses the photon."""
    variant = CqzeVariant(variant)
    ie, ip = _check_roles(state, e, p)
    comp = _pair_view(state, ie, ip)[0, 1 - variant.pass_bit]
    return float(np.vdot(comp, comp).real)


def cqze_map(variant: CqzeVariant | str, state: StateVector, e: QubitLabel, p: QubitLabel, rng: np.random.Generator | None = None) -> GateResult:
    """Apply one CQZE setup to the (electron, photon) pair.

    The loss branch is resolved by Born sampling: with probability
    :func:`cqze_loss_probability` the result is a heralded loss, otherwise the
    loss component is projected out, the rest renormalised, and the table
    applied.  ``rng`` is only consulted when the loss probability lies strictly
    between 0 and 1.
    """
    variant = CqzeVariant(variant)
    ie, ip = _check_roles(state, e, p)
    t = _pair_view(state, ie, ip).copy()
    keep, lose = variant.pass_bit, 1 - variant.pass_bit
    lost = t[0, lose]
    p_loss = float(np.vdot(lost, lost).real)
    if p_loss >= 1.0 - ATOL:
        return GateResult.loss()
    if p_loss > ATOL**2:
        if rng is None:
            raise ConfigurationError("a random stream is needed to resolve a partial loss branch")
        if rng.random() < p_loss:
            return GateResult.loss()
        t[0, lose] = 0.0
        t /= np.sqrt(1.0 - p_loss)
    # |block>|I> <-> |block>|I+>; the |pass>|I> block is untouched
    t[1, [keep, lose]] = t[1, [lose, keep]]
    t = np.moveaxis(t, (0, 1), (ie, ip))
    return GateResult(True, StateVector(state.labels, t.reshape(-1), check=False))


def cf_cnot_ideal(state: StateVector, e: QubitLabel, p: QubitLabel) -> StateVector:
    """Loss-free counterfactual CNOT: |pass> leaves the photon alone, |block> swaps H and V."""
    ie, ip = _check_roles(state, e, p)
    return _apply_matrix(state, Gate.CNOT.matrix, (ie, ip))


def cf_cnot(state: StateVector, e: QubitLabel, p: QubitLabel, model: CfGateModel, rng: np.random.Generator) -> GateResult:
    """Probabilistic counterfactual CNOT with state-independent heralded failure.

    Draws one uniform from ``rng`` unless the model is deterministic.
    """
    _check_roles(state, e, p)
    q = model.success_probability
    if q >= 1.0:
        ok = True
    elif q <= 0.0:
        ok = False
    else:
        ok = rng.random() < q
    if not ok:
        return GateResult.loss()
    return GateResult(True, cf_cnot_ideal(state, e, p))
