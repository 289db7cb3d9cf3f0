import numpy as np
import pytest

from cfqnet.cfgate import CfGateModel, cf_cnot_ideal
from cfqnet.errors import ConfigurationError
from cfqnet.protocol import (
    Op,
    ProtocolConfig,
    R,
    checkpoint_states,
    expected_checkpoints,
    ghz_branches,
    photons_isolated,
    run_ghz_transmission,
    run_transmission,
)
from cfqnet.state import BellOutcome, bell_pair, equal_up_to_phase, fidelity, from_terms, reduced_density
from tests.oracles import S, cnot_by_relabel

PSI = (BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS)


def test_t0_is_ground_electrons_and_h_photons():
    t0 = checkpoint_states()["T0"]
    assert t0.amplitude("1100") == pytest.approx(1.0)


def test_t1_is_electron_bell_pair():
    t1 = checkpoint_states()["T1"]
    assert equal_up_to_phase(t1, from_terms(R.labels, {"0000": S, "1100": S}))


def test_t2_in_both_register_orders():
    t2 = checkpoint_states()["T2"]
    by_role = from_terms(R.labels, {"0000": S, "1111": S})
    assert equal_up_to_phase(t2, by_role)
    interleaved = from_terms((R.e1, R.p1, R.e2, R.p2), {"0000": S, "1111": S})
    assert equal_up_to_phase(t2.reorder(interleaved.labels), interleaved)


def test_t2_is_two_cnots_applied_to_t1():
    cp = checkpoint_states()
    composed = cf_cnot_ideal(cf_cnot_ideal(cp["T1"], R.e1, R.p1), R.e2, R.p2)
    assert equal_up_to_phase(composed, cp["T2"])


def test_t3_branches_carry_the_bell_state():
    branches = checkpoint_states()["T3"]
    assert set(branches) == set(PSI)
    for outcome in PSI:
        p, post = branches[outcome]
        assert p == pytest.approx(0.5, abs=1e-12)
        rho = reduced_density(post, R.photons)
        assert fidelity(rho, bell_pair(R.p1, R.p2, outcome)) == pytest.approx(1.0, abs=1e-10)


def test_checkpoints_need_loss_free_gates():
    with pytest.raises(ConfigurationError):
        checkpoint_states(ProtocolConfig(gate_model=CfGateModel(0.9)))


@pytest.mark.parametrize("pols", [("H", "H"), ("V", "V"), ("H", "V"), ("V", "H"), ((0.6, 0.8j), "H"), ((S, S), (0.8, -0.6))])
def test_simulation_matches_closed_forms(pols):
    config = ProtocolConfig(pols)
    got, want = checkpoint_states(config), expected_checkpoints(config)
    for t in ("T0", "T1", "T2"):
        assert equal_up_to_phase(got[t], want[t])
    assert set(got["T3"]) == set(want["T3"])
    for outcome, (p, state) in want["T3"].items():
        assert got["T3"][outcome][0] == pytest.approx(p, abs=1e-10)
        assert equal_up_to_phase(got["T3"][outcome][1], state)


def test_vv_is_cross_polarized():
    cp = checkpoint_states(ProtocolConfig(("V", "V")))
    # derived by hand: (|00>_e|11>_p + |11>_e|00>_p)/sqrt(2)
    assert equal_up_to_phase(cp["T2"], from_terms(R.labels, {"0011": S, "1100": S}))
    # psi+ on electrons: photons (|11> + |00>)/sqrt(2) = psi+
    # psi- on electrons: photons (|11> - |00>)/sqrt(2) = -psi-
    for outcome in PSI:
        p, post = cp["T3"][outcome]
        assert p == pytest.approx(0.5)
        rho = reduced_density(post, R.photons)
        assert fidelity(rho, bell_pair(R.p1, R.p2, outcome)) == pytest.approx(1.0, abs=1e-10)
        r = run_transmission(ProtocolConfig(("V", "V"), seed=3))
        assert r.photon_concurrence == pytest.approx(1.0, abs=1e-10)


def test_general_photon_polarization():
    lam, mu = 0.6, 0.8j
    t2 = checkpoint_states(ProtocolConfig(((lam, mu), "H")))["T2"]
    # brute force: build T1 with kron, apply both CNOTs by basis relabelling
    t1 = np.kron(np.kron([S, 0, 0, S], [lam, mu]), [1, 0])
    oracle = cnot_by_relabel(cnot_by_relabel(t1, 0, 2), 1, 3)
    np.testing.assert_allclose(t2.amplitudes, oracle, atol=1e-12)
    # ideal gate on the (e1, p1) pair, with e2 = e1 and p2 = e1
    assert t2.amplitude("0000") == pytest.approx(lam * S)
    assert t2.amplitude("0010") == pytest.approx(mu * S)
    assert t2.amplitude("1111") == pytest.approx(lam * S)
    assert t2.amplitude("1101") == pytest.approx(mu * S)


def test_run_transmission_hh_branches():
    seen = set()
    for seed in range(40):
        r = run_transmission(ProtocolConfig(seed=seed))
        assert not r.aborted
        assert r.electron_outcome in PSI
        assert r.photon_concurrence == pytest.approx(1.0, abs=1e-10)
        assert fidelity(r.photon_state, bell_pair(R.p1, R.p2, r.electron_outcome)) == pytest.approx(1.0, abs=1e-10)
        assert r.counterfactual_structure_ok
        seen.add(r.electron_outcome)
    assert seen == set(PSI)


def test_run_transmission_is_deterministic():
    a = run_transmission(ProtocolConfig(seed=99, gate_model=CfGateModel(0.7)))
    b = run_transmission(ProtocolConfig(seed=99, gate_model=CfGateModel(0.7)))
    assert (a.aborted, a.electron_outcome) == (b.aborted, b.electron_outcome)


def test_outcome_statistics():
    n = 100_000
    counts = {o: 0 for o in BellOutcome}
    for i in range(n):
        counts[run_transmission(ProtocolConfig(seed=(2024, i))).electron_outcome] += 1
    tol = 3 * np.sqrt(0.25 / n)
    assert abs(counts[BellOutcome.PSI_PLUS] / n - 0.5) <= tol
    assert abs(counts[BellOutcome.PSI_MINUS] / n - 0.5) <= tol
    assert counts[BellOutcome.PHI_PLUS] == counts[BellOutcome.PHI_MINUS] == 0


def test_abort_frequency():
    n, p = 20_000, 0.8
    aborted = sum(run_transmission(ProtocolConfig(gate_model=CfGateModel(p), seed=(7, i))).aborted for i in range(n))
    q = 1 - p**2
    assert abs(aborted / n - q) <= 3 * np.sqrt(q * (1 - q) / n)


def test_log_structure():
    r = run_transmission(ProtocolConfig(seed=1))
    cnots = [op for op in r.log if op.kind == "cf_cnot"]
    assert [op.qubits for op in cnots] == [(R.e1, R.p1), (R.e2, R.p2)]
    for op in r.log:
        assert sum(q.is_photon for q in op.qubits) <= 1


def test_photons_isolated_detects_violations():
    placements = {R.p1: R.e1, R.p2: R.e2}
    assert not photons_isolated([Op("gate", "CNOT", (R.p1, R.p2))], placements)
    assert not photons_isolated([Op("cf_cnot", "cf_cnot", (R.e2, R.p1))], placements)
    assert not photons_isolated([Op("gate", "H", (R.p1,))], placements)
    assert photons_isolated([Op("cf_cnot", "cf_cnot", (R.e1, R.p1))], placements)


def test_invalid_polarization():
    with pytest.raises(ConfigurationError):
        ProtocolConfig(("H", "X"))
    with pytest.raises(ConfigurationError):
        ProtocolConfig(((1, 1), "H"))


# -- GHZ -------------------------------------------------------------------


def test_ghz_k2_reduces_to_bell_protocol():
    for seed in range(30):
        g = run_ghz_transmission(2, ProtocolConfig(seed=seed))
        r = run_transmission(ProtocolConfig(seed=seed))
        assert g.bell_outcome is r.electron_outcome
        np.testing.assert_allclose(g.photon_state.entries, r.photon_state.entries, atol=1e-12)
        assert g.corrected_fidelity == pytest.approx(1.0, abs=1e-10)


def test_ghz_k3_all_branches():
    branches = ghz_branches(3)
    assert sum(p for _, p, _ in branches) == pytest.approx(1.0)
    assert {bits for bits, _, _ in branches} == {(0, 0, 0), (1, 0, 0)}
    for _, p, fid in branches:
        assert p == pytest.approx(0.5)
        assert fid == pytest.approx(1.0, abs=1e-9)


def test_ghz_k3_sampled_run():
    g = run_ghz_transmission(3, ProtocolConfig(seed=4))
    assert not g.aborted
    assert g.corrected_fidelity == pytest.approx(1.0, abs=1e-9)
    assert g.counterfactual_structure_ok


def test_ghz_gate_failure_aborts():
    # with per-gate probability 0.5 some seed fails at the second gate
    for seed in range(200):
        g = run_ghz_transmission(3, ProtocolConfig(gate_model=CfGateModel(0.5), seed=seed))
        cnots = [op for op in g.log if op.kind == "cf_cnot"]
        if len(cnots) == 2 and cnots[-1].outcome == "heralded_loss":
            assert g.aborted
            assert g.photon_state is None
            return
    pytest.fail("no run failed at the second gate")


def test_ghz_cap():
    with pytest.raises(ConfigurationError):
        run_ghz_transmission(9)
    with pytest.raises(ConfigurationError):
        run_ghz_transmission(1)
