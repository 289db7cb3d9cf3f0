"""Command-line front end.

    cfqnet verify     --pol HH --trials 100000 --seed 42
    cfqnet repeater   --n 0..3 --gate-p 0.9 --eta 0.9 --format csv
    cfqnet montecarlo --n 1 --gate-p 1 --trials 100000 --seed 7
    cfqnet sweep      --n 0..3 --etaD 0.8..1.0:0.05

Exit status: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors.  Times are in seconds, L0 in metres and c in metres per
second.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from decimal import Decimal, InvalidOperation

import numpy as np

from . import protocol, repeater
from .cfgate import CfGateModel
from .errors import ConfigurationError, DivergenceError
from .state import BELL_ORDER, BellOutcome, StateVector, concurrence, equal_up_to_phase, reduced_density

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2
AMPLITUDE_TOL = 1e-10
FIDELITY_TOL = 1e-9
DIVERGENT = "divergent"

REPEATER_COLUMNS = ["n", "gate_p", "node_p", "eta_D", "eta_M", "eta_t", "L0", "c", "p_eff", "t_tot_nodes", "t_tot_eff", "consistency_residual"]


class UsageError(Exception):
    pass


# -- value parsing ---------------------------------------------------------


def parse_range(text: str, integer: bool = False) -> list:
    """``"a"``, ``"a..b"`` or ``"a..b:step"`` to a list of values (inclusive).

    Decimal arithmetic keeps grid points such as 0.85 exact.
    """
    try:
        if ".." not in text:
            values = [Decimal(text)]
        else:
            start_s, rest = text.split("..", 1)
            end_s, _, step_s = rest.partition(":")
            start, end = Decimal(start_s), Decimal(end_s)
            step = Decimal(step_s) if step_s else Decimal(1)
            if step <= 0:
                raise UsageError(f"range step must be positive in {text!r}")
            if end < start:
                raise UsageError(f"empty range {text!r}")
            count = int((end - start) / step) + 1
            values = [start + i * step for i in range(count)]
    except (InvalidOperation, ValueError):
        raise UsageError(f"malformed value or range {text!r}; expected a, a..b or a..b:step") from None
    if integer:
        if any(v != v.to_integral_value() for v in values):
            raise UsageError(f"{text!r} must contain integers only")
        return [int(v) for v in values]
    return [float(v) for v in values]


def parse_gate_p(text: str) -> list:
    """A scalar or range broadcasts to every gate; ``p1,p2,...`` sets each gate."""
    if "," in text:
        try:
            return [tuple(float(x) for x in text.split(","))]
        except ValueError:
            raise UsageError(f"malformed gate probability list {text!r}") from None
    return parse_range(text)


def _is_range(text: str | None) -> bool:
    return text is not None and ".." in text


# -- output ----------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k.value if isinstance(k, BellOutcome) else k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, BellOutcome):
        return x.value
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real) + 0.0, float(x.imag) + 0.0]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return DIVERGENT
    return x


def emit_json(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else DIVERGENT
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    if isinstance(v, dict):
        return json.dumps(_jsonable(v), separators=(",", ":"))
    return str(v)


def emit_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


CHECK_COLUMNS = ["name", "pass", "expected", "actual", "tolerance"]


def emit_text(doc: dict) -> str:
    lines = [f"command: {doc['command']}"]
    for k, v in doc["parameters"].items():
        lines.append(f"  {k} = {_cell(v)}")
    results = doc["results"]
    if isinstance(results, list):
        if results:
            cols = list(results[0])
            table = [cols] + [[_cell(r.get(c)) for c in cols] for r in results]
            widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
            for row in table:
                lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    else:
        lines.append("results:")
        for k, v in results.items():
            lines.append(f"  {k}: {_cell(v)}")
    if doc["checks"]:
        lines.append("checks:")
        for c in doc["checks"]:
            mark = "PASS" if c["pass"] else "FAIL"
            lines.append(f"  [{mark}] {c['name']}: expected {_cell(c['expected'])}, actual {_cell(c['actual'])}, tol {_cell(c['tolerance'])}")
    return "\n".join(lines) + "\n"


def render(doc: dict, fmt: str, rows: list[dict] | None = None, columns: list[str] | None = None) -> str:
    if fmt == "json":
        return emit_json(doc)
    if fmt == "text":
        return emit_text(doc)
    if rows is not None:
        return emit_csv(rows, columns)
    return emit_csv(doc["checks"], CHECK_COLUMNS)


def check(name: str, passed: bool, expected, actual, tolerance) -> dict:
    return {"name": name, "pass": bool(passed), "expected": expected, "actual": actual, "tolerance": tolerance}


def _amps(state: StateVector) -> dict:
    return {k: [v.real + 0.0, v.imag + 0.0] for k, v in state.nonzero().items()}


def _trial_seed(seed: int, index: int) -> tuple[int, int]:
    return (int(seed), int(index))


# -- commands --------------------------------------------------------------


def cmd_verify(args) -> tuple[dict, None, None]:
    pol = args.pol.upper()
    if len(pol) != 2 or any(ch not in "HV" for ch in pol):
        raise UsageError(f"invalid polarization token {args.pol!r}; use two of H, V (e.g. HH, VV)")
    if args.trials > 0 and args.seed is None:
        raise UsageError("--seed is required when --trials > 0")
    p_gate = parse_range(args.gate_p)
    if len(p_gate) != 1:
        raise UsageError("verify takes a single --gate-p value")
    p_gate = p_gate[0]
    model = CfGateModel(p_gate)
    config = protocol.ProtocolConfig((pol[0], pol[1]))
    computed = protocol.checkpoint_states(config)
    expected = protocol.expected_checkpoints(config)
    checks = []
    results: dict = {"checkpoints": {}, "branches": {}}
    for t in ("T0", "T1", "T2"):
        ok = equal_up_to_phase(computed[t], expected[t], atol=AMPLITUDE_TOL)
        results["checkpoints"][t] = _amps(computed[t])
        checks.append(check(f"checkpoint_{t}", ok, _amps(expected[t]), _amps(computed[t]), AMPLITUDE_TOL))

    comp_br, exp_br = computed["T3"], expected["T3"]
    checks.append(check(
        "T3_outcome_set",
        set(comp_br) == set(exp_br),
        sorted(o.value for o in exp_br),
        sorted(o.value for o in comp_br),
        0,
    ))
    branch_conc = {}
    for outcome in BELL_ORDER:
        if outcome not in exp_br or outcome not in comp_br:
            continue
        (pe, se), (pc, sc) = exp_br[outcome], comp_br[outcome]
        ce = concurrence(reduced_density(se, protocol.R.photons))
        cc = concurrence(reduced_density(sc, protocol.R.photons))
        branch_conc[outcome] = ce
        results["branches"][outcome.value] = {"probability": pc, "photon_concurrence": cc, "state": _amps(sc)}
        checks.append(check(f"T3_{outcome.value}_probability", abs(pe - pc) <= AMPLITUDE_TOL, pe, pc, AMPLITUDE_TOL))
        checks.append(check(f"T3_{outcome.value}_state", equal_up_to_phase(sc, se, atol=AMPLITUDE_TOL), _amps(se), _amps(sc), AMPLITUDE_TOL))
        checks.append(check(f"T3_{outcome.value}_concurrence", abs(ce - cc) <= AMPLITUDE_TOL, ce, cc, AMPLITUDE_TOL))

    if args.trials > 0:
        counts = {o.value: 0 for o in BELL_ORDER}
        aborted = 0
        structure_ok = True
        worst_conc_err = 0.0
        for i in range(args.trials):
            r = protocol.run_transmission(protocol.ProtocolConfig((pol[0], pol[1]), model, _trial_seed(args.seed, i)))
            structure_ok &= r.counterfactual_structure_ok
            if r.aborted:
                aborted += 1
                continue
            counts[r.electron_outcome.value] += 1
            worst_conc_err = max(worst_conc_err, abs(r.photon_concurrence - branch_conc.get(r.electron_outcome, math.nan)))
        done = args.trials - aborted
        freqs = {k: (v / done if done else 0.0) for k, v in counts.items()}
        results["statistics"] = {"trials": args.trials, "aborted": aborted, "counts": counts, "frequencies": freqs}
        for outcome in BELL_ORDER:
            p = exp_br[outcome][0] if outcome in exp_br else 0.0
            if done == 0:
                continue
            tol = 3 * math.sqrt(p * (1 - p) / done)
            checks.append(check(f"frequency_{outcome.value}", abs(freqs[outcome.value] - p) <= tol, p, freqs[outcome.value], tol))
        p_abort = 1 - p_gate**2
        tol = 3 * math.sqrt(p_abort * (1 - p_abort) / args.trials)
        checks.append(check("abort_frequency", abs(aborted / args.trials - p_abort) <= tol, p_abort, aborted / args.trials, tol))
        if done:
            checks.append(check("trial_concurrence", worst_conc_err <= AMPLITUDE_TOL, 0.0, worst_conc_err, AMPLITUDE_TOL))
        checks.append(check("photons_never_interact", structure_ok, True, structure_ok, 0))

    params = {"pol": pol, "trials": args.trials, "seed": args.seed, "gate_p": p_gate}
    return {"command": "verify", "parameters": params, "results": results, "checks": checks}, None, None


def _efficiencies(args) -> dict[str, list[float]]:
    out = {}
    for name, attr in (("eta_D", "etaD"), ("eta_M", "etaM"), ("eta_t", "etat")):
        text = getattr(args, attr)
        out[name] = parse_range(text if text is not None else args.eta)
    return out


def _repeater_row(n: int, gate_p, node_p, eta_D, eta_M, eta_t, L0, c) -> dict:
    row = {"n": n, "gate_p": gate_p, "node_p": node_p, "eta_D": eta_D, "eta_M": eta_M, "eta_t": eta_t, "L0": L0, "c": c}
    gate_probs = list(gate_p) if isinstance(gate_p, tuple) else [gate_p] * (2 * n + 2)
    node_probs = list(node_p) if isinstance(node_p, tuple) else [node_p] * (2 * n + 1)
    if len(gate_probs) != 2 * n + 2:
        raise UsageError(f"--gate-p list has {len(gate_probs)} entries; n={n} needs {2 * n + 2}")
    if len(node_probs) != 2 * n + 1:
        raise UsageError(f"--node-p list has {len(node_probs)} entries; n={n} needs {2 * n + 1}")
    row["p_eff"] = repeater.p_eff(n, gate_probs)
    for col, fn in (
        ("t_tot_nodes", lambda: repeater.t_tot_nodes(n, L0, c, node_probs)),
        ("t_tot_eff", lambda: repeater.t_tot_eff(n, L0, c, eta_D, eta_M, eta_t)),
        ("consistency_residual", lambda: repeater.consistency_16_17(n, L0, c, eta_D, eta_M, eta_t)),
    ):
        try:
            row[col] = fn()
        except DivergenceError:
            row[col] = DIVERGENT
    return row


def _grid(args, require_sweep: bool) -> tuple[dict, list[dict]]:
    axes = {
        "n": parse_range(args.n, integer=True),
        "gate_p": parse_gate_p(args.gate_p),
        "node_p": parse_gate_p(args.node_p),
        **_efficiencies(args),
        "L0": parse_range(args.L0),
        "c": parse_range(args.c),
    }
    if require_sweep:
        swept = [args.n, args.gate_p, args.node_p, args.eta, args.etaD, args.etaM, args.etat, args.L0, args.c]
        if not any(_is_range(t) for t in swept):
            raise UsageError("sweep needs at least one parameter given as a range start..end[:step]")
    rows = [_repeater_row(*combo) for combo in itertools.product(*axes.values())]
    params = {k: (v[0] if len(v) == 1 else v) for k, v in axes.items()}
    return params, rows


def cmd_repeater(args):
    params, rows = _grid(args, require_sweep=False)
    doc = {"command": "repeater", "parameters": params, "results": rows, "checks": []}
    return doc, rows, REPEATER_COLUMNS


def cmd_sweep(args):
    params, rows = _grid(args, require_sweep=True)
    doc = {"command": "sweep", "parameters": params, "results": rows, "checks": []}
    return doc, rows, REPEATER_COLUMNS


def cmd_montecarlo(args):
    if args.seed is None:
        raise UsageError("--seed is required for montecarlo")
    try:
        n = int(args.n)
    except ValueError:
        raise UsageError(f"--n must be a single integer, got {args.n!r}") from None
    if not 0 <= n <= repeater.MAX_CHAIN_N:
        raise UsageError(f"--n {n} exceeds the statevector cap: trials are simulated for 0 <= n <= {repeater.MAX_CHAIN_N} (4n+4 <= 16 qubits)")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    gp = parse_gate_p(args.gate_p)
    if len(gp) != 1:
        raise UsageError("montecarlo takes a single --gate-p value or list")
    gate_p = gp[0]
    gate_probs = list(gate_p) if isinstance(gate_p, tuple) else [gate_p] * (2 * n + 2)
    lobm = repeater.LobmModel(frozenset(BellOutcome(x.strip()) for x in args.lobm.split(",")))
    topology = repeater.build_chain(n)
    stats = repeater.monte_carlo(topology, gate_probs, args.trials, args.seed, lobm, workers=args.workers)
    analytic = repeater.p_eff(n, gate_probs)
    z = stats.z_score(analytic)
    results = {
        "success_rate": stats.success_rate,
        "stderr": stats.stderr,
        "p_eff": analytic,
        "z_score": z,
        "successes": stats.successes,
        "stage_breakdown": stats.stage_breakdown,
        "mean_fidelity_given_success": stats.mean_fidelity_given_success,
        "min_fidelity_given_success": stats.min_fidelity_given_success,
        "outcome_counts": stats.outcome_counts,
    }
    checks = [check("success_rate_z", abs(z) <= 3.0, analytic, stats.success_rate, 3.0)]
    if stats.successes:
        worst = 1.0 - stats.min_fidelity_given_success
        checks.append(check("fidelity_given_success", worst <= FIDELITY_TOL, 1.0, stats.min_fidelity_given_success, FIDELITY_TOL))
    params = {
        "n": n,
        "gate_p": list(gate_p) if isinstance(gate_p, tuple) else gate_p,
        "trials": args.trials,
        "seed": args.seed,
        "lobm": sorted(o.value for o in lobm.distinguishable),
    }
    return {"command": "montecarlo", "parameters": params, "results": results, "checks": checks}, None, None


# -- parser ----------------------------------------------------------------


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["json", "csv", "text"], default="text")
    p.add_argument("--out", default=None, help="write to this file instead of standard output")


def _add_chain_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", default="1", help="chain size n (2n+1 nodes); a..b allowed")
    p.add_argument("--gate-p", dest="gate_p", default="1", help="counterfactual CNOT success probability: scalar, range or per-gate list p1,p2,...")
    p.add_argument("--node-p", dest="node_p", default="1", help="per-node swap probability for the node-level time formula")
    p.add_argument("--eta", default="1", help="sets all three efficiencies")
    p.add_argument("--etaD", default=None, help="detection efficiency")
    p.add_argument("--etaM", default=None, help="memory efficiency")
    p.add_argument("--etat", default=None, help="transmission efficiency")
    p.add_argument("--L0", default="1", help="elementary link length in metres")
    p.add_argument("--c", default="1", help="signal speed in metres per second")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfqnet", description="Counterfactual entanglement transmission and repeater-chain analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check the three-party protocol checkpoint by checkpoint")
    p.add_argument("--pol", default="HH", help="photon polarizations for Alice and Bob, e.g. HH, VV, HV")
    p.add_argument("--trials", type=int, default=0, help="sampled protocol runs for outcome statistics")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--gate-p", dest="gate_p", default="1")
    _add_output(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("repeater", help="closed-form success probability and distribution times")
    _add_chain_params(p)
    _add_output(p)
    p.set_defaults(func=cmd_repeater)

    p = sub.add_parser("montecarlo", help="simulate one-shot chain trials and compare with the closed form")
    p.add_argument("--n", default="1")
    p.add_argument("--gate-p", dest="gate_p", default="1")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lobm", default="phi_plus,phi_minus", help="the two Bell outcomes the linear-optical measurement resolves")
    p.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on this")
    _add_output(p)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("sweep", help="Cartesian parameter sweep of the closed forms")
    _add_chain_params(p)
    _add_output(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc, rows, columns = args.func(args)
    except (UsageError, ConfigurationError, ValueError) as exc:
        print(f"cfqnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(doc, args.format, rows, columns)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(c["pass"] for c in doc["checks"]) else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
