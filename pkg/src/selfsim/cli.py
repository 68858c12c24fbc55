"""Command-line interface.

Exit status: 0 decided true / computed, 1 refuted / false, 2 unknown or
budget exceeded, 3 input error.  Reports are JSON on stdout (or ``-o``).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .fixtures import resolve_group_file
from .hausdorff import FitRejected, hdim_exact, hdim_report_ratios_only
from .machine import MachineDef, MachineError, load_machine, portrait
from .omega import (
    LassoVerdict,
    build_orbit_automaton,
    parse_lasso,
    ray_orbit_automaton,
    same_orbit,
    verify_lasso_certificate,
)
from .perm import BudgetExceeded, fmt_cycles
from .quotients import BranchError, branch_from_file, certify_regular_branching, full_branch_structure
from .structure import NucleusNotFound, check_level_transitive, check_recurrent, nucleus
from .tree_automata import (
    AutomatonError,
    RunSlice,
    accepting_run,
    accepts_portrait,
    build_automaton_closed,
    build_automaton_contracting,
    check_acceptance_certificate,
    decide_subgroup,
)

OK, FALSE, UNKNOWN, INPUT_ERROR = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _load(arg: str) -> MachineDef:
    try:
        return load_machine(resolve_group_file(arg))
    except FileNotFoundError as e:
        raise InputError(str(e)) from e


def _words(machine: MachineDef, text: str | None):
    if text is None:
        return machine.generator_elements()
    return [machine.parse_element(w) for w in text.split(",") if w.strip()]


def _automaton(machine: MachineDef, closed: bool, gens=None, bound: int = 32):
    B = branch_from_file(machine, gens)
    if closed:
        return build_automaton_closed(B)
    return build_automaton_contracting(machine, B, nucleus(machine, bound, gens))


# -- subcommands ----------------------------------------------------------------


def cmd_check(a) -> tuple[int, dict]:
    m = _load(a.group)
    report: dict = {"command": "check", "alphabet": m.d, "generators": list(m.generators)}
    report["self_similar"] = True
    report["level_transitive"] = {n: check_level_transitive(m, n) for n in range(1, a.depth + 1)}
    rec = check_recurrent(m, 1, a.search_len)
    report["recurrent"] = {
        "certified": rec.certified,
        "depth": 1,
        "witnesses": {f"{g}@{''.join(map(str, v))}": str(h) for (g, v), h in sorted(rec.witnesses.items())},
        "missing": [f"{g}@{''.join(map(str, v))}" for g, v in rec.missing],
    }
    try:
        N = nucleus(m, a.bound)
        report["contracting"] = True
        report["nucleus"] = [str(e) for e in N.elements]
        report["nucleus_size"] = len(N)
    except NucleusNotFound as e:
        report["contracting"] = "unknown"
        report["nucleus_error"] = str(e)
    return OK, report


def cmd_branch(a) -> tuple[int, dict]:
    m = _load(a.group)
    try:
        B = branch_from_file(m)
    except BranchError as e:
        return FALSE, {"command": "branch", "certified": False, "error": str(e)}
    L = a.level if a.level is not None else B.m + 1
    cert = certify_regular_branching(m, B, L)
    report = {
        "command": "branch",
        "m": B.m,
        "Q_order": len(B.Q),
        "K_order": B.K_order,
        "Q1_order": len(B.Q1),
        "phi_functional": True,
        "certificate": cert.to_json(),
    }
    if not cert.certified:
        report["refuting_level"] = min(t.level for t in cert.tests if not t.member)
    return (OK if cert.certified else FALSE), report


def cmd_build_automaton(a) -> tuple[int, dict]:
    m = _load(a.group)
    M = _automaton(m, a.closed, bound=a.bound)
    return OK, {"command": "build-automaton", "automaton": M.to_json()}


def cmd_accepts(a) -> tuple[int, dict]:
    m = _load(a.group)
    g = m.parse_element(a.element)
    M = _automaton(m, a.closed, bound=a.bound)
    ok = accepts_portrait(M, g)
    report = {"command": "accepts", "element": a.element, "accepted": ok}
    if ok and M.accepting is not None:
        report["certificate"] = {"kind": "run", "element": a.element, "run": accepting_run(M, g).to_json()}
    return (OK if ok else FALSE), report


def cmd_subgroup(a) -> tuple[int, dict]:
    m = _load(a.group)
    H = _words(m, a.sub)
    G = _words(m, a.super)
    M = _automaton(m, False, G, a.bound)
    v = decide_subgroup(H, M, with_certificates=True)
    report = {
        "command": "subgroup",
        "result": v.result,
        "accepted": v.accepted,
        "certificate": {"kind": "subgroup", "super": a.super, "runs": v.certificates},
    }
    return (OK if v.result else FALSE), report


def cmd_equal(a) -> tuple[int, dict]:
    m = _load(a.group)
    L, R = _words(m, a.left), _words(m, a.right)
    ML = _automaton(m, False, L, a.bound)
    MR = _automaton(m, False, R, a.bound)
    lr = decide_subgroup(L, MR)
    rl = decide_subgroup(R, ML)
    res = lr.result and rl.result
    report = {
        "command": "equal",
        "result": res,
        "left_in_right": lr.accepted,
        "right_in_left": rl.accepted,
    }
    return (OK if res else FALSE), report


def _orbit_automaton(m: MachineDef, bound: int):
    return build_orbit_automaton(_automaton(m, False, bound=bound))


def cmd_orbit(a) -> tuple[int, dict]:
    m = _load(a.group)
    xi, eta = parse_lasso(a.xi), parse_lasso(a.eta)
    A = _orbit_automaton(m, a.bound)
    v = same_orbit(A, xi, eta)
    report = {"command": "orbit", "xi": str(xi), "eta": str(eta), "same_orbit": v.accepted}
    if v.accepted:
        report["certificate"] = {"kind": "orbit", **v.to_json()}
    return (OK if v.accepted else FALSE), report


def cmd_ray_orbit(a) -> tuple[int, dict]:
    m = _load(a.group)
    xi = parse_lasso(a.xi)
    A = ray_orbit_automaton(_orbit_automaton(m, a.bound), xi)
    return OK, {
        "command": "ray-orbit",
        "xi": str(xi),
        "states": list(A.states),
        "alphabet": list(A.alphabet),
        "transitions": [list(t) for t in A.transitions],
        "initial": list(A.initial),
        "acceptance": "all" if A.accepting is None else sorted(A.accepting),
    }


def cmd_hdim(a) -> tuple[int, dict]:
    n0, n1 = a.fit
    verify = a.verify if a.verify is not None else a.max_level - n1
    if verify < 0 or n1 + verify > a.max_level:
        raise InputError("fit window plus verification levels exceed --max-level")
    if a.full:
        machine = None
        B = full_branch_structure(a.full)
    else:
        machine = _load(a.group)
        B = branch_from_file(machine)
    try:
        rep = hdim_exact(machine, B, (n0, n1), verify)
    except FitRejected as e:
        report = {"command": "hdim", "fit_rejected": str(e)}
        if machine is not None:
            report["report"] = hdim_report_ratios_only(machine, a.max_level).to_json()
        return FALSE, report
    return OK, {"command": "hdim", "report": rep.to_json()}


def cmd_portrait(a) -> tuple[int, dict]:
    m = _load(a.group)
    g = m.parse_element(a.element)
    P = portrait(g, a.depth)
    labels = {"".join(map(str, v)) or "root": fmt_cycles(p) for v, p in sorted(P.labels.items(), key=lambda kv: (len(kv[0]), kv[0]))}
    return OK, {"command": "portrait", "element": a.element, "depth": a.depth, "labels": labels, "text": P.pretty()}


def cmd_verify(a) -> tuple[int, dict]:
    m = _load(a.group)
    try:
        data = json.loads(Path(a.certificate).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read certificate: {e}") from e
    cert = data.get("certificate", data)
    kind = cert.get("kind")
    if kind == "orbit":
        ok = verify_lasso_certificate(_orbit_automaton(m, a.bound), LassoVerdict.from_json(cert))
    elif kind == "run":
        M = _automaton(m, False, bound=a.bound)
        ok = check_acceptance_certificate(M, m.parse_element(cert["element"]), RunSlice.from_json(m.d, cert["run"]))
    elif kind == "subgroup":
        M = _automaton(m, False, _words(m, cert.get("super")), a.bound)
        ok = bool(cert["runs"]) and all(
            run is not None and check_acceptance_certificate(M, m.parse_element(w), RunSlice.from_json(m.d, run))
            for w, run in cert["runs"].items()
        )
    else:
        raise InputError(f"unknown certificate kind {kind!r}")
    return (OK if ok else FALSE), {"command": "verify", "kind": kind, "valid": ok}


# -- parser ---------------------------------------------------------------------


def _fit(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected n0,n1") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="selfsim", description="Self-similar groups, tree automata and their decision procedures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("group", help="group file (path or bundled name such as grigorchuk.grp)")
        s.add_argument("--bound", type=int, default=32, help="nucleus size bound")
        s.add_argument("-o", "--output", help="write the JSON report here instead of stdout")
        s.set_defaults(fn=fn)
        return s

    s = add("check", cmd_check, "structural checks")
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--search-len", type=int, default=4, help="word length for recurrence witnesses")

    s = add("branch", cmd_branch, "build and certify the branch structure")
    s.add_argument("--level", type=int, help="certify up to this level (default m+1)")

    s = add("build-automaton", cmd_build_automaton, "export the portrait automaton")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--closed", action="store_true", help="automaton of the closure")
    g.add_argument("--contracting", action="store_true", help="automaton of the group itself")

    s = add("accepts", cmd_accepts, "is the portrait of an element accepted")
    s.add_argument("--element", required=True)
    s.add_argument("--closed", action="store_true", help="test against the closure instead")

    s = add("subgroup", cmd_subgroup, "is <sub> contained in <super>")
    s.add_argument("--sub", required=True, help="comma-separated words")
    s.add_argument("--super", help="comma-separated words (default: the generators)")

    s = add("equal", cmd_equal, "do two generating sets give the same group")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)

    s = add("orbit", cmd_orbit, "are two rays in the same orbit")
    s.add_argument("xi")
    s.add_argument("eta")

    s = add("ray-orbit", cmd_ray_orbit, "automaton of the orbit of a ray")
    s.add_argument("xi")

    s = add("hdim", cmd_hdim, "Hausdorff dimension of the closure")
    s.add_argument("--max-level", type=int, default=6)
    s.add_argument("--fit", type=_fit, default=(3, 4), help="fit window n0,n1")
    s.add_argument("--verify", type=int, help="extra verification levels (default: up to --max-level)")
    s.add_argument("--full", type=int, metavar="D", help="use the full group on D letters (group file ignored)")

    s = add("portrait", cmd_portrait, "print a portrait")
    s.add_argument("--element", required=True)
    s.add_argument("--depth", type=int, default=3)

    s = add("verify", cmd_verify, "replay a certificate from a JSON report")
    s.add_argument("certificate")
    return p


def _default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        status, report = args.fn(args)
    except (BranchError, AutomatonError) as e:
        status, report = UNKNOWN, {"command": args.command, "unknown": f"{type(e).__name__}: {e}"}
    except (InputError, MachineError, ValueError, KeyError) as e:
        status, report = INPUT_ERROR, {"command": args.command, "error": f"{type(e).__name__}: {e}"}
    except (BudgetExceeded, NucleusNotFound) as e:
        status, report = UNKNOWN, {"command": args.command, "unknown": str(e)}
    report["exit_status"] = status
    text = json.dumps(report, indent=2, sort_keys=True, default=_default)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
