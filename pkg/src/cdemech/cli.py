"""Command-line entry point: ``cdemech gen|run|verify|sweep``.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 oracle budget exceeded.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import checks, rational
from .economics import (
    check_stability,
    explain_optimality,
    is_rational_pair,
    payments_from_dict,
    utilities,
)
from .errors import BudgetError, CDEError, ConfigurationError, InputError, InvariantError
from .field import SelectionPolicy
from .instance import generate, load, parse, save
from .mechanism import MechanismConfig, Transcript, run
from .rates import is_achieving

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


class UsageError(Exception):
    pass


def _seed(value):
    if value is not None:
        return value
    env = os.environ.get("CDE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"CDE_SEED={env!r} is not an integer") from None


def _range(text):
    lo, sep, hi = text.partition("..")
    try:
        lo = int(lo)
        hi = int(hi) if sep else lo
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _vec(xs):
    return "[" + ", ".join(rational.fmt(x) for x in xs) + "]"


def _emit(args, doc, text):
    if args.json:
        print(json.dumps(doc, indent=1))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def solution_doc(instance, variant, rates, payments):
    return {
        "instance_digest": instance.digest(),
        "algorithm": variant,
        "rates": list(rates),
        "payments": payments.to_dict(),
    }


def load_solution(path, instance):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "rates" not in doc or "payments" not in doc:
        raise InputError(f"{path}: solution needs 'rates' and 'payments'")
    rates = doc["rates"]
    if not isinstance(rates, list) or any(not isinstance(x, int) or isinstance(x, bool) or x < 0 for x in rates):
        raise InputError(f"{path}: rates must be nonnegative integers")
    if len(rates) != instance.n:
        raise InputError(f"{path}: rates has length {len(rates)}, instance has n={instance.n}")
    payments = payments_from_dict(doc["payments"])
    if payments.n != instance.n:
        raise InputError(f"{path}: payments cover {payments.n} users, instance has n={instance.n}")
    return tuple(rates), payments


def cmd_gen(args):
    if args.n < 2:
        raise UsageError("n must be ≥ 2")
    if args.k < 1:
        raise UsageError("k must be ≥ 1")
    seed = _seed(args.seed)
    try:
        inst = generate(args.n, args.k, args.density, seed, q=args.q)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None
    if args.output:
        save(inst, args.output)
        print(f"# seed={seed}")
        print(f"digest {inst.digest()}")
    else:
        sys.stdout.write(inst.render())
        print(f"# seed={seed} digest {inst.digest()}", file=sys.stderr)
    return EXIT_OK


def _config(args):
    tie = None
    if args.tie_break == "seeded":
        tie = _seed(args.tie_seed)
    if args.selection == "randomized":
        sel = SelectionPolicy.randomized(_seed(args.selection_seed))
    else:
        sel = SelectionPolicy.deterministic()
    return MechanismConfig(args.algo, tie, sel, args.q)


def _verdicts(instance, rates, payments):
    rat = is_rational_pair(instance, rates, payments)
    report = check_stability(instance, rates, payments, require_rational=False)
    optimal, why = explain_optimality(instance, rates, payments)
    return rat, report, optimal, why


def cmd_run(args):
    inst = load(args.instance)
    config = _config(args)
    rates, payments, transcript = run(inst, config)
    stem = Path(args.instance)
    base = stem.with_suffix("") if stem.suffix == ".json" else stem
    tpath = args.transcript or f"{base}.algo{args.algo}.transcript.json"
    spath = args.solution or f"{base}.algo{args.algo}.solution.json"
    _write(tpath, transcript.render())
    _write(spath, json.dumps(solution_doc(inst, args.algo, rates, payments), indent=1) + "\n")

    utils = utilities(inst, rates, payments)
    doc = {
        "algorithm": args.algo,
        "config": config.to_dict(),
        "instance_digest": inst.digest(),
        "rounds": len(transcript.rounds),
        "rates": list(rates),
        "payments": payments.to_dict(),
        "p_plus": [rational.to_json(x) for x in payments.p_plus],
        "p_minus": [rational.to_json(x) for x in payments.p_minus],
        "utilities": [rational.to_json(x) for x in utils],
        "sum_utility": rational.to_json(sum(utils)),
        "min_utility": rational.to_json(min(utils)),
        "transcript": tpath,
        "solution": spath,
    }
    lines = [
        f"# algo={args.algo} config={json.dumps(config.to_dict(), separators=(',', ':'))}",
        f"r={_vec(rates)}  r_N={sum(rates)}  rounds={len(transcript.rounds)}",
        f"p_N={rational.fmt(payments.total)}",
        f"p+={_vec(payments.p_plus)}",
        f"p-={_vec(payments.p_minus)}",
    ]
    if args.algo == 1:
        for i, row in enumerate(payments.entries, start=1):
            lines.append(f"  p[{i},*]={_vec(row)}")
    lines += [
        f"utilities={_vec(utils)}",
        f"sum-utility {rational.fmt(sum(utils))}",
        f"min-utility {rational.fmt(min(utils))}",
        f"transcript -> {tpath}",
        f"solution -> {spath}",
    ]
    status = EXIT_OK
    if args.verify:
        rat, report, optimal, why = _verdicts(inst, rates, payments)
        doc.update(rational=rat, stability=report.to_dict(), optimal=optimal, optimal_reason=why)
        lines += [
            f"rational: {'yes' if rat else 'no'}",
            f"stable: {'yes' if report.stable else 'no'}",
            f"optimal: {'yes' if optimal else 'no'} ({why})",
        ]
        if not (rat and report.stable and optimal):
            status = EXIT_FAIL
    _emit(args, doc, "\n".join(lines))
    return status


def cmd_verify(args):
    inst = load(args.instance)
    rates, payments = load_solution(args.solution, inst)
    achieving = is_achieving(inst, inst.users, rates)
    rat, report, optimal, why = _verdicts(inst, rates, payments)
    doc = {
        "instance_digest": inst.digest(),
        "achieving": achieving,
        "rational": rat,
        "stability": report.to_dict(),
        "stable": report.stable,
        "optimal": optimal,
        "optimal_reason": why,
    }
    text = (
        f"achieving: {'yes' if achieving else 'no'}\n"
        f"rational: {'yes' if rat else 'no'}\n"
        + report.to_text()
        + f"stable: {'yes' if report.stable else 'no'}\n"
        + f"optimal: {'yes' if optimal else 'no'} ({why})\n"
    )
    _emit(args, doc, text)
    return EXIT_OK if report.stable and optimal else EXIT_FAIL


def cmd_sweep(args):
    if args.count <= 0:
        raise UsageError("count must be positive")
    enabled = tuple(args.checks.split(",")) if args.checks else checks.CHECKS
    unknown = [c for c in enabled if c not in checks.CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; choose from {','.join(checks.CHECKS)}")
    if args.n[0] < 2 or args.k[0] < 1:
        raise UsageError("need n >= 2 and k >= 1")
    if args.n[1] > 6 or args.k[1] > 8:
        raise BudgetError("sweeps are limited to n <= 6 and k <= 8 (oracle budget)")
    if any(not 0 < d < 1 for d in args.density):
        raise UsageError("densities must lie in (0, 1)")
    seed = _seed(args.seed)
    corpus = checks.corpus(args.count, args.n, args.k, args.density, seed)
    result = checks.sweep(corpus, enabled, seed=seed, tie_draws=args.tie_draws, crossval_limit=args.crossval_limit)
    if args.artifacts and result.artifacts:
        out = Path(args.artifacts)
        out.mkdir(parents=True, exist_ok=True)
        for a in result.artifacts:
            stem = out / f"fail-{a['index']:04d}-{a['check']}"
            inst = parse(json.dumps(a["instance"]))
            save(inst, f"{stem}.instance.json")
            _write(f"{stem}.json", json.dumps(a, indent=1) + "\n")
            for doc in a["transcripts"]:
                t = Transcript.from_dict(doc)
                sol = solution_doc(inst, t.config.variant, t.rates(), t.payments())
                _write(f"{stem}.algo{t.config.variant}.solution.json", json.dumps(sol, indent=1) + "\n")
    _emit(args, result.to_dict(), result.to_text())
    return EXIT_OK if result.ok else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="cdemech", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--seed", type=int)
    g.add_argument("--q", type=int, help="field size (default: smallest prime >= n*k)")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a mechanism on an instance")
    r.add_argument("--algo", type=int, choices=(1, 2), default=1)
    r.add_argument("--instance", required=True)
    r.add_argument("--tie-break", choices=("lowest", "seeded"), default="lowest")
    r.add_argument("--tie-seed", type=int)
    r.add_argument("--selection", choices=("deterministic", "randomized"), default="deterministic")
    r.add_argument("--selection-seed", type=int)
    r.add_argument("--q", type=int, help="override the instance's field size")
    r.add_argument("--transcript")
    r.add_argument("--solution")
    r.add_argument("--verify", action="store_true")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check a solution for rationality, stability and optimality")
    v.add_argument("--instance", required=True)
    v.add_argument("--solution", required=True)
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="property sweep over a seeded random corpus")
    s.add_argument("--count", type=int, default=500)
    s.add_argument("--n", type=_range, default=(2, 6))
    s.add_argument("--k", type=_range, default=(2, 8))
    s.add_argument("--density", type=_floats, default=(0.3, 0.5, 0.7))
    s.add_argument("--seed", type=int)
    s.add_argument("--checks", help=f"comma list from {','.join(checks.CHECKS)}")
    s.add_argument("--tie-draws", type=int, default=10)
    s.add_argument("--crossval-limit", type=int, default=100)
    s.add_argument("--artifacts", help="directory for failing instances and transcripts")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, InputError, ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        if exc.transcript is not None:
            print(exc.transcript.render(), file=sys.stderr)
        return EXIT_FAIL
    except CDEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
