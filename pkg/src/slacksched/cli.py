"""Command-line front end: gen, run, oracle, verify, bench.

Exit codes: 0 success, 1 a check failed, 2 bad usage or bad input.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import suites
from .instance import (PROFILES, CommitmentModel, DeltaCommitment, Instance, InstanceError,
                       NoCommitment, UponAdmission, as_time, dumps, generate, load, validate)
from .oracle import DEFAULT_CAP, MAX_MACHINES, CapExceeded, opt_throughput, opt_upper_bound
from .verify import extract_threshold, mutants, verify_run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def rational(text: str) -> Fraction:
    try:
        return as_time(text)
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def rational_list(text: str) -> list[Fraction]:
    return [rational(part.strip()) for part in text.split(",") if part.strip()]


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    model: str | None
    epsilon: Fraction | None = None
    delta: Fraction | None = None
    instance_path: str | None = None
    seed: int | None = None
    out: str | None = None

    def __post_init__(self):
        if self.algorithm not in ("blocking", "region"):
            raise UsageError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "region" and self.model not in (None, "none"):
            raise UsageError("the region algorithm takes no commitment model")
        if self.model == "delta" and self.delta is None:
            raise UsageError("--model delta needs --delta")
        if self.delta is not None and self.model != "delta":
            raise UsageError("--delta is only meaningful with --model delta")

    def commitment(self) -> CommitmentModel | None:
        if self.algorithm == "region":
            return None
        if self.model == "delta":
            return DeltaCommitment(self.delta)
        if self.model == "none":
            return NoCommitment()
        return UponAdmission()


def _config(args) -> RunConfig:
    return RunConfig(args.alg, args.model, getattr(args, "epsilon", None), args.delta,
                     getattr(args, "input", None), getattr(args, "seed", None),
                     getattr(args, "output", None))


def _load_instance(path: str, epsilon: Fraction | None = None, strict: bool = True) -> Instance:
    """Load an instance, optionally overriding the slack class the algorithm assumes.

    With ``strict=False`` an epsilon the jobs do not actually have is allowed
    with a warning: admitted jobs still meet their deadlines, but the
    competitive bound no longer applies.
    """
    try:
        inst = load(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except InstanceError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if epsilon is not None and epsilon != inst.epsilon:
        inst = dataclasses.replace(inst, epsilon=epsilon)
        bad = validate(inst)
        if bad and strict:
            raise UsageError(f"{path} does not have slack epsilon={epsilon}: {bad[0]}")
        if bad:
            print(f"warning: {path} does not have slack epsilon={epsilon} ({bad[0]}); "
                  "competitive bounds do not apply", file=sys.stderr)
    return inst


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _run(inst: Instance, cfg: RunConfig):
    try:
        return suites.run_algorithm(inst, cfg.algorithm, cfg.commitment())
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- commands --------------------------------------------------------------------

def cmd_gen(args) -> int:
    inst = generate(args.seed, args.n, args.m, args.epsilon, args.profile)
    if args.output:
        _write(Path(args.output), dumps(inst))
    else:
        sys.stdout.write(dumps(inst))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    inst = _load_instance(cfg.instance_path, cfg.epsilon, strict=False)
    result = _run(inst, cfg)
    out = Path(cfg.out)
    for name, text in suites.artifacts(result).items():
        _write(out / name, text)
    sys.stdout.write(result.summary_json())
    return EXIT_OK


def oracle_json(inst: Instance, cap: int) -> str:
    try:
        return opt_throughput(inst, cap).to_json()
    except CapExceeded:
        return json.dumps({"opt": opt_upper_bound(inst), "witness": None, "exact": False},
                          indent=2) + "\n"


def cmd_oracle(args) -> int:
    text = oracle_json(_load_instance(args.input), args.cap)
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _verify_instances(args):
    if args.input:
        yield args.input, _load_instance(args.input, args.epsilon)
        return
    missing = [f for f in ("n", "m", "epsilon") if getattr(args, f) is None]
    if missing:
        raise UsageError("verify needs -i or generator flags; missing "
                         + ", ".join("--" + f for f in missing))
    for k in range(args.count):
        seed = args.seed + k
        yield f"seed={seed}", generate(seed, args.n, args.m, args.epsilon, args.profile)


def cmd_verify(args) -> int:
    cfg = _config(args)
    model = cfg.commitment()
    failed = 0
    reports = []
    for label, inst in _verify_instances(args):
        result = _run(inst, cfg)
        oracle = None
        if inst.n <= args.cap and inst.machines <= MAX_MACHINES:
            oracle = opt_throughput(inst, args.cap)
        timeline = extract_threshold(result)
        report = verify_run(result, model, oracle, timeline)
        lines = [str(c) for c in report.failures]
        if report.bound is not None and not report.bound.satisfied:
            lines.append(f"bound violated: {report.bound.to_dict()}")
        for desc, res, tl in mutants(result, timeline, args.mutants, seed=0):
            if verify_run(res, model, oracle, tl, replay=True).ok:
                lines.append(f"mutant not caught: {desc}")
        status = "ok" if not lines else "FAIL"
        print(f"{label}: {status} ({len(report.checks)} checks)")
        for line in lines:
            print(f"  {line}")
        failed += bool(lines)
        entry = report.to_dict()
        entry["instance"] = label
        entry["problems"] = lines
        reports.append(entry)
    if args.output:
        _write(Path(args.output), json.dumps(reports, indent=2) + "\n")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    fracs = args.delta_fractions or []
    if cfg.algorithm == "region" and fracs:
        raise UsageError("--delta-fractions applies to the blocking algorithm only")
    for eps in args.epsilon_grid:
        for frac in fracs:
            if not 0 < frac * min(eps, 1) < min(eps, 1):
                raise UsageError(f"delta fraction {frac} is not in (0, 1)")
    tasks = suites.bench_tasks(cfg.algorithm, args.epsilon_grid, fracs, args.per_point,
                               args.seed, args.n, args.m, args.profile)
    rows = suites.run_bench(tasks)
    out = Path(args.output)
    _write(out / "bench_long.csv", suites.long_csv(rows))
    agg = suites.aggregate_csv(rows)
    _write(out / "bench_agg.csv", agg)
    _write(out / "bench.gp", suites.plot_script(cfg.algorithm))
    sys.stdout.write(agg)
    return EXIT_OK if all(r[-1] == "1" for r in rows) else EXIT_FAIL


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slacksched",
                                     description="Online deadline scheduling with slack.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random instance")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--epsilon", type=rational, required=True)
    gen.add_argument("--profile", choices=PROFILES, default="uniform")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output")
    gen.set_defaults(func=cmd_gen)

    def algorithm_flags(p, default_alg="blocking"):
        p.add_argument("--alg", choices=("blocking", "region"), default=default_alg)
        p.add_argument("--model", choices=("admission", "delta", "none"))
        p.add_argument("--delta", type=rational)

    run = sub.add_parser("run", help="simulate one algorithm on an instance")
    algorithm_flags(run)
    run.add_argument("--epsilon", type=rational, help="slack to assume (default: the instance's)")
    run.add_argument("-i", "--input", required=True)
    run.add_argument("-o", "--output", required=True, help="output directory")
    run.set_defaults(func=cmd_run)

    orc = sub.add_parser("oracle", help="exact offline optimum")
    orc.add_argument("-i", "--input", required=True)
    orc.add_argument("-o", "--output")
    orc.add_argument("--cap", type=int, default=DEFAULT_CAP)
    orc.set_defaults(func=cmd_oracle)

    ver = sub.add_parser("verify", help="run every invariant check")
    algorithm_flags(ver)
    ver.add_argument("-i", "--input")
    ver.add_argument("--n", type=int)
    ver.add_argument("--m", type=int)
    ver.add_argument("--epsilon", type=rational)
    ver.add_argument("--profile", choices=PROFILES, default="uniform")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--count", type=int, default=1)
    ver.add_argument("--cap", type=int, default=DEFAULT_CAP)
    ver.add_argument("--mutants", type=int, default=0,
                     help="also check that this many fault-injected copies are rejected")
    ver.add_argument("-o", "--output", help="report JSON path")
    ver.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="sweep epsilon (and delta) against the oracle")
    algorithm_flags(bench, default_alg="region")
    bench.add_argument("--epsilon-grid", type=rational_list, required=True)
    bench.add_argument("--delta-fractions", type=rational_list,
                       help="delta-commitment runs at these fractions of epsilon")
    bench.add_argument("--per-point", type=int, default=50)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--n", type=int, default=10)
    bench.add_argument("--m", type=int, default=2)
    bench.add_argument("--profile", choices=PROFILES, default="uniform")
    bench.add_argument("-o", "--output", default="bench_out", help="output directory")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except InstanceError as exc:
        parser.error(str(exc))
    return EXIT_USAGE
