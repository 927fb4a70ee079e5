"""Seeded instance grids and sweeps shared by the CLI and the acceptance tests."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .blocking import run_blocking
from .instance import (PROFILES, CommitmentModel, DeltaCommitment, Instance, UponAdmission,
                       fmt_time, generate)
from .oracle import opt_throughput
from .region import run_region
from .sim import RunResult
from .verify import check_bounds

EPSILON_GRID = (Fraction(1, 8), Fraction(1, 4), Fraction(1, 2), Fraction(1))


def suite_instances(count: int, n_max: int, m_max: int, seed0: int = 0):
    """Yield ``(seed, instance)`` cycling through sizes, machine counts, epsilons and profiles."""
    for k in range(count):
        seed = seed0 + k
        n = 1 + (7 * k) % n_max
        m = 1 + (k // 4) % m_max
        eps = EPSILON_GRID[k % len(EPSILON_GRID)]
        profile = PROFILES[(k // 3) % len(PROFILES)]
        yield seed, generate(seed, n, m, eps, profile)


def commitment_configs(epsilon: Fraction) -> list[CommitmentModel]:
    """Commit upon admission, delta below eps/2, and delta above eps/2."""
    eps = min(epsilon, Fraction(1))
    return [UponAdmission(), DeltaCommitment(eps / 4), DeltaCommitment(3 * eps / 4)]


def model_label(model: CommitmentModel) -> str:
    if isinstance(model, DeltaCommitment):
        return f"delta={fmt_time(model.delta)}"
    return model.name


def run_algorithm(instance: Instance, algorithm: str,
                  model: CommitmentModel | None = None) -> RunResult:
    if algorithm == "blocking":
        return run_blocking(instance, model or UponAdmission())
    if algorithm == "region":
        return run_region(instance)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def artifacts(result: RunResult) -> dict[str, str]:
    """Serialized outputs of one run, keyed by file name."""
    return {
        "trace.csv": result.trace.to_csv(),
        "summary.json": result.summary_json(),
        "admissions.json": result.log_json(),
    }


# -- benchmark sweep -------------------------------------------------------------

LONG_HEADER = ["seed", "n", "m", "epsilon", "delta", "admitted", "on_time", "opt",
               "ratio", "bound", "pass"]


@dataclass(frozen=True)
class BenchTask:
    algorithm: str
    epsilon: Fraction
    delta: Fraction | None
    seed: int
    n: int
    m: int
    profile: str


def _bench_one(task: BenchTask) -> list[str]:
    inst = generate(task.seed, task.n, task.m, task.epsilon, task.profile)
    model = None if task.delta is None else DeltaCommitment(task.delta)
    result = run_algorithm(inst, task.algorithm, model)
    opt = opt_throughput(inst).opt
    rep = check_bounds(result, opt)
    ratio = rep.ratio
    ratio_text = "inf" if ratio == float("inf") else fmt_time(ratio)
    return [str(task.seed), str(task.n), str(task.m), fmt_time(task.epsilon),
            "" if task.delta is None else fmt_time(task.delta),
            str(rep.admitted), str(rep.on_time), str(opt), ratio_text,
            fmt_time(rep.bound), "1" if rep.satisfied else "0"]


def bench_tasks(algorithm: str, eps_grid, delta_fracs, per_point: int, seed: int,
                n: int, m: int, profile: str) -> list[BenchTask]:
    tasks = []
    fracs = list(delta_fracs) or [None]
    if algorithm == "region":
        fracs = [None]
    for eps in eps_grid:
        for frac in fracs:
            delta = None if frac is None else frac * min(eps, Fraction(1))
            for k in range(per_point):
                tasks.append(BenchTask(algorithm, eps, delta, seed * 100003 + k, n, m, profile))
    return tasks


def worker_count() -> int:
    raw = os.environ.get("SCHED_SIM_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def run_bench(tasks: list[BenchTask], workers: int | None = None) -> list[list[str]]:
    workers = workers or worker_count()
    if workers == 1 or len(tasks) < 2:
        return [_bench_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps task order, so output is independent of scheduling
        return list(pool.map(_bench_one, tasks, chunksize=8))


def long_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LONG_HEADER)
    writer.writerows(rows)
    return buf.getvalue()


def aggregate_csv(rows: list[list[str]]) -> str:
    groups: dict[tuple[str, str], list[list[str]]] = {}
    for row in rows:
        groups.setdefault((row[3], row[4]), []).append(row)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "delta", "count", "mean_ratio", "max_ratio", "bound_factor",
                     "all_pass"])
    for (eps, delta), grp in groups.items():
        finite = [Fraction(r[8]) for r in grp if r[8] != "inf"]
        mean = sum(finite, Fraction(0)) / len(finite) if finite else None
        worst = max(finite) if finite else None
        if any(r[8] == "inf" for r in grp):
            worst_text = "inf"
        else:
            worst_text = "" if worst is None else f"{float(worst):.6f}"
        factors = {Fraction(r[9]) / int(r[5]) for r in grp if int(r[5])}
        factor = f"{float(max(factors)):.6f}" if factors else ""
        writer.writerow([eps, delta, len(grp), "" if mean is None else f"{float(mean):.6f}",
                         worst_text, factor, "1" if all(r[10] == "1" for r in grp) else "0"])
    return buf.getvalue()


def plot_script(algorithm: str, agg_name: str = "bench_agg.csv") -> str:
    """A gnuplot script that plots mean and worst OPT/|F| against epsilon."""
    lines = [
        "# mean and worst OPT/|F| per epsilon grid point",
        "set datafile separator ','",
        "frac(s) = strstrt(s, '/') > 0 ? "
        "real(s[1:strstrt(s, '/') - 1]) / real(s[strstrt(s, '/') + 1:]) : real(s)",
        "set logscale x 2",
        "set xlabel 'epsilon'",
        "set ylabel 'OPT / on-time jobs'",
        f"set title '{algorithm} algorithm'",
        "set terminal pngcairo size 800,500",
        "set output 'bench.png'",
        f"plot '{agg_name}' every ::1 using (frac(strcol(1))):4 with linespoints title 'mean', \\",
        f"     '{agg_name}' every ::1 using (frac(strcol(1))):5 with linespoints title 'max'",
    ]
    return "\n".join(lines) + "\n"
