"""Exact non-migratory offline optimum for small instances.

Single-machine feasibility of a job set with release dates and deadlines is
decided by preemptive EDF, which is exact for that problem. The optimum is
found by branch and bound over per-machine job sets.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

from .instance import Instance

DEFAULT_CAP = 14
MAX_MACHINES = 3


class CapExceeded(Exception):
    """Instance too large for exact search; use :func:`opt_upper_bound` instead."""


def edf_schedule(jobs) -> dict[int, Fraction] | None:
    """Preemptive EDF on ``(id, release, deadline, p)`` tuples.

    Returns completion times, or ``None`` as soon as a deadline is missed.
    """
    order = sorted(jobs, key=lambda j: (j[1], j[0]))
    ready: list = []
    done = {}
    t = None
    k = 0
    while k < len(order) or ready:
        if not ready:
            t = order[k][1] if t is None else max(t, order[k][1])
        while k < len(order) and order[k][1] <= t:
            jid, _, d, p = order[k]
            heapq.heappush(ready, [d, jid, p])
            k += 1
        nxt = order[k][1] if k < len(order) else None
        top = ready[0]
        d, jid, left = top
        finish = t + left
        if nxt is not None and nxt < finish:
            top[2] = left - (nxt - t)
            t = nxt
            continue
        heapq.heappop(ready)
        t = finish
        if t > d:
            return None
        done[jid] = t
    return done


def edf_feasible(machine: int, jobs) -> bool:
    """True iff the given Job objects can all meet their deadlines on ``machine``."""
    return edf_schedule([(j.id, j.release, j.deadline, j.p(machine)) for j in jobs]) is not None


@dataclass
class OracleResult:
    opt: int
    witness: dict[int, frozenset[int]]
    exact: bool = True

    def to_json(self) -> str:
        return json.dumps({
            "opt": self.opt,
            "witness": {str(i): sorted(js) for i, js in sorted(self.witness.items())},
            "exact": self.exact,
        }, indent=2) + "\n"


def _integer_rows(instance: Instance):
    """Scale all times by a common denominator so EDF runs on plain ints."""
    dens = [1]
    for job in instance.jobs:
        dens += [job.release.denominator, job.deadline.denominator]
        dens += [p.denominator for p in job.proc.values()]
    scale = math.lcm(*dens)
    rows = {}
    for job in instance.jobs:
        r = int(job.release * scale)
        d = int(job.deadline * scale)
        rows[job.id] = (r, d, {i: int(p * scale) for i, p in job.proc.items()})
    return rows


class _Feasibility:
    def __init__(self, instance: Instance):
        self.rows = _integer_rows(instance)
        self.cache: dict[tuple[int, frozenset], bool] = {}

    def __call__(self, machine: int, ids: frozenset) -> bool:
        key = (machine, ids)
        hit = self.cache.get(key)
        if hit is None:
            jobs = []
            for j in ids:
                r, d, proc = self.rows[j]
                jobs.append((j, r, d, proc[machine]))
            hit = edf_schedule(jobs) is not None
            self.cache[key] = hit
        return hit


def opt_throughput(instance: Instance, cap: int = DEFAULT_CAP) -> OracleResult:
    """Maximum number of jobs a non-migratory schedule can finish on time."""
    n, m = instance.n, instance.machines
    if n > cap or m > MAX_MACHINES:
        raise CapExceeded(f"n={n}, m={m} exceeds exact cap (n <= {cap}, m <= {MAX_MACHINES})")
    feasible = _Feasibility(instance)
    # jobs that fit nowhere alone can be dropped up front
    jobs = [j for j in instance.jobs
            if any(feasible(i, frozenset([j.id])) for i in j.proc)]
    jobs.sort(key=lambda j: (j.deadline, j.id))
    best = {"count": 0, "sets": [frozenset() for _ in range(m)]}
    sets = [frozenset() for _ in range(m)]

    def search(k: int, count: int) -> None:
        if count > best["count"]:
            best["count"] = count
            best["sets"] = list(sets)
        if k == len(jobs) or count + (len(jobs) - k) <= best["count"]:
            return
        job = jobs[k]
        for i in sorted(job.proc):
            grown = sets[i] | {job.id}
            if feasible(i, grown):
                old = sets[i]
                sets[i] = grown
                search(k + 1, count + 1)
                sets[i] = old
        search(k + 1, count)

    search(0, 0)
    witness = {i: s for i, s in enumerate(best["sets"])}
    return OracleResult(best["count"], witness, True)


def brute_force_opt(instance: Instance) -> int:
    """Naive reference: try every assignment of every job to a machine or to nobody."""
    options = [[None] + sorted(j.proc) for j in instance.jobs]
    best = 0
    for choice in product(*options):
        per_machine: dict[int, list] = {}
        for job, i in zip(instance.jobs, choice):
            if i is not None:
                per_machine.setdefault(i, []).append(job)
        if all(edf_feasible(i, js) for i, js in per_machine.items()):
            best = max(best, sum(len(js) for js in per_machine.values()))
    return best


def subset_enumeration_opt(instance: Instance) -> int:
    """Single-machine reference: the largest EDF-feasible subset, by enumeration."""
    if instance.machines != 1:
        raise ValueError("subset enumeration is the single-machine oracle")
    jobs = [j for j in instance.jobs if j.eligible(0)]
    for size in range(len(jobs), 0, -1):
        for subset in combinations(jobs, size):
            if edf_feasible(0, subset):
                return size
    return 0


def witness_completions(instance: Instance, witness: dict[int, frozenset[int]]) -> dict[int, Fraction]:
    """Completion times of an EDF realization of the witness, per job."""
    out = {}
    for i, ids in witness.items():
        jobs = [(j, instance.jobs[j].release, instance.jobs[j].deadline, instance.jobs[j].p(i))
                for j in ids]
        done = edf_schedule(jobs)
        if done is None:
            raise ValueError(f"witness set on machine {i} is not feasible")
        out.update(done)
    return out


def opt_upper_bound(instance: Instance) -> int:
    """Cheap sound bound: per machine, how many shortest jobs fit in the release/deadline hull."""
    if not instance.jobs:
        return 0
    total = 0
    for i in range(instance.machines):
        jobs = [j for j in instance.jobs if j.eligible(i)]
        if not jobs:
            continue
        hull = max(j.deadline for j in jobs) - min(j.release for j in jobs)
        used = Fraction(0)
        fit = 0
        for p in sorted(j.p(i) for j in jobs):
            if used + p > hull:
                break
            used += p
            fit += 1
        total += fit
    return min(instance.n, total)

