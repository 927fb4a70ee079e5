"""Admission without commitment: threshold preemption.

A running job can only be preempted by an available job shorter than
``eps/4`` of its own length; availability requires ``(1 + eps/2) p_ij`` of
room before the deadline. Jobs may finish late.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .instance import Instance
from .sim import AdmissionRecord, Event, Kind, RunResult, Simulator, simulate


@dataclass(frozen=True)
class RegionParams:
    epsilon: Fraction

    @property
    def delta(self) -> Fraction:
        return self.epsilon / 2

    @property
    def ratio(self) -> Fraction:
        return self.epsilon / 4

    @property
    def bound_factor(self) -> Fraction:
        """OPT <= (8/eps + 4) |admitted|."""
        return 8 / self.epsilon + 4


class RegionPolicy:
    name = "region"

    def __init__(self, instance: Instance):
        self.instance = instance
        self.params = RegionParams(min(instance.epsilon, Fraction(1)))
        self.records: dict[int, AdmissionRecord] = {}
        self.sim: Simulator | None = None

    def start(self, sim: Simulator) -> None:
        self.sim = sim

    def is_current(self, ev: Event) -> bool:
        return ev.kind in (Kind.RELEASE, Kind.COMPLETION)

    def decide(self, tau: Fraction, events) -> None:
        self.threshold_preemption(tau)

    def threshold_preemption(self, tau: Fraction) -> list[AdmissionRecord]:
        sim = self.sim
        admitted = []
        i = 0
        while i < self.instance.machines:
            star = sim.shortest_available(i, tau, self.params.delta)
            if star is None:
                i += 1
                continue
            running = sim.running(i)
            if running is not None:
                jobs = self.instance.jobs
                if not jobs[star].p(i) < self.params.ratio * jobs[running].p(i):
                    i += 1
                    continue
            sim.admit(star, i, tau)
            rec = AdmissionRecord(star, i, tau)
            self.records[star] = rec
            admitted.append(rec)
            i = 0
        return admitted


def run_region(instance: Instance) -> RunResult:
    return simulate(instance, RegionPolicy(instance))


def outcome_split(result: RunResult) -> tuple[dict[int, set[int]], dict[int, set[int]]]:
    """Admitted jobs per machine, split into on-time (F) and late (U)."""
    inst = result.instance
    finished = {i: set() for i in range(inst.machines)}
    late = {i: set() for i in range(inst.machines)}
    for j, rec in result.records.items():
        done = result.trace.completions.get(j)
        if done is not None and done <= inst.jobs[j].deadline:
            finished[rec.machine].add(j)
        else:
            late[rec.machine].add(j)
    return finished, late
