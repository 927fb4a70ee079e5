"""Event-driven simulation of non-migratory preemptive SPT machines.

The engine owns the clock, the per-machine queues of admitted jobs and the
execution trace. Admission decisions belong to a policy object which is
called once per distinct decision time, after every event at that time has
been applied.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction

from .instance import Instance, fmt_time


class SimulationError(RuntimeError):
    """An engine invariant was broken (policy bug or engine bug)."""


class Kind(IntEnum):
    # ordering among events sharing a timestamp
    RELEASE = 0
    END_BLOCKING = 1
    END_SCHEDULING = 2
    COMPLETION = 3


@dataclass(frozen=True, order=True)
class Event:
    time: Fraction
    kind: Kind
    seq: int
    job: int = field(compare=False)
    machine: int | None = field(default=None, compare=False)


@dataclass
class Segment:
    machine: int
    job: int
    start: Fraction
    end: Fraction


@dataclass
class AdmissionRecord:
    """Per admitted job. ``end`` and ``blocking`` are only used by the blocking policy."""

    job: int
    machine: int
    admitted_at: Fraction
    parent: int | None = None
    end: Fraction | None = None
    blocking: list[tuple[Fraction, Fraction]] = field(default_factory=list)

    @property
    def commit_time(self) -> Fraction:
        return self.admitted_at

    def in_scheduling(self, tau: Fraction) -> bool:
        return self.end is not None and self.admitted_at <= tau < self.end

    def in_blocking(self, tau: Fraction) -> bool:
        return any(s <= tau < f for s, f in self.blocking)

    def blocking_size(self) -> Fraction:
        return sum((f - s for s, f in self.blocking), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "job": self.job,
            "machine": self.machine,
            "admitted_at": fmt_time(self.admitted_at),
            "parent": self.parent,
            "end": None if self.end is None else fmt_time(self.end),
            "blocking": [[fmt_time(s), fmt_time(f)] for s, f in self.blocking],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AdmissionRecord":
        return cls(
            job=data["job"],
            machine=data["machine"],
            admitted_at=Fraction(data["admitted_at"]),
            parent=data.get("parent"),
            end=None if data.get("end") is None else Fraction(data["end"]),
            blocking=[(Fraction(s), Fraction(f)) for s, f in data.get("blocking", [])],
        )


@dataclass
class Trace:
    segments: list[Segment] = field(default_factory=list)
    completions: dict[int, Fraction] = field(default_factory=dict)
    admissions: dict[int, tuple[int, Fraction]] = field(default_factory=dict)
    decision_times: list[Fraction] = field(default_factory=list)

    def on_time(self, instance: Instance) -> dict[int, bool]:
        return {j: c <= instance.jobs[j].deadline for j, c in sorted(self.completions.items())}

    def machine_segments(self, machine: int) -> list[Segment]:
        return [s for s in self.segments if s.machine == machine]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["machine", "job", "start", "end"])
        for s in self.segments:
            writer.writerow([s.machine, s.job, fmt_time(s.start), fmt_time(s.end)])
        return buf.getvalue()

    def summary(self, instance: Instance) -> dict:
        on_time = self.on_time(instance)
        return {
            "completions": {str(j): fmt_time(c) for j, c in sorted(self.completions.items())},
            "on_time": sum(on_time.values()),
            "late": sum(not v for v in on_time.values()),
            "admitted": len(self.admissions),
        }


@dataclass
class RunResult:
    instance: Instance
    algorithm: str
    trace: Trace
    records: dict[int, AdmissionRecord]
    params: object = None

    @property
    def admitted(self) -> list[int]:
        return list(self.records)

    def log_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.records.values()], indent=2) + "\n"

    def summary_json(self) -> str:
        data = {"algorithm": self.algorithm, **self.trace.summary(self.instance)}
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


class Machine:
    """Admitted, uncompleted jobs of one machine, dispatched in SPT order."""

    def __init__(self, index: int):
        self.index = index
        self._heap: list[tuple[Fraction, int]] = []
        self.remaining: dict[int, Fraction] = {}
        self.segments: list[Segment] = []

    def add(self, job: int, p: Fraction) -> None:
        heapq.heappush(self._heap, (p, job))
        self.remaining[job] = p

    def running(self) -> int | None:
        # ties on p are broken by the smaller job id through tuple order
        return self._heap[0][1] if self._heap else None

    def next_completion(self, now: Fraction) -> Fraction | None:
        job = self.running()
        return None if job is None else now + self.remaining[job]

    def advance(self, now: Fraction, delta: Fraction) -> int | None:
        """Run the SPT job for ``delta``; return its id if it completes exactly then."""
        if delta < 0:
            raise SimulationError("cannot advance backwards")
        job = self.running()
        if job is None or delta == 0:
            return None
        left = self.remaining[job] - delta
        if left < 0:
            raise SimulationError(f"advanced past completion of job {job} on machine {self.index}")
        end = now + delta
        last = self.segments[-1] if self.segments else None
        if last is not None and last.job == job and last.end == now:
            last.end = end
        else:
            self.segments.append(Segment(self.index, job, now, end))
        if left == 0:
            heapq.heappop(self._heap)
            del self.remaining[job]
            return job
        self.remaining[job] = left
        return None


class Simulator:
    """Drives one run. Policies call :meth:`admit` and :meth:`schedule`."""

    def __init__(self, instance: Instance, policy):
        self.instance = instance
        self.policy = policy
        self.now = Fraction(0)
        self.machines = [Machine(i) for i in range(instance.machines)]
        self.trace = Trace()
        self._events: list[Event] = []
        self._seq = 0
        self._pending: set[int] = set()

    # -- policy-facing API ---------------------------------------------------

    def schedule(self, time: Fraction, kind: Kind, job: int, machine: int | None = None) -> None:
        if time < self.now:
            raise SimulationError(f"event at {time} is in the past (now {self.now})")
        heapq.heappush(self._events, Event(time, kind, self._seq, job, machine))
        self._seq += 1

    def is_admitted(self, job: int) -> bool:
        return job in self.trace.admissions

    def admit(self, job: int, machine: int, tau: Fraction) -> None:
        info = self.instance.jobs[job]
        if not info.eligible(machine):
            raise SimulationError(f"policy admitted job {job} to non-eligible machine {machine}")
        if self.is_admitted(job):
            raise SimulationError(f"job {job} admitted twice")
        if tau != self.now:
            raise SimulationError("admissions happen at the current time only")
        self.trace.admissions[job] = (machine, tau)
        self._pending.discard(job)
        self.machines[machine].add(job, info.p(machine))

    def shortest_available(self, machine: int, tau: Fraction, delta: Fraction) -> int | None:
        """Released, unadmitted job with minimal p_ij and d_j - tau >= (1+delta) p_ij."""
        best = None
        best_key = None
        for j in self._pending:
            job = self.instance.jobs[j]
            p = job.proc.get(machine)
            if p is None or job.deadline - tau < (1 + delta) * p:
                continue
            key = (p, j)
            if best_key is None or key < best_key:
                best, best_key = j, key
        return best

    def running(self, machine: int) -> int | None:
        return self.machines[machine].running()

    # -- main loop -----------------------------------------------------------

    def run(self) -> Trace:
        for job in self.instance.jobs:
            self.schedule(job.release, Kind.RELEASE, job.id)
        self.policy.start(self)
        while True:
            upcoming = [c for c in (m.next_completion(self.now) for m in self.machines) if c is not None]
            if self._events:
                upcoming.append(self._events[0].time)
            if not upcoming:
                break
            t = min(upcoming)
            delta = t - self.now
            finished = []
            for m in self.machines:
                done = m.advance(self.now, delta)
                if done is not None:
                    finished.append((m.index, done))
            self.now = t
            batch = []
            while self._events and self._events[0].time == t:
                batch.append(heapq.heappop(self._events))
            for machine, job in finished:
                self.trace.completions[job] = t
                batch.append(Event(t, Kind.COMPLETION, -1, job, machine))
            batch.sort()
            for ev in batch:
                if ev.kind == Kind.RELEASE:
                    self._pending.add(ev.job)
            live = [ev for ev in batch if self.policy.is_current(ev)]
            if live:
                self.trace.decision_times.append(t)
                self.policy.decide(t, live)
        segments = [s for m in self.machines for s in m.segments]
        self.trace.segments = sorted(segments, key=lambda s: (s.machine, s.start))
        return self.trace


def simulate(instance: Instance, policy) -> RunResult:
    sim = Simulator(instance, policy)
    trace = sim.run()
    return RunResult(instance, policy.name, trace, policy.records, getattr(policy, "params", None))
