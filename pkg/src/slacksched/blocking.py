"""Admission with commitment: scheduling intervals and blocking periods.

Every admitted job ``j`` owns a scheduling interval ``[a_j, e_j)`` in which it
and everything it admits must finish, and a blocking period (a finite union
of half-open intervals after ``e_j``) during which its parent refuses jobs of
similar size. A job only admits jobs that are smaller by a factor ``gamma``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .instance import (CommitmentModel, DeltaCommitment, Instance, NoCommitment,
                       UponAdmission)
from .sim import AdmissionRecord, Event, Kind, RunResult, Simulator, simulate

Interval = tuple[Fraction, Fraction]


@dataclass(frozen=True)
class BlockingParams:
    epsilon: Fraction
    delta_input: Fraction | None
    delta: Fraction
    gamma: Fraction
    beta: Fraction
    completion_margin: Fraction

    @property
    def alpha(self) -> Fraction:
        """Charging constant of the competitive bound; OPT <= (alpha + 5) |admitted|."""
        e, d = self.epsilon, self.delta
        return e / (e - d) * (2 * self.beta + (1 + 2 * d) / self.gamma)

    @property
    def bound_factor(self) -> Fraction:
        return self.alpha + 5


def completion_margin(delta: Fraction, gamma: Fraction, beta: Fraction) -> Fraction:
    """Left side of the completion condition; all admitted jobs finish when it is >= 1."""
    return (beta / 2) / (beta / 2 + (1 + 2 * delta)) * (1 + delta - 2 * (1 + 2 * delta) * gamma)


def derive_params(epsilon, model: CommitmentModel = UponAdmission()) -> BlockingParams:
    """Clamp epsilon to 1, pick delta' = max(delta, eps/2), gamma = delta'/16, beta = 16/delta'."""
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    delta_input = None
    if isinstance(model, DeltaCommitment):
        delta_input = model.delta
        if delta_input >= epsilon:
            raise ValueError(f"delta-commitment needs delta < epsilon (got {delta_input} >= {epsilon})")
    elif not isinstance(model, (UponAdmission, NoCommitment)):
        raise TypeError(f"unknown commitment model {model!r}")
    eps = min(epsilon, Fraction(1))
    delta = eps / 2
    if delta_input is not None and delta_input > delta:
        delta = delta_input
    if delta >= eps:
        raise ValueError(f"delta={delta_input} is not below the clamped epsilon {eps}")
    gamma = delta / 16
    beta = 16 / delta
    margin = completion_margin(delta, gamma, beta)
    if margin < 1 or not 0 < gamma < 1 or beta < 1 or (1 + 2 * delta) * gamma > delta:
        raise AssertionError(f"parameter conditions fail for delta={delta}")
    return BlockingParams(eps, delta_input, delta, gamma, beta, margin)


def _clip(s: Fraction, f: Fraction) -> list[Interval]:
    return [(s, f)] if f > s else []


class BlockingPolicy:
    name = "blocking"

    def __init__(self, instance: Instance, model: CommitmentModel = UponAdmission()):
        self.instance = instance
        self.model = model
        self.params = derive_params(instance.epsilon, model)
        self.records: dict[int, AdmissionRecord] = {}
        self.children: dict[int, list[int]] = {}
        self.on_machine: list[list[int]] = [[] for _ in range(instance.machines)]
        self.sim: Simulator | None = None
        self.admission_steps = 0

    def p(self, job: int, machine: int) -> Fraction:
        return self.instance.jobs[job].p(machine)

    # -- engine hooks --------------------------------------------------------

    def start(self, sim: Simulator) -> None:
        self.sim = sim

    def is_current(self, ev: Event) -> bool:
        # interval updates move endpoints, so queued end events may be stale
        if ev.kind == Kind.RELEASE:
            return True
        if ev.kind == Kind.END_SCHEDULING:
            return self.records[ev.job].end == ev.time
        if ev.kind == Kind.END_BLOCKING:
            return any(f == ev.time for _, f in self.records[ev.job].blocking)
        return False

    def decide(self, tau: Fraction, events) -> None:
        self.admission_routine(tau)

    # -- admission -----------------------------------------------------------

    def blocked(self, machine: int, tau: Fraction, p_star: Fraction) -> bool:
        return any(self.p(k, machine) <= 2 * p_star and self.records[k].in_blocking(tau)
                   for k in self.on_machine[machine])

    def admission_routine(self, tau: Fraction) -> list[AdmissionRecord]:
        sim = self.sim
        gamma = self.params.gamma
        admitted = []
        i = 0
        while i < self.instance.machines:
            star = sim.shortest_available(i, tau, self.params.delta)
            if star is None:
                i += 1
                continue
            p_star = self.p(star, i)
            active = [k for k in self.on_machine[i] if self.records[k].in_scheduling(tau)]
            if not active:
                admitted.append(self._admit(star, i, tau, parent=None))
            else:
                j = min(active, key=lambda k: (self.p(k, i), k))
                if not (p_star < gamma * self.p(j, i) and not self.blocked(i, tau, p_star)):
                    i += 1
                    continue
                admitted.append(self._admit(star, i, tau, parent=j, active=active))
            # an admission is itself a trigger: restart from the first machine
            self.admission_steps += 1
            i = 0
        return admitted

    def _admit(self, star: int, machine: int, tau: Fraction, parent: int | None,
               active=()) -> AdmissionRecord:
        self.sim.admit(star, machine, tau)
        p_star = self.p(star, machine)
        end = tau + (1 + self.params.delta) * p_star
        rec = AdmissionRecord(star, machine, tau, parent, end, [])
        self.records[star] = rec
        self.on_machine[machine].append(star)
        self.children[star] = []
        touched = [star]
        if parent is not None:
            self.children[parent].append(star)
            if end <= self.records[parent].end:
                touched += self.attach_blocking_period(star, parent, tau)
            else:
                touched += self.extend_scheduling_intervals(star, parent, tau, active)
        for k in touched:
            r = self.records[k]
            if r.end > tau:
                self.sim.schedule(r.end, Kind.END_SCHEDULING, k, machine)
            for _, f in r.blocking:
                if f > tau:
                    self.sim.schedule(f, Kind.END_BLOCKING, k, machine)
        return rec

    def _shift_blocking(self, star: int, tau: Fraction, siblings, machine: int) -> list[int]:
        """Move the future parts of the siblings' blocking periods out of j*'s way.

        The fragment containing ``tau`` (only possible for a job more than
        twice as long as j*) is cut at ``tau``; later fragments are pushed back
        by (1+delta+beta) p_{j*}. Everything is clipped at the parent's
        interval end and empty pieces are dropped.
        """
        p_star = self.p(star, machine)
        shift = (1 + self.params.delta + self.params.beta) * p_star
        changed = []
        for k in sorted(siblings, key=lambda k: (self.p(k, machine), k)):
            rec = self.records[k]
            if not any(f > tau for _, f in rec.blocking):
                continue
            cap = self.records[rec.parent].end
            pieces: list[Interval] = []
            for s, f in rec.blocking:
                if f <= tau:
                    pieces.append((s, f))
                elif s <= tau:
                    if self.p(k, machine) <= 2 * p_star:
                        raise AssertionError(f"admitted job {star} inside blocking period of {k}")
                    pieces += _clip(s, tau)
                    pieces += _clip(tau + shift, min(cap, f + shift))
                else:
                    pieces += _clip(s + shift, min(cap, f + shift))
            rec.blocking = pieces
            changed.append(k)
        return changed

    def attach_blocking_period(self, star: int, parent: int, tau: Fraction) -> list[int]:
        """Case e_{j*} <= e_j: give j* a blocking period and shift its siblings'."""
        rec = self.records[star]
        machine = rec.machine
        e_parent = self.records[parent].end
        f_star = min(e_parent, rec.end + self.params.beta * self.p(star, machine))
        rec.blocking = _clip(rec.end, f_star)
        siblings = [k for k in self.children[parent] if k != star]
        changed = self._shift_blocking(star, tau, siblings, machine)
        self._check_size(rec)
        return changed

    def extend_scheduling_intervals(self, star: int, parent: int, tau: Fraction,
                                    active) -> list[int]:
        """Case e_{j*} > e_j: stretch every interval containing tau to end at e_{j*}."""
        rec = self.records[star]
        machine = rec.machine
        extended = [k for k in active if self.records[k].end < rec.end]
        for k in extended:
            self.records[k].end = rec.end
        for k in extended:
            r = self.records[k]
            if r.parent is None:
                r.blocking = []
            else:
                cap = self.records[r.parent].end
                r.blocking = _clip(r.end, min(cap, r.end + self.params.beta * self.p(k, machine)))
            self._check_size(r)
        # children of the stretched jobs and of the parent of the outermost
        # stretched job may now collide with the longer intervals
        owners = set(extended)
        owners |= {self.records[k].parent for k in extended if self.records[k].parent is not None}
        siblings = [c for o in owners for c in self.children[o]
                    if c != star and c not in extended]
        changed = self._shift_blocking(star, tau, siblings, machine)
        return list(extended) + changed

    def _check_size(self, rec: AdmissionRecord) -> None:
        if rec.blocking_size() > self.params.beta * self.p(rec.job, rec.machine):
            raise AssertionError(f"blocking period of job {rec.job} exceeds beta * p")


def run_blocking(instance: Instance, model: CommitmentModel = UponAdmission()) -> RunResult:
    policy = BlockingPolicy(instance, model)
    return simulate(instance, policy)


@dataclass(frozen=True)
class CommitViolation:
    job: int
    clause: str

    def __str__(self):
        return f"job {self.job}: {self.clause}"


def commit_check(result: RunResult, model: CommitmentModel) -> list[CommitViolation]:
    """Every admitted job is committed at admission and must finish by its deadline.

    Under delta-commitment the admission must also happen no later than
    d_j - (1+delta) p_ij.
    """
    out = []
    inst = result.instance
    for j, rec in result.records.items():
        job = inst.jobs[j]
        p = job.p(rec.machine)
        if rec.commit_time != rec.admitted_at:
            out.append(CommitViolation(j, "commit time differs from admission time"))
        done = result.trace.completions.get(j)
        if done is None:
            out.append(CommitViolation(j, "admitted but never completed"))
        elif done > job.deadline:
            out.append(CommitViolation(j, f"completed at {done} after deadline {job.deadline}"))
        if isinstance(model, DeltaCommitment) and rec.admitted_at > job.deadline - (1 + model.delta) * p:
            out.append(CommitViolation(j, "committed later than d_j - (1+delta) p_ij"))
    return out
