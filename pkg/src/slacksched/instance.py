"""Jobs, instances, slack validation, random generators and the JSON instance format.

All times are :class:`fractions.Fraction` values. A machine on which a job
cannot run is simply absent from ``Job.proc``; asking for its processing time
raises :class:`NotEligible`.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

Time = Fraction

PROFILES = ("uniform", "bursty", "nested", "tight-slack")


class NotEligible(KeyError):
    """Raised when a job is queried on a machine where p_ij is infinite."""


class InstanceError(ValueError):
    """Malformed or slack-violating instance file."""


def as_time(value) -> Fraction:
    """Parse ``"p/q"``, integer strings, ints and Fractions exactly.

    Floats are refused so that nothing is ever rounded silently.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"refusing inexact time value {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not text or "." in text or "e" in text.lower():
            raise ValueError(f"not an exact rational: {value!r}")
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as a time")


def fmt_time(value: Fraction) -> str:
    """Serialize a rational as ``"p/q"`` (or ``"p"`` when integral)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Job:
    id: int
    release: Fraction
    deadline: Fraction
    proc: Mapping[int, Fraction] = field(default_factory=dict)

    def p(self, machine: int) -> Fraction:
        try:
            return self.proc[machine]
        except KeyError:
            raise NotEligible(f"job {self.id} is not eligible on machine {machine}") from None

    def eligible(self, machine: int) -> bool:
        return machine in self.proc

    def machines(self) -> list[int]:
        return sorted(self.proc)


@dataclass(frozen=True)
class Instance:
    machines: int
    jobs: tuple[Job, ...]
    epsilon: Fraction

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))

    @property
    def n(self) -> int:
        return len(self.jobs)

    def job(self, job_id: int) -> Job:
        return self.jobs[job_id]


def restrict_with_map(instance: Instance, job_ids: Iterable[int],
                      machine: int | None = None) -> tuple[Instance, dict[int, int]]:
    """Sub-instance on ``job_ids``, renumbered densely in id order.

    With ``machine`` set the result has a single machine carrying that
    machine's processing times. The second value maps new ids to old ones.
    """
    ids = sorted(set(job_ids))
    new_jobs = []
    mapping = {}
    for new_id, old_id in enumerate(ids):
        job = instance.jobs[old_id]
        if machine is None:
            proc = dict(job.proc)
        else:
            proc = {0: job.p(machine)}
        new_jobs.append(Job(new_id, job.release, job.deadline, proc))
        mapping[new_id] = old_id
    machines = 1 if machine is not None else instance.machines
    return Instance(machines, tuple(new_jobs), instance.epsilon), mapping


@dataclass(frozen=True)
class UponAdmission:
    """Commit to a job's completion at the moment it is admitted."""

    name = "admission"


@dataclass(frozen=True)
class NoCommitment:
    name = "none"


@dataclass(frozen=True)
class DeltaCommitment:
    delta: Fraction
    name = "delta"

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))
        if self.delta <= 0:
            raise ValueError("delta must be positive")


CommitmentModel = NoCommitment | UponAdmission | DeltaCommitment


@dataclass(frozen=True)
class Violation:
    job: int
    machine: int | None
    reason: str

    def __str__(self):
        where = "" if self.machine is None else f" on machine {self.machine}"
        return f"job {self.job}{where}: {self.reason}"


def validate(instance: Instance) -> list[Violation]:
    """Return every violated instance invariant; an empty list means ok."""
    out = []
    if instance.machines < 1:
        out.append(Violation(-1, None, "machine count must be positive"))
    if instance.epsilon <= 0:
        out.append(Violation(-1, None, "epsilon must be positive"))
    for pos, job in enumerate(instance.jobs):
        if job.id != pos:
            out.append(Violation(job.id, None, f"ids must be dense; expected {pos}"))
        if job.release < 0:
            out.append(Violation(job.id, None, "negative release date"))
        if job.deadline <= job.release:
            out.append(Violation(job.id, None, "deadline not after release"))
        if not job.proc:
            out.append(Violation(job.id, None, "no eligible machine"))
        for i, p in sorted(job.proc.items()):
            if not 0 <= i < instance.machines:
                out.append(Violation(job.id, i, "machine index out of range"))
            elif p <= 0:
                out.append(Violation(job.id, i, "processing time must be positive"))
            elif job.deadline - job.release < (1 + instance.epsilon) * p:
                out.append(Violation(job.id, i, "slack below (1+eps)*p"))
    return out


def is_valid(instance: Instance) -> bool:
    return not validate(instance)


def available(job: Job, machine: int, tau: Fraction, delta: Fraction,
              admitted=frozenset()) -> bool:
    """Released, not yet admitted, and at least (1+delta)*p_ij left before the deadline."""
    p = job.p(machine)
    return (job.release <= tau and job.id not in admitted
            and job.deadline - tau >= (1 + delta) * p)


# -- generators ---------------------------------------------------------------

_DEN = 100


def _rat(rng: random.Random, lo: int, hi: int, den: int = _DEN) -> Fraction:
    """Uniform rational in [lo/den, hi/den] on the grid 1/den."""
    return Fraction(rng.randint(lo, hi), den)


def _eligibility(rng: random.Random, m: int) -> list[int]:
    machines = [i for i in range(m) if rng.random() < 0.8]
    return machines or [rng.randrange(m)]


def _proc_row(rng: random.Random, machines: list[int], base: Fraction,
              speeds: list[Fraction] | None = None) -> dict[int, Fraction]:
    # unrelated machines: each eligible machine scales the base size
    # independently, unless fixed per-machine speeds are given
    row = {}
    for i in machines:
        factor = speeds[i] if speeds else Fraction(rng.randint(50, 200), 100)
        p = base * factor
        row[i] = max(Fraction(1, 10**4), Fraction(round(p * 10**4), 10**4))
    return row


def _deadline(rng: random.Random, release: Fraction, row, epsilon: Fraction, tight: bool) -> Fraction:
    need = (1 + epsilon) * max(row.values())
    if tight:
        return release + need
    return release + need * Fraction(rng.randint(100, 300), 100)


def generate(seed: int, n: int, m: int, epsilon, profile: str = "uniform") -> Instance:
    """Deterministic random instance; always passes :func:`validate`.

    Processing times live on the grid 1/10^4 so denominators stay small.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    epsilon = as_time(epsilon)
    rng = random.Random(f"{profile}:{seed}:{n}:{m}:{epsilon}")
    if profile == "nested":
        specs = _nested_specs(rng, n, epsilon)
    else:
        specs = []
        horizon = Fraction(n * 2)
        bursts = [_rat(rng, 0, int(horizon * _DEN)) for _ in range(max(1, n // 6))]
        for _ in range(n):
            if profile == "bursty":
                release = rng.choice(bursts) + _rat(rng, 0, 20)
            else:
                release = _rat(rng, 0, int(horizon * _DEN))
            size = _rat(rng, 10, 400) if rng.random() < 0.7 else _rat(rng, 400, 2000)
            specs.append((release, size, profile == "tight-slack"))
    speeds = None
    if profile == "nested":
        # keep size ratios intact on every machine so the nesting survives
        speeds = [Fraction(rng.randint(50, 200), 100) for _ in range(m)]
    jobs = []
    specs.sort(key=lambda s: s[0])
    for k, (release, size, tight) in enumerate(specs):
        row = _proc_row(rng, _eligibility(rng, m), size, speeds)
        jobs.append(Job(k, release, _deadline(rng, release, row, epsilon, tight), row))
    instance = Instance(m, tuple(jobs), epsilon)
    assert is_valid(instance), validate(instance)
    return instance


def _nested_specs(rng: random.Random, n: int, epsilon: Fraction):
    # Groups of one long job plus either a geometric chain of shrinking jobs
    # or a back-to-back stream of jobs just below eps/4 of its length, all
    # released while it should still be running. Both shapes force
    # preemption-based admission into deep nesting and late completions.
    specs = []
    t = Fraction(0)
    while len(specs) < n:
        size = _rat(rng, 2000, 6000)
        specs.append((t, size, True))
        if rng.random() < 0.5:
            start, cur = t, size
            for _ in range(rng.randint(1, 4)):
                if len(specs) >= n:
                    break
                start = start + cur * Fraction(rng.randint(1, 30), 100)
                cur = max(Fraction(1, 100), cur * Fraction(rng.randint(1, 20), 100))
                specs.append((start, cur, True))
                for _ in range(rng.randint(0, 2)):
                    if len(specs) >= n:
                        break
                    at = start + cur * Fraction(rng.randint(5, 60), 100)
                    child = max(Fraction(1, 100), cur * Fraction(rng.randint(2, 12), 100))
                    specs.append((at, child, rng.random() < 0.7))
        else:
            at = t + size * Fraction(rng.randint(0, 10), 100)
            for _ in range(rng.randint(3, 8)):
                if len(specs) >= n:
                    break
                small = max(Fraction(1, 100), size * epsilon * Fraction(rng.randint(150, 245), 1000))
                specs.append((at, small, rng.random() < 0.5))
                at = at + small * Fraction(rng.randint(100, 130), 100)
        t = t + size * Fraction(rng.randint(150, 400), 100)
    return [(r, max(Fraction(1, 10**4), Fraction(round(s * 10**4), 10**4)), tight)
            for r, s, tight in specs[:n]]


# -- file format --------------------------------------------------------------

def to_dict(instance: Instance) -> dict:
    return {
        "machines": instance.machines,
        "epsilon": fmt_time(instance.epsilon),
        "jobs": [
            {
                "id": job.id,
                "release": fmt_time(job.release),
                "deadline": fmt_time(job.deadline),
                "proc": {str(i): fmt_time(p) for i, p in sorted(job.proc.items())},
            }
            for job in instance.jobs
        ],
    }


def dumps(instance: Instance) -> str:
    return json.dumps(to_dict(instance), indent=2) + "\n"


def from_dict(data: dict) -> Instance:
    def field_of(obj, key, where):
        try:
            return obj[key]
        except (KeyError, TypeError):
            raise InstanceError(f"{where}: missing field {key!r}") from None

    def rational(raw, where):
        if not isinstance(raw, (str, int)) or isinstance(raw, bool):
            raise InstanceError(f"{where}: expected rational string, got {raw!r}")
        try:
            return as_time(raw)
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            raise InstanceError(f"{where}: {exc}") from None

    machines = field_of(data, "machines", "top level")
    if not isinstance(machines, int) or isinstance(machines, bool):
        raise InstanceError(f"top level: machines must be an integer, got {machines!r}")
    epsilon = rational(field_of(data, "epsilon", "top level"), "epsilon")
    jobs = []
    for pos, raw in enumerate(field_of(data, "jobs", "top level")):
        where = f"jobs[{pos}]"
        job_id = field_of(raw, "id", where)
        proc_raw = field_of(raw, "proc", where)
        if not isinstance(proc_raw, dict):
            raise InstanceError(f"{where}.proc: expected an object")
        proc = {}
        for key, value in proc_raw.items():
            try:
                machine = int(key)
            except ValueError:
                raise InstanceError(f"{where}.proc: bad machine key {key!r}") from None
            proc[machine] = rational(value, f"{where}.proc[{key}]")
        jobs.append(Job(job_id,
                        rational(field_of(raw, "release", where), f"{where}.release"),
                        rational(field_of(raw, "deadline", where), f"{where}.deadline"),
                        proc))
    instance = Instance(machines, tuple(jobs), epsilon)
    problems = validate(instance)
    if problems:
        raise InstanceError("invalid instance: " + "; ".join(map(str, problems)))
    return instance


def loads(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_dict(data)


def load(path) -> Instance:
    return loads(Path(path).read_text(encoding="utf-8"))


def save(instance: Instance, path) -> None:
    Path(path).write_text(dumps(instance), encoding="utf-8")
