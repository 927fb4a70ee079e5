"""Retrospective checks over finished runs.

Each ``check_*`` function returns a list of counterexamples; an empty list
means the property holds. :func:`verify_run` bundles all of them into a
:class:`Report`.
"""
from __future__ import annotations

import bisect
import copy
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .blocking import BlockingParams, BlockingPolicy, commit_check
from .instance import CommitmentModel, Instance, UponAdmission, fmt_time, restrict_with_map
from .oracle import OracleResult, witness_completions
from .region import RegionPolicy, outcome_split, run_region
from .sim import AdmissionRecord, RunResult, simulate

INF = math.inf


@dataclass(frozen=True)
class Counterexample:
    check: str
    detail: str

    def __str__(self):
        return f"[{self.check}] {self.detail}"


# -- threshold timeline --------------------------------------------------------

@dataclass
class ThresholdTimeline:
    """Per machine: segment starts (ascending, first is 0) and the value on each segment."""

    starts: dict[int, list[Fraction]]
    values: dict[int, list]

    def value_at(self, machine: int, tau: Fraction):
        starts = self.starts[machine]
        k = bisect.bisect_right(starts, tau) - 1
        return INF if k < 0 else self.values[machine][k]

    def segments(self, machine: int) -> int:
        return len(self.starts[machine])

    def breakpoints(self, machine: int) -> list[Fraction]:
        return list(self.starts[machine])

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if v == INF else fmt_time(v)
        return {str(i): [[fmt_time(s), enc(v)] for s, v in zip(self.starts[i], self.values[i])]
                for i in sorted(self.starts)}


def _merge(points, value_of) -> tuple[list[Fraction], list]:
    starts, values = [], []
    for t in sorted(set(points)):
        v = value_of(t)
        if values and values[-1] == v:
            continue
        starts.append(t)
        values.append(v)
    return starts, values


def blocking_threshold(instance: Instance, records: dict[int, AdmissionRecord],
                       gamma: Fraction) -> ThresholdTimeline:
    starts, values = {}, {}
    for i in range(instance.machines):
        mine = [r for r in records.values() if r.machine == i]
        points = [Fraction(0)]
        for r in mine:
            points += [r.admitted_at, r.end]
            for s, f in r.blocking:
                points += [s, f]

        def value_of(tau, mine=mine, i=i):
            blocking = [instance.jobs[r.job].p(i) for r in mine if r.in_blocking(tau)]
            if blocking:
                return min(blocking) / 2
            sched = [instance.jobs[r.job].p(i) for r in mine if r.in_scheduling(tau)]
            return gamma * min(sched) if sched else INF

        starts[i], values[i] = _merge(points, value_of)
    return ThresholdTimeline(starts, values)


def region_threshold(instance: Instance, result: RunResult, ratio: Fraction) -> ThresholdTimeline:
    starts, values = {}, {}
    for i in range(instance.machines):
        segs = result.trace.machine_segments(i)
        points = [Fraction(0)]
        for s in segs:
            points += [s.start, s.end]
        seg_starts = [s.start for s in segs]

        def value_of(tau, segs=segs, seg_starts=seg_starts, i=i):
            k = bisect.bisect_right(seg_starts, tau) - 1
            if k >= 0 and segs[k].start <= tau < segs[k].end:
                return ratio * instance.jobs[segs[k].job].p(i)
            return INF

        starts[i], values[i] = _merge(points, value_of)
    return ThresholdTimeline(starts, values)


def extract_threshold(result: RunResult) -> ThresholdTimeline:
    if result.algorithm == "blocking":
        return blocking_threshold(result.instance, result.records, result.params.gamma)
    if result.algorithm == "region":
        return region_threshold(result.instance, result, result.params.ratio)
    raise ValueError(f"unknown algorithm {result.algorithm!r}")


def slack_params(result: RunResult) -> tuple[Fraction, Fraction]:
    """(epsilon, delta) the run's availability test used."""
    return result.params.epsilon, result.params.delta


# -- class properties ------------------------------------------------------------

def check_p1_p2(result: RunResult, timeline: ThresholdTimeline, delta: Fraction) -> list[Counterexample]:
    """Only available jobs are admitted; available, unadmitted jobs are never below threshold.

    P2 is checked on breakpoints, release dates and decision times: between
    them both the threshold and the set of available jobs can only shrink.
    """
    inst = result.instance
    out = []
    for j, rec in result.records.items():
        job = inst.jobs[j]
        p = job.p(rec.machine)
        if job.release > rec.admitted_at or job.deadline - rec.admitted_at < (1 + delta) * p:
            out.append(Counterexample("P1", f"job {j} admitted at {rec.admitted_at} while unavailable"))
    grid = {job.release for job in inst.jobs}
    grid.update(result.trace.decision_times)
    for i in range(inst.machines):
        grid.update(timeline.breakpoints(i))
    for tau in sorted(grid):
        for job in inst.jobs:
            if job.release > tau:
                continue
            rec = result.records.get(job.id)
            if rec is not None and rec.admitted_at <= tau:
                continue
            for i, p in job.proc.items():
                if job.deadline - tau < (1 + delta) * p:
                    continue
                u = timeline.value_at(i, tau)
                if p < u:
                    out.append(Counterexample(
                        "P2", f"job {job.id} available for machine {i} at {tau} with p={p} < u={u}"))
    return out


def check_volume_lemma(result: RunResult, timeline: ThresholdTimeline, oracle: OracleResult,
                       epsilon: Fraction, delta: Fraction) -> list[Counterexample]:
    """Size of OPT jobs the algorithm never admitted versus the threshold.

    For x scheduled on machine i by the witness but never admitted, and a set
    Y of such jobs finishing no later than x, with every release at or after
    theta1 and volume(Y) >= eps/(eps-delta) (theta2 - theta1): p_ix >= u(theta2).
    Y ranges over contiguous runs of the witness completion order ending
    before x. The largest admissible theta1 dominates every smaller one, so
    only it is tried; theta2 is restricted to times at or after r_x, without
    which the statement does not hold.
    """
    inst = result.instance
    done = witness_completions(inst, oracle.witness)
    factor = epsilon / (epsilon - delta)
    out = []
    for i, ids in sorted(oracle.witness.items()):
        missed = sorted((j for j in ids if j not in result.records), key=lambda j: (done[j], j))
        bps = timeline.breakpoints(i)
        for pos, x in enumerate(missed):
            job_x = inst.jobs[x]
            p_x = job_x.p(i)
            for lo in range(pos + 1):
                ys = missed[lo:pos]
                theta1 = min([job_x.release] + [inst.jobs[y].release for y in ys])
                volume = sum((inst.jobs[y].p(i) for y in ys), Fraction(0))
                hi = theta1 + volume / factor
                if hi < job_x.release:
                    continue
                lo_t = job_x.release
                candidates = [lo_t] + [b for b in bps if lo_t < b <= hi]
                for theta2 in candidates:
                    u = timeline.value_at(i, theta2)
                    if p_x < u:
                        out.append(Counterexample(
                            "volume", f"machine {i}, x={x}, Y={ys}, theta1={theta1}, "
                                      f"theta2={theta2}: p={p_x} < u={u}"))
    return out


# -- structural checks --------------------------------------------------------------

def check_trace(result: RunResult) -> list[Counterexample]:
    """Conservation, non-migration, no overlap, and agreement with the admission log."""
    inst = result.instance
    trace = result.trace
    out = []
    work: dict[int, Fraction] = {}
    last_end: dict[int, Fraction] = {}
    by_machine: dict[int, list] = {}
    for s in trace.segments:
        by_machine.setdefault(s.machine, []).append(s)
        if s.end <= s.start:
            out.append(Counterexample("trace", f"empty segment {s}"))
        adm = trace.admissions.get(s.job)
        if adm is None or adm[0] != s.machine:
            out.append(Counterexample("trace", f"job {s.job} runs on machine {s.machine} without admission"))
        elif s.start < adm[1]:
            out.append(Counterexample("trace", f"job {s.job} runs before its admission"))
        work[s.job] = work.get(s.job, Fraction(0)) + (s.end - s.start)
        last_end[s.job] = max(last_end.get(s.job, s.end), s.end)
    for i, segs in by_machine.items():
        segs.sort(key=lambda s: s.start)
        for a, b in zip(segs, segs[1:]):
            if b.start < a.end:
                out.append(Counterexample("trace", f"overlap on machine {i}: {a} / {b}"))
    for j, c in trace.completions.items():
        machine = trace.admissions[j][0]
        if work.get(j) != inst.jobs[j].p(machine):
            out.append(Counterexample("trace", f"job {j} processed {work.get(j)} != p={inst.jobs[j].p(machine)}"))
        if last_end.get(j) != c:
            out.append(Counterexample("trace", f"job {j} completion {c} != end of last segment"))
    for j in trace.admissions:
        if j not in trace.completions:
            out.append(Counterexample("trace", f"admitted job {j} never completes"))
    if set(trace.admissions) != set(result.records):
        out.append(Counterexample("log", "admission log and trace disagree on the admitted set"))
    for j, rec in result.records.items():
        if trace.admissions.get(j) != (rec.machine, rec.admitted_at):
            out.append(Counterexample("log", f"job {j}: log says {(rec.machine, rec.admitted_at)}, "
                                             f"trace says {trace.admissions.get(j)}"))
    out += _check_spt(result)
    return out


def spt_replay(instance: Instance, admissions: dict[int, tuple[int, Fraction]]) -> list[tuple]:
    """Rebuild the schedule from admission decisions alone, SPT on each machine."""
    segs = []
    for i in range(instance.machines):
        arrivals = sorted((a, j) for j, (m, a) in admissions.items() if m == i)
        left: dict[int, Fraction] = {}
        t = Fraction(0)
        k = 0
        while k < len(arrivals) or left:
            if not left:
                t = max(t, arrivals[k][0])
            while k < len(arrivals) and arrivals[k][0] <= t:
                j = arrivals[k][1]
                left[j] = instance.jobs[j].p(i)
                k += 1
            j = min(left, key=lambda q: (instance.jobs[q].p(i), q))
            stop = t + left[j]
            if k < len(arrivals) and arrivals[k][0] < stop:
                stop = arrivals[k][0]
            if segs and segs[-1][:2] == (i, j) and segs[-1][3] == t:
                segs[-1] = (i, j, segs[-1][2], stop)
            else:
                segs.append((i, j, t, stop))
            left[j] -= stop - t
            if left[j] == 0:
                del left[j]
            t = stop
    return segs


def _check_spt(result: RunResult) -> list[Counterexample]:
    adm = {j: (r.machine, r.admitted_at) for j, r in result.records.items()}
    expected = spt_replay(result.instance, adm)
    actual = [(s.machine, s.job, s.start, s.end) for s in result.trace.segments]
    if expected != actual:
        return [Counterexample("spt", "trace is not the SPT schedule of the logged admissions")]
    return []


def _descendants(records: dict[int, AdmissionRecord]) -> dict[int, list[int]]:
    kids: dict[int, list[int]] = {j: [] for j in records}
    for j, r in records.items():
        if r.parent is not None and r.parent in kids:
            kids[r.parent].append(j)
    out = {}

    def walk(j):
        if j not in out:
            acc = []
            for c in kids[j]:
                acc += [c] + walk(c)
            out[j] = acc
        return out[j]

    for j in records:
        walk(j)
    return out


def check_blocking_structure(result: RunResult) -> list[Counterexample]:
    """On-time completion, interval length and nesting rules of the blocking policy."""
    inst = result.instance
    prm: BlockingParams = result.params
    d, gamma, beta = prm.delta, prm.gamma, prm.beta
    recs = result.records
    desc = _descendants(recs)
    out = []

    def bad(msg):
        out.append(Counterexample("blocking", msg))

    for j, r in recs.items():
        p = inst.jobs[j].p(r.machine)
        c = result.trace.completions.get(j)
        if c is None or c > r.admitted_at + (1 + d) * p or c > inst.jobs[j].deadline:
            bad(f"job {j} completes at {c}, past a_j+(1+delta)p or d_j")
        if r.end is None or not r.admitted_at + (1 + d) * p <= r.end <= r.admitted_at + (1 + 2 * d) * p:
            bad(f"job {j}: interval [{r.admitted_at}, {r.end}) outside [(1+d)p, (1+2d)p]")
            continue
        # every end point is the nominal end of the job itself or of a descendant
        nominal = {recs[k].admitted_at + (1 + d) * inst.jobs[k].p(r.machine) for k in [j] + desc[j]}
        if r.end not in nominal:
            bad(f"job {j}: interval end {r.end} not produced by any admission")
        if r.blocking_size() > beta * p:
            bad(f"job {j}: blocking period {r.blocking_size()} > beta p")
        prev = r.end
        for s, f in r.blocking:
            if not (prev <= s < f):
                bad(f"job {j}: blocking pieces unordered or overlapping S(j)")
            prev = f
        if r.parent is None:
            if r.blocking:
                bad(f"root job {j} has a blocking period")
            continue
        pr = recs.get(r.parent)
        if pr is None or pr.machine != r.machine:
            bad(f"job {j}: parent {r.parent} missing or on another machine")
            continue
        if not p < gamma * inst.jobs[r.parent].p(r.machine):
            bad(f"job {j}: not gamma-smaller than its parent")
        pieces = [(r.admitted_at, r.end)] + list(r.blocking)
        if any(s < pr.admitted_at or f > pr.end for s, f in pieces):
            bad(f"job {j}: S/B not contained in S(parent {r.parent})")
    # siblings never share time
    kids: dict[int, list[int]] = {}
    for j, r in recs.items():
        if r.parent is not None:
            kids.setdefault(r.parent, []).append(j)
    for parent, cs in kids.items():
        pieces = sorted((s, f, c) for c in cs
                        for s, f in [(recs[c].admitted_at, recs[c].end)] + list(recs[c].blocking))
        for a, b in zip(pieces, pieces[1:]):
            if b[0] < a[1]:
                bad(f"children {a[2]} and {b[2]} of {parent} overlap")
    return out


def check_commitment(result: RunResult, model: CommitmentModel) -> list[Counterexample]:
    return [Counterexample("commit", str(v)) for v in commit_check(result, model)]


def check_half_completion(result: RunResult) -> list[Counterexample]:
    fin, late = outcome_split(result)
    f = sum(len(s) for s in fin.values())
    u = sum(len(s) for s in late.values())
    if 2 * f < f + u or (u and not 2 * f > f + u):
        return [Counterexample("half", f"{f} on time vs {u} late")]
    return []


def check_projection(result: RunResult) -> list[Counterexample]:
    """Rerunning the region policy on one machine's admitted jobs reproduces that machine."""
    out = []
    inst = result.instance
    for i in range(inst.machines):
        mine = [j for j, r in result.records.items() if r.machine == i]
        if not mine:
            continue
        sub, mapping = restrict_with_map(inst, mine, machine=i)
        again = run_region(sub)
        got = [(mapping[s.job], s.start, s.end) for s in again.trace.segments]
        want = [(s.job, s.start, s.end) for s in result.trace.machine_segments(i)]
        if got != want:
            out.append(Counterexample("projection", f"machine {i} schedule differs on reduced instance"))
    return out


def check_timeline(result: RunResult, timeline: ThresholdTimeline) -> list[Counterexample]:
    """Timeline matches the log and respects the segment-count bound."""
    out = []
    fresh = extract_threshold(result)
    if fresh.starts != timeline.starts or fresh.values != timeline.values:
        out.append(Counterexample("timeline", "threshold timeline does not follow from the admission log"))
    per = 3 if result.algorithm == "blocking" else 2
    for i in range(result.instance.machines):
        n_i = sum(1 for r in result.records.values() if r.machine == i)
        if timeline.segments(i) > per * n_i + 1:
            out.append(Counterexample("timeline", f"machine {i}: {timeline.segments(i)} segments "
                                                  f"> {per}*{n_i}+1"))
    return out


def check_replay(result: RunResult, model: CommitmentModel | None = None) -> list[Counterexample]:
    """The log is exactly what a fresh deterministic run produces."""
    again = rerun(result, model)
    if [r.to_dict() for r in again.records.values()] != [r.to_dict() for r in result.records.values()]:
        return [Counterexample("replay", "admission log differs from a fresh run")]
    if again.trace.to_csv() != result.trace.to_csv():
        return [Counterexample("replay", "trace differs from a fresh run")]
    return []


def rerun(result: RunResult, model: CommitmentModel | None = None) -> RunResult:
    if result.algorithm == "blocking":
        return simulate(result.instance, BlockingPolicy(result.instance, model or UponAdmission()))
    return simulate(result.instance, RegionPolicy(result.instance))


# -- bounds --------------------------------------------------------------------------

@dataclass
class BoundReport:
    algorithm: str
    admitted: int
    on_time: int
    opt: int
    factor: Fraction
    bound: Fraction
    satisfied: bool
    ratio: Fraction | float | None

    def to_dict(self) -> dict:
        ratio = self.ratio
        if isinstance(ratio, Fraction):
            ratio = fmt_time(ratio)
        elif ratio == INF:
            ratio = "inf"
        return {"algorithm": self.algorithm, "admitted": self.admitted, "on_time": self.on_time,
                "opt": self.opt, "factor": fmt_time(self.factor), "bound": fmt_time(self.bound),
                "satisfied": self.satisfied, "ratio": ratio}


def check_bounds(result: RunResult, opt: int) -> BoundReport:
    fin, _ = outcome_split(result)
    admitted = len(result.records)
    on_time = sum(len(s) for s in fin.values())
    factor = result.params.bound_factor
    bound = factor * admitted
    ok = opt <= bound
    if result.algorithm == "blocking":
        ok = ok and on_time == admitted
    else:
        ok = ok and 2 * on_time >= admitted
    if on_time:
        ratio = Fraction(opt, on_time)
    else:
        ratio = Fraction(0) if opt == 0 else INF
    return BoundReport(result.algorithm, admitted, on_time, opt, factor, bound, ok, ratio)


# -- bundle ----------------------------------------------------------------------------

@dataclass
class Report:
    failures: list[Counterexample] = field(default_factory=list)
    bound: BoundReport | None = None
    checks: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and (self.bound is None or self.bound.satisfied)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": self.checks,
                "failures": [str(c) for c in self.failures],
                "bound": None if self.bound is None else self.bound.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def verify_run(result: RunResult, model: CommitmentModel | None = None,
               oracle: OracleResult | None = None, timeline: ThresholdTimeline | None = None,
               replay: bool = True) -> Report:
    """Run every applicable check on one finished run."""
    report = Report()
    if timeline is None:
        timeline = extract_threshold(result)
    eps, delta = slack_params(result)

    def run(name, found):
        report.checks.append(name)
        report.failures.extend(found)

    run("trace", check_trace(result))
    run("timeline", check_timeline(result, timeline))
    run("P1-P2", check_p1_p2(result, timeline, delta))
    if result.algorithm == "blocking":
        run("blocking-structure", check_blocking_structure(result))
        run("commitment", check_commitment(result, model or UponAdmission()))
    else:
        run("half-completion", check_half_completion(result))
        run("projection", check_projection(result))
    if oracle is not None:
        run("volume-lemma", check_volume_lemma(result, timeline, oracle, eps, delta))
        report.bound = check_bounds(result, oracle.opt)
        report.checks.append("bounds")
    if replay:
        run("replay", check_replay(result, model))
    return report


# -- fault injection -----------------------------------------------------------------

NUDGE = Fraction(1, 1000)


def mutants(result: RunResult, timeline: ThresholdTimeline, count: int = 24, seed: int = 0):
    """Yield ``(description, mutated_result, mutated_timeline)`` with one value nudged by 1/1000."""
    rng = random.Random(seed)
    sites = []
    for j, r in result.records.items():
        sites.append(("admitted_at", j, None))
        if r.end is not None:
            sites.append(("end", j, None))
        for k in range(len(r.blocking)):
            sites.append(("blocking-start", j, k))
            sites.append(("blocking-end", j, k))
    for i in timeline.starts:
        for k, v in enumerate(timeline.values[i]):
            if v != INF:
                sites.append(("threshold", i, k))
            if k:
                sites.append(("breakpoint", i, k))
    if not sites:
        return
    for n in range(count):
        kind, key, k = sites[n % len(sites)] if n < len(sites) else rng.choice(sites)
        sign = 1 if n % 2 == 0 else -1
        res = copy.deepcopy(result)
        tl = copy.deepcopy(timeline)
        if kind == "admitted_at":
            res.records[key].admitted_at += sign * NUDGE
        elif kind == "end":
            res.records[key].end += sign * NUDGE
        elif kind.startswith("blocking"):
            s, f = res.records[key].blocking[k]
            if kind == "blocking-start":
                s += sign * NUDGE
            else:
                f += sign * NUDGE
            res.records[key].blocking[k] = (s, f)
        elif kind == "threshold":
            tl.values[key][k] += sign * NUDGE
        else:
            tl.starts[key][k] += sign * NUDGE
        yield f"{kind} {key}/{k} {'+' if sign > 0 else '-'}1/1000", res, tl
