from fractions import Fraction as F

from slacksched.blocking import derive_params, run_blocking
from slacksched.instance import PROFILES, DeltaCommitment, UponAdmission, generate
from slacksched.oracle import OracleResult, opt_throughput
from slacksched.region import run_region
from slacksched.sim import RunResult, Trace
from slacksched.verify import (INF, ThresholdTimeline, check_bounds, check_p1_p2,
                               check_timeline, check_volume_lemma, extract_threshold, mutants,
                               verify_run)

from helpers import inst, job


def test_idle_machine_has_single_infinite_segment():
    res = run_blocking(inst(job(0, 0, 4, 1, None), m=2))
    tl = extract_threshold(res)
    assert tl.starts[1] == [0] and tl.values[1] == [INF]
    res = run_region(inst(job(0, 0, 4, 1, None), m=2))
    assert extract_threshold(res).values[1] == [INF]


def test_blocking_threshold_of_lone_root():
    res = run_blocking(inst(job(0, 0, 40, 16)))
    tl = extract_threshold(res)
    assert tl.starts[0] == [0, 24]
    assert tl.values[0] == [F(1, 2), INF]
    assert tl.value_at(0, F(23)) == F(1, 2)


def test_blocking_threshold_inside_blocking_period():
    res = run_blocking(inst(job(0, 0, 40, 16), job(1, 1, 10, F(2, 5))))
    tl = extract_threshold(res)
    # on B(child) the cutoff is half the child's length
    assert tl.value_at(0, F(2)) == F(1, 5)
    assert tl.value_at(0, F(1)) == F(2, 5) / 32


def test_region_threshold_of_running_job():
    res = run_region(inst(job(0, 0, 20, 4)))
    tl = extract_threshold(res)
    assert tl.starts[0] == [0, 4]
    assert tl.values[0] == [1, INF]


def test_doubled_threshold_gives_p2_counterexample():
    # the p = 1/2 job is available but sits exactly at the cutoff gamma * 16
    res = run_blocking(inst(job(0, 0, 40, 16), job(1, 1, 3, F(1, 2))))
    tl = extract_threshold(res)
    assert check_p1_p2(res, tl, res.params.delta) == []
    tl.values[0] = [2 * v for v in tl.values[0]]
    found = check_p1_p2(res, tl, res.params.delta)
    assert found and found[0].check == "P2"
    assert "job 1" in found[0].detail


def test_p1_flags_admission_of_unavailable_job():
    res = run_blocking(inst(job(0, 0, 4, 1)))
    res.records[0].admitted_at = F(3)
    found = {c.check for c in check_p1_p2(res, extract_threshold(res), res.params.delta)}
    # the job now also looks available-but-refused before t = 3
    assert found == {"P1", "P2"}


def _unadmitted(jobs, eps=1):
    """A run that admitted nothing, for exercising the volume check by hand."""
    a = inst(*jobs, eps=eps)
    return RunResult(a, "region", Trace(), {}, None)


def test_volume_check_flags_infinite_threshold():
    res = _unadmitted([job(0, 0, 4, 1)])
    tl = ThresholdTimeline({0: [F(0)]}, {0: [INF]})
    found = check_volume_lemma(res, tl, OracleResult(1, {0: frozenset({0})}), F(1), F(1, 2))
    assert found and "x=0" in found[0].detail


def test_volume_check_ignores_times_before_release():
    # u is infinite only before x is released; with theta2 < r_x the
    # statement would fail on this run, so such pairs are not considered
    res = _unadmitted([job(0, 5, 9, 1)])
    tl = ThresholdTimeline({0: [F(0), F(5)]}, {0: [INF, F(1, 2)]})
    assert check_volume_lemma(res, tl, OracleResult(1, {0: frozenset({0})}), F(1), F(1, 2)) == []


def test_volume_lemma_on_random_runs():
    for seed in range(30):
        a = generate(seed, 9, 1 + seed % 2, (F(1, 4), F(1))[seed % 2], PROFILES[seed % 4])
        orc = opt_throughput(a)
        for res in (run_blocking(a), run_region(a)):
            eps, delta = res.params.epsilon, res.params.delta
            assert check_volume_lemma(res, extract_threshold(res), orc, eps, delta) == []


def test_segment_counts():
    for seed in range(30):
        a = generate(seed, 20, 2, F(1, 2), PROFILES[seed % 4])
        for res in (run_blocking(a), run_region(a)):
            assert check_timeline(res, extract_threshold(res)) == []


def test_bound_constants():
    prm = derive_params(1)
    assert prm.alpha == 256
    assert prm.bound_factor == 261
    assert run_region(inst(job(0, 0, 2, 1))).params.bound_factor == 12


def test_bounds_on_empty_instance():
    for res in (run_blocking(inst()), run_region(inst())):
        rep = check_bounds(res, 0)
        assert (rep.opt, rep.admitted, rep.on_time, rep.satisfied) == (0, 0, 0, True)
        assert rep.ratio == 0


def test_bound_report_flags_violation():
    res = run_region(inst(job(0, 0, 2, 1)))
    assert not check_bounds(res, 13).satisfied
    assert check_bounds(res, 12).satisfied


def test_full_report_is_clean():
    a = generate(5, 10, 2, F(1, 2), "nested")
    orc = opt_throughput(a)
    for model in (UponAdmission(), DeltaCommitment(F(3, 8))):
        rep = verify_run(run_blocking(a, model), model, orc)
        assert rep.ok, rep.failures
        assert "volume-lemma" in rep.checks
    assert verify_run(run_region(a), None, orc).ok


def test_every_mutant_is_caught():
    a = generate(6, 10, 2, F(1, 4), "nested")
    orc = opt_throughput(a)
    for res in (run_blocking(a), run_region(a)):
        tl = extract_threshold(res)
        seen = 0
        for desc, bad, bad_tl in mutants(res, tl, count=24):
            seen += 1
            assert not verify_run(bad, None, orc, bad_tl).ok, desc
        assert seen == 24
