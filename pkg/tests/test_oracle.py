import json
from fractions import Fraction as F

import pytest

from slacksched.instance import PROFILES, generate
from slacksched.oracle import (CapExceeded, brute_force_opt, edf_feasible, edf_schedule,
                               opt_throughput, opt_upper_bound, subset_enumeration_opt,
                               witness_completions)

from helpers import inst, job


def jobs_of(*rows):
    return [job(k, r, d, p) for k, (r, d, p) in enumerate(rows)]


def test_edf_examples():
    assert edf_feasible(0, jobs_of((0, 1, 1), (0, 2, 1)))
    assert not edf_feasible(0, jobs_of((0, 1, 1), (0, 1, F(1, 2))))
    assert edf_feasible(0, jobs_of((0, 2, 1), (1, 2, 1)))
    assert edf_feasible(0, [])


def test_edf_preempts_for_earlier_deadline():
    done = edf_schedule([(0, F(0), F(10), F(4)), (1, F(1), F(2), F(1))])
    assert done == {1: 2, 0: 5}


def test_identical_tight_jobs():
    # slack-free jobs are fine for the oracle, which never looks at epsilon
    a1 = inst(*[job(k, 0, 1, 1) for k in range(3)], m=1)
    a2 = inst(*[job(k, 0, 1, 1, 1) for k in range(3)], m=2)
    assert opt_throughput(a1).opt == 1
    assert opt_throughput(a2).opt == 2


def test_empty_and_single():
    assert opt_throughput(inst()).opt == 0
    assert opt_throughput(inst(job(0, 0, 2, 1))).opt == 1


def test_pinned_single_machine_value():
    # 4 of 8 fit; value from full subset enumeration
    a = generate(0, 8, 1, F(1, 2), "tight-slack")
    assert subset_enumeration_opt(a) == 4
    assert opt_throughput(a).opt == 4


def test_pinned_two_machine_value():
    # value from exhaustive assignment enumeration
    a = generate(4, 7, 2, F(1, 4), "tight-slack")
    assert brute_force_opt(a) == 6
    assert opt_throughput(a).opt == 6


def test_branch_and_bound_matches_brute_force():
    for seed in range(25):
        a = generate(seed, 6, 2, (F(1, 8), F(1, 2))[seed % 2], PROFILES[seed % 4])
        assert opt_throughput(a).opt == brute_force_opt(a)


def test_witness_is_feasible_and_counts_opt():
    for seed in range(20):
        a = generate(seed, 10, 2, F(1, 4), PROFILES[seed % 4])
        res = opt_throughput(a)
        assert sum(len(s) for s in res.witness.values()) == res.opt
        done = witness_completions(a, res.witness)
        for i, ids in res.witness.items():
            assert edf_feasible(i, [a.jobs[j] for j in ids])
            for j in ids:
                assert done[j] <= a.jobs[j].deadline
                assert a.jobs[j].eligible(i)


def test_adding_a_job_never_lowers_opt():
    for seed in range(15):
        a = generate(seed, 9, 2, F(1, 2), "bursty")
        smaller = inst(*a.jobs[:-1], m=2, eps=a.epsilon)
        assert opt_throughput(smaller).opt <= opt_throughput(a).opt


def test_cap_exceeded():
    a = generate(0, 15, 1, 1, "uniform")
    with pytest.raises(CapExceeded):
        opt_throughput(a)
    with pytest.raises(CapExceeded):
        opt_throughput(generate(0, 5, 4, 1, "uniform"))


def test_upper_bound_is_sound():
    for seed in range(20):
        a = generate(seed, 10, 2, F(1, 4), PROFILES[seed % 4])
        assert opt_upper_bound(a) >= opt_throughput(a).opt


def test_result_json():
    data = json.loads(opt_throughput(inst(job(0, 0, 2, 1))).to_json())
    assert data == {"opt": 1, "witness": {"0": [0]}, "exact": True}
