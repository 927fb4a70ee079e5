import json
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from slacksched.instance import (PROFILES, DeltaCommitment, InstanceError, NotEligible, as_time,
                                 available, dumps, fmt_time, from_dict, generate, is_valid, load,
                                 loads, restrict_with_map, save, validate)

from helpers import inst, job


def test_slack_exactly_met_is_valid():
    assert validate(inst(job(0, 0, 2, 1), eps=1)) == []


def test_slack_short_by_a_tenth_is_reported():
    bad = validate(inst(job(0, 0, F(19, 10), 1), eps=1))
    assert [(v.job, v.machine) for v in bad] == [(0, 0)]
    assert "slack" in bad[0].reason


def test_job_without_eligible_machine():
    bad = validate(inst(job(0, 0, 5, None, None), m=2))
    assert any("no eligible machine" in v.reason for v in bad)


def test_non_eligible_machine_ignored_by_slack_and_raises_on_lookup():
    j = job(0, 0, 3, 1, None)
    assert validate(inst(j, m=2)) == []
    with pytest.raises(NotEligible):
        j.p(1)
    assert j.machines() == [0]


def test_deadline_must_follow_release():
    assert any("deadline" in v.reason for v in validate(inst(job(0, 2, 2, 1))))


def test_availability_examples():
    j = job(0, 0, 3, 2)
    half = F(1, 2)
    assert available(j, 0, F(0), half)
    assert not available(j, 0, F(1, 10), half)
    assert not available(j, 0, F(0), half, admitted={0})


def test_availability_before_release():
    assert not available(job(0, 1, 9, 1), 0, F(1, 2), F(0))


def test_as_time_parses_exactly_and_refuses_floats():
    assert as_time("3/2") == F(3, 2)
    assert as_time(" 4 ") == F(4)
    assert as_time(7) == F(7)
    with pytest.raises(TypeError):
        as_time(1.5)
    with pytest.raises(ValueError):
        as_time("1.5")
    assert fmt_time(F(3, 2)) == "3/2" and fmt_time(F(4)) == "4"


def test_delta_commitment_needs_positive_delta():
    with pytest.raises(ValueError):
        DeltaCommitment(0)


@pytest.mark.parametrize("profile", PROFILES)
def test_generators_are_valid_and_deterministic(profile):
    for seed in range(5):
        a = generate(seed, 15, 3, F(1, 4), profile)
        assert is_valid(a)
        assert a.n == 15
        assert dumps(a) == dumps(generate(seed, 15, 3, F(1, 4), profile))


def test_generator_seed_changes_instance():
    assert dumps(generate(1, 10, 2, 1, "uniform")) != dumps(generate(2, 10, 2, 1, "uniform"))


def test_nested_example_from_cli_docs():
    a = generate(7, 20, 3, F(1, 4), "nested")
    assert validate(a) == []
    assert a.machines == 3


def test_unknown_profile():
    with pytest.raises(ValueError):
        generate(0, 3, 1, 1, "zigzag")


def test_round_trip(tmp_path):
    a = generate(3, 12, 2, F(1, 2), "bursty")
    path = tmp_path / "inst.json"
    save(a, path)
    assert load(path) == a
    assert loads(dumps(a)) == a


def test_file_format_uses_rational_strings():
    data = json.loads(dumps(inst(job(0, 0, "7/2", "3/2"))))
    assert data["jobs"][0]["deadline"] == "7/2"
    assert data["jobs"][0]["proc"] == {"0": "3/2"}


def test_loader_rejects_bad_input():
    good = json.loads(dumps(inst(job(0, 1, 5, 1))))
    bad = json.loads(json.dumps(good))
    bad["jobs"][0]["deadline"] = "1"
    with pytest.raises(InstanceError):
        from_dict(bad)
    bad = json.loads(json.dumps(good))
    bad["jobs"][0]["release"] = 0.5
    with pytest.raises(InstanceError):
        from_dict(bad)
    with pytest.raises(InstanceError):
        loads("{not json")
    bad = json.loads(json.dumps(good))
    del bad["machines"]
    with pytest.raises(InstanceError):
        from_dict(bad)


def test_restrict_to_one_machine():
    a = inst(job(0, 0, 9, 1, 2), job(1, 0, 9, None, 3), job(2, 1, 9, 2, 1), m=2)
    sub, mapping = restrict_with_map(a, [2, 0], machine=1)
    assert sub.machines == 1
    assert mapping == {0: 0, 1: 2}
    assert [j.p(0) for j in sub.jobs] == [2, 1]


fractions = st.fractions(min_value=0, max_value=1000, max_denominator=1000)
positive = st.fractions(min_value=F(1, 1000), max_value=100, max_denominator=1000)


@given(fractions, fractions)
def test_rational_arithmetic_is_exact(a, b):
    assert (a + b) - b == a
    assert as_time(fmt_time(a)) == a


@given(positive, st.integers(0, 4))
def test_generated_slack_holds(eps, seed):
    a = generate(seed, 6, 2, eps, "tight-slack")
    for j in a.jobs:
        for i, q in j.proc.items():
            assert j.deadline - j.release >= (1 + a.epsilon) * q


@given(fractions, positive, st.fractions(min_value=0, max_value=2, max_denominator=100),
       fractions, fractions)
def test_availability_is_monotone_in_time(r, p, delta, t1, t2):
    j = job(0, r, r + 3 * p + 1, p)
    lo, hi = sorted((t1, t2))
    # once the window closes it never reopens
    if lo >= r and not available(j, 0, lo, delta):
        assert not available(j, 0, hi, delta)
