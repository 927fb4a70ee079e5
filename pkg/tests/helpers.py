"""Small builders shared by the unit tests."""
from fractions import Fraction as F

from slacksched.instance import Instance, Job


def job(i, r, d, *ps):
    """Job with the given processing times on machines 0, 1, ... (None = not eligible)."""
    proc = {k: F(p) for k, p in enumerate(ps) if p is not None}
    return Job(i, F(r), F(d), proc)


def inst(*jobs, m=1, eps=1):
    return Instance(m, tuple(jobs), F(eps))
