from __future__ import annotations

import numpy as np
import pytest

from csgrad.config import load_app_config
from csgrad.domain.sample_set import Classification
from csgrad.services.golden import DEGENERATE_RANK_TOL, GoldenSuite, conditioned_matrix, random_set
from csgrad.services.sampleset import classify


def test_small_suite_passes(small_cfg):
    results = GoldenSuite(small_cfg).run()
    failed = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    assert not failed
    assert {r.name.split(".")[0] for r in results} == {"golden", "property"}


def test_golden_checks_do_not_depend_on_seed():
    names = [r.name for r in GoldenSuite({"verify": {"cases": 1, "seed": 1}}).golden_checks() if r.passed]
    assert len(names) == 6


@pytest.mark.slow
def test_full_suite_with_project_config():
    cfg = load_app_config()
    results = GoldenSuite(cfg).run()
    assert all(r.passed for r in results), [r for r in results if not r.passed]


@pytest.mark.parametrize("n, m", [(3, 2), (2, 4), (4, 4)])
def test_degenerate_random_sets_are_undetermined(n, m, rng):
    xs = random_set(rng, n, m, degenerate=True)
    assert xs.n == n and xs.m == m
    assert classify(xs, DEGENERATE_RANK_TOL) is Classification.UNDETERMINED


def test_conditioned_matrix_has_requested_rank(rng):
    a = conditioned_matrix(rng, 5, 3, rank=2)
    assert a.shape == (5, 3)
    assert np.linalg.matrix_rank(a, tol=1e-10) == 2
