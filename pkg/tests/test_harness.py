from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from csgrad.domain.bounds import ComparisonSpace
from csgrad.domain.errors import ConfigError, InsufficientDataError, PreconditionError, RankDeficiencyError
from csgrad.domain.record import ConvergenceRecord, SweepPoint
from csgrad.domain.sample_set import SampleSet
from csgrad.services.harness import (
    MethodOptions,
    bound_dominated,
    bound_for,
    estimate,
    fit_order,
    input_dim,
    reference_point,
    sweep,
    sweep_methods,
    true_gradient,
)
from csgrad.services.calculus import gcscg_power, tables_for
from csgrad.services.oracle import lookup, lookup_vector
from csgrad.services.sampleset import generate, scale

DELTAS = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
FUNCTIONS = ["expsin", "quartic3", "rosenbrock"]


def _geometry(name: str, m: int, seed: int = 3) -> SampleSet:
    fn = lookup(name)
    return generate(fn.dim, m, seed, x0=fn.x0())


# ----------------------
# 収束次数
# ----------------------
@pytest.mark.parametrize("name", FUNCTIONS)
def test_gcsg_converges_quadratically(name):
    fn = lookup(name)
    record = sweep(fn, _geometry(name, fn.dim + 1), DELTAS, "gcsg")
    assert record.comparison_space is ComparisonSpace.FULL_SPACE
    assert 1.8 <= record.fitted_slope <= 2.2
    assert record.slope_ci is not None
    assert bound_dominated(record)


@pytest.mark.parametrize("name", FUNCTIONS)
def test_gsg_converges_linearly(name):
    fn = lookup(name)
    record = sweep(fn, _geometry(name, fn.dim + 1), DELTAS, "gsg")
    assert 0.8 <= record.fitted_slope <= 1.2
    assert all(b is None for b in record.bounds)


def test_underdetermined_sweep_compares_in_subspace():
    fn = lookup("quartic3")
    record = sweep(fn, _geometry("quartic3", 2), DELTAS, "gcsg")
    assert record.comparison_space is ComparisonSpace.SUBSPACE_U
    assert "underdetermined" in record.geometry
    assert 1.8 <= record.fitted_slope <= 2.2
    assert bound_dominated(record)


@pytest.mark.parametrize("method", ["gcsg-average", "gcscg:exp", "gcscg:log", "gcscg:power"])
def test_other_methods_converge_quadratically(method):
    fn = lookup("expsin")
    record = sweep(fn, _geometry("expsin", 3), DELTAS, method)
    assert 1.8 <= record.fitted_slope <= 2.2
    assert bound_dominated(record)


def test_bound_quadruples_when_delta_doubles_on_fixed_ball():
    fn = lookup("expsin")
    record = sweep(fn, _geometry("expsin", 3), [0.2, 0.1, 0.05], "gcsg", ball_radius=0.2)
    b = record.bounds
    assert b[0] == pytest.approx(4.0 * b[1], rel=1e-10)
    assert b[1] == pytest.approx(4.0 * b[2], rel=1e-10)
    assert bound_dominated(record)


# ----------------------
# 入力検査
# ----------------------
def test_empty_delta_list_rejected():
    fn = lookup("expsin")
    with pytest.raises(ConfigError, match="delta list empty"):
        sweep(fn, _geometry("expsin", 3), [], "gcsg")


@pytest.mark.parametrize("deltas", [[0.1, 0.1], [0.01, 0.1], [0.1, -0.01]])
def test_deltas_must_be_positive_and_decreasing(deltas):
    fn = lookup("expsin")
    with pytest.raises(ConfigError):
        sweep(fn, _geometry("expsin", 3), deltas, "gcsg")


def test_delta_beyond_ball_rejected():
    fn = lookup("expsin")
    with pytest.raises(PreconditionError):
        sweep(fn, _geometry("expsin", 3), [0.5, 0.1], "gcsg", ball_radius=0.2)


def test_undetermined_template_rejected():
    fn = lookup("expsin")
    xs = SampleSet(x0=fn.x0(), directions=[[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(RankDeficiencyError):
        sweep(fn, xs, DELTAS, "gcsg")


def test_dimension_mismatch_rejected():
    with pytest.raises(ConfigError):
        sweep(lookup("quartic3"), _geometry("expsin", 3), DELTAS, "gcsg")


def test_unknown_method_rejected():
    with pytest.raises(ConfigError):
        sweep(lookup("expsin"), _geometry("expsin", 3), DELTAS, "newton")
    assert "gcsg" in sweep_methods() and "gsg" in sweep_methods()


# ----------------------
# 傾きのフィット
# ----------------------
def _record(errors) -> ConvergenceRecord:
    points = tuple(SweepPoint(delta=d, error=e) for d, e in zip(DELTAS, errors))
    return ConvergenceRecord(method="gcsg", function="synthetic", geometry="n=1,m=1", points=points)


def test_fit_order_recovers_power_law():
    assert fit_order(_record([3.0 * d**2 for d in DELTAS])) == pytest.approx(2.0, abs=1e-10)
    assert fit_order(_record([0.5 * d for d in DELTAS])) == pytest.approx(1.0, abs=1e-10)


def test_fit_order_ignores_points_below_floor():
    errors = [3.0 * d**2 for d in DELTAS[:4]] + [1e-16]
    assert fit_order(_record(errors)) == pytest.approx(2.0, abs=1e-10)


def test_fit_order_needs_enough_points():
    with pytest.raises(InsufficientDataError):
        fit_order(_record([1e-3, 1e-4, 0.0, 0.0, 0.0]))


def test_sweep_without_enough_points_leaves_slope_empty():
    fn = lookup("quadratic")
    record = sweep(fn, _geometry("quadratic", 4), DELTAS, "gcsg", error_floor=1.0)
    assert record.fitted_slope is None and record.slope_ci is None
    assert len(record.points) == len(DELTAS)


def test_bound_dominated_detects_violation():
    ok = ConvergenceRecord("gcsg", "f", "g", (SweepPoint(0.1, 1e-3, 2e-3), SweepPoint(0.05, 1e-4, None)))
    bad = ConvergenceRecord("gcsg", "f", "g", (SweepPoint(0.1, 3e-3, 2e-3),))
    assert bound_dominated(ok)
    assert not bound_dominated(bad)


# ----------------------
# 単発の推定
# ----------------------
def test_estimate_and_truth_for_compound_methods():
    fn = lookup("paperexp")
    xs = SampleSet(x0=[1.0, 1.0], directions=[[1.0, 0.0], [0.0, 1.0]])
    est = estimate("gcscg:exp", fn, xs)
    assert_allclose(est.value, [2.0 * math.e**2] * 2, rtol=1e-12)
    assert_allclose(true_gradient("gcscg:exp", fn, xs.x0), [2.0 * math.e**2] * 2, rtol=1e-12)
    assert_allclose(true_gradient("gcscg:log", fn, xs.x0), [1.0, 1.0])
    assert_allclose(true_gradient("gcscg:power", fn, xs.x0), [8.0, 8.0])


def test_bound_for_gsg_is_none(quartic_set, quartic):
    assert bound_for("gsg", quartic, quartic_set) is None
    report = bound_for("gcsg", quartic, quartic_set)
    assert report is not None and report.bound > 0


def test_gcsg_errors_shrink_with_delta():
    fn = lookup("rosenbrock")
    record = sweep(fn, _geometry("rosenbrock", 4), DELTAS, "gcsg")
    errors = np.array(record.errors)
    assert np.all(np.diff(errors) < 0)


# ----------------------
# 合成関数の手法（gcscg:*）
# ----------------------
EXPSIN_PARTNERS = MethodOptions(partners=(lookup("rosenbrock"),))
CHAIN_OPTIONS = MethodOptions(inner=lookup_vector("square_plus_one"))

RULE_CASES = [
    ("gcscg:exp", "expsin", MethodOptions()),
    ("gcscg:log", "paperexp", MethodOptions()),
    ("gcscg:power", "expsin", MethodOptions(k=3.0)),
    ("gcscg:product", "expsin", EXPSIN_PARTNERS),
    ("gcscg:quotient", "expsin", EXPSIN_PARTNERS),
    ("gcscg:product_k", "expsin", MethodOptions(partners=(lookup("rosenbrock"), lookup("paperexp")))),
    ("gcscg:chain", "quartic1d", CHAIN_OPTIONS),
]


def _rule_geometry(method: str, fn, opts: MethodOptions, seed: int = 5) -> SampleSet:
    dim = input_dim(method, fn, opts)
    return generate(dim, dim + 1, seed, x0=reference_point(method, fn, opts))


def test_every_rule_is_registered():
    for method, _, _ in RULE_CASES:
        assert method in sweep_methods()


@pytest.mark.parametrize("method,name,opts", RULE_CASES)
def test_rule_estimate_close_to_compound_truth(method, name, opts):
    fn = lookup(name)
    xs = scale(_rule_geometry(method, fn, opts), 1e-3)
    est = estimate(method, fn, xs, options=opts)
    assert est.method == method
    assert_allclose(est.value, true_gradient(method, fn, xs.x0, opts), rtol=1e-5, atol=1e-2)


@pytest.mark.parametrize("method,name,opts", RULE_CASES)
def test_rule_sweeps_converge_quadratically(method, name, opts):
    fn = lookup(name)
    record = sweep(fn, _rule_geometry(method, fn, opts), DELTAS, method, options=opts)
    assert record.method == method
    assert 1.8 <= record.fitted_slope <= 2.2
    assert bound_dominated(record)


def test_product_sweep_reports_bounds():
    fn = lookup("expsin")
    record = sweep(fn, _geometry("expsin", 3), DELTAS, "gcscg:product", options=EXPSIN_PARTNERS)
    assert all(b is not None for b in record.bounds)


def test_power_exponent_comes_from_options():
    fn = lookup("expsin")
    xs = scale(_geometry("expsin", 3), 0.1)
    (tab,) = tables_for([fn], xs)
    cubed = estimate("gcscg:power", fn, xs, options=MethodOptions(k=3.0))
    assert_allclose(cubed.value, gcscg_power(xs, tab, 3.0).value)
    assert_allclose(estimate("gcscg:power", fn, xs).value, gcscg_power(xs, tab, 2.0).value)
    x0 = fn.x0()
    assert_allclose(true_gradient("gcscg:power", fn, x0, MethodOptions(k=3.0)), 3.0 * fn(x0) ** 2 * fn.grad(x0))


def test_product_truth_uses_partner():
    f, g = lookup("expsin"), lookup("rosenbrock")
    x0 = f.x0()
    assert_allclose(
        true_gradient("gcscg:product", f, x0, EXPSIN_PARTNERS), f(x0) * g.grad(x0) + g(x0) * f.grad(x0)
    )
    assert_allclose(
        true_gradient("gcscg:quotient", f, x0, EXPSIN_PARTNERS), (g(x0) * f.grad(x0) - f(x0) * g.grad(x0)) / g(x0) ** 2
    )


def test_chain_places_set_in_inner_domain():
    fn = lookup("scaled_sphere3")
    opts = MethodOptions(inner=lookup_vector("paperchain_g"))
    assert input_dim("gcscg:chain", fn, opts) == 2
    assert_allclose(reference_point("gcscg:chain", fn, opts), [1.0, 2.0])
    xs = SampleSet(x0=[1.0, 2.0], directions=[[1.0, 0.0], [0.0, 1.0]])
    est = estimate("gcscg:chain", fn, xs, options=opts)
    assert_allclose(est.value, [22.0, 22.0], rtol=1e-12)
    assert est.eval_count == 2 * (2 * xs.m + 1)


def test_chain_with_quadratic_pieces_is_exact():
    fn = lookup("square1d")
    xs = SampleSet(x0=[2.0], directions=[[1.0]])
    assert_allclose(estimate("gcscg:chain", fn, xs, options=CHAIN_OPTIONS).value, [40.0])
    assert_allclose(true_gradient("gcscg:chain", fn, xs.x0, CHAIN_OPTIONS), [40.0])


@pytest.mark.parametrize("method", ["gcscg:product", "gcscg:quotient", "gcscg:product_k"])
def test_partner_methods_need_a_partner(method):
    fn = lookup("expsin")
    with pytest.raises(ConfigError, match="partners"):
        estimate(method, fn, _geometry("expsin", 3))


def test_partner_dimension_must_match():
    fn = lookup("expsin")
    with pytest.raises(ConfigError):
        estimate("gcscg:product", fn, _geometry("expsin", 3), options=MethodOptions(partners=(lookup("quartic1d"),)))


def test_chain_needs_a_matching_inner_map():
    fn = lookup("quartic1d")
    xs = SampleSet(x0=[2.0], directions=[[1.0]])
    with pytest.raises(ConfigError, match="inner"):
        estimate("gcscg:chain", fn, xs)
    with pytest.raises(ConfigError):
        estimate("gcscg:chain", fn, xs, options=MethodOptions(inner=lookup_vector("paperchain_g")))


def test_chain_sweep_rejects_set_in_outer_space():
    fn = lookup("scaled_sphere3")
    opts = MethodOptions(inner=lookup_vector("paperchain_g"))
    with pytest.raises(ConfigError):
        sweep(fn, generate(3, 4, 1), DELTAS, "gcscg:chain", options=opts)


def test_rule_bound_on_undetermined_set_is_not_applicable():
    fn = lookup("expsin")
    xs = SampleSet(x0=fn.x0(), directions=[[1.0, 0.0], [2.0, 0.0]])
    report = bound_for("gcscg:product", fn, xs, options=EXPSIN_PARTNERS)
    assert report is not None and report.bound is None
