from __future__ import annotations

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from csgrad.domain.errors import MissingEvaluationError, SampleSetError
from csgrad.domain.sample_set import Classification, EvaluationTable, SampleSet
from csgrad.services.evaluation import evaluate
from csgrad.services.sampleset import (
    classify,
    delta_c,
    delta_s,
    direction_matrix,
    from_points,
    generate,
    load_sample_set,
    radius,
    reflect,
    reflected_table,
    sample_set_to_dict,
    scale,
    scaled_matrix,
)


# ----------------------
# 構築と不変条件
# ----------------------
def test_from_points_keeps_order(quartic_set):
    assert quartic_set.n == 1 and quartic_set.m == 2
    assert_allclose(quartic_set.directions, [[1.0], [2.0]])
    assert radius(quartic_set) == 2.0


def test_from_points_vector_case():
    xs = from_points([(1.0, 2.0), (2.0, 2.0), (1.0, 3.0)])
    assert_allclose(xs.x0, [1.0, 2.0])
    assert_allclose(xs.directions, [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(SampleSetError):
        from_points([1.0])


def test_zero_direction_rejected():
    with pytest.raises(SampleSetError, match="零"):
        SampleSet(x0=[0.0, 0.0], directions=[[1.0, 0.0], [0.0, 0.0]])


def test_duplicate_points_rejected():
    with pytest.raises(SampleSetError, match="重複"):
        SampleSet(x0=[0.0, 0.0], directions=[[1.0, 0.0], [1.0, 0.0]])


def test_dimension_mismatch_rejected():
    with pytest.raises(SampleSetError):
        SampleSet(x0=[0.0, 0.0], directions=[[1.0, 0.0, 0.0]])


def test_non_finite_point_rejected():
    with pytest.raises(SampleSetError):
        SampleSet(x0=[np.nan], directions=[[1.0]])


def test_table_length_mismatch_rejected():
    with pytest.raises(SampleSetError):
        EvaluationTable(f_x0=0.0, f_plus=(1.0, 2.0), f_minus=(1.0,))


# ----------------------
# 幾何量
# ----------------------
def test_direction_matrix_columns_are_directions():
    xs = SampleSet(x0=[0.0, 0.0, 0.0], directions=[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    assert_allclose(direction_matrix(xs), [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def test_reflect_negates_directions():
    xs = SampleSet(x0=[1.0, 1.0], directions=[[1.0, 0.0]])
    assert_allclose(reflect(xs).directions, [[-1.0, 0.0]])
    assert_allclose(reflect(xs).x0, [1.0, 1.0])


def test_scaled_matrix_has_unit_radius(quartic_set):
    assert_allclose(scaled_matrix(quartic_set), [[0.5, 1.0]])


@pytest.mark.parametrize(
    "x0, directions, expected",
    [
        ([-1.0], [[1.0], [2.0]], Classification.OVERDETERMINED),
        ([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], Classification.DETERMINED),
        ([1.0, 1.0], [[1.0, 0.0]], Classification.UNDERDETERMINED),
        ([0.0, 0.0], [[1.0, 0.0], [2.0, 0.0]], Classification.UNDETERMINED),
        ([0.0, 0.0, 0.0], [[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]], Classification.UNDETERMINED),
    ],
)
def test_classify(x0, directions, expected):
    assert classify(SampleSet(x0=x0, directions=directions)) is expected


# ----------------------
# 差分
# ----------------------
def test_delta_c_quartic(quartic_set, quartic):
    tab = evaluate(quartic, quartic_set)
    assert_allclose(delta_c(tab), [-8.0, -40.0])
    assert_allclose(delta_s(tab), [-1.0, 0.0])


def test_delta_s_requires_base_value():
    with pytest.raises(MissingEvaluationError):
        delta_s(EvaluationTable(f_x0=None, f_plus=(1.0,), f_minus=(0.0,)))


def test_delta_c_requires_reflection():
    with pytest.raises(MissingEvaluationError):
        delta_c(EvaluationTable(f_x0=0.0, f_plus=(1.0,)))


def test_reflected_table_swaps_sides(quartic_set, quartic):
    tab = evaluate(quartic, quartic_set)
    back = reflected_table(tab)
    assert back.f_plus == tab.f_minus and back.f_minus == tab.f_plus
    assert_allclose(delta_c(back), -delta_c(tab))


def test_value_count():
    assert EvaluationTable(f_x0=1.0, f_plus=(1.0, 2.0), f_minus=(0.0, 0.5)).value_count == 5
    assert EvaluationTable(f_x0=None, f_plus=(1.0, 2.0), f_minus=(0.0, 0.5)).value_count == 4


# ----------------------
# 生成・入出力
# ----------------------
def test_generate_is_seeded_and_unit_radius():
    a = generate(3, 5, seed=11)
    b = generate(3, 5, seed=11)
    assert a == b
    assert radius(a) == pytest.approx(1.0)
    assert classify(a) is Classification.OVERDETERMINED
    assert np.linalg.svd(scaled_matrix(a), compute_uv=False).min() >= 0.1


def test_generate_uses_given_base_point():
    xs = generate(2, 2, seed=3, x0=[0.3, 0.2])
    assert_allclose(xs.x0, [0.3, 0.2])


def test_generate_rejects_bad_sizes():
    with pytest.raises(SampleSetError):
        generate(0, 2, seed=1)


def test_scale_keeps_base_point(quartic_set):
    half = scale(quartic_set, 0.5)
    assert_allclose(half.x0, quartic_set.x0)
    assert radius(half) == 1.0
    with pytest.raises(SampleSetError):
        scale(quartic_set, 0.0)


def test_load_sample_set(sample_set_file, quartic_set):
    assert load_sample_set(sample_set_file) == quartic_set


def test_load_sample_set_errors(tmp_path):
    with pytest.raises(SampleSetError, match="見つかりません"):
        load_sample_set(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(SampleSetError, match="JSON"):
        load_sample_set(broken)
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"x0": [0.0]}), encoding="utf-8")
    with pytest.raises(SampleSetError):
        load_sample_set(partial)


def test_sample_set_dict_form(quartic_set):
    assert sample_set_to_dict(quartic_set) == {"x0": [-1.0], "directions": [[1.0], [2.0]]}
