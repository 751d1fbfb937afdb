from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from csgrad.domain.sample_set import SampleSet
from csgrad.services.oracle import lookup
from csgrad.services.sampleset import from_points

# 性質ベースの検査は 1 ループあたり 200 件
PROPERTY_CASES = 200


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)


@pytest.fixture
def quartic_set() -> SampleSet:
    """⟨−1, 0, 1⟩（x⁰ = −1, d = 1, 2）"""
    return from_points([-1.0, 0.0, 1.0])


@pytest.fixture
def quartic():
    return lookup("quartic1d")


@pytest.fixture
def small_cfg() -> dict:
    """検証スイートを軽くした設定"""
    return {"verify": {"cases": 10, "seed": 7}}


@pytest.fixture
def sample_set_file(tmp_path: Path) -> Path:
    path = tmp_path / "quartic_set.json"
    path.write_text(json.dumps({"x0": [-1.0], "directions": [[1.0], [2.0]]}), encoding="utf-8")
    return path


@pytest.fixture
def small_config_file(tmp_path: Path, small_cfg: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(small_cfg), encoding="utf-8")
    return path
