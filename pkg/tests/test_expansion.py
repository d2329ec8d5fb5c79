import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from belief.errors import ConfigError, DataError
from belief.expansion import (
    MAX_TOTAL_BITS,
    BitPanel,
    ExpansionConfig,
    VariableSpec,
    binary_expand,
    binary_expand_array,
    build_panel,
    ecdf_rescale,
    ecdf_transform,
    encode_binary,
    load_config,
    read_csv_columns,
    reconstruct,
)


def test_ecdf_examples():
    assert ecdf_rescale([3.0]).tolist() == [0.0]
    assert ecdf_rescale([10, 20, 30, 40]).tolist() == [-0.75, -0.25, 0.25, 0.75]
    assert ecdf_rescale([5, 5]).tolist() == [0.0, 0.0]


def test_ecdf_ties_midrank():
    u = ecdf_rescale([1, 2, 2, 3])
    assert u.tolist() == [-0.75, 0.0, 0.0, 0.75]


def test_ecdf_rejects_nonfinite_with_index():
    with pytest.raises(DataError, match="index 2"):
        ecdf_rescale([1.0, 2.0, np.nan])


def test_ecdf_transform_uses_reference_ranks():
    ref = [10, 20, 30, 40]
    # unseen values sit between neighbouring reference midranks
    u = ecdf_transform(ref, [5, 25, 45, 20])
    assert u.tolist() == [-1.0, 0.0, 1.0, -0.25]


@settings(max_examples=100)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_ecdf_rank_preserving_and_inside(xs):
    x = np.array(xs)
    u = ecdf_rescale(x)
    assert np.all(np.abs(u) < 1)
    i, j = np.meshgrid(np.arange(x.size), np.arange(x.size))
    less = x[i] < x[j]
    assert np.all(u[i][less] < u[j][less])
    eq = x[i] == x[j]
    assert np.all(u[i][eq] == u[j][eq])


def test_binary_expand_examples():
    assert binary_expand(0.75, 2) == (1, 1)
    assert reconstruct(binary_expand(0.75, 2)) == 0.75
    assert binary_expand(0.0, 3) == (-1, 1, 1)
    assert binary_expand(0.5, 3) == (1, -1, 1)


def test_binary_expand_domain():
    with pytest.raises(DataError):
        binary_expand(1.5, 2)
    with pytest.raises(DataError):
        binary_expand_array(np.array([0.1, -1.01]), 2)


@settings(max_examples=300)
@given(st.floats(-1, 1), st.integers(1, 30))
def test_reconstruction_error_bound(u, D):
    assert abs(u - reconstruct(binary_expand(u, D))) <= 2.0**-D


@settings(max_examples=200)
@given(st.floats(-1, 1), st.integers(1, 20))
def test_monotone_refinement(u, D):
    assert binary_expand(u, D + 1)[:D] == binary_expand(u, D)


def test_binary_expand_array_shapes():
    u = np.array([[0.1, -0.3], [0.9, 0.0]])
    out = binary_expand_array(u, 3)
    assert out.shape == (2, 2, 3)
    assert tuple(out[1, 1]) == binary_expand(0.0, 3)


def test_build_panel_binary():
    cfg = ExpansionConfig((VariableSpec("z", "binary", 1, positive="yes"),))
    panel = build_panel({"z": ["yes", "no", "yes"]}, cfg)
    assert panel.bits[:, 0].tolist() == [1, -1, 1]
    assert panel.cell.tolist() == [0, 1, 0]


def test_build_panel_continuous_depth2():
    cfg = ExpansionConfig.from_depths({"x": 2})
    panel = build_panel({"x": [10, 20, 30, 40]}, cfg)
    assert panel.bits.tolist() == [[-1, -1], [-1, 1], [1, -1], [1, 1]]
    assert panel.cell.tolist() == [3, 1, 2, 0]
    assert panel.labels == ["A_{1,1}", "A_{1,2}"]


def test_build_panel_two_variables():
    cfg = ExpansionConfig.from_depths({"a": 1, "b": 2})
    rng = np.random.default_rng(0)
    panel = build_panel({"a": rng.normal(size=30), "b": rng.normal(size=30)}, cfg)
    assert panel.P == 3 and cfg.total_bits == 3
    assert panel.cell.min() >= 0 and panel.cell.max() < 8
    assert panel.bit_index == [(1, 1), (2, 1), (2, 2)]
    assert cfg.variable_bits("b") == [1, 2]


def test_build_panel_known_range_clamps():
    cfg = ExpansionConfig((VariableSpec("x", "continuous-known-range", 1, value_range=(0.0, 10.0)),))
    panel = build_panel({"x": [-5, 2, 8, 12]}, cfg)
    assert panel.clamped == {"x": 2}
    assert panel.bits[:, 0].tolist() == [-1, -1, 1, 1]


def test_build_panel_errors():
    cfg = ExpansionConfig.from_depths({"x": 1})
    with pytest.raises(ConfigError):
        build_panel({"y": [1, 2]}, cfg)
    with pytest.raises(DataError):
        build_panel({"x": []}, cfg)
    bcfg = ExpansionConfig((VariableSpec("z", "binary"),))
    with pytest.raises(DataError):
        build_panel({"z": ["a", "b", "c"]}, bcfg)
    with pytest.raises(ConfigError):
        build_panel({"z": ["a", "b"]}, bcfg)


def test_config_validation():
    with pytest.raises(ConfigError):
        VariableSpec("x", depth=0)
    with pytest.raises(ConfigError):
        VariableSpec("x", "binary", 2)
    with pytest.raises(ConfigError):
        VariableSpec("x", "continuous-known-range", 1)
    with pytest.raises(ConfigError):
        VariableSpec("x", "nonsense")
    with pytest.raises(ConfigError):
        ExpansionConfig.from_depths({"a": 13, "b": 12})
    assert ExpansionConfig.from_depths({"a": 12, "b": 12}).total_bits == MAX_TOTAL_BITS


def test_config_roundtrip(tmp_path):
    cfg = ExpansionConfig(
        (
            VariableSpec("x", "continuous-ecdf", 2),
            VariableSpec("r", "continuous-known-range", 1, value_range=(-2.0, 2.0)),
            VariableSpec("z", "binary", 1, positive="yes"),
        )
    )
    assert ExpansionConfig.from_dict(cfg.to_dict()) == cfg
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    loaded, _ = load_config(path)
    assert loaded == cfg
    assert loaded.bit_labels() == ["A_{1,1}", "A_{1,2}", "A_{2,1}", "A_{3}"]


def test_read_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\n1,0\n2,1\n")
    assert read_csv_columns(p) == {"x": ["1", "2"], "y": ["0", "1"]}
    p.write_text("x,y\n1,\n")
    with pytest.raises(DataError):
        read_csv_columns(p)
    with pytest.raises(DataError):
        read_csv_columns(tmp_path / "missing.csv")


def test_encode_binary():
    assert encode_binary(["0", "1", "1"]).tolist() == [-1, 1, 1]
    assert encode_binary(["-1", "1"]).tolist() == [-1, 1]
    assert encode_binary(["no", "yes"], "yes").tolist() == [-1, 1]


def test_bitpanel_from_bits_encoding():
    panel = BitPanel.from_bits([[1, -1, -1], [-1, 1, 1]])
    assert panel.cell.tolist() == [0b110, 0b001]
    with pytest.raises(DataError):
        BitPanel.from_bits([[0, 1]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.integers(1, 4))
def test_panel_cell_encoding_and_determinism(xs, depth):
    cfg = ExpansionConfig.from_depths({"x": depth})
    a = build_panel({"x": xs}, cfg)
    b = build_panel({"x": list(xs)}, cfg)
    assert np.array_equal(a.bits, b.bits) and np.array_equal(a.cell, b.cell)
    assert set(np.unique(a.bits)) <= {-1, 1}
    for k in range(a.P):
        assert np.array_equal((a.cell >> k) & 1 == 1, a.bits[:, k] == -1)
