import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_hvz.model import (DispersionFunction, ModelError, ModelSpec, OffGridError, PairPotential,
                               TorusGrid, grid_points, load_model, lipschitz_weight, model_from_dict,
                               model_l1, model_to_dict, nearest_neighbor_dispersion, regularity_weight,
                               save_model, scale_dispersion, symbol_eval, validate_model)

NN = {(0,): 1.0, (1,): -0.5, (-1,): -0.5}


@pytest.mark.parametrize("p, expected", [(0.0, 0.0), (math.pi, 2.0), (math.pi / 2, 1.0)])
def test_symbol_eval_nearest_neighbor(p, expected):
    assert abs(symbol_eval(DispersionFunction(NN), [p]) - expected) < 1e-14


def test_symbol_eval_vectorized_and_mismatch():
    f = DispersionFunction(NN)
    ps = np.linspace(-np.pi, np.pi, 7)[:, None]
    np.testing.assert_allclose(symbol_eval(f, ps), 1 - np.cos(ps[:, 0]), atol=1e-14)
    with pytest.raises(ValueError):
        symbol_eval(f, [0.0, 0.0])
    with pytest.raises(ValueError):
        symbol_eval(f, [np.nan])


# hermitian-symmetric coefficient tables in d = 1 or 2
@st.composite
def hermitian_dispersions(draw, d=None):
    d = draw(st.integers(1, 2)) if d is None else d
    n = draw(st.integers(0, 4))
    table = {tuple([0] * d): complex(draw(st.floats(-3, 3)), 0)}
    for _ in range(n):
        s = tuple(draw(st.lists(st.integers(-3, 3), min_size=d, max_size=d)))
        c = complex(draw(st.floats(-2, 2)), draw(st.floats(-2, 2)))
        if all(x == 0 for x in s):
            continue
        table[s] = c
        table[tuple(-x for x in s)] = c.conjugate()
    return DispersionFunction(table)


@settings(max_examples=60, deadline=None)
@given(hermitian_dispersions(), st.integers(2, 9))
def test_symbol_real_on_grid_and_periodic(f, M):
    d = f.dim
    g = TorusGrid(M, d)
    vals = symbol_eval(f, grid_points(g))
    assert np.max(np.abs(np.imag(vals))) < 1e-12
    for j in range(d):
        shift = np.zeros(d)
        shift[j] = 2 * np.pi
        np.testing.assert_allclose(symbol_eval(f, grid_points(g) + shift), vals, atol=1e-12)


def test_validate_model_examples():
    assert validate_model(model_l1()) == []
    bad = ModelSpec(2, 1, (DispersionFunction({(1,): 1.0}), DispersionFunction(NN)))
    assert any("hermitian" in p for p in validate_model(bad))
    same = ModelSpec(2, 1, (DispersionFunction(NN),) * 2, (PairPotential(1, 1, {(0,): 1.0}),))
    assert any("1 <= i < j" in p for p in validate_model(same))


def test_validate_model_other_violations():
    f = DispersionFunction(NN)
    dup = ModelSpec(2, 1, (f, f), (PairPotential(1, 2, {(0,): 1.0}), PairPotential(1, 2, {(1,): 1.0})))
    assert any("twice" in p for p in validate_model(dup))
    assert any("dispersions given" in p for p in validate_model(ModelSpec(3, 1, (f, f))))
    wrong_dim = ModelSpec(2, 2, (f, nearest_neighbor_dispersion(2)))
    assert any("dimension" in p for p in validate_model(wrong_dim))
    cplx = ModelSpec(2, 1, (f, f), (PairPotential(1, 2, {(0,): 1j}),))
    assert any("complex" in p for p in validate_model(cplx))


@pytest.mark.parametrize("coeffs, delta, expected", [
    ({(0,): 1.0}, 1.0, 0.0),
    (NN, 1.0, 1.0),
    (NN, 0.5, 1.0),
    ({(0,): 1.0, (2,): 0.25, (-2,): 0.25}, 0.5, 2 * 0.25 * math.sqrt(2)),
])
def test_regularity_weight(coeffs, delta, expected):
    assert regularity_weight(DispersionFunction(coeffs), delta) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(hermitian_dispersions(d=1), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_regularity_weight_monotone_in_delta(f, a, b):
    lo, hi = sorted((a, b))
    assert regularity_weight(f, lo) <= regularity_weight(f, hi) + 1e-12


def test_lipschitz_weight_and_scaling():
    f = nearest_neighbor_dispersion(2, hopping=0.5)
    assert lipschitz_weight(f) == pytest.approx(2.0)
    g = scale_dispersion(f, 0.25)
    assert lipschitz_weight(g) == pytest.approx(0.5)
    assert symbol_eval(g, [np.pi, 0.0]) == pytest.approx(0.25 * symbol_eval(f, [np.pi, 0.0]))


@pytest.mark.parametrize("M, d, expected", [
    (4, 1, [[-np.pi], [-np.pi / 2], [0.0], [np.pi / 2]]),
    (2, 1, [[-np.pi], [0.0]]),
    (2, 2, [[-np.pi, -np.pi], [-np.pi, 0.0], [0.0, -np.pi], [0.0, 0.0]]),
])
def test_grid_points(M, d, expected):
    np.testing.assert_allclose(grid_points(TorusGrid(M, d)), expected, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 15), st.data())
def test_grid_closed_under_addition(M, data):
    g = TorusGrid(M, 1)
    i = data.draw(st.integers(0, M - 1))
    j = data.draw(st.integers(0, M - 1))
    total = g.momentum((i,)) + g.momentum((j,))
    assert g.contains(total)
    assert g.contains(-g.momentum((i,)))


def test_grid_index_roundtrip_and_offgrid():
    g = TorusGrid(8, 2)
    for idx in [(0, 0), (3, 5), (7, 1)]:
        assert g.index_of(g.momentum(idx)) == idx
        assert g.index_of(g.momentum(idx) + 2 * np.pi) == idx
    with pytest.raises(OffGridError):
        g.index_of([0.1, 0.0])


def test_model_json_roundtrip(tmp_path, l2):
    path = tmp_path / "m.json"
    save_model(l2, path)
    again = load_model(path)
    assert model_to_dict(again) == model_to_dict(l2)


@settings(max_examples=30, deadline=None)
@given(hermitian_dispersions(d=1), hermitian_dispersions(d=1), st.floats(-3, 3), st.floats(0.1, 1.0))
def test_model_dict_roundtrip_property(f1, f2, lam, delta):
    m = ModelSpec(2, 1, (f1, f2), (PairPotential(1, 2, {(0,): lam, (2,): 0.5}),), delta)
    doc = json.loads(json.dumps(model_to_dict(m)))
    assert model_to_dict(model_from_dict(doc)) == model_to_dict(m)


def test_model_parser_rejects(tmp_path):
    doc = model_to_dict(model_l1())
    doc["extra"] = 1
    with pytest.raises(ModelError):
        model_from_dict(doc)
    doc = model_to_dict(model_l1())
    doc["dispersions"][0]["coeffs"] = [{"site": [1], "re": 1.0}]
    with pytest.raises(ModelError, match="hermitian"):
        model_from_dict(doc)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(bad)


def test_restricted_renumbers(l2):
    sub = l2.restricted([1, 3])
    assert sub.N == 2
    assert [v.pair for v in sub.potentials] == [(1, 2)]
    assert l2.free().potentials == ()
