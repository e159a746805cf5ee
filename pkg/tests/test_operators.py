import io

import numpy as np
import pytest
import scipy.sparse.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_hvz.clusters import ClusterDecomposition, enumerate_partitions
from lattice_hvz.model import (DispersionFunction, ModelSpec, OffGridError, PairPotential, TorusGrid,
                               model_l1, model_l2, symbol_eval)
from lattice_hvz.operators import (HermitianOperator, build_cluster_fiber, build_fiber_coordinate,
                                   build_fiber_momentum, build_subsystem, hermitian_defect, read_triplets)


def evals(op):
    return np.linalg.eigvalsh(op.dense())


def test_free_l1_is_diagonal():
    H = build_fiber_momentum(model_l1(0.0), [0.0], TorusGrid(4))
    np.testing.assert_allclose(H.dense(), np.diag([4, 2, 0, 2]), atol=1e-14)


def test_contact_l1_subtracts_quarter():
    H = build_fiber_momentum(model_l1(1.0), [0.0], TorusGrid(4))
    np.testing.assert_allclose(H.dense(), np.diag([4, 2, 0, 2]) - 0.25, atol=1e-14)
    coord = build_fiber_coordinate(model_l1(1.0), [0.0], 2, "periodic")
    assert coord.dim == 5


def test_free_l1_coordinate_circulant():
    H = build_fiber_coordinate(model_l1(0.0), [0.0], 1, "periodic")
    expected = np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], dtype=float)
    np.testing.assert_allclose(H.dense(), expected, atol=1e-14)


@pytest.mark.parametrize("model", [model_l1(), model_l2(), model_l2(1, 0, 0), model_l2(0.3, -0.7, 1.1)])
@pytest.mark.parametrize("k_index", [0, 2, 4, 7])
def test_fourier_duality_desk_models(model, k_index):
    grid = TorusGrid(9)
    K = grid.momentum((k_index,))
    a = evals(build_fiber_momentum(model, K, grid))
    b = evals(build_fiber_coordinate(model, K, 4, "periodic"))
    assert np.max(np.abs(a - b)) < 1e-9


@st.composite
def random_models(draw):
    N = draw(st.integers(2, 3))
    disps = []
    for _ in range(N):
        table = {(0,): complex(draw(st.floats(-1, 1)))}
        for s in draw(st.lists(st.integers(1, 3), max_size=2, unique=True)):
            c = complex(draw(st.floats(-1, 1)), draw(st.floats(-1, 1)))
            table[(s,)] = c
            table[(-s,)] = c.conjugate()
        disps.append(DispersionFunction(table))
    pots = []
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            if draw(st.booleans()):
                sites = draw(st.lists(st.integers(-3, 3), min_size=1, max_size=3, unique=True))
                pots.append(PairPotential(i, j, {(s,): draw(st.floats(-2, 2)) for s in sites}))
    return ModelSpec(N, 1, tuple(disps), tuple(pots))


@settings(max_examples=40, deadline=None)
@given(random_models(), st.sampled_from([5, 7, 9]), st.data())
def test_fourier_duality_random(m, M, data):
    grid = TorusGrid(M)
    K = grid.momentum((data.draw(st.integers(0, M - 1)),))
    a = evals(build_fiber_momentum(m, K, grid))
    b = evals(build_fiber_coordinate(m, K, M // 2, "periodic"))
    assert np.max(np.abs(a - b)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(random_models(), st.sampled_from([4, 5, 6]), st.data())
def test_elimination_invariance(m, M, data):
    grid = TorusGrid(M)
    K = grid.momentum((data.draw(st.integers(0, M - 1)),))
    ref = evals(build_fiber_momentum(m, K, grid))
    for e in range(1, m.N):
        other = build_fiber_momentum(m, K, grid, eliminate=e)
        assert hermitian_defect(other.matrix) < 1e-12
        assert np.max(np.abs(evals(other) - ref)) < 1e-9


def test_duality_two_dimensions():
    f = DispersionFunction({(0, 0): 2.0, (1, 0): -0.5, (-1, 0): -0.5, (0, 1): -0.5 + 0.2j, (0, -1): -0.5 - 0.2j})
    m = ModelSpec(2, 2, (f, f), (PairPotential(1, 2, {(0, 0): 1.0, (1, 1): 0.4}),))
    grid = TorusGrid(5, 2)
    K = grid.momentum((1, 3))
    a = evals(build_fiber_momentum(m, K, grid))
    b = evals(build_fiber_coordinate(m, K, 2, "periodic"))
    assert np.max(np.abs(a - b)) < 1e-9


def test_off_grid_and_bad_eliminate():
    with pytest.raises(OffGridError):
        build_fiber_momentum(model_l1(), [0.1], TorusGrid(8))
    with pytest.raises(ValueError):
        build_fiber_momentum(model_l1(), [0.0], TorusGrid(8), eliminate=3)


def test_coordinate_hermitian_for_any_K():
    m = model_l1(0.0)
    for K in (0.0, np.pi, 0.37):
        for boundary in ("periodic", "truncated"):
            H = build_fiber_coordinate(m, [K], 5, boundary)
            assert hermitian_defect(H.matrix) < 1e-12
    a = evals(build_fiber_coordinate(m, [0.0], 5, "truncated"))
    b = evals(build_fiber_coordinate(m, [np.pi], 5, "truncated"))
    assert np.max(np.abs(a - b)) > 1e-3


def test_cluster_fiber_limits(l2):
    grid = TorusGrid(4)
    full = build_fiber_momentum(l2, [0.0], grid).dense()
    free = build_cluster_fiber(l2, ClusterDecomposition.finest(3), [0.0], grid=grid).dense()
    assert np.allclose(free, np.diag(np.diag(free)))
    np.testing.assert_array_equal(free, build_fiber_momentum(l2.free(), [0.0], grid).dense())
    one = build_cluster_fiber(l2, ClusterDecomposition.coarsest(3), [0.0], grid=grid).dense()
    np.testing.assert_array_equal(one, full)


def test_cluster_fiber_hand_assembled(l2):
    # M=2, basis (p1, p2) in {-pi, 0}^2 lexicographic; pair (1,2) couples equal p1 + p2 with weight 1/2
    H = build_cluster_fiber(l2, ClusterDecomposition.of([[1, 2], [3]]), [0.0], grid=TorusGrid(2)).dense()
    V12 = 0.5 * np.array([[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 1, 0], [1, 0, 0, 1]])
    np.testing.assert_allclose(H, np.diag([4.0, 4.0, 4.0, 0.0]) - V12, atol=1e-14)


def test_cluster_fiber_coordinate_matches_momentum(l2):
    grid = TorusGrid(7)
    for C in enumerate_partitions(3):
        a = evals(build_cluster_fiber(l2, C, grid.momentum((2,)), grid=grid))
        b = evals(build_cluster_fiber(l2, C, grid.momentum((2,)), L=3))
        assert np.max(np.abs(a - b)) < 1e-9
    with pytest.raises(ValueError):
        build_cluster_fiber(l2, ClusterDecomposition.finest(3), [0.0])


def test_subsystem_examples(l1):
    single = build_subsystem(l1, [2], [0.0], TorusGrid(4))
    np.testing.assert_allclose(single.dense(), [[0.0]])
    pair = build_subsystem(model_l1(0.0), [1, 2], [0.0], TorusGrid(4))
    np.testing.assert_allclose(pair.dense(), np.diag([4, 2, 0, 2]), atol=1e-14)


def test_subsystem_bound_state_below_pair_band():
    m = model_l2(0, 1, 0)
    k = np.array([np.pi / 2])
    eps = m.dispersions[0]
    q = np.linspace(-np.pi, np.pi, 4001)[:, None]
    band_min = np.min(np.real(symbol_eval(eps, q) + symbol_eval(eps, k - q)))
    h8 = build_subsystem(m, [1, 3], k, TorusGrid(8))
    assert evals(h8).min() < band_min
    h64 = build_subsystem(m, [1, 3], k, TorusGrid(64))
    # contact bound state: 1 = (1/2pi) int dq / (E(q) - z), E(q) = 2 - 2 cos(k/2) cos q
    a = 2 * np.cos(k[0] / 2)
    exact = 2 - np.sqrt(a ** 2 + 1)
    assert abs(evals(h64).min() - exact) < 1e-9


@pytest.mark.parametrize("model, L", [(model_l1(), 8), (model_l2(), 6)])
def test_truncated_ground_state_converges(model, L):
    lows = []
    for size in (L, 2 * L):
        H = build_fiber_coordinate(model, [0.0], size, "truncated").matrix
        lows.append(sla.eigsh(H, k=1, sigma=-3, return_eigenvectors=False)[0])
    assert abs(lows[0] - lows[1]) < 1e-3


def test_triplet_roundtrip(tmp_path, l2):
    H = build_fiber_coordinate(l2, [0.5], 2, "periodic")
    path = tmp_path / "h.txt"
    H.write_triplets(path)
    back = read_triplets(path, H.dim)
    assert abs(back - H.matrix).max() == 0
    buf = io.StringIO()
    build_fiber_momentum(model_l1(), [0.0], TorusGrid(4)).write_triplets(buf)
    assert buf.getvalue().startswith("# momentum basis, dim 4")


def test_hermitian_operator_rejects():
    basis = build_fiber_momentum(model_l1(), [0.0], TorusGrid(2)).basis
    with pytest.raises(ValueError, match="Hermitian"):
        HermitianOperator(basis, np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError, match="shape"):
        HermitianOperator(basis, np.eye(3))
