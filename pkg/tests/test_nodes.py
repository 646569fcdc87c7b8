import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from sphquad.geometry import geodesic_stats, min_geodesic_spacing
from sphquad.nodes import (
    fibonacci_nodes,
    icosahedral_nodes,
    make_nodes,
    min_energy_nodes,
    riesz_energy,
)


def test_fibonacci_center_node_and_count():
    X = fibonacci_nodes(2501)
    assert X.N == 2501
    assert np.allclose(X.points[1250], [1.0, 0.0, 0.0], atol=1e-15)


def test_fibonacci_index_symmetry():
    # node(-i) is node(i) reflected through the equator with longitude negated
    P = fibonacci_nodes(101).points
    mirrored = P[::-1] * np.array([1.0, -1.0, -1.0])
    assert np.allclose(P, mirrored, atol=1e-14)


@pytest.mark.parametrize("N", [2, 2500, 1, 0])
def test_fibonacci_rejects_bad_sizes(N):
    with pytest.raises(ValueError):
        fibonacci_nodes(N)


def test_fibonacci_spacing_comparable_to_icosahedral():
    hf = geodesic_stats(fibonacci_nodes(2501)).h * math.sqrt(2501)
    hi = geodesic_stats(icosahedral_nodes(16)).h * math.sqrt(2562)
    assert 1 / 1.5 < hf / hi < 1.5


@pytest.mark.parametrize("n", [1, 2, 3, 5, 16, 32, 48, 64])
def test_icosahedral_counts(n):
    X = icosahedral_nodes(n)
    assert X.N == 10 * n * n + 2
    assert np.allclose(np.linalg.norm(X.points, axis=1), 1.0, atol=1e-15)
    if n <= 16:
        assert min_geodesic_spacing(X.points) > 1e-10


def test_icosahedral_level1_is_regular():
    d = pdist(icosahedral_nodes(1).points)
    edge = d.min()
    # every vertex has five neighbors at the edge length
    assert np.sum(np.isclose(d, edge, rtol=1e-12)) == 30
    assert edge == pytest.approx(math.sqrt(2 - 2 / math.sqrt(5)), rel=1e-12)


def test_icosahedral_poles():
    P = icosahedral_nodes(3).points
    assert np.allclose(P[0], [0, 0, 1]) and np.allclose(P[11], [0, 0, -1])


def test_min_energy_small_configurations():
    assert np.allclose(pdist(min_energy_nodes(2).points), 2.0, rtol=1e-6)
    tet = pdist(min_energy_nodes(4).points)
    assert np.ptp(tet) / tet.mean() < 1e-6
    assert tet.mean() == pytest.approx(math.sqrt(8 / 3), rel=1e-6)
    d = np.sort(pdist(min_energy_nodes(6).points))
    assert np.allclose(d[:12], math.sqrt(2), rtol=1e-6)
    assert np.allclose(d[12:], 2.0, rtol=1e-6)


def test_min_energy_monotone_and_seeded():
    X = min_energy_nodes(200, seed=4, max_iter=200, history=True)
    e = np.array(X.meta["energies"])
    assert np.all(np.diff(e) < 0)
    assert e[-1] == pytest.approx(riesz_energy(X.points), rel=1e-12)
    assert X.meta["energy"] == e[-1]
    Y = min_energy_nodes(200, seed=4, max_iter=200)
    assert np.array_equal(X.points, Y.points)


def test_min_energy_improves_on_start():
    from sphquad.nodes import fibonacci_points

    X = min_energy_nodes(301, max_iter=100)
    assert X.meta["energy"] < riesz_energy(fibonacci_points(301))


def test_min_energy_cap_flags_metadata(caplog):
    X = min_energy_nodes(400, max_iter=5)
    assert X.meta["converged"] is False
    assert X.meta["stop_reason"] == "cap"
    assert "min-energy descent stopped" in caplog.text


def test_riesz_energy_pair():
    assert riesz_energy(np.array([[0, 0, 1.0], [0, 0, -1.0]])) == pytest.approx(2 / 8)


def test_make_nodes_dispatch():
    assert make_nodes("icosahedral", 2).N == 42
    assert make_nodes("fibonacci", 11).family == "fibonacci"
    assert make_nodes("min-energy", 12, max_iter=10).family == "min_energy"
    with pytest.raises(ValueError):
        make_nodes("hexagonal", 3)
