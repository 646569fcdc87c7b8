import numpy as np
import pytest

from sphquad.io import read_nodes, read_weights, write_nodes, write_weights
from sphquad.nodes import fibonacci_nodes, icosahedral_nodes


def test_node_round_trip_exact(tmp_path):
    X = icosahedral_nodes(5)
    write_nodes(tmp_path / "n.txt", X)
    Y = read_nodes(tmp_path / "n.txt")
    assert np.array_equal(X.points, Y.points)
    assert Y.family == "icosahedral"


def test_weight_round_trip_and_header(tmp_path):
    X = fibonacci_nodes(21)
    c = np.linspace(0.1, 1.0, 21) / 3
    write_weights(tmp_path / "w.txt", X, c, {"kernel": "tps-m2", "iterations": 7})
    Y, d, h = read_weights(tmp_path / "w.txt")
    assert np.array_equal(c, d) and np.array_equal(X.points, Y.points)
    assert h["kernel"] == "tps-m2" and h["iterations"] == "7"


def test_reader_renormalizes_and_skips_comments(tmp_path):
    p = tmp_path / "n.txt"
    p.write_text("# a comment\n\n2 0 0\n0 0 -5\n# trailing\n0 3 0\n")
    X = read_nodes(p)
    assert X.N == 3 and np.allclose(X.points, [[1, 0, 0], [0, 0, -1], [0, 1, 0]])
    assert X.family == "custom"


@pytest.mark.parametrize("text", ["1 0 nan\n", "1 0 inf\n", "1 0\n", "a b c\n", "# only comments\n"])
def test_reader_rejects_bad_files(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_nodes(p)


def test_weight_count_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_weights(tmp_path / "w.txt", fibonacci_nodes(5), np.ones(4))
