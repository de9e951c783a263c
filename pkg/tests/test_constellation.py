import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dfrelay.constellation import (SignalSet, bit_string, make_mpsk, message_bits, min_sq_dist,
                                   read_constellation, sq_dist, write_constellation)


def test_qpsk_points_are_exact():
    assert list(make_mpsk(4).points) == [1, 1j, -1, -1j]


def test_bpsk_is_antipodal():
    assert list(make_mpsk(2).points) == [1, -1]


def test_8psk_adjacent_and_three_apart():
    S = make_mpsk(8)
    assert sq_dist(S, 1, 2) == pytest.approx(2 - math.sqrt(2), abs=1e-12)
    assert sq_dist(S, 1, 4) == pytest.approx(2 + math.sqrt(2), abs=1e-12)
    assert min_sq_dist(S) == pytest.approx(2 - math.sqrt(2), abs=1e-12)


def test_qpsk_antipodal_distance():
    assert sq_dist(make_mpsk(4), 1, 3) == pytest.approx(4.0)


def test_points_run_counter_clockwise_from_zero():
    S = make_mpsk(16)
    ang = np.unwrap(np.angle(S.points))
    assert ang[0] == 0.0
    np.testing.assert_allclose(np.diff(ang), 2 * np.pi / 16, atol=1e-12)


@pytest.mark.parametrize("M", [0, 1, 3, 6, 12])
def test_invalid_order_rejected(M):
    with pytest.raises(ValueError, match="power of 2"):
        make_mpsk(M)


def test_non_integer_order_rejected():
    with pytest.raises(TypeError):
        make_mpsk(4.0)


def test_index_out_of_range():
    S = make_mpsk(4)
    with pytest.raises(IndexError):
        sq_dist(S, 0, 1)
    with pytest.raises(IndexError):
        sq_dist(S, 1, 5)
    with pytest.raises(IndexError):
        S[5]


def test_duplicate_points_rejected():
    with pytest.raises(ValueError, match="distinct"):
        SignalSet([1, 1, -1, 1j])


def test_immutable():
    S = make_mpsk(4)
    with pytest.raises(AttributeError):
        S.name = "x"
    with pytest.raises(ValueError):
        S.points[0] = 3


points = st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                  min_size=4, max_size=4, unique=True)


@given(points)
def test_normalised_to_unit_energy(pts):
    d = np.abs(np.subtract.outer(pts, pts))
    d[np.diag_indices(4)] = np.inf
    rms = math.sqrt(np.mean(np.abs(pts) ** 2))
    if rms < 1e-3 or d.min() / rms < 1e-4:
        return
    S = SignalSet(pts)
    assert np.mean(np.abs(S.points) ** 2) == pytest.approx(1.0, abs=1e-12)


@given(st.sampled_from([2, 4, 8, 16]), st.integers(1, 16), st.integers(1, 16))
def test_sq_dist_symmetric_and_zero_on_diagonal(M, i, j):
    S = make_mpsk(M)
    i, j = (i - 1) % M + 1, (j - 1) % M + 1
    assert sq_dist(S, i, j) == sq_dist(S, j, i)
    assert (sq_dist(S, i, j) == 0) == (i == j)


@given(st.floats(-10, 10))
def test_rotation_keeps_distances(theta):
    S = make_mpsk(8)
    np.testing.assert_allclose(S.rotated(theta).distance_matrix(), S.distance_matrix(), atol=1e-12)


def test_message_bits_big_endian():
    assert message_bits(1, 8) == (0, 0, 0)
    assert message_bits(2, 8) == (0, 0, 1)
    assert message_bits(8, 8) == (1, 1, 1)
    assert bit_string(5, 8) == "100"
    with pytest.raises(ValueError):
        message_bits(9, 8)


def test_constellation_file_roundtrip():
    S = make_mpsk(8)
    text = write_constellation(S)
    assert text.splitlines()[0] == "index\tbits\treal\timag"
    assert text.splitlines()[2].split("\t")[:2] == ["2", "001"]
    back = read_constellation(text)
    np.testing.assert_allclose(back.points, S.points, atol=1e-6)
    buf = io.StringIO()
    write_constellation(S, buf)
    assert buf.getvalue() == text


def test_constellation_file_errors():
    with pytest.raises(ValueError, match="duplicate"):
        read_constellation("index bits real imag\n1 0 1 0\n1 1 -1 0\n")
    with pytest.raises(ValueError, match="cover"):
        read_constellation("1 0 1 0\n3 1 -1 0\n")
    with pytest.raises(ValueError, match="4 fields"):
        read_constellation("1 0 1\n2 1 -1 0\n")
