"""Complex signal sets shared by the source and the relay.

Points are addressed with 1-based indices (``s_1 .. s_M``) in every public
function; the underlying array is 0-based.
"""
from __future__ import annotations

import io

import numpy as np

__all__ = [
    "SignalSet",
    "make_mpsk",
    "sq_dist",
    "min_sq_dist",
    "message_bits",
    "bit_string",
    "write_constellation",
    "read_constellation",
]


def _check_order(M):
    if isinstance(M, bool) or not isinstance(M, (int, np.integer)):
        raise TypeError(f"M must be an integer, got {type(M).__name__}")
    if M < 2 or (M & (M - 1)) != 0:
        raise ValueError(f"M must be a power of 2 and at least 2, got {M}")
    return int(M)


class SignalSet:
    """Ordered constellation with unit average energy.

    Parameters
    ----------
    points : array_like of complex
        Constellation points in label order. They are rescaled by their RMS
        value so that ``mean(|s_k|^2) == 1``.
    name : str, optional
        Free-form label used in reports.
    """

    __slots__ = ("_points", "name")

    def __init__(self, points, name=None):
        pts = np.asarray(points, dtype=complex).ravel()
        M = _check_order(len(pts))
        if not np.all(np.isfinite(pts)):
            raise ValueError("constellation points must be finite")
        rms = np.sqrt(np.mean(np.abs(pts) ** 2))
        if rms == 0:
            raise ValueError("constellation has zero energy")
        pts = pts / rms
        d = np.abs(pts[:, None] - pts[None, :]) ** 2
        d[np.diag_indices(M)] = np.inf
        if d.min() <= 1e-12:
            raise ValueError("constellation points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "_points", pts)
        object.__setattr__(self, "name", name)

    def __setattr__(self, key, value):
        raise AttributeError("SignalSet is immutable")

    # immutable, so copies can share the instance (sklearn.clone deep-copies params)
    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __reduce__(self):
        return (_restore_signal_set, (np.array(self._points), self.name))

    @property
    def points(self):
        return self._points

    @property
    def M(self):
        return len(self._points)

    @property
    def bits_per_symbol(self):
        return self.M.bit_length() - 1

    def __len__(self):
        return self.M

    def __getitem__(self, k):
        """Return ``s_k`` using 1-based ``k``."""
        return self._points[_check_index(self, k)]

    def distance_matrix(self):
        """Squared distances ``|s_i - s_j|^2`` as an ``(M, M)`` array (0-based)."""
        p = self._points
        diff = p[:, None] - p[None, :]
        return diff.real**2 + diff.imag**2

    def rotated(self, theta):
        """Copy with every point multiplied by ``exp(i*theta)``."""
        return SignalSet(self._points * np.exp(1j * theta), name=self.name)

    def __eq__(self, other):
        if not isinstance(other, SignalSet):
            return NotImplemented
        return self.M == other.M and np.array_equal(self._points, other._points)

    def __hash__(self):
        return hash(self._points.tobytes())

    def __repr__(self):
        label = self.name or "SignalSet"
        return f"<{label} M={self.M}>"


def _restore_signal_set(points, name):
    # bypass renormalisation so unpickled points are bit-identical
    obj = object.__new__(SignalSet)
    points.setflags(write=False)
    object.__setattr__(obj, "_points", points)
    object.__setattr__(obj, "name", name)
    return obj


def _check_index(signal_set, k):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise TypeError(f"point index must be an integer, got {k!r}")
    if not 1 <= k <= signal_set.M:
        raise IndexError(f"point index {k} outside 1..{signal_set.M}")
    return int(k) - 1


def make_mpsk(M):
    """M-PSK with ``s_k = exp(2j*pi*(k-1)/M)``: ``s_1`` at angle 0, counter-clockwise."""
    M = _check_order(M)
    k = np.arange(M)
    pts = np.exp(2j * np.pi * k / M)
    # snap the exact axis crossings so that 4-PSK is literally {1, i, -1, -i}
    pts.real[np.abs(pts.real) < 1e-15] = 0.0
    pts.imag[np.abs(pts.imag) < 1e-15] = 0.0
    return SignalSet(pts, name=f"{M}-PSK")


def sq_dist(signal_set, i, j):
    """Squared Euclidean distance between points ``s_i`` and ``s_j`` (1-based)."""
    a = signal_set.points[_check_index(signal_set, i)]
    b = signal_set.points[_check_index(signal_set, j)]
    d = a - b
    return float(d.real**2 + d.imag**2)


def min_sq_dist(signal_set):
    """Minimum squared distance over all distinct point pairs."""
    d = signal_set.distance_matrix()
    d[np.diag_indices(signal_set.M)] = np.inf
    return float(d.min())


def message_bits(message, M):
    """Big-endian bit tuple carried by ``message`` (message 1 -> all zeros)."""
    M = _check_order(M)
    if not 1 <= message <= M:
        raise ValueError(f"message {message} outside 1..{M}")
    k = M.bit_length() - 1
    v = int(message) - 1
    return tuple((v >> (k - 1 - b)) & 1 for b in range(k))


def bit_string(message, M):
    return "".join(str(b) for b in message_bits(message, M))


def write_constellation(signal_set, fh=None):
    """Write ``index bits real imag`` rows (6 significant digits).

    Returns the text when ``fh`` is None.
    """
    out = io.StringIO() if fh is None else fh
    out.write("index\tbits\treal\timag\n")
    for k, p in enumerate(signal_set.points, start=1):
        out.write(f"{k}\t{bit_string(k, signal_set.M)}\t{p.real:.6g}\t{p.imag:.6g}\n")
    if fh is None:
        return out.getvalue()
    return None


def read_constellation(source, name=None):
    """Parse the table written by :func:`write_constellation`.

    ``source`` may be a path, an open file or the table text itself. Rows may
    appear in any order; the ``index`` column fixes the labels.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source) as fh:
            text = fh.read()
    rows = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if fields[0] == "index":
            continue
        if len(fields) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(fields)}")
        k = int(fields[0])
        if k in rows:
            raise ValueError(f"line {lineno}: duplicate index {k}")
        rows[k] = complex(float(fields[2]), float(fields[3]))
    M = len(rows)
    if sorted(rows) != list(range(1, M + 1)):
        raise ValueError("indices must cover 1..M exactly once")
    return SignalSet([rows[k] for k in range(1, M + 1)], name=name)
