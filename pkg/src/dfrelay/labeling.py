"""Message-to-symbol maps and per-scheme labelling profiles."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass

import numpy as np

from .constellation import bit_string

__all__ = [
    "Scheme",
    "Labeling",
    "LabelingProfile",
    "identity_profile",
    "profile_from_table",
    "write_profile_table",
    "read_profile_table",
]


class Scheme(str, enum.Enum):
    """Relaying protocol: both nodes transmit in phase 2 (NODF) or only the relay (ODF)."""

    NODF = "NODF"
    ODF = "ODF"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected NODF or ODF") from None


@dataclass(frozen=True)
class Labeling:
    """Bijective map from messages ``1..M`` to point indices ``1..M``.

    ``assign[j-1]`` is the point index used for message ``j``.
    """

    assign: tuple

    def __post_init__(self):
        a = tuple(int(v) for v in self.assign)
        M = len(a)
        if M < 2:
            raise ValueError("a labeling needs at least two messages")
        if sorted(a) != list(range(1, M + 1)):
            seen, dup = set(), []
            for v in a:
                if v in seen:
                    dup.append(v)
                seen.add(v)
            detail = f"duplicate point(s) {sorted(set(dup))}" if dup else f"points {a}"
            raise ValueError(f"labeling is not a bijection on 1..{M}: {detail}")
        object.__setattr__(self, "assign", a)

    @classmethod
    def identity(cls, M):
        return cls(tuple(range(1, M + 1)))

    @property
    def M(self):
        return len(self.assign)

    def __call__(self, message):
        """Point index for 1-based ``message``."""
        if not 1 <= message <= self.M:
            raise ValueError(f"message {message} outside 1..{self.M}")
        return self.assign[message - 1]

    @property
    def index0(self):
        """0-based point index per 0-based message, as an int array."""
        return np.asarray(self.assign, dtype=np.intp) - 1

    def symbols(self, signal_set):
        """Complex symbol per message (0-based array)."""
        if signal_set.M != self.M:
            raise ValueError(f"labeling has M={self.M} but signal set has M={signal_set.M}")
        return signal_set.points[self.index0]

    def __iter__(self):
        return iter(self.assign)


@dataclass(frozen=True)
class LabelingProfile:
    """Maps used by one relaying scheme.

    For ODF, ``x_s1`` plays the role of the single source map and ``x_s2`` is
    absent.
    """

    scheme: Scheme
    x_s1: Labeling
    x_r: Labeling
    x_s2: Labeling | None = None

    def __post_init__(self):
        scheme = Scheme.parse(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        for name in ("x_s1", "x_r", "x_s2"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, Labeling):
                object.__setattr__(self, name, Labeling(tuple(v)))
        if scheme is Scheme.NODF and self.x_s2 is None:
            raise ValueError("an NODF profile needs x_s2")
        if scheme is Scheme.ODF and self.x_s2 is not None:
            raise ValueError("an ODF profile must not carry x_s2")
        Ms = {m.M for m in self.maps()}
        if len(Ms) != 1:
            raise ValueError(f"maps disagree on M: {sorted(Ms)}")

    @property
    def M(self):
        return self.x_s1.M

    def maps(self):
        out = [self.x_s1, self.x_r]
        if self.x_s2 is not None:
            out.append(self.x_s2)
        return out

    def as_odf(self):
        """Same source and relay maps under ODF (drops ``x_s2``)."""
        return LabelingProfile(Scheme.ODF, self.x_s1, self.x_r)


def identity_profile(scheme, M):
    """Baseline profile in which every map sends message ``j`` to ``s_j``."""
    scheme = Scheme.parse(scheme)
    ident = Labeling.identity(M)
    return LabelingProfile(scheme, ident, ident, ident if scheme is Scheme.NODF else None)


def _point_index(value):
    text = str(value).strip().lower()
    if text.startswith("s"):
        text = text[1:].lstrip("_")
    return int(text)


def profile_from_table(scheme, rows):
    """Build a profile from table rows.

    Parameters
    ----------
    scheme : Scheme or str
    rows : iterable of mapping
        Each row needs ``message``, ``x_s1`` and ``x_r`` (and ``x_s2`` for NODF).
        Point references may be written ``5`` or ``s5``. Row order is free.
    """
    scheme = Scheme.parse(scheme)
    keys = ["x_s1", "x_r"] + (["x_s2"] if scheme is Scheme.NODF else [])
    by_msg = {}
    for row in rows:
        try:
            j = int(row["message"])
        except KeyError:
            raise ValueError("table row without a 'message' field") from None
        if j in by_msg:
            raise ValueError(f"message {j} appears more than once")
        missing = [k for k in keys if row.get(k) in (None, "")]
        if missing:
            raise ValueError(f"message {j}: missing column(s) {missing}")
        by_msg[j] = {k: _point_index(row[k]) for k in keys}
    M = len(by_msg)
    if sorted(by_msg) != list(range(1, M + 1)):
        absent = sorted(set(range(1, max(by_msg, default=0) + 1)) - set(by_msg))
        raise ValueError(f"table must cover messages 1..M; missing {absent}")
    maps = {k: Labeling(tuple(by_msg[j][k] for j in range(1, M + 1))) for k in keys}
    return LabelingProfile(scheme, maps["x_s1"], maps["x_r"], maps.get("x_s2"))


_BASE_COLUMNS = ("bits", "message", "x_s1", "x_r")


def write_profile_table(profile, fh=None, delimiter=",", extra=None):
    """Write a profile as delimiter-separated rows.

    ``extra`` maps additional column names to per-message value sequences;
    they are appended after the map columns and ignored on import.
    """
    out = io.StringIO() if fh is None else fh
    cols = list(_BASE_COLUMNS)
    if profile.x_s2 is not None:
        cols.append("x_s2")
    extra = dict(extra or {})
    cols += list(extra)
    w = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    w.writerow(cols)
    M = profile.M
    for j in range(1, M + 1):
        row = [bit_string(j, M), j, f"s{profile.x_s1(j)}", f"s{profile.x_r(j)}"]
        if profile.x_s2 is not None:
            row.append(f"s{profile.x_s2(j)}")
        row += [extra[k][j - 1] for k in extra]
        w.writerow(row)
    if fh is None:
        return out.getvalue()
    return None


def read_profile_table(source, scheme=None, delimiter=","):
    """Inverse of :func:`write_profile_table`.

    The scheme is inferred from the presence of an ``x_s2`` column unless given.
    Bit strings, when present, are checked against the message numbers.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines, delimiter=delimiter)
    rows = [{k.strip(): (v.strip() if isinstance(v, str) else v) for k, v in r.items()} for r in reader]
    if scheme is None:
        scheme = Scheme.NODF if rows and "x_s2" in rows[0] else Scheme.ODF
    profile = profile_from_table(scheme, rows)
    for r in rows:
        if r.get("bits"):
            expect = bit_string(int(r["message"]), profile.M)
            if r["bits"] != expect:
                raise ValueError(f"message {r['message']}: bits {r['bits']!r} != {expect!r}")
    return profile
