"""Monte Carlo BER harness for the decode-and-forward relay channel.

Trials are drawn in fixed-size batches. Batch ``b`` of grid point ``p`` uses
its own stream seeded by ``SeedSequence(master_seed, spawn_key=(p, b))``, so
a curve depends only on the configuration, never on how batches are
distributed over worker processes.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import multiprocessing
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .channel import ChannelParams, draw_fades, draw_noise
from .constellation import SignalSet
from .labeling import LabelingProfile, Scheme

__all__ = [
    "RelayMode",
    "SimConfig",
    "PointRecord",
    "BerCurve",
    "batch_stream",
    "simulate_batch",
    "run_point",
    "run_sweep",
    "measure_slope",
    "gap_at_ber",
    "InsufficientErrors",
    "write_curve_csv",
    "read_curve_csv",
    "write_manifest",
    "pairwise_error_rate",
]

LOW_ERROR_FLAG = 20
MIN_SLOPE_ERRORS = 100


class RelayMode(str, enum.Enum):
    REALISTIC = "realistic"
    GENIE = "genie"


class InsufficientErrors(ValueError):
    """A curve point is too sparse (too few errors) for the requested estimate."""


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a simulated curve.

    Parameters
    ----------
    signal_set, profile :
        Constellation and labelling maps; the scheme comes from ``profile``.
    params : ChannelParams
        Link variances; its ``es_db`` is replaced by each grid value.
    es_grid : sequence of float
        Symbol energies in dB.
    trials_per_point : int
        Upper limit on trials at each grid point.
    target_errors : int or None
        Stop a point once this many bit errors have accumulated.
    relay_mode : 'realistic' or 'genie'
        Genie forces the relay to forward the true message.
    decoder : 'auto', 'near_ml' or 'ideal_ml'
        'auto' uses near-ML for the realistic relay and the ideal-link ML
        decoder for the genie relay.
    noiseless : bool
        Zero all noise samples (plumbing checks).
    relay_set : SignalSet, optional
        Constellation used by the relay, e.g. a rotated copy.
    batch_size : int
        Trials per random stream; part of the reproducibility contract.
    """

    signal_set: SignalSet
    profile: LabelingProfile
    params: ChannelParams = field(default_factory=ChannelParams)
    es_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials_per_point: int = 100_000
    target_errors: int | None = None
    master_seed: int = 0
    workers: int = 1
    relay_mode: RelayMode = RelayMode.REALISTIC
    decoder: str = "auto"
    noiseless: bool = False
    relay_set: SignalSet | None = None
    batch_size: int = 65_536

    def __post_init__(self):
        object.__setattr__(self, "es_grid", tuple(float(e) for e in self.es_grid))
        object.__setattr__(self, "relay_mode", RelayMode(str(getattr(self.relay_mode, "value", self.relay_mode)).lower()))
        if not self.es_grid:
            raise ValueError("es_grid must not be empty")
        if int(self.trials_per_point) < 1:
            raise ValueError("trials_per_point must be >= 1")
        if self.target_errors is not None and int(self.target_errors) < 1:
            raise ValueError("target_errors must be >= 1 when given")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        if self.decoder not in ("auto", "near_ml", "ideal_ml"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.profile.M != self.signal_set.M:
            raise ValueError("profile and signal set disagree on M")
        if self.relay_set is not None and self.relay_set.M != self.signal_set.M:
            raise ValueError("relay set and signal set disagree on M")

    @property
    def scheme(self):
        return self.profile.scheme

    @property
    def use_ideal_decoder(self):
        if self.decoder == "auto":
            return self.relay_mode is RelayMode.GENIE
        return self.decoder == "ideal_ml"

    def describe(self):
        """JSON-friendly summary used in manifests."""
        return {
            "scheme": self.scheme.value,
            "M": self.signal_set.M,
            "points": [[p.real, p.imag] for p in self.signal_set.points],
            "x_s1": list(self.profile.x_s1.assign),
            "x_r": list(self.profile.x_r.assign),
            "x_s2": None if self.profile.x_s2 is None else list(self.profile.x_s2.assign),
            "params": asdict(self.params),
            "es_grid": list(self.es_grid),
            "trials_per_point": int(self.trials_per_point),
            "target_errors": self.target_errors,
            "master_seed": int(self.master_seed),
            "workers": int(self.workers),
            "relay_mode": self.relay_mode.value,
            "decoder": self.decoder,
            "noiseless": self.noiseless,
            "relay_rotated": self.relay_set is not None,
            "batch_size": int(self.batch_size),
        }


@dataclass(frozen=True)
class PointRecord:
    es_db: float
    trials: int
    bit_errors: int
    message_errors: int
    bits_per_symbol: int

    @property
    def ber(self):
        return self.bit_errors / (self.trials * self.bits_per_symbol)

    @property
    def ser(self):
        return self.message_errors / self.trials

    @property
    def ci95_halfwidth(self):
        """Normal-approximation 95% half-width on ``ber``."""
        n = self.trials * self.bits_per_symbol
        p = self.ber
        return 1.959963984540054 * math.sqrt(p * (1.0 - p) / n)

    @property
    def low_count(self):
        return self.bit_errors < LOW_ERROR_FLAG


@dataclass(frozen=True)
class BerCurve:
    records: tuple
    label: str = ""

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    @property
    def es_db(self):
        return np.array([r.es_db for r in self.records])

    @property
    def ber(self):
        return np.array([r.ber for r in self.records])

    def at(self, es_db):
        for r in self.records:
            if abs(r.es_db - es_db) < 1e-9:
                return r
        raise KeyError(f"no grid point at {es_db} dB")


def batch_stream(master_seed, point_index, batch_index):
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(point_index), int(batch_index)))
    return np.random.Generator(np.random.PCG64(ss))


def _symbol_tables(config, es_db):
    amp = math.sqrt(10.0 ** (es_db / 10.0))
    S, P = config.signal_set, config.profile
    rs = S if config.relay_set is None else config.relay_set
    s1 = amp * P.x_s1.symbols(S)
    r = amp * P.x_r.symbols(rs)
    if P.scheme is Scheme.NODF:
        s2 = amp * P.x_s2.symbols(S)
    else:
        s2 = np.zeros(S.M, dtype=complex)
    return s1, s2, r


def simulate_batch(config, es_db, rng, n, prune=True):
    """Draw and decode ``n`` trials with numpy-side draws; returns ``(messages, decisions)``.

    Draw order per batch: messages, fades ``(c_rs, c_ds1, c_ds2, c_dr)``,
    noise ``(z_r, z_d1, z_d2)``. :func:`_fast_batch` consumes the stream
    identically and must return the same decisions.
    """
    M = config.signal_set.M
    params = config.params.at(es_db)
    m = rng.integers(1, M + 1, size=n)
    fades = draw_fades(params, rng, n)
    z = draw_noise(rng, n)
    if config.noiseless:
        z = tuple(np.zeros(n, dtype=complex) for _ in z)
    s1, s2, r = _symbol_tables(config, es_db)
    dec, _ = _kernels.trial_batch(
        m - 1, fades.c_rs, fades.c_ds1, fades.c_ds2, fades.c_dr, z[0], z[1], z[2],
        s1, s2, r, r, config.scheme is Scheme.NODF, config.relay_mode is RelayMode.GENIE,
        config.use_ideal_decoder, prune)
    return m, dec + 1


def _scales(config, es_db):
    p = config.params
    noise = 0.0 if config.noiseless else math.sqrt(0.5)
    return np.array([math.sqrt(p.var_rs / 2.0), math.sqrt(p.var_ds / 2.0),
                     math.sqrt(p.var_ds / 2.0), math.sqrt(p.var_dr / 2.0),
                     noise, noise, noise])


_WORKSPACE = {}


def _workspace(n):
    ws = _WORKSPACE.get(n)
    if ws is None:
        _WORKSPACE.clear()
        ws = (np.empty((7, 2, n)), np.empty((7, n), dtype=complex))
        _WORKSPACE[n] = ws
    return ws


def _fast_batch(config, es_db, rng, n):
    M = config.signal_set.M
    m = rng.integers(1, M + 1, size=n)
    s1, s2, r = _symbol_tables(config, es_db)
    dec, _ = _kernels.draw_and_decode(
        rng, m - 1, _scales(config, es_db), s1, s2, r, config.scheme is Scheme.NODF,
        config.relay_mode is RelayMode.GENIE, config.use_ideal_decoder, *_workspace(n))
    return m, dec + 1


def _run_batch(args):
    config, point_index, es_db, batch_index, n = args
    rng = batch_stream(config.master_seed, point_index, batch_index)
    m, a = _fast_batch(config, es_db, rng, n)
    return (int(_kernels.count_bit_errors(m - 1, a - 1)), int(np.count_nonzero(m != a)), n)


def _batch_sizes(config):
    total, size = int(config.trials_per_point), int(config.batch_size)
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


_POOL = {}


def _executor(workers):
    if workers <= 1:
        return None
    ex = _POOL.get(workers)
    if ex is None:
        ctx = multiprocessing.get_context("fork")
        ex = ProcessPoolExecutor(max_workers=workers, mp_context=ctx)
        _POOL[workers] = ex
    return ex


def run_point(config, es_db, point_index=None):
    """Simulate one grid point.

    The result depends only on ``(config, point_index)``; ``point_index``
    defaults to the position of ``es_db`` in ``config.es_grid``.
    """
    if point_index is None:
        matches = [i for i, e in enumerate(config.es_grid) if abs(e - es_db) < 1e-12]
        point_index = matches[0] if matches else 0
    sizes = _batch_sizes(config)
    target = config.target_errors
    ex = _executor(int(config.workers))
    wave = max(1, int(config.workers))
    bits = msgs = trials = 0
    b = 0
    while b < len(sizes):
        jobs = [(config, point_index, float(es_db), k, sizes[k])
                for k in range(b, min(b + wave, len(sizes)))]
        results = list(ex.map(_run_batch, jobs)) if ex is not None else [_run_batch(j) for j in jobs]
        stop = False
        for be, me, n in results:
            bits += be
            msgs += me
            trials += n
            if target is not None and bits >= target:
                stop = True
                break
        if stop:
            break
        b += wave
    return PointRecord(float(es_db), trials, bits, msgs, config.signal_set.bits_per_symbol)


def run_sweep(config, label=""):
    """One :class:`PointRecord` per grid value, in grid order."""
    recs = tuple(run_point(config, es, i) for i, es in enumerate(config.es_grid))
    return BerCurve(recs, label)


def measure_slope(curve, es_lo, es_hi, min_errors=MIN_SLOPE_ERRORS):
    """Decades of BER lost per decade of ``Es`` between two grid points."""
    lo, hi = curve.at(es_lo), curve.at(es_hi)
    for r in (lo, hi):
        if r.bit_errors < min_errors:
            raise InsufficientErrors(
                f"point {r.es_db} dB has {r.bit_errors} bit errors (< {min_errors}); "
                "raise trials_per_point or target_errors")
    return -(math.log10(hi.ber) - math.log10(lo.ber)) / ((es_hi - es_lo) / 10.0)


def _crossing(curve, target):
    es, ber = curve.es_db, curve.ber
    lt = math.log10(target)
    for i in range(len(es) - 1):
        b0, b1 = ber[i], ber[i + 1]
        if b0 >= target >= b1 and b0 > 0:
            if b1 <= 0:
                raise ValueError(f"curve {curve.label!r} drops to zero BER between "
                                 f"{es[i]} and {es[i + 1]} dB; cannot interpolate")
            l0, l1 = math.log10(b0), math.log10(b1)
            if l0 == l1:
                return float(es[i])
            return float(es[i] + (es[i + 1] - es[i]) * (l0 - lt) / (l0 - l1))
    raise ValueError(f"curve {curve.label!r} does not bracket BER {target:g}")


def gap_at_ber(curve_a, curve_b, ber_target):
    """``Es_a - Es_b`` (dB) needed to reach ``ber_target``; positive when ``b`` is better.

    Interpolation is linear in ``(Es dB, log10 BER)`` at the first downward crossing.
    """
    return _crossing(curve_a, ber_target) - _crossing(curve_b, ber_target)


def pairwise_error_rate(config, a, abar, es_db, trials, point_index=0, fast=True):
    """Binary-restricted error rate: transmit ``a``, decide between ``a`` and ``abar`` only.

    The relay still detects over the full set (realistic mode) or forwards
    ``a`` (genie mode); the destination compares its metric for the two
    hypotheses, ties going to the lower index. Batches are seeded like
    :func:`run_point`. ``fast=False`` runs the numpy reference path, which
    consumes the streams identically. Returns ``(rate, std_error)``.
    """
    M = config.signal_set.M
    if a == abar or not (1 <= a <= M and 1 <= abar <= M):
        raise ValueError(f"need two distinct messages in 1..{M}")
    s1, s2, r = _symbol_tables(config, es_db)
    has_s2 = config.scheme is Scheme.NODF
    genie = config.relay_mode is RelayMode.GENIE
    near = not config.use_ideal_decoder
    scales = _scales(config, es_db)
    errors = done = 0
    for b, n in enumerate(_batch_sizes(replace(config, trials_per_point=int(trials)))):
        rng = batch_stream(config.master_seed, point_index, b)
        if fast:
            errors += int(_kernels.draw_pairwise(rng, n, a - 1, abar - 1, scales, s1, s2, r,
                                                 has_s2, genie, near, *_workspace(n)))
        else:
            errors += _pairwise_numpy(config, es_db, rng, n, a, abar, s1, s2, r, genie, near)
        done += n
    p = errors / done
    return p, math.sqrt(p * (1.0 - p) / done)


def _pairwise_numpy(config, es_db, rng, n, a, abar, s1, s2, r, genie, near):
    from .decoder import _f_table

    has_s2 = config.scheme is Scheme.NODF
    f = draw_fades(config.params.at(es_db), rng, n)
    z = draw_noise(rng, n)
    if config.noiseless:
        z = tuple(np.zeros(n, dtype=complex) for _ in z)
    x1 = s1[a - 1]
    y_r = f.c_rs * x1 + z[0]
    y_d1 = f.c_ds1 * x1 + z[1]
    if genie:
        m_hat = np.full(n, a - 1)
    else:
        m_hat = np.argmin(np.abs(y_r[:, None] - f.c_rs[:, None] * s1) ** 2, axis=1)
    y_d2 = f.c_dr * r[m_hat] + z[2]
    if has_s2:
        y_d2 = y_d2 + f.c_ds2 * s2[a - 1]
    pair = np.array([a - 1, abar - 1])
    if near:
        g = _f_table(y_d1, y_d2, f.c_rs, f.c_ds1, f.c_ds2, f.c_dr, s1,
                     s2 if has_s2 else None, r).min(axis=-2)[:, pair]
    else:
        u = y_d2[:, None]
        if has_s2:
            u = u - f.c_ds2[:, None] * s2[pair]
        u = u - f.c_dr[:, None] * r[pair]
        g = np.abs(y_d1[:, None] - f.c_ds1[:, None] * s1[pair]) ** 2 + np.abs(u) ** 2
    lose = g[:, 1] < g[:, 0] if abar > a else g[:, 1] <= g[:, 0]
    return int(np.count_nonzero(lose))


# ---------------------------------------------------------------------------
# files

CSV_COLUMNS = ("es_db", "trials", "bit_errors", "message_errors", "ber", "ser",
               "ci95_halfwidth", "low_count")


def write_curve_csv(curve, fh=None):
    out = io.StringIO() if fh is None else fh
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in curve:
        w.writerow([f"{r.es_db:g}", r.trials, r.bit_errors, r.message_errors,
                    f"{r.ber:.10e}", f"{r.ser:.10e}", f"{r.ci95_halfwidth:.10e}",
                    int(r.low_count)])
    if fh is None:
        return out.getvalue()
    return None


def read_curve_csv(source, bits_per_symbol=None, label=""):
    """Parse a curve CSV; bits per symbol is recovered from ``ber`` if not given."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        label = label or str(source)
        with open(source) as fh:
            text = fh.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("curve file has no rows")
    missing = set(CSV_COLUMNS[:4]) - set(rows[0])
    if missing:
        raise ValueError(f"curve file lacks column(s) {sorted(missing)}")
    recs = []
    for row in rows:
        trials, bits = int(row["trials"]), int(row["bit_errors"])
        k = bits_per_symbol
        if k is None:
            ber = float(row["ber"])
            k = round(bits / (trials * ber)) if ber > 0 else 1
        recs.append(PointRecord(float(row["es_db"]), trials, bits, int(row["message_errors"]), int(k)))
    return BerCurve(tuple(recs), label)


def _git_describe():
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=5)
        return res.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_manifest(path, config, wall_time, extra=None):
    data = {
        "config": config.describe(),
        "master_seed": int(config.master_seed),
        "git_describe": _git_describe(),
        "wall_time_s": round(float(wall_time), 3),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


def with_mode(config, mode):
    return replace(config, relay_mode=RelayMode(mode))
