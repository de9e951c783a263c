"""Compiled per-trial loop used by the Monte Carlo harness.

Decisions match :mod:`dfrelay.decoder` (same arithmetic, same lowest-index
tie rule). The near-ML search is skipped when a lower bound on every
competing metric already exceeds the transmitted message's metric.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


@njit(cache=True)
def trial_batch(msg, c_rs, c_ds1, c_ds2, c_dr, z_r, z_d1, z_d2,
                s1, s2, r_src, r_tx, has_s2, genie, ideal, prune):
    """Decode a batch of trials.

    ``msg`` is 0-based. ``r_src`` is the relay map's symbol table used by the
    destination; ``r_tx`` the table actually transmitted by the relay (they
    coincide unless a test injects a mismatch). Returns 0-based decisions and
    the number of trials that needed the full search.
    """
    n = msg.shape[0]
    M = s1.shape[0]
    out = np.empty(n, dtype=np.int64)
    d1 = np.empty((M, M))
    dmin = np.empty(M)
    for a in range(M):
        dmin[a] = np.inf
        for j in range(M):
            d1[j, a] = _abs2(s1[a] - s1[j])
            if j != a and d1[j, a] < dmin[a]:
                dmin[a] = d1[j, a]
    t2 = np.empty(M)
    u = np.empty(M, dtype=np.complex128)
    v = np.empty(M, dtype=np.complex128)
    full = 0
    for i in range(n):
        m = msg[i]
        x1 = s1[m]
        y_r = c_rs[i] * x1 + z_r[i]
        y_d1 = c_ds1[i] * x1 + z_d1[i]
        if genie:
            mh = m
        else:
            mh = 0
            best = np.inf
            for k in range(M):
                e = _abs2(y_r - c_rs[i] * s1[k])
                if e < best:
                    best = e
                    mh = k
        y_d2 = c_dr[i] * r_tx[mh] + z_d2[i]
        if has_s2:
            y_d2 = y_d2 + c_ds2[i] * s2[m]
        for a in range(M):
            t2[a] = _abs2(y_d1 - c_ds1[i] * s1[a])
            if has_s2:
                u[a] = y_d2 - c_ds2[i] * s2[a]
            else:
                u[a] = y_d2
            v[a] = c_dr[i] * r_src[a]
        if ideal:
            dec = 0
            best = np.inf
            for a in range(M):
                e = t2[a] + _abs2(u[a] - v[a])
                if e < best:
                    best = e
                    dec = a
            out[i] = dec
            continue
        q = 0.25 * _abs2(c_rs[i])
        if prune:
            g_up = t2[m] + _abs2(u[m] - v[m])
            alt = q * d1[mh, m] + t2[m] + _abs2(u[m] - v[mh])
            if alt < g_up:
                g_up = alt
            thresh = g_up * (1.0 + 1e-9) + 1e-300
            ok = True
            for a in range(M):
                if a == m:
                    continue
                lo = _abs2(u[a] - v[a])
                qd = q * dmin[a]
                if qd < lo:
                    lo = qd
                if t2[a] + lo <= thresh:
                    ok = False
                    break
            if ok:
                out[i] = m
                continue
        full += 1
        dec = 0
        best = np.inf
        for a in range(M):
            g = np.inf
            for j in range(M):
                f = (q * d1[j, a] + t2[a]) + _abs2(u[a] - v[j])
                if f < g:
                    g = f
            if g < best:
                best = g
                dec = a
        out[i] = dec
    return out, full


@njit(cache=True)
def count_bit_errors(a, b):
    total = 0
    for i in range(a.shape[0]):
        x = a[i] ^ b[i]
        while x:
            total += x & 1
            x >>= 1
    return total


@njit(cache=True)
def _fill_normals(rng, buf):
    flat = buf.ravel()
    for k in range(flat.shape[0]):
        flat[k] = rng.standard_normal()


@njit(cache=True)
def _complex_rows(buf, scales, out):
    n = buf.shape[2]
    for v in range(buf.shape[0]):
        s = scales[v]
        for i in range(n):
            out[v, i] = complex(s * buf[v, 0, i], s * buf[v, 1, i])


@njit(cache=True)
def draw_and_decode(rng, msg, scales, s1, s2, r, has_s2, genie, ideal, buf, c):
    """Draw fades and noise from ``rng`` and decode.

    The normals are consumed in the same order as
    :func:`dfrelay.channel.draw_fades` followed by
    :func:`dfrelay.channel.draw_noise`: per variable, all real parts and
    then all imaginary parts. ``scales`` are the per-dimension standard
    deviations of ``(c_rs, c_ds1, c_ds2, c_dr, z_r, z_d1, z_d2)``. ``buf``
    (shape ``(7, 2, n)``) and ``c`` (``(7, n)`` complex) are scratch space,
    passed in so repeated batches reuse already-mapped memory.
    """
    _fill_normals(rng, buf)
    _complex_rows(buf, scales, c)
    dec, full = trial_batch(msg, c[0], c[1], c[2], c[3], c[4], c[5], c[6],
                            s1, s2, r, r, has_s2, genie, ideal, True)
    return dec, full


@njit(cache=True)
def _pair_metric(x, q, d1, t2, u, v, M, near):
    if not near:
        return t2[x] + _abs2(u[x] - v[x])
    g = np.inf
    for j in range(M):
        f = (q * d1[j, x] + t2[x]) + _abs2(u[x] - v[j])
        if f < g:
            g = f
    return g


@njit(cache=True)
def draw_pairwise(rng, n, a, abar, scales, s1, s2, r, has_s2, genie, near, buf, c):
    """Count trials in which ``abar`` beats the transmitted ``a`` (0-based).

    Draws and scratch arrays follow :func:`draw_and_decode`; a tie goes to
    the lower index.
    """
    M = s1.shape[0]
    _fill_normals(rng, buf)
    _complex_rows(buf, scales, c)
    d1 = np.empty((M, M))
    for x in range(M):
        for j in range(M):
            d1[j, x] = _abs2(s1[x] - s1[j])
    t2 = np.empty(M)
    u = np.empty(M, dtype=np.complex128)
    v = np.empty(M, dtype=np.complex128)
    errors = 0
    x1 = s1[a]
    for i in range(n):
        c_rs, c_ds1, c_ds2, c_dr = c[0, i], c[1, i], c[2, i], c[3, i]
        y_r = c_rs * x1 + c[4, i]
        y_d1 = c_ds1 * x1 + c[5, i]
        if genie:
            mh = a
        else:
            mh = 0
            best = np.inf
            for k in range(M):
                e = _abs2(y_r - c_rs * s1[k])
                if e < best:
                    best = e
                    mh = k
        y_d2 = c_dr * r[mh] + c[6, i]
        if has_s2:
            y_d2 = y_d2 + c_ds2 * s2[a]
        for x in range(M):
            t2[x] = _abs2(y_d1 - c_ds1 * s1[x])
            if has_s2:
                u[x] = y_d2 - c_ds2 * s2[x]
            else:
                u[x] = y_d2
            if not near:
                u[x] = u[x] - c_dr * r[x]
                v[x] = 0.0
            else:
                v[x] = c_dr * r[x]
        q = 0.25 * _abs2(c_rs)
        ga = _pair_metric(a, q, d1, t2, u, v, M, near)
        gb = _pair_metric(abar, q, d1, t2, u, v, M, near)
        if gb < ga or (gb == ga and abar < a):
            errors += 1
    return errors
