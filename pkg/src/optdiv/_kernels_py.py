"""Pure numpy implementation of the simulation kernels.

Mirrors ``_kernels.pyx`` operation for operation; used when the compiled
extension is unavailable or ``OPTDIV_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import numpy as np

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = np.uint64(0x9E3779B9)
W1 = np.uint64(0xBB67AE85)
MASK = np.uint64(0xFFFFFFFF)
S32 = np.uint64(32)

TWO_PI = 6.283185307179586
INV_2_53 = 1.0 / 9007199254740992.0
INV_2_32 = 1.0 / 4294967296.0
GATE = 6.0

SCHEMES = {"euler": 0, "bridge": 1}


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 block function on arrays of 32-bit words (held in uint64)."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & MASK for c in (c0, c1, c2, c3))
    k0 = np.uint64(int(k0) & 0xFFFFFFFF)
    k1 = np.uint64(int(k1) & 0xFFFFFFFF)
    for _ in range(10):
        p0 = M0 * c0
        p1 = M1 * c2
        hi0, lo0 = p0 >> S32, p0 & MASK
        hi1, lo1 = p1 >> S32, p1 & MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + W0) & MASK
        k1 = (k1 + W1) & MASK
    return c0, c1, c2, c3


def _u53(a, b):
    return (((a >> np.uint64(5)).astype(np.float64) * 67108864.0
             + (b >> np.uint64(6)).astype(np.float64)) + 0.5) * INV_2_53


def normals(step, paths, seed):
    """Standard normals for ``step`` and every entry of ``paths``."""
    paths = np.asarray(paths, dtype=np.uint64)
    k0, k1 = seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF
    w0, w1, w2, _ = philox4x32(np.uint64(step >> 1), paths & MASK, paths >> S32,
                               np.uint64(0), k0, k1)
    u1 = _u53(w0, w1)
    u2 = (w2.astype(np.float64) + 0.5) * INV_2_32
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = TWO_PI * u2
    return rad * (np.cos(ang) if step % 2 == 0 else np.sin(ang))


def uniforms(step, paths, seed):
    """Uniforms in (0, 1) for the bridge extremum at ``step``."""
    paths = np.asarray(paths, dtype=np.uint64)
    k0, k1 = seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF
    w0, w1, w2, w3 = philox4x32(np.uint64(step >> 1), paths & MASK, paths >> S32,
                                np.uint64(1), k0, k1)
    return _u53(w0, w1) if step % 2 == 0 else _u53(w2, w3)


def simulate_batch(x0, upper, level, pen_w, f_w, m_w, mu, sigma, dt,
                   n_paths, seed, path_offset=0, scheme="bridge", antithetic=True,
                   record=False):
    """Simulate the controlled surplus for every (strategy, start level) pair.

    Parameters
    ----------
    x0 : (nx,) start levels.
    upper : (ns, K+1) dividend barrier at the step times (``inf`` for none).
    level : (K+1,) level used by the penalty accumulator.
    pen_w : (K+1,) weights of ``max(X_k - level_k, 0)`` in the penalty sum.
    f_w, m_w : (K,) prices of dividends and injections paid during step k;
        ``f_w`` also prices the initial lump.
    n_paths, seed, path_offset : path ``j`` uses counter-based stream
        ``path_offset + j`` (or its antithetic partner).

    record : bool
        Also return ``X``, ``D`` and ``I`` after every step (shape
        ``(K+1, n_paths, ns, nx)``); only this implementation supports it.

    Returns
    -------
    dict of arrays of shape (n_paths, ns, nx): ``div``, ``inj``, ``pen``,
    ``x_T``, ``d_T``, ``i_T``.
    """
    x0 = np.ascontiguousarray(x0, dtype=float)
    upper = np.ascontiguousarray(upper, dtype=float)
    level = np.ascontiguousarray(level, dtype=float)
    pen_w = np.ascontiguousarray(pen_w, dtype=float)
    f_w = np.ascontiguousarray(f_w, dtype=float)
    m_w = np.ascontiguousarray(m_w, dtype=float)
    ns, k1 = upper.shape
    n_steps = k1 - 1
    nx = x0.size
    code = SCHEMES[scheme]
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    idx = np.arange(n_paths, dtype=np.int64) + int(path_offset)
    if antithetic:
        stream = (idx >> 1).astype(np.uint64)
        sign = np.where(idx & 1, -1.0, 1.0)[:, None, None]
    else:
        stream = idx.astype(np.uint64)
        sign = np.ones((n_paths, 1, 1))

    sdt = sigma * np.sqrt(dt)
    two_var = 2.0 * sigma * sigma * dt
    gate = GATE * sdt
    shape = (n_paths, ns, nx)
    X = np.broadcast_to(x0[None, None, :], shape).copy()
    div = np.zeros(shape)
    inj = np.zeros(shape)
    pen = np.zeros(shape)
    dtot = np.zeros(shape)
    itot = np.zeros(shape)

    u0 = upper[:, 0][None, :, None]
    lump = np.maximum(X - u0, 0.0)
    X -= lump
    dtot += lump
    div += f_w[0] * lump
    if record:
        trace = {"X": [X.copy()], "D": [dtot.copy()], "I": [itot.copy()]}

    for k in range(n_steps):
        pen += pen_w[k] * np.maximum(X - level[k], 0.0)
        z = sign * normals(k, stream, seed)[:, None, None]
        Xn = X + (mu * dt + sdt * z)
        ua = upper[:, k][None, :, None]
        ub = upper[:, k + 1][None, :, None]
        dd = np.zeros(shape)
        di = np.zeros(shape)
        if code == 1:
            near_up = np.maximum(X - ua, Xn - ub) > -gate
            near_lo = np.minimum(X, Xn) < gate
            both = near_up & near_lo
            only_up = near_up & ~both
            only_lo = near_lo & ~both
            if np.any(only_up | only_lo):
                u = uniforms(k, stream, seed)[:, None, None]
                lg = np.log(u)
                with np.errstate(invalid="ignore"):
                    # nan where the barrier is infinite; masked below
                    y0 = X - ua
                    y1 = Xn - ub
                    mx = 0.5 * (y0 + y1 + np.sqrt((y1 - y0) ** 2 - two_var * lg))
                dd = np.where(only_up, np.maximum(mx, 0.0), dd)
                mn = 0.5 * (X + Xn - np.sqrt((Xn - X) ** 2 - two_var * lg))
                di = np.where(only_lo, np.maximum(-mn, 0.0), di)
                Xn = Xn - dd + di
            # both barriers within reach: plain clamping
            cap = np.where(both, np.maximum(Xn - ub, 0.0), 0.0)
            Xn = Xn - cap
            flo = np.where(both, np.maximum(-Xn, 0.0), 0.0)
            Xn = Xn + flo
            dd = dd + cap
            di = di + flo
            # guards against rounding at the barriers
            Xn = np.minimum(np.maximum(Xn, 0.0), np.maximum(ub, 0.0))
        else:
            dd = np.maximum(Xn - ub, 0.0)
            Xn = Xn - dd
            di = np.maximum(-Xn, 0.0)
            Xn = Xn + di
        div += f_w[k] * dd
        inj += m_w[k] * di
        dtot += dd
        itot += di
        X = Xn
        if record:
            trace["X"].append(X.copy())
            trace["D"].append(dtot.copy())
            trace["I"].append(itot.copy())
    pen += pen_w[n_steps] * np.maximum(X - level[n_steps], 0.0)
    out = {"div": div, "inj": inj, "pen": pen, "x_T": X, "d_T": dtot, "i_T": itot}
    if record:
        out.update({k: np.stack(v) for k, v in trace.items()})
    return out
