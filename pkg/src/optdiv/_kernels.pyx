# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels (see ``_kernels_py`` for the reference version)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin
from libc.stdint cimport uint32_t, uint64_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double INV_2_32 = 1.0 / 4294967296.0
cdef double GATE = 6.0

SCHEMES = {"euler": 0, "bridge": 1}


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t x0, x1, x2, x3
    cdef int i
    x0 = c[0]; x1 = c[1]; x2 = c[2]; x3 = c[3]
    for i in range(10):
        p0 = <uint64_t>0xD2511F53 * x0
        p1 = <uint64_t>0xCD9E8D57 * x2
        x0 = <uint32_t>(p1 >> 32) ^ x1 ^ k0
        x1 = <uint32_t>p1
        x2 = <uint32_t>(p0 >> 32) ^ x3 ^ k1
        x3 = <uint32_t>p0
        k0 = k0 + <uint32_t>0x9E3779B9
        k1 = k1 + <uint32_t>0xBB67AE85
    c[0] = x0; c[1] = x1; c[2] = x2; c[3] = x3


cdef inline double fmax(double a, double b) noexcept nogil:
    return a if a > b else b


cdef inline double fmin(double a, double b) noexcept nogil:
    return a if a < b else b


cdef inline double _u53(uint32_t a, uint32_t b) noexcept nogil:
    return ((<double>(a >> 5)) * 67108864.0 + <double>(b >> 6) + 0.5) * INV_2_53


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 block function on scalars (known-answer testing)."""
    cdef uint32_t c[4]
    c[0] = <uint32_t>(int(c0) & 0xFFFFFFFF); c[1] = <uint32_t>(int(c1) & 0xFFFFFFFF)
    c[2] = <uint32_t>(int(c2) & 0xFFFFFFFF); c[3] = <uint32_t>(int(c3) & 0xFFFFFFFF)
    _philox(c, <uint32_t>(int(k0) & 0xFFFFFFFF), <uint32_t>(int(k1) & 0xFFFFFFFF))
    return int(c[0]), int(c[1]), int(c[2]), int(c[3])


cdef inline double _normal(int64_t step, uint64_t stream, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint32_t c[4]
    cdef double u1, u2, rad
    c[0] = <uint32_t>(step >> 1)
    c[1] = <uint32_t>stream
    c[2] = <uint32_t>(stream >> 32)
    c[3] = 0
    _philox(c, k0, k1)
    u1 = _u53(c[0], c[1])
    u2 = (<double>c[2] + 0.5) * INV_2_32
    rad = sqrt(-2.0 * log(u1))
    if step % 2 == 0:
        return rad * cos(TWO_PI * u2)
    return rad * sin(TWO_PI * u2)


cdef inline double _uniform(int64_t step, uint64_t stream, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint32_t c[4]
    c[0] = <uint32_t>(step >> 1)
    c[1] = <uint32_t>stream
    c[2] = <uint32_t>(stream >> 32)
    c[3] = 1
    _philox(c, k0, k1)
    if step % 2 == 0:
        return _u53(c[0], c[1])
    return _u53(c[2], c[3])


def normals(step, paths, seed):
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.uint64_t[:] p = np.ascontiguousarray(paths, dtype=np.uint64)
    cdef double[:] out = np.empty(p.shape[0])
    cdef Py_ssize_t i
    for i in range(p.shape[0]):
        out[i] = _normal(step, p[i], <uint32_t>s, <uint32_t>(s >> 32))
    return np.asarray(out)


def uniforms(step, paths, seed):
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.uint64_t[:] p = np.ascontiguousarray(paths, dtype=np.uint64)
    cdef double[:] out = np.empty(p.shape[0])
    cdef Py_ssize_t i
    for i in range(p.shape[0]):
        out[i] = _uniform(step, p[i], <uint32_t>s, <uint32_t>(s >> 32))
    return np.asarray(out)


def simulate_batch(x0, upper, level, pen_w, f_w, m_w, double mu, double sigma, double dt,
                   Py_ssize_t n_paths, seed, path_offset=0, scheme="bridge", antithetic=True):
    """Compiled counterpart of ``_kernels_py.simulate_batch`` (same contract)."""
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[:, ::1] up = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[::1] lev = np.ascontiguousarray(level, dtype=np.float64)
    cdef double[::1] pw = np.ascontiguousarray(pen_w, dtype=np.float64)
    cdef double[::1] fw = np.ascontiguousarray(f_w, dtype=np.float64)
    cdef double[::1] mw = np.ascontiguousarray(m_w, dtype=np.float64)
    cdef Py_ssize_t ns = up.shape[0], n_steps = up.shape[1] - 1, nx = x0v.shape[0]
    cdef int code = SCHEMES[scheme]
    cdef uint64_t s64 = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint32_t k0 = <uint32_t>s64, k1 = <uint32_t>(s64 >> 32)
    cdef int64_t offset = int(path_offset)
    cdef bint anti = bool(antithetic)

    shape = (n_paths, ns, nx)
    out = {name: np.zeros(shape) for name in ("div", "inj", "pen", "x_T", "d_T", "i_T")}
    cdef double[:, :, ::1] div = out["div"], inj = out["inj"], pen = out["pen"]
    cdef double[:, :, ::1] xT = out["x_T"], dT = out["d_T"], iT = out["i_T"]

    cdef double sdt = sigma * sqrt(dt), two_var = 2.0 * sigma * sigma * dt
    cdef double gate = GATE * sdt, drift = mu * dt
    cdef Py_ssize_t j, k, a, i
    cdef int64_t idx
    cdef uint64_t stream
    cdef double sgn, z, lg, X, Xn, ua, ub, dd, di, y0, y1, mx, mn, lump
    cdef bint have_pair, near_up, near_lo
    cdef double z_next = 0.0, u_pair0 = 0.5, u_pair1 = 0.5, rad, ang
    cdef uint32_t c[4]
    cdef double* st = <double*>malloc(ns * nx * 6 * sizeof(double))
    if st == NULL:
        raise MemoryError()
    cdef double* xs = st
    cdef double* dv = st + ns * nx
    cdef double* ij = st + 2 * ns * nx
    cdef double* pn = st + 3 * ns * nx
    cdef double* dsum = st + 4 * ns * nx
    cdef double* isum = st + 5 * ns * nx
    try:
        with nogil:
            for j in range(n_paths):
                idx = offset + j
                if anti:
                    stream = <uint64_t>(idx >> 1)
                    sgn = -1.0 if (idx & 1) else 1.0
                else:
                    stream = <uint64_t>idx
                    sgn = 1.0
                for a in range(ns):
                    for i in range(nx):
                        X = x0v[i]
                        lump = fmax(X - up[a, 0], 0.0)
                        xs[a * nx + i] = X - lump
                        dsum[a * nx + i] = lump
                        dv[a * nx + i] = fw[0] * lump
                        ij[a * nx + i] = 0.0
                        pn[a * nx + i] = 0.0
                        isum[a * nx + i] = 0.0
                for k in range(n_steps):
                    # one Philox block serves two steps: cos for even, sin for odd
                    if k % 2 == 0:
                        c[0] = <uint32_t>(k >> 1); c[1] = <uint32_t>stream
                        c[2] = <uint32_t>(stream >> 32); c[3] = 0
                        _philox(c, k0, k1)
                        rad = sqrt(-2.0 * log(_u53(c[0], c[1])))
                        ang = TWO_PI * ((<double>c[2] + 0.5) * INV_2_32)
                        z = sgn * rad * cos(ang)
                        z_next = sgn * rad * sin(ang)
                        have_pair = False
                    else:
                        z = z_next
                    lg = 1.0
                    for a in range(ns):
                        ua = up[a, k]
                        ub = up[a, k + 1]
                        for i in range(nx):
                            X = xs[a * nx + i]
                            pn[a * nx + i] += pw[k] * fmax(X - lev[k], 0.0)
                            Xn = X + (drift + sdt * z)
                            dd = 0.0
                            di = 0.0
                            if code == 1:
                                near_up = fmax(X - ua, Xn - ub) > -gate
                                near_lo = fmin(X, Xn) < gate
                                if near_up and near_lo:
                                    dd = fmax(Xn - ub, 0.0)
                                    Xn = Xn - dd
                                    di = fmax(-Xn, 0.0)
                                    Xn = Xn + di
                                elif near_up or near_lo:
                                    if lg > 0.0:
                                        if not have_pair:
                                            c[0] = <uint32_t>(k >> 1); c[1] = <uint32_t>stream
                                            c[2] = <uint32_t>(stream >> 32); c[3] = 1
                                            _philox(c, k0, k1)
                                            u_pair0 = _u53(c[0], c[1])
                                            u_pair1 = _u53(c[2], c[3])
                                            have_pair = True
                                        lg = log(u_pair0 if k % 2 == 0 else u_pair1)
                                    if near_up:
                                        y0 = X - ua
                                        y1 = Xn - ub
                                        mx = 0.5 * (y0 + y1 + sqrt((y1 - y0) * (y1 - y0) - two_var * lg))
                                        dd = fmax(mx, 0.0)
                                        Xn = Xn - dd
                                    else:
                                        mn = 0.5 * (X + Xn - sqrt((Xn - X) * (Xn - X) - two_var * lg))
                                        di = fmax(-mn, 0.0)
                                        Xn = Xn + di
                                Xn = fmin(fmax(Xn, 0.0), fmax(ub, 0.0))
                            else:
                                dd = fmax(Xn - ub, 0.0)
                                Xn = Xn - dd
                                di = fmax(-Xn, 0.0)
                                Xn = Xn + di
                            dv[a * nx + i] += fw[k] * dd
                            ij[a * nx + i] += mw[k] * di
                            dsum[a * nx + i] += dd
                            isum[a * nx + i] += di
                            xs[a * nx + i] = Xn
                for a in range(ns):
                    for i in range(nx):
                        X = xs[a * nx + i]
                        pn[a * nx + i] += pw[n_steps] * fmax(X - lev[n_steps], 0.0)
                        div[j, a, i] = dv[a * nx + i]
                        inj[j, a, i] = ij[a * nx + i]
                        pen[j, a, i] = pn[a * nx + i]
                        xT[j, a, i] = X
                        dT[j, a, i] = dsum[a * nx + i]
                        iT[j, a, i] = isum[a * nx + i]
    finally:
        free(st)
    return out
