# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``_pykernels`` mirrors every function here."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, lgamma, pow, floor, sqrt, fabs, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline double _log_term(Py_ssize_t j, double c, double shape,
                             const double* table, Py_ssize_t table_len) noexcept nogil:
    if j < table_len:
        return j * c - table[j]
    return j * c - lgamma(j + 1.0) - lgamma(j * shape)


def log_a_series(const double[::1] y, double phi, double p,
                 double log_rel_tol, Py_ssize_t max_terms):
    """ln a(y, phi, p) for strictly positive ``y``.

    Returns ``(out, failed_index)``; ``failed_index`` is -1 on success,
    otherwise the first row whose series hit ``max_terms``.
    """
    cdef Py_ssize_t n = y.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double shape = (2.0 - p) / (p - 1.0)
    cdef double c0 = -(1.0 + shape) * log(phi) - log(2.0 - p) - shape * log(p - 1.0)
    cdef double lam_scale = 1.0 / (phi * (2.0 - p))
    cdef Py_ssize_t i, j, jmode, n_terms, table_len
    cdef double c, ref, s, lt, jm_real, max_jmode = 1.0
    cdef double* table
    cdef Py_ssize_t failed = -1

    for i in range(n):
        jm_real = pow(y[i], 2.0 - p) * lam_scale
        if jm_real > max_jmode:
            max_jmode = jm_real
    table_len = <Py_ssize_t>(max_jmode + 12.0 * sqrt(max_jmode) + 64.0)
    if table_len > 4 * max_terms + 64:
        table_len = 4 * max_terms + 64
    table = <double*>malloc(table_len * sizeof(double))
    if table == NULL:
        raise MemoryError()
    try:
        with nogil:
            table[0] = 0.0
            for j in range(1, table_len):
                table[j] = lgamma(j + 1.0) + lgamma(j * shape)
            for i in range(n):
                c = shape * log(y[i]) + c0
                jm_real = floor(pow(y[i], 2.0 - p) * lam_scale + 0.5)
                jmode = <Py_ssize_t>jm_real
                if jmode < 1:
                    jmode = 1
                ref = _log_term(jmode, c, shape, table, table_len)
                s = 1.0
                n_terms = 1
                j = jmode + 1
                while True:
                    lt = _log_term(j, c, shape, table, table_len)
                    if lt > ref:
                        s = s * exp(ref - lt) + 1.0
                        ref = lt
                    else:
                        if lt - ref < log_rel_tol:
                            break
                        s += exp(lt - ref)
                    j += 1
                    n_terms += 1
                    if n_terms > max_terms:
                        break
                j = jmode - 1
                while j >= 1 and n_terms <= max_terms:
                    lt = _log_term(j, c, shape, table, table_len)
                    if lt > ref:
                        s = s * exp(ref - lt) + 1.0
                        ref = lt
                    else:
                        if lt - ref < log_rel_tol:
                            break
                        s += exp(lt - ref)
                    j -= 1
                    n_terms += 1
                if n_terms > max_terms:
                    failed = i
                    break
                out[i] = ref + log(s) - log(y[i])
    finally:
        free(table)
    return out_arr, failed


def scan_level(const double[:, ::1] xt, const cnp.intp_t[:, ::1] order,
               const cnp.intp_t[::1] node_of, const double[::1] g,
               const double[::1] h, const double[::1] node_g,
               const double[::1] node_h, const cnp.intp_t[::1] node_n,
               double lam, Py_ssize_t min_leaf, double tie_rtol):
    """Best split per active node over all features.

    ``xt`` is the feature matrix transposed (features x rows) and ``order``
    the per-feature ascending argsort. Rows whose ``node_of`` is negative
    are skipped. Within a feature the first maximum (lowest threshold)
    wins. Across features a later feature replaces the incumbent only if
    its gain is larger by more than ``tie_rtol * (|incumbent| + parent)``,
    where ``parent`` is the node's G^2 / (H + lam); identical partitions
    reached through different features therefore keep the lowest feature
    even when the running sums round differently.
    """
    cdef Py_ssize_t n_feat = xt.shape[0]
    cdef Py_ssize_t n_rows = xt.shape[1]
    cdef Py_ssize_t m = node_g.shape[0]
    best_gain_arr = np.full(m, -np.inf)
    best_feat_arr = np.full(m, -1, dtype=np.intp)
    best_thr_arr = np.zeros(m)
    cdef double[::1] best_gain = best_gain_arr
    cdef cnp.intp_t[::1] best_feat = best_feat_arr
    cdef double[::1] best_thr = best_thr_arr
    gl_arr = np.empty(m)
    hl_arr = np.empty(m)
    last_arr = np.empty(m)
    nl_arr = np.empty(m, dtype=np.intp)
    parent_arr = np.empty(m)
    cdef double[::1] gl = gl_arr
    cdef double[::1] hl = hl_arr
    cdef double[::1] last = last_arr
    cdef cnp.intp_t[::1] nl = nl_arr
    cdef double[::1] parent = parent_arr
    fgain_arr = np.empty(m)
    fthr_arr = np.empty(m)
    cdef double[::1] fgain = fgain_arr
    cdef double[::1] fthr = fthr_arr
    cdef Py_ssize_t f, k, r, node
    cdef double v, gain, gr, hr, thr

    with nogil:
        for node in range(m):
            parent[node] = node_g[node] * node_g[node] / (node_h[node] + lam)
        for f in range(n_feat):
            for node in range(m):
                gl[node] = 0.0
                hl[node] = 0.0
                nl[node] = 0
                fgain[node] = -INFINITY
            for k in range(n_rows):
                r = order[f, k]
                node = node_of[r]
                if node < 0:
                    continue
                v = xt[f, r]
                if nl[node] > 0 and v > last[node]:
                    if nl[node] >= min_leaf and node_n[node] - nl[node] >= min_leaf:
                        gr = node_g[node] - gl[node]
                        hr = node_h[node] - hl[node]
                        gain = 0.5 * (gl[node] * gl[node] / (hl[node] + lam)
                                      + gr * gr / (hr + lam) - parent[node])
                        if gain > fgain[node]:
                            thr = last[node] + 0.5 * (v - last[node])
                            if thr >= v:
                                thr = last[node]
                            fgain[node] = gain
                            fthr[node] = thr
                gl[node] += g[r]
                hl[node] += h[r]
                nl[node] += 1
                last[node] = v
            # a later feature must win by more than rounding noise
            for node in range(m):
                if fgain[node] == -INFINITY:
                    continue
                if best_gain[node] == -INFINITY or fgain[node] - best_gain[node] > \
                        tie_rtol * (fabs(best_gain[node]) + parent[node]):
                    best_gain[node] = fgain[node]
                    best_feat[node] = f
                    best_thr[node] = fthr[node]
    return best_gain_arr, best_feat_arr, best_thr_arr
