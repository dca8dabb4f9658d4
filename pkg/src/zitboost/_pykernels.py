"""NumPy implementations of the compiled kernels in ``_kernels.pyx``.

Same signatures and return conventions; used when the extension is not
built or when ``ZITBOOST_PURE_PYTHON`` is set.
"""
import numpy as np
from scipy.special import gammaln

_CHUNK = 1 << 15
_BLOCK_CELLS = 1 << 22


def log_a_series(y, phi, p, log_rel_tol, max_terms):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(y.shape[0])
    shape = (2.0 - p) / (p - 1.0)
    c0 = -(1.0 + shape) * np.log(phi) - np.log(2.0 - p) - shape * np.log(p - 1.0)
    for start in range(0, y.shape[0], _CHUNK):
        stop = min(start + _CHUNK, y.shape[0])
        failed = _log_a_chunk(y[start:stop], out[start:stop], phi, p, shape, c0,
                              log_rel_tol, max_terms)
        if failed >= 0:
            return out, start + failed
    return out, -1


def _log_a_chunk(y, out, phi, p, shape, c0, log_rel_tol, max_terms):
    """Sum a symmetric window around the mode, doubling it until both ends
    fall below the tolerance.  As in the compiled loop, a row fails when
    more than ``max_terms`` terms lie within the tolerance; the smallest
    failing row index is returned (-1 if none)."""
    c = shape * np.log(y) + c0
    jmode = np.maximum(np.floor(y ** (2.0 - p) / (phi * (2.0 - p)) + 0.5), 1.0)
    failed = []
    pending = np.arange(y.shape[0])
    half = 8
    while pending.size:
        if half > max_terms:
            failed.append(int(pending[0]))
            break
        width = 2 * half + 1
        offsets = np.arange(-half, half + 1, dtype=np.float64)
        still = []
        # bound the (rows x window) block size
        for start in range(0, pending.size, max(1, _BLOCK_CELLS // width)):
            rows_in = pending[start:start + max(1, _BLOCK_CELLS // width)]
            j = jmode[rows_in, None] + offsets[None, :]
            valid = j >= 1.0
            jj = np.where(valid, j, 1.0)
            logw = jj * c[rows_in, None] - gammaln(jj + 1.0) - gammaln(jj * shape)
            logw = np.where(valid, logw, -np.inf)
            top = logw.max(axis=1)
            upper_ok = logw[:, -1] - top < log_rel_tol
            lower_ok = ~valid[:, 0] | (j[:, 0] <= 1.0) | (logw[:, 0] - top < log_rel_tol)
            done = upper_ok & lower_ok
            still.append(rows_in[~done])
            if not done.any():
                continue
            rows = rows_in[done]
            rel = logw[done] - top[done, None]
            too_many = (rel >= log_rel_tol).sum(axis=1) > max_terms
            if too_many.any():
                failed.append(int(rows[too_many][0]))
            s = np.exp(rel).sum(axis=1)
            out[rows] = top[done] + np.log(s) - np.log(y[rows])
        pending = np.concatenate(still)
        half *= 2
    return min(failed) if failed else -1


def _segment_cumsum(x, starts, counts):
    """Running sums restarted at every segment, accumulated left to right
    from zero so the rounding matches a sequential per-node loop."""
    out = np.empty_like(x)
    nonempty = np.flatnonzero(counts)
    size_class = np.ceil(np.log2(counts[nonempty])).astype(np.intp)
    for cls in np.unique(size_class):
        segs = nonempty[size_class == cls]
        width = int(counts[segs].max())
        cols = np.arange(width)
        mask = cols[None, :] < counts[segs, None]
        idx = starts[segs, None] + cols[None, :]
        block = np.zeros((segs.size, width))
        block[mask] = x[idx[mask]]
        np.cumsum(block, axis=1, out=block)
        out[idx[mask]] = block[mask]
    return out


def scan_level(xt, order, node_of, g, h, node_g, node_h, node_n, lam, min_leaf, tie_rtol):
    m = node_g.shape[0]
    best_gain = np.full(m, -np.inf)
    best_feat = np.full(m, -1, dtype=np.intp)
    best_thr = np.zeros(m)
    parent = node_g * node_g / (node_h + lam)
    for f in range(xt.shape[0]):
        rows = order[f]
        nodes = node_of[rows]
        keep = nodes >= 0
        rows = rows[keep]
        nodes = nodes[keep]
        if rows.size < 2:
            continue
        regroup = np.argsort(nodes, kind="stable")
        rows = rows[regroup]
        nodes = nodes[regroup]
        vals = xt[f, rows]
        counts = np.bincount(nodes, minlength=m)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        cg = _segment_cumsum(g[rows], starts, counts)
        ch = _segment_cumsum(h[rows], starts, counts)
        # candidate k: rows[:k+1] of the node go left
        k = np.arange(rows.size - 1)
        cand = (nodes[:-1] == nodes[1:]) & (vals[:-1] < vals[1:])
        nd = nodes[:-1]
        n_left = k - starts[nd] + 1
        cand &= (n_left >= min_leaf) & (node_n[nd] - n_left >= min_leaf)
        if not cand.any():
            continue
        k = k[cand]
        nd = nd[cand]
        gl = cg[k]
        hl = ch[k]
        gr = node_g[nd] - gl
        hr = node_h[nd] - hl
        gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[nd])
        # first maximum per node (lowest threshold on ties)
        node_max = np.full(m, -np.inf)
        np.maximum.at(node_max, nd, gain)
        is_max = gain == node_max[nd]
        first = np.full(m, -1, dtype=np.intp)
        hit = np.flatnonzero(is_max)[::-1]
        first[nd[hit]] = hit
        for node in np.flatnonzero(first >= 0):
            i = first[node]
            if best_gain[node] == -np.inf or gain[i] - best_gain[node] > \
                    tie_rtol * (abs(best_gain[node]) + parent[node]):
                lo = vals[k[i]]
                hi = vals[k[i] + 1]
                thr = lo + 0.5 * (hi - lo)
                if thr >= hi:
                    thr = lo
                best_gain[node] = gain[i]
                best_feat[node] = f
                best_thr[node] = thr
    return best_gain, best_feat, best_thr
