"""Hot inner loops, each with a numba implementation and a pure-numpy twin.

The numba path is used when numba imports cleanly and the environment
variable ``RYDSIM_NO_NUMBA`` is unset (or ``0``). The flag is read on every
dispatch so tests and benchmarks can flip it at runtime.
"""
import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def use_numba():
    flag = os.environ.get("RYDSIM_NO_NUMBA", "0").strip().lower()
    return HAVE_NUMBA and flag in ("", "0", "false", "no", "off")


def backend_name():
    return "numba" if use_numba() else "numpy"


# --------------------------------------------------------------------------
# constrained basis enumeration

@njit(cache=True)
def _nb_independent_sets(n_sites, lower_masks):
    configs = np.zeros(1, dtype=np.uint64)
    for i in range(n_sites):
        m = lower_masks[i]
        bit = np.uint64(1) << np.uint64(i)
        count = 0
        for k in range(configs.size):
            if configs[k] & m == 0:
                count += 1
        grown = np.empty(configs.size + count, dtype=np.uint64)
        grown[: configs.size] = configs
        pos = configs.size
        for k in range(configs.size):
            if configs[k] & m == 0:
                grown[pos] = configs[k] | bit
                pos += 1
        configs = grown
    return configs


def _np_independent_sets(n_sites, lower_masks):
    configs = np.zeros(1, dtype=np.uint64)
    for i in range(n_sites):
        ok = (configs & lower_masks[i]) == 0
        configs = np.concatenate([configs, configs[ok] | np.uint64(1 << i)])
    return configs


def independent_sets(n_sites, lower_masks):
    """All bit patterns with no neighbor pair set, in ascending numeric order.

    ``lower_masks[i]`` holds the neighbors of site ``i`` with smaller index.
    Appending ``config | 2**i`` after the existing list keeps it sorted, since
    every new entry exceeds every old one.
    """
    lower_masks = np.ascontiguousarray(lower_masks, dtype=np.uint64)
    if use_numba():
        return _nb_independent_sets(n_sites, lower_masks)
    return _np_independent_sets(n_sites, lower_masks)


# --------------------------------------------------------------------------
# diagonal pieces

@njit(cache=True)
def _nb_popcount(configs):
    out = np.empty(configs.size, dtype=np.int64)
    for k in range(configs.size):
        c = configs[k]
        n = 0
        while c:
            c &= c - np.uint64(1)
            n += 1
        out[k] = n
    return out


def popcount(configs):
    configs = np.ascontiguousarray(configs, dtype=np.uint64)
    if use_numba():
        return _nb_popcount(configs)
    return np.bitwise_count(configs).astype(np.int64)


@njit(cache=True)
def _nb_interaction_diagonal(configs, pi, pj, pv):
    out = np.zeros(configs.size, dtype=np.float64)
    one = np.uint64(1)
    for k in range(configs.size):
        c = configs[k]
        acc = 0.0
        for p in range(pi.size):
            if (c >> np.uint64(pi[p])) & (c >> np.uint64(pj[p])) & one:
                acc += pv[p]
        out[k] = acc
    return out


def _np_interaction_diagonal(configs, pi, pj, pv):
    out = np.zeros(configs.size, dtype=np.float64)
    one = np.uint64(1)
    for i, j, v in zip(pi, pj, pv):
        both = (configs >> np.uint64(i)) & (configs >> np.uint64(j)) & one
        out += v * both
    return out


def interaction_diagonal(configs, pair_i, pair_j, pair_v):
    """Sum of V_ij n_i n_j for every configuration."""
    configs = np.ascontiguousarray(configs, dtype=np.uint64)
    pi = np.ascontiguousarray(pair_i, dtype=np.int64)
    pj = np.ascontiguousarray(pair_j, dtype=np.int64)
    pv = np.ascontiguousarray(pair_v, dtype=np.float64)
    if use_numba():
        return _nb_interaction_diagonal(configs, pi, pj, pv)
    return _np_interaction_diagonal(configs, pi, pj, pv)


# --------------------------------------------------------------------------
# single-flip coupling structure

@njit(cache=True)
def _bsearch(configs, target, lo, hi):
    """Index of ``target`` within configs[lo:hi], or -1."""
    end = hi
    while lo < hi:
        mid = (lo + hi) >> 1
        if configs[mid] < target:
            lo = mid + 1
        else:
            hi = mid
    if lo < end and configs[lo] == target:
        return lo
    return -1


@njit(cache=True)
def _nb_raising_pairs(configs, n_sites, full):
    src = np.empty(configs.size * n_sites, dtype=np.int64)
    dst = np.empty(configs.size * n_sites, dtype=np.int64)
    n = 0
    for k in range(configs.size):
        c = configs[k]
        for i in range(n_sites):
            bit = np.uint64(1) << np.uint64(i)
            if c & bit:
                continue
            t = c | bit
            j = np.int64(t) if full else _bsearch(configs, t, k + 1, configs.size)
            if j >= 0:
                src[n] = k
                dst[n] = j
                n += 1
    return src[:n], dst[:n]


def _np_raising_pairs(configs, n_sites, full):
    srcs, dsts = [], []
    idx = np.arange(configs.size, dtype=np.int64)
    for i in range(n_sites):
        bit = np.uint64(1 << i)
        free = (configs & bit) == 0
        t = configs[free] | bit
        if full:
            j = t.astype(np.int64)
            keep = np.ones(j.size, dtype=bool)
        else:
            j = np.searchsorted(configs, t)
            j[j == configs.size] = 0
            keep = configs[j] == t
        srcs.append(idx[free][keep])
        dsts.append(j[keep].astype(np.int64))
    src = np.concatenate(srcs) if srcs else np.zeros(0, np.int64)
    dst = np.concatenate(dsts) if dsts else np.zeros(0, np.int64)
    order = np.lexsort((dst, src))
    return src[order], dst[order]


def raising_pairs(configs, n_sites, full):
    """(k, j) index pairs where configs[j] = configs[k] with one extra bit set."""
    configs = np.ascontiguousarray(configs, dtype=np.uint64)
    if use_numba():
        return _nb_raising_pairs(configs, n_sites, bool(full))
    return _np_raising_pairs(configs, n_sites, bool(full))


@njit(cache=True)
def _nb_apply(configs, n_sites, full, diag, x, c_raise, c_lower, out):
    n = configs.size
    for k in range(n):
        out[k] = diag[k] * x[k]
    # one vectorised search per site beats a scalar search per (row, site)
    for i in range(n_sites):
        bit = np.uint64(1) << np.uint64(i)
        t = configs ^ bit
        if full:
            j = t.astype(np.int64)
        else:
            j = np.searchsorted(configs, t)
        for k in range(n):
            jj = j[k]
            if not full and (jj == n or configs[jj] != t[k]):
                continue
            if configs[k] & bit:
                out[k] += c_raise * x[jj]
            else:
                out[k] += c_lower * x[jj]
    return out


def _np_apply(configs, n_sites, full, diag, x, c_raise, c_lower, out):
    out[:] = diag * x
    for i in range(n_sites):
        bit = np.uint64(1 << i)
        t = configs ^ bit
        if full:
            j = t.astype(np.int64)
            ok = slice(None)
        else:
            j = np.searchsorted(configs, t)
            j[j == configs.size] = 0
            ok = configs[j] == t
            j = j[ok]
        has = (configs & bit) != 0
        coef = np.where(has, c_raise, c_lower)
        if full:
            out += coef * x[j]
        else:
            out[ok] += coef[ok] * x[j]
    return out


def apply_matrix_free(configs, n_sites, full, diag, x, c_raise, c_lower, out=None):
    """out = H x computed row by row without a stored off-diagonal structure.

    ``c_raise`` is <raised|H|lowered>, ``c_lower`` its conjugate partner.
    """
    dtype = np.result_type(x.dtype, np.asarray(c_raise).dtype, np.float64)
    if out is None:
        out = np.empty(configs.size, dtype=dtype)
    if use_numba():
        cr = dtype.type(c_raise)
        cl = dtype.type(c_lower)
        return _nb_apply(configs, n_sites, bool(full), diag, x.astype(dtype, copy=False), cr, cl, out)
    return _np_apply(configs, n_sites, bool(full), diag, x, c_raise, c_lower, out)


# --------------------------------------------------------------------------
# shot estimators

@njit(cache=True)
def _nb_displacement_sums(cov, nx, ny):
    kx = 2 * nx - 1
    ky = 2 * ny - 1
    sums = np.zeros((ky, kx), dtype=np.float64)
    counts = np.zeros((ky, kx), dtype=np.int64)
    n = nx * ny
    for i in range(n):
        ri = i // nx
        ci = i % nx
        for j in range(n):
            rj = j // nx
            cj = j % nx
            l = rj - ri + ny - 1
            k = cj - ci + nx - 1
            sums[l, k] += cov[i, j]
            counts[l, k] += 1
    return sums, counts


def _np_displacement_sums(cov, nx, ny):
    c4 = cov.reshape(ny, nx, ny, nx)
    sums = np.zeros((2 * ny - 1, 2 * nx - 1))
    counts = np.zeros((2 * ny - 1, 2 * nx - 1), dtype=np.int64)
    for l in range(-(ny - 1), ny):
        r0, r1 = max(0, -l), min(ny, ny - l)
        rows = np.arange(r0, r1)
        for k in range(-(nx - 1), nx):
            c0, c1 = max(0, -k), min(nx, nx - k)
            cols = np.arange(c0, c1)
            block = c4[rows[:, None], cols[None, :], rows[:, None] + l, cols[None, :] + k]
            sums[l + ny - 1, k + nx - 1] = block.sum()
            counts[l + ny - 1, k + nx - 1] = block.size
    return sums, counts


def displacement_sums(cov, nx, ny):
    """Sum a site-site matrix over all ordered pairs sharing a grid displacement.

    Returns arrays indexed ``[dy + ny - 1, dx + nx - 1]``.
    """
    cov = np.ascontiguousarray(cov, dtype=np.float64)
    if use_numba():
        return _nb_displacement_sums(cov, nx, ny)
    return _np_displacement_sums(cov, nx, ny)


@njit(cache=True)
def _nb_conditional_counts(images, d, weights):
    s, ny, nx = images.shape
    num = 0.0
    den = 0.0
    for t in range(s):
        w = weights[t]
        for r in range(1, ny - 1):
            for c in range(1, nx - 1):
                if images[t, r - 1, c] or images[t, r + 1, c] or images[t, r, c - 1] or images[t, r, c + 1]:
                    continue
                nd = (images[t, r - 1, c - 1] + images[t, r - 1, c + 1]
                      + images[t, r + 1, c - 1] + images[t, r + 1, c + 1])
                if nd != d:
                    continue
                den += w
                if images[t, r, c]:
                    num += w
    return num, den


def _np_conditional_counts(images, d, weights):
    im = images.astype(np.int64)
    nn = im[:, :-2, 1:-1] + im[:, 2:, 1:-1] + im[:, 1:-1, :-2] + im[:, 1:-1, 2:]
    diag = im[:, :-2, :-2] + im[:, :-2, 2:] + im[:, 2:, :-2] + im[:, 2:, 2:]
    sel = (nn == 0) & (diag == d)
    centre = im[:, 1:-1, 1:-1]
    w = weights[:, None, None]
    den = float((sel * w).sum())
    num = float((sel * centre * w).sum())
    return num, den


def conditional_counts(images, d, weights=None):
    """Weighted (numerator, denominator) of the bulk conditional excitation density."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    if weights is None:
        weights = np.ones(images.shape[0])
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if use_numba():
        return _nb_conditional_counts(images, int(d), weights)
    return _np_conditional_counts(images, int(d), weights)
