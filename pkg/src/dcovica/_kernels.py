"""Compiled inner loops.

All kernels run serially with a fixed summation order, so repeated calls
return bit-identical results. They release the GIL, which lets replicate
loops run on a thread pool.
"""
import math

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)

# Terms kept in the Taylor expansion of the Gaussian CDF about a box centre.
# With box half-width h/2 the first neglected term is below 1e-16.
N_TERMS = 20
# Boxes further than this many bandwidths from the target contribute 0 or 1
# to double precision (Phi(-9.5) ~ 1e-21).
_REACH = 10


@_jit
def dcov_terms(x, y):
    """Return ``(sum_{i!=j} A B, a_dot_dot, b_dot_dot, sum_i a_i b_i)``.

    ``A`` and ``B`` are the Euclidean distance matrices of the rows of
    ``x`` and ``y``; ``a_i`` are row sums. Distances are never stored.
    """
    n = x.shape[0]
    px = x.shape[1]
    py = y.shape[1]
    ra = np.zeros(n)
    rb = np.zeros(n)
    sab = 0.0
    for i in range(n - 1):
        sa = 0.0
        sb = 0.0
        s = 0.0
        for j in range(i + 1, n):
            acc = 0.0
            for l in range(px):
                t = x[i, l] - x[j, l]
                acc += t * t
            a = math.sqrt(acc)
            acc = 0.0
            for l in range(py):
                t = y[i, l] - y[j, l]
                acc += t * t
            b = math.sqrt(acc)
            sa += a
            sb += b
            s += a * b
            ra[j] += a
            rb[j] += b
        ra[i] += sa
        rb[i] += sb
        sab += s
    rr = 0.0
    for i in range(n):
        rr += ra[i] * rb[i]
    return 2.0 * sab, ra.sum(), rb.sum(), rr


@_jit
def chain_terms(s, n_stages):
    """Distance-covariance sums for the chain ``(s_k, s_{k+1:})``.

    For every stage ``k < n_stages`` returns the same four sums as
    :func:`dcov_terms` with ``x = s[:, k]`` and ``y = s[:, k+1:]``, packed
    as rows of a ``(n_stages, 4)`` array. One pass over the pairs serves all
    stages: the block distance for stage ``k`` is the running tail norm of
    the row difference.
    """
    n, d = s.shape
    st = np.ascontiguousarray(s.T)
    ra = np.zeros((n_stages, n))
    rb = np.zeros((n_stages, n))
    sab = np.zeros(n_stages)
    tail = np.empty(n)
    for i in range(n - 1):
        for j in range(i + 1, n):
            tail[j] = 0.0
        for k in range(d - 1, 0, -1):
            xk = st[k]
            sik = xk[i]
            for j in range(i + 1, n):
                t = sik - xk[j]
                tail[j] += t * t
            stage = k - 1
            if stage >= n_stages:
                continue
            xk1 = st[stage]
            sik1 = xk1[i]
            rak = ra[stage]
            rbk = rb[stage]
            sa = 0.0
            sb = 0.0
            s_ab = 0.0
            for j in range(i + 1, n):
                a = abs(sik1 - xk1[j])
                b = math.sqrt(tail[j])
                sa += a
                sb += b
                s_ab += a * b
                rak[j] += a
                rbk[j] += b
            rak[i] += sa
            rbk[i] += sb
            sab[stage] += s_ab
    out = np.empty((n_stages, 4))
    for k in range(n_stages):
        rr = 0.0
        for i in range(n):
            rr += ra[k, i] * rb[k, i]
        out[k, 0] = 2.0 * sab[k]
        out[k, 1] = ra[k].sum()
        out[k, 2] = rb[k].sum()
        out[k, 3] = rr
    return out


@_jit
def smoothed_cdf_direct(x, h):
    """``F(x_i) = mean_j Phi((x_i - x_j) / h)`` by the double sum."""
    n = x.shape[0]
    f = np.full(n, 0.5)
    c = 1.0 / (h * math.sqrt(2.0))
    for i in range(n - 1):
        for j in range(i + 1, n):
            p = 0.5 * math.erfc((x[j] - x[i]) * c)
            f[i] += p
            f[j] += 1.0 - p
    return f / n


@_jit
def smoothed_cdf_series(x, h):
    """Same values as :func:`smoothed_cdf_direct` in ``O(n / h)`` work.

    Knots are binned into boxes of width ``h``. For a target ``u`` and a box
    centre ``c``, ``Phi(u - t)`` is expanded in ``t = (x_j - c) / h`` with
    ``|t| <= 1/2``, using ``d^m Phi = (-1)^(m-1) He_{m-1} phi``, so each box
    costs one CDF evaluation plus a short recurrence on its power sums.
    Boxes beyond ``_REACH`` bandwidths count as 0 or 1.
    """
    order = np.argsort(x)
    out = np.empty(x.shape[0])
    _series_sorted(x[order], order, h, out)
    return out


@_jit
def _series_sorted(xs, order, h, out):
    # xs sorted ascending; writes F(xs[i]) to out[order[i]].
    n = xs.shape[0]
    lo = xs[0]
    nb = int((xs[n - 1] - lo) / h) + 1
    mom = np.zeros((nb, N_TERMS))
    cnt = np.zeros(nb)
    for j in range(n):
        b = int((xs[j] - lo) / h)
        if b >= nb:
            b = nb - 1
        t = (xs[j] - (lo + (b + 0.5) * h)) / h
        p = 1.0
        for m in range(N_TERMS):
            mom[b, m] += p
            p *= t
        cnt[b] += 1.0
    below = np.zeros(nb + 1)
    for b in range(nb):
        below[b + 1] = below[b] + cnt[b]
    inv_fact = np.ones(N_TERMS)
    for m in range(1, N_TERMS):
        inv_fact[m] = inv_fact[m - 1] / m
    rs2 = 1.0 / math.sqrt(2.0)
    rsp = 1.0 / math.sqrt(2.0 * math.pi)
    for i in range(n):
        xi = xs[i]
        bi = int((xi - lo) / h)
        if bi >= nb:
            bi = nb - 1
        b0 = max(bi - _REACH, 0)
        b1 = min(bi + _REACH, nb - 1)
        acc = below[b0]
        for b in range(b0, b1 + 1):
            if cnt[b] == 0.0:
                continue
            u = (xi - (lo + (b + 0.5) * h)) / h
            total = 0.5 * math.erfc(-u * rs2) * mom[b, 0]
            phi = math.exp(-0.5 * u * u) * rsp
            he_prev = 0.0
            he = 1.0
            for m in range(1, N_TERMS):
                total -= mom[b, m] * he * phi * inv_fact[m]
                he_next = u * he - (m - 1) * he_prev
                he_prev = he
                he = he_next
            acc += total
        out[order[i]] = acc / n


@_jit
def _quantile_sorted(xs, q):
    # Linear interpolation between order statistics (numpy's default).
    pos = (xs.shape[0] - 1) * q
    i = int(math.floor(pos))
    if i >= xs.shape[0] - 1:
        return xs[xs.shape[0] - 1]
    return xs[i] + (pos - i) * (xs[i + 1] - xs[i])


@_jit
def silverman_sorted(xs):
    """Silverman bandwidth of a sorted column; ``-1.0`` if it is constant."""
    n = xs.shape[0]
    mean = 0.0
    for i in range(n):
        mean += xs[i]
    mean /= n
    ss = 0.0
    for i in range(n):
        ss += (xs[i] - mean) ** 2
    sd = math.sqrt(ss / (n - 1))
    scale = max(abs(xs[0]), abs(xs[n - 1]), 1.0)
    if not sd > 1e-14 * scale:
        return -1.0
    iqr = _quantile_sorted(xs, 0.75) - _quantile_sorted(xs, 0.25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


@_jit
def smoothed_pit_matrix(s, bandwidth_scale):
    """Column-wise smoothed PIT. Returns ``(out, bad)`` where ``bad`` is the
    first constant column or -1."""
    n, d = s.shape
    out = np.empty((n, d))
    col_out = np.empty(n)
    for k in range(d):
        col = s[:, k].copy()
        order = np.argsort(col)
        xs = col[order]
        h = silverman_sorted(xs)
        if h < 0:
            return out, k
        _series_sorted(xs, order, bandwidth_scale * h, col_out)
        out[:, k] = col_out
    return out, -1
