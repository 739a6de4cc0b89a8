"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``CROSSDYN_BACKEND``:

* ``auto`` (default) -- use numba if it imports, numpy otherwise
* ``numba``          -- require numba, fail loudly if missing
* ``numpy``          -- force the pure-numpy path

Both implementations of every kernel are importable (``*_numpy`` and, when
numba is present, ``*_numba``) so they can be benchmarked against each other;
the unsuffixed names bind to the active backend.

All kernels are deterministic for fixed inputs: the numba versions
parallelise only over independent output elements, never over reductions.
"""

import os

import numpy as np

_REQUESTED = os.environ.get("CROSSDYN_BACKEND", "auto").strip().lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"CROSSDYN_BACKEND must be 'auto', 'numba' or 'numpy', got {_REQUESTED!r}"
    )

NUMBA_AVAILABLE = False
if _REQUESTED != "numpy":
    try:
        from numba import njit, prange

        NUMBA_AVAILABLE = True
    except ImportError:
        if _REQUESTED == "numba":
            raise ImportError(
                "CROSSDYN_BACKEND=numba but numba is not installed"
            ) from None

USING_NUMBA = NUMBA_AVAILABLE

_CHUNK_ELEMENTS = 4_000_000  # soft cap on broadcast temporaries in the numpy path


# ---------------------------------------------------------------------------
# Gaussian kernel sums
#
# For each query x the kernels return the exponent shift m, the shifted sum
# s0 = sum_j exp(-(x - s_j)^2 / (2 h^2) - m) and the shifted weighted sum
# s1 = sum_j (s_j - x) exp(...). Shifting by the per-query max exponent keeps
# the ratio s1 / s0 (the log-density slope, times h^2) finite arbitrarily far
# from the samples, where the raw sums would underflow to 0/0.
# ---------------------------------------------------------------------------


def gauss_kernel_sums_numpy(queries, samples, h):
    """Shift-protected Gaussian kernel sums, chunked numpy broadcasting."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    nq = queries.size
    m = np.empty(nq)
    s0 = np.empty(nq)
    s1 = np.empty(nq)
    chunk = max(1, _CHUNK_ELEMENTS // max(samples.size, 1))
    for a in range(0, nq, chunk):
        b = min(a + chunk, nq)
        d = samples[None, :] - queries[a:b, None]
        e = -0.5 * (d / h) ** 2
        mm = e.max(axis=1)
        k = np.exp(e - mm[:, None])
        m[a:b] = mm
        s0[a:b] = k.sum(axis=1)
        s1[a:b] = (d * k).sum(axis=1)
    return m, s0, s1


if NUMBA_AVAILABLE:

    @njit(parallel=True, fastmath=True, cache=True)
    def gauss_kernel_sums_numba(queries, samples, h):
        nq = queries.size
        ns = samples.size
        m = np.empty(nq)
        s0 = np.empty(nq)
        s1 = np.empty(nq)
        inv_h = 1.0 / h
        for i in prange(nq):
            x = queries[i]
            mx = -np.inf
            for j in range(ns):
                u = (x - samples[j]) * inv_h
                e = -0.5 * u * u
                if e > mx:
                    mx = e
            a0 = 0.0
            a1 = 0.0
            for j in range(ns):
                d = samples[j] - x
                u = d * inv_h
                k = np.exp(-0.5 * u * u - mx)
                a0 += k
                a1 += d * k
            m[i] = mx
            s0[i] = a0
            s1[i] = a1
        return m, s0, s1


# ---------------------------------------------------------------------------
# Euler-Maruyama paths
#
# The drift is either looked up in a uniformly spaced table (linear
# interpolation, clamped to the edge segments so excursions beyond the table
# extrapolate linearly) or evaluated exactly as the KDE log-density slope at
# every step. The noise sequence is drawn by the caller so both backends
# consume an identical random stream.
# ---------------------------------------------------------------------------


def em_path_table_numpy(x0, drift, lo, inv_dx, dt, sigma_sqrt_dt, noise):
    """Sequential EM integration against a tabulated drift (python loop)."""
    n_nodes = drift.size
    table = drift.tolist()
    out = np.empty(noise.size + 1)
    out[0] = x0
    x = float(x0)
    lo = float(lo)
    inv_dx = float(inv_dx)
    dt = float(dt)
    sigma_sqrt_dt = float(sigma_sqrt_dt)
    top = n_nodes - 2
    noise_list = noise.tolist()
    for k, z in enumerate(noise_list):
        pos = (x - lo) * inv_dx
        idx = int(pos)
        if pos < 0.0:
            idx = 0
        elif idx > top:
            idx = top
        w = pos - idx
        f = (1.0 - w) * table[idx] + w * table[idx + 1]
        x = x + f * dt + sigma_sqrt_dt * z
        out[k + 1] = x
    return out


def em_path_exact_numpy(x0, samples, h, dt, sigma_sqrt_dt, noise):
    """Sequential EM integration, drift re-evaluated from the samples."""
    out = np.empty(noise.size + 1)
    out[0] = x0
    x = float(x0)
    inv_h2 = 1.0 / (h * h)
    for k in range(noise.size):
        d = samples - x
        e = -0.5 * d * d * inv_h2
        e -= e.max()
        kv = np.exp(e)
        f = (d * kv).sum() / kv.sum() * inv_h2
        x = x + f * dt + sigma_sqrt_dt * noise[k]
        out[k + 1] = x
    return out


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def em_path_table_numba(x0, drift, lo, inv_dx, dt, sigma_sqrt_dt, noise):
        n_nodes = drift.size
        out = np.empty(noise.size + 1)
        out[0] = x0
        x = x0
        top = n_nodes - 2
        for k in range(noise.size):
            pos = (x - lo) * inv_dx
            idx = int(np.floor(pos))
            if idx < 0:
                idx = 0
            elif idx > top:
                idx = top
            w = pos - idx
            f = (1.0 - w) * drift[idx] + w * drift[idx + 1]
            x = x + f * dt + sigma_sqrt_dt * noise[k]
            out[k + 1] = x
        return out

    @njit(cache=True, fastmath=True)
    def em_path_exact_numba(x0, samples, h, dt, sigma_sqrt_dt, noise):
        ns = samples.size
        out = np.empty(noise.size + 1)
        out[0] = x0
        x = x0
        inv_h = 1.0 / h
        inv_h2 = inv_h * inv_h
        for k in range(noise.size):
            mx = -np.inf
            for j in range(ns):
                u = (x - samples[j]) * inv_h
                e = -0.5 * u * u
                if e > mx:
                    mx = e
            a0 = 0.0
            a1 = 0.0
            for j in range(ns):
                d = samples[j] - x
                u = d * inv_h
                kv = np.exp(-0.5 * u * u - mx)
                a0 += kv
                a1 += d * kv
            f = a1 / a0 * inv_h2
            x = x + f * dt + sigma_sqrt_dt * noise[k]
            out[k + 1] = x
        return out


# ---------------------------------------------------------------------------
# Power iteration for the stationary row vector of a row-stochastic matrix
#
# The matrix is supplied as the CSR arrays of W^T so each output component is
# a gather over one sparse row. Iterates pi <- pi W, renormalised to sum 1,
# until the max-norm step difference falls below tol.
# ---------------------------------------------------------------------------


def power_iteration_numpy(indptr, indices, data, start, tol, max_iter):
    """Power iteration using scipy's CSR matvec."""
    from scipy.sparse import csr_matrix

    n = start.size
    wt = csr_matrix((data, indices, indptr), shape=(n, n))
    pi = start / start.sum()
    diff = np.inf
    for it in range(1, max_iter + 1):
        new = wt @ pi
        new /= new.sum()
        diff = np.abs(new - pi).max()
        pi = new
        if diff <= tol:
            return pi, it, diff
    return pi, max_iter, diff


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def power_iteration_numba(indptr, indices, data, start, tol, max_iter):
        n = start.size
        pi = start / start.sum()
        new = np.empty(n)
        diff = np.inf
        it = 0
        while it < max_iter:
            it += 1
            for i in range(n):
                acc = 0.0
                for jj in range(indptr[i], indptr[i + 1]):
                    acc += data[jj] * pi[indices[jj]]
                new[i] = acc
            s = 0.0
            for i in range(n):
                s += new[i]
            diff = 0.0
            for i in range(n):
                v = new[i] / s
                d = abs(v - pi[i])
                if d > diff:
                    diff = d
                pi[i] = v
            if diff <= tol:
                return pi, it, diff
        return pi, max_iter, diff


if USING_NUMBA:
    gauss_kernel_sums = gauss_kernel_sums_numba
    em_path_table = em_path_table_numba
    em_path_exact = em_path_exact_numba
    power_iteration = power_iteration_numba
else:
    gauss_kernel_sums = gauss_kernel_sums_numpy
    em_path_table = em_path_table_numpy
    em_path_exact = em_path_exact_numpy
    power_iteration = power_iteration_numpy
