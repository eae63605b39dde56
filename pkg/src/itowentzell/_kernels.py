"""Triangular row-contraction kernels.

Every accumulated field quantity has the form

    out[q] = sum_{i < k_q} W[i] . c(t_i, x_q)  +  f_q * W[k_q] . c(t_{k_q}, x_q)

where c is a batched coefficient (optionally also taking a per-row mark) and the
dot contracts the weight axis (length 1 for dt-weighted terms, m for Wiener
terms).  This is the O(N^2) inner loop of a pathwise verification.
"""

import numpy as np

from . import _backend

if _backend.HAVE_NUMBA:
    from numba import njit

    @njit(nogil=True)
    def _contract_tx_numba(fn, t, W, counts, fracs, qx, args, out):
        nq, n = qx.shape
        r = W.shape[1]
        s = out.shape[1]
        for q in range(nq):
            c0 = counts[q]
            k = c0 + 1 if fracs[q] > 0.0 else c0
            if k == 0:
                continue
            xs = np.empty((k, n))
            for i in range(k):
                xs[i, :] = qx[q]
            v = np.ascontiguousarray(fn(t[:k], xs, args)).reshape((k, r, s))
            for i in range(k):
                scale = 1.0 if i < c0 else fracs[q]
                for a in range(r):
                    wa = W[i, a] * scale
                    for b in range(s):
                        out[q, b] += v[i, a, b] * wa

    @njit(nogil=True)
    def _contract_txg_numba(fn, t, gam, W, counts, fracs, qx, args, out):
        nq, n = qx.shape
        r = W.shape[1]
        s = out.shape[1]
        for q in range(nq):
            c0 = counts[q]
            k = c0 + 1 if fracs[q] > 0.0 else c0
            if k == 0:
                continue
            xs = np.empty((k, n))
            for i in range(k):
                xs[i, :] = qx[q]
            v = np.ascontiguousarray(fn(t[:k], xs, gam[:k], args)).reshape((k, r, s))
            for i in range(k):
                scale = 1.0 if i < c0 else fracs[q]
                for a in range(r):
                    wa = W[i, a] * scale
                    for b in range(s):
                        out[q, b] += v[i, a, b] * wa


def _contract_numpy(fn, t, gam, W, counts, fracs, qx, args, out):
    nq, n = qx.shape
    r = W.shape[1]
    s = out.shape[1]
    for q in range(nq):
        c0 = counts[q]
        k = c0 + 1 if fracs[q] > 0.0 else c0
        if k == 0:
            continue
        xs = np.empty((k, n))
        xs[:] = qx[q]
        if gam is None:
            v = fn(t[:k], xs, args)
        else:
            v = fn(t[:k], xs, gam[:k], args)
        v = np.asarray(v, dtype=float).reshape(k, r, s)
        w = W[:k].copy()
        if k > c0:
            w[c0] *= fracs[q]
        out[q] += np.einsum("kab,ka->b", v, w)


def contract(fn, t, W, counts, fracs, qx, args, gam=None, *, contract_axis=False, backend=None):
    """Accumulate ``fn`` over the leading rows for each query point.

    ``W`` is ``(R,)`` for scalar row weights or ``(R, r)`` with ``contract_axis``
    set, in which case the first trailing axis of ``fn``'s output is contracted
    against it.  Returns an array of shape ``(nq, *S)``.
    """
    t = np.ascontiguousarray(t, dtype=float)
    qx = np.ascontiguousarray(qx, dtype=float)
    args = np.ascontiguousarray(args, dtype=float)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    fracs = np.ascontiguousarray(fracs, dtype=float)
    W = np.asarray(W, dtype=float)
    W2 = np.ascontiguousarray(W.reshape(W.shape[0], -1) if contract_axis else W.reshape(-1, 1))
    if gam is not None:
        gam = np.ascontiguousarray(gam, dtype=float)

    # probe the output shape on a single row
    py_fn = _backend.python_function(fn)
    probe_x = np.ascontiguousarray(qx[:1]) if len(qx) else np.zeros((1, qx.shape[1]))
    probe_t = t[:1] if len(t) else np.zeros(1)
    if gam is None:
        v0 = np.asarray(py_fn(probe_t, probe_x, args))
    else:
        v0 = np.asarray(py_fn(probe_t, probe_x, gam[:1] if len(gam) else np.zeros(1), args))
    tail = v0.shape[1:]
    if contract_axis:
        if not tail or tail[0] != W2.shape[1]:
            raise ValueError(f"coefficient output {v0.shape} does not match weights {W.shape}")
        tail = tail[1:]
    s = int(np.prod(tail, dtype=np.int64))
    nq = qx.shape[0]
    out = np.zeros((nq, s))
    if nq == 0:
        return out.reshape((0,) + tail)

    pairs = int(counts.sum()) + int(np.count_nonzero(fracs > 0))
    if backend is None:
        jit = _backend.use_numba([fn], pairs)
    else:
        jit = backend == "numba" and _backend.HAVE_NUMBA and _backend.is_jitted(fn)
    if jit:
        if gam is None:
            _contract_tx_numba(fn, t, W2, counts, fracs, qx, args, out)
        else:
            _contract_txg_numba(fn, t, gam, W2, counts, fracs, qx, args, out)
    else:
        _contract_numpy(py_fn, t, gam, W2, counts, fracs, qx, args, out)
    return out.reshape((nq,) + tail)
