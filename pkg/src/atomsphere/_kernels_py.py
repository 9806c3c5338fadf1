"""Pure-numpy reference implementations of the propagation kernels.

Each routine loops over the radial grid and vectorizes over a batch of
independent channels (energies or partial waves), so the Python-level loop
count equals the number of grid points. The compiled module ``_kernels``
exposes the same functions with identical semantics.
"""

import numpy as np

RENORM_THRESHOLD = 1e150
RENORM_FACTOR = 1e-150


def numerov_wave(q, h, psi0, psi1):
    """Numerov solution of ψ'' = −q ψ on a uniform grid.

    ``q`` is sampled at every grid point; ``psi0`` and ``psi1`` seed the
    first two samples. When |ψ| exceeds ``RENORM_THRESHOLD`` the whole prefix
    is rescaled in place by a positive factor, so shape and signs are kept.
    """
    q = np.ascontiguousarray(q, dtype=np.float64)
    n = q.shape[0]
    f = 1.0 + (h * h / 12.0) * q
    psi = np.empty(n)
    psi[0] = psi0
    if n == 1:
        return psi
    psi[1] = psi1
    f_l = f.tolist()
    p_prev, p_cur = float(psi0), float(psi1)
    out = [p_prev, p_cur]
    for i in range(1, n - 1):
        p_next = ((12.0 - 10.0 * f_l[i]) * p_cur - f_l[i - 1] * p_prev) / f_l[i + 1]
        out.append(p_next)
        p_prev, p_cur = p_cur, p_next
        if abs(p_cur) > RENORM_THRESHOLD:
            out = [v * RENORM_FACTOR for v in out]
            p_prev *= RENORM_FACTOR
            p_cur *= RENORM_FACTOR
    psi[:] = out
    return psi


def numerov_nodes(q, h, psi1=1e-10):
    """Sign changes of the outward Numerov solution, one count per row of ``q``.

    Rows are independent channels (typically trial energies) on a common
    grid; the solution starts from ψ₀ = 0, ψ₁ = ``psi1``.
    """
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    nb, n = q.shape
    f = 1.0 + (h * h / 12.0) * q
    prev = np.zeros(nb)
    cur = np.full(nb, psi1)
    nodes = np.zeros(nb, dtype=np.int64)
    for i in range(1, n - 1):
        nxt = ((12.0 - 10.0 * f[:, i]) * cur - f[:, i - 1] * prev) / f[:, i + 1]
        nodes += (nxt * cur < 0) | ((cur == 0) & (nxt != 0))
        prev, cur = cur, nxt
        big = np.abs(cur) > RENORM_THRESHOLD
        if big.any():
            prev = np.where(big, prev * RENORM_FACTOR, prev)
            cur = np.where(big, cur * RENORM_FACTOR, cur)
    return nodes


def logderiv_propagate(vq, r0, h, k2, ll, y0):
    """Johnson log-derivative propagation across one sector.

    Solves ψ'' = −Q ψ with ``Q = k2 − ll/r² − vq(r)`` from ``r0`` to
    ``r0 + (len(vq)−1)·h`` (an even number of steps) for every channel in
    the ``k2``/``ll``/``y0`` arrays. Returns the log-derivative ψ'/ψ at the
    far end and, per channel, the number of nodes of ψ crossed (steps where
    1 + h·y < 0, i.e. y passed through a pole).
    """
    vq = np.asarray(vq, dtype=np.float64)
    k2 = np.asarray(k2, dtype=np.float64)
    ll = np.asarray(ll, dtype=np.float64)
    y = np.array(y0, dtype=np.float64, copy=True)
    n = vq.shape[0] - 1
    if n < 2 or n % 2:
        raise ValueError("log-derivative sector needs an even number of steps >= 2")
    h3 = h / 3.0
    h26 = h * h / 6.0
    has_l = ll != 0

    def centrifugal(r):
        return np.where(has_l, ll / np.where(has_l, r * r, 1.0), 0.0)

    nodes = np.zeros(y.shape, dtype=np.int64)
    qv = k2 - centrifugal(r0) - vq[0]
    y = y - h3 * qv
    for i in range(1, n + 1):
        r = r0 + i * h
        qv = k2 - centrifugal(r) - vq[i]
        if i % 2:
            u = qv / (1.0 + h26 * qv)
            w = 4.0
        else:
            u = qv
            w = 2.0 if i < n else 1.0
        den = 1.0 + h * y
        nodes += den < 0
        y = y / den - h3 * w * u
    return y, nodes
