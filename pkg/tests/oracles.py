"""Independent reference computations used only by the test-suite.

Nothing in here imports from ``stochopt`` so that each oracle stays a
separate route to the quantity it checks.
"""
import itertools

import numpy as np


def tv1d_taut_string(y, lam):
    """Exact solution of ``min_x 0.5*||x - y||^2 + lam * sum |x[i+1] - x[i]|``.

    Direct (taut string) algorithm of Condat, transcribed from the
    reference C implementation.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    out = np.empty(n)
    if n == 0:
        return out
    k = k0 = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    kplus = kminus = 0
    twolam = 2.0 * lam
    minlam = -lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    out[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = y[k]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > k:
                        break
                return out
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                out[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = kplus = kminus = k0
            vmin = y[k]
            vmax = vmin + twolam
            umin, umax = lam, minlam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                out[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = kplus = kminus = k0
            vmax = y[k]
            vmin = vmax - twolam
            umin, umax = lam, minlam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= minlam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = minlam


def tv1d_kkt_residual(x, y, lam):
    """Largest violation of the optimality conditions of the 1D TV prox.

    With forward differences ``D`` the conditions read ``y - x = D^T u``,
    ``|u| <= lam`` and ``u_i = lam*sign(x[i+1]-x[i])`` wherever the jump is
    nonzero.  ``D^T u`` inverts to a cumulative sum.
    """
    r = np.asarray(y, float) - np.asarray(x, float)
    # (D^T u)_0 = -u_0, (D^T u)_i = u_{i-1} - u_i, (D^T u)_{n-1} = u_{n-2}
    u = -np.cumsum(r)[:-1]
    viol = [abs(np.sum(r)), max(0.0, np.max(np.abs(u)) - lam)]
    jumps = np.diff(x)
    big = np.abs(jumps) > 1e-9
    if np.any(big):
        viol.append(np.max(np.abs(u[big] - lam * np.sign(jumps[big]))))
    return max(viol)


def dense_matrix(apply, n):
    """Assemble the matrix of a linear map by applying it to basis vectors."""
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(np.asarray(apply(e), dtype=float).ravel())
    return np.stack(cols, axis=1)


def central_difference_gradient(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def rdp_bruteforce(x, shape, omega, eps, kappa=None):
    """Relative difference penalty by explicit double loop over voxels."""
    x = np.asarray(x, float).reshape(shape)
    kappa = np.ones(shape) if kappa is None else np.asarray(kappa, float).reshape(shape)
    total = 0.0
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=len(shape)) if any(o)]
    for idx in itertools.product(*[range(s) for s in shape]):
        for o in offsets:
            nb = tuple(i + d for i, d in zip(idx, o))
            if any(j < 0 or j >= s for j, s in zip(nb, shape)):
                continue
            w = 1.0 / np.sqrt(sum(d * d for d in o))
            a, b = x[idx], x[nb]
            total += w * kappa[idx] * kappa[nb] * (a - b) ** 2 / (a + b + omega * abs(a - b) + eps)
    return 0.5 * total


def herman_meyer_reference(n):
    """Herman-Meyer order generated by recursive interleaving on prime factors.

    For ``n = p * m`` with ``p`` the smallest prime factor, position
    ``q * p + r`` holds ``r * m + sub[q]``, where ``sub`` is the order
    for ``m``.
    """
    factors = []
    m, p = n, 2
    while m > 1:
        while m % p == 0:
            factors.append(p)
            m //= p
        p += 1

    def order(fs):
        if not fs:
            return [0]
        p, rest = fs[0], fs[1:]
        sub = order(rest)
        size = int(np.prod(rest)) if rest else 1
        return [r * size + s for s in sub for r in range(p)]

    return order(factors)
