"""Compiled kernels for the dense nonsymmetric eigensolver.

Plain-loop implementations of Parlett-Reinsch balancing, Householder
reduction to upper Hessenberg form and the Francis double-shift QR
iteration on the Hessenberg matrix (eigenvalues only).
"""
import math

import numpy as np
from numba import njit

EPS = np.finfo(np.float64).eps
RADIX = 2.0


@njit(cache=True, nogil=True)
def balance(a):
    """Scale rows/columns by powers of two until row and column norms are comparable."""
    n = a.shape[0]
    sqrdx = RADIX * RADIX
    done = False
    while not done:
        done = True
        for i in range(n):
            r = 0.0
            c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / RADIX
                f = 1.0
                s = c + r
                while c < g:
                    f *= RADIX
                    c *= sqrdx
                g = r * RADIX
                while c > g:
                    f /= RADIX
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f
    return a


@njit(cache=True, nogil=True)
def hessenberg(a):
    """In-place orthogonal similarity reduction to upper Hessenberg form."""
    n = a.shape[0]
    v = np.empty(n)
    for k in range(n - 2):
        m = n - k - 1
        xnorm = 0.0
        for i in range(m):
            xnorm += a[k + 1 + i, k] ** 2
        xnorm = math.sqrt(xnorm)
        if xnorm == 0.0:
            continue
        alpha = -xnorm if a[k + 1, k] >= 0 else xnorm
        for i in range(m):
            v[i] = a[k + 1 + i, k]
        v[0] -= alpha
        vnorm = 0.0
        for i in range(m):
            vnorm += v[i] * v[i]
        vnorm = math.sqrt(vnorm)
        if vnorm == 0.0:
            continue
        for i in range(m):
            v[i] /= vnorm
        # left application on rows k+1.., columns k..
        for j in range(k, n):
            s = 0.0
            for i in range(m):
                s += v[i] * a[k + 1 + i, j]
            s *= 2.0
            for i in range(m):
                a[k + 1 + i, j] -= s * v[i]
        # right application on columns k+1..
        for i in range(n):
            s = 0.0
            for jj in range(m):
                s += a[i, k + 1 + jj] * v[jj]
            s *= 2.0
            for jj in range(m):
                a[i, k + 1 + jj] -= s * v[jj]
        for i in range(k + 2, n):
            a[i, k] = 0.0
    return a


@njit(cache=True, nogil=True)
def hqr(a, max_sweeps):
    """Eigenvalues of an upper Hessenberg matrix (overwritten).

    Returns ``(wr, wi, sweeps, ok)``.  Unconverged entries are NaN when
    ``ok`` is False.  Deflation: a subdiagonal entry is zeroed once it is
    below machine epsilon times the sum of its neighbouring diagonal moduli.
    """
    n = a.shape[0]
    wr = np.full(n, np.nan)
    wi = np.full(n, np.nan)
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i, j])
    nn = n - 1
    t = 0.0
    sweeps = 0
    p = q = r = s = w = x = y = z = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l > 0:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= EPS * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + (z if p >= 0 else -z)
                        wr[nn - 1] = wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = 0.0
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if sweeps >= max_sweeps:
                        return wr, wi, sweeps, False
                    if its > 0 and its % 10 == 0:
                        # exceptional shift
                        t += x
                        for i in range(nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    sweeps += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u <= EPS * v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    k = m
                    while k <= nn - 1:
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2, k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = math.sqrt(p * p + q * q + r * r)
                        if p < 0:
                            s = -s
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k != nn - 1:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k != nn - 1:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
                        k += 1
            if not (l < nn - 1):
                break
    return wr, wi, sweeps, True
