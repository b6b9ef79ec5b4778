"""Exact exponentials of 2x2 constant generators and sequential chaining.

Shared by the Krein and Dirac propagators.  Every function is vectorized:
the four matrix entries are arrays that broadcast against each other and
against the step length.
"""

from __future__ import annotations

import numpy as np

# |delta * t| below this switches cosh / sinhc to their Taylor series
SERIES_THRESHOLD = 1e-8

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(4)


def expm2(m00, m01, m10, m11, t):
    """Return the entries (T00, T01, T10, T11) of exp(M t).

    Uses exp(M t) = exp(tr M t / 2) [cosh(d t) I + sinh(d t)/d N] with
    N = M - tr M / 2 and d**2 = -det N.  Both cosh(d t) and sinh(d t)/d are
    even in d, so the branch of the square root is irrelevant; the
    eigenvalues of M are tr M / 2 +- d.
    """
    m00, m01, m10, m11, t = np.broadcast_arrays(
        *(np.asarray(x, dtype=complex) for x in (m00, m01, m10, m11, t))
    )
    half_tr = 0.5 * (m00 + m11)
    n00 = m00 - half_tr
    d2 = n00 * n00 + m01 * m10
    x2 = d2 * t * t
    small = np.abs(x2) < SERIES_THRESHOLD**2
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.sqrt(d2)
        x = d * t
        ch = np.where(small, 1.0 + x2 / 2.0 + x2 * x2 / 24.0, np.cosh(x))
        sh = np.where(small, t * (1.0 + x2 / 6.0 + x2 * x2 / 120.0), np.sinh(x) / d)
    pref = np.exp(half_tr * t)
    return (
        pref * (ch + sh * n00),
        pref * (sh * m01),
        pref * (sh * m10),
        pref * (ch - sh * n00),
    )


def chain(t00, t01, t10, t11, u0, w0):
    """Apply step transfers in order; return states before and after every step.

    ``t**`` have shape (K, ...) and ``u0``, ``w0`` shape (...).  The result has
    shape (K + 1, ...) for each component.
    """
    k = t00.shape[0]
    tail = np.broadcast_shapes(t00.shape[1:], np.shape(u0))
    u = np.empty((k + 1,) + tail, dtype=complex)
    w = np.empty_like(u)
    u[0] = u0
    w[0] = w0
    if int(np.prod(tail, dtype=int)) == 1:
        # scalar fast path; numpy call overhead dominates otherwise
        a = t00.reshape(k).tolist()
        b = t01.reshape(k).tolist()
        c = t10.reshape(k).tolist()
        e = t11.reshape(k).tolist()
        uu = complex(np.ravel(u0)[0])
        ww = complex(np.ravel(w0)[0])
        us = [uu]
        ws = [ww]
        for i in range(k):
            uu, ww = a[i] * uu + b[i] * ww, c[i] * uu + e[i] * ww
            us.append(uu)
            ws.append(ww)
        u[:] = np.asarray(us).reshape(u.shape)
        w[:] = np.asarray(ws).reshape(w.shape)
        return u, w
    for i in range(k):
        u[i + 1] = t00[i] * u[i] + t01[i] * w[i]
        w[i + 1] = t10[i] * u[i] + t11[i] * w[i]
    return u, w
