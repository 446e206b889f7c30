"""Small quadrature helpers shared across modules."""
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


@lru_cache(maxsize=64)
def _leggauss(order):
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_rule(a, b, order=20, panels=1, breaks=()):
    """Composite Gauss-Legendre rule on [a, b].

    The interval is first split at the interior points of ``breaks`` and each
    piece is divided into ``panels`` equal panels.
    """
    if b <= a:
        return np.empty(0), np.empty(0)
    pts = sorted({float(a), float(b), *[float(t) for t in breaks if a < t < b]})
    gx, gw = _leggauss(order)
    xs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs.append((mid[:, None] + half[:, None] * gx).ravel())
        ws.append((half[:, None] * gw).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def gl_rule_width(a, b, width, order=20, breaks=()):
    """Composite rule whose panels are at most ``width`` long."""
    pts = sorted({float(a), float(b), *[float(t) for t in breaks if a < t < b]})
    xs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        k = max(1, int(np.ceil((hi - lo) / width)))
        x, w = gl_rule(lo, hi, order, k)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)
