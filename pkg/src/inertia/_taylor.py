"""Truncated univariate Taylor arithmetic.

A jet of order k is a list ``[f_0, f_1, ..., f_k]`` of arrays holding the
coefficients of ``f(v + s w) = sum_j f_j s^j + O(s^{k+1})``.  Coefficients
of different order may have different (broadcast-compatible) shapes, so one
base point can carry a whole batch of directions without being copied.

Linear operations act coefficient-wise (see :func:`apply`); only the
nonlinear primitives below need care.  Pushing ``v + s w`` through a
computation yields the directional derivative as ``f_1`` and
``f''(v)[w, w] / 2`` as ``f_2``.
"""

from __future__ import annotations

import numpy as np


def apply(fn, f):
    """Apply a linear map to every coefficient."""
    return [fn(c) for c in f]


def add(a, b):
    return [x + y for x, y in zip(a, b)]


def sub(a, b):
    return [x - y for x, y in zip(a, b)]


def scale(s, f):
    return [s * c for c in f]


def constant(x, order: int):
    x = np.asarray(x, dtype=float)
    return [x] + [np.zeros_like(x) for _ in range(order)]


def mul(a, b):
    """Cauchy product of two jets of equal order."""
    k = len(a)
    out = []
    for n in range(k):
        acc = a[0] * b[n]
        for i in range(1, n + 1):
            acc = acc + a[i] * b[n - i]
        out.append(acc)
    return out


def exp(f):
    """Exponential via ``n E_n = sum_{j=1..n} j f_j E_{n-j}``."""
    out = [np.exp(f[0])]
    for n in range(1, len(f)):
        acc = f[1] * out[n - 1]
        for j in range(2, n + 1):
            acc = acc + j * f[j] * out[n - j]
        out.append(acc / n)
    return out


def reciprocal(f):
    out = [1.0 / f[0]]
    for n in range(1, len(f)):
        acc = f[1] * out[n - 1]
        for j in range(2, n + 1):
            acc = acc + f[j] * out[n - j]
        out.append(-out[0] * acc)
    return out


def where(mask, a, b):
    """Coefficient-wise selection between two jets."""
    return [np.where(mask, x, y) for x, y in zip(a, b)]
