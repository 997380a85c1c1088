"""Spectral gap algebra for the two-nonlinearity reduction.

For a sequence ``N_1 < ... < N_n`` and Lipschitz constants ``L1`` (the
regularity-reducing term, into L2) and ``L2`` (the regularity-preserving
term, into H1_0) the admissibility condition is, for each i,

    lam(N_i+1) - lam(N_i) > (i-1) lam(N_{i-1}) + (i+1) sqrt(lam(N_i+1)) L1 + (i+1) L2

with ``lam(N_0) = 0``.  A valid sequence fixes the common slack ``gamma`` and
the weight exponents ``theta_i = lam(N_i) + gamma + sqrt(lam(N_i+1)) L1 + L2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


def squares(N):
    """Dirichlet Laplacian eigenvalues on (0, pi)."""
    return np.asarray(N, dtype=float) ** 2


class GapConditionError(ValueError):
    """A proposed sequence violates the gap condition (or none exists)."""

    def __init__(self, message: str, index: int | None = None, margin: float | None = None):
        super().__init__(message)
        self.index = index
        self.margin = margin


def _lhs_rhs(i, N, N_prev, L1, L2, lam):
    lam_prev = 0.0 if N_prev is None else lam(N_prev)
    gap = lam(N + 1) - lam(N)
    rhs = (i - 1) * lam_prev + (i + 1) * np.sqrt(lam(N + 1)) * L1 + (i + 1) * L2
    return gap, rhs


def condition_margin(i: int, N, N_prev, L1: float, L2: float, lam=squares):
    """Left minus right side of the i-th gap inequality (positive means satisfied).

    ``N`` may be an integer array; ``N_prev`` is None for i = 1.
    """
    gap, rhs = _lhs_rhs(i, N, N_prev, L1, L2, lam)
    return gap - rhs


def strong_margin(i: int, n: int, N, N_prev, L1: float, L2: float, lam=squares):
    """Smallest slack of the two split inequalities used in the constructive argument.

    Each inequality is rescaled to ``L``-units so the two are comparable:
    ``(gap - (n-1) lam_prev) / (2 sqrt(lam(N+1)) (n+1)) - L1`` and
    ``(gap - (n-1) lam_prev) / (2 (n+1)) - L2``.
    """
    lam_prev = 0.0 if N_prev is None else lam(N_prev)
    num = lam(N + 1) - lam(N) - (n - 1) * lam_prev
    m1 = num / (2.0 * np.sqrt(lam(N + 1)) * (n + 1)) - L1
    m2 = num / (2.0 * (n + 1)) - L2
    return np.minimum(m1, m2)


@dataclass(frozen=True)
class GapPlan:
    """A validated admissible sequence with its weights.

    Attributes
    ----------
    n : int
        Smoothness order (length of ``N_seq``).
    L1, L2 : float
        Lipschitz constants of the two nonlinear terms.
    N_seq : tuple of int
        Strictly increasing cut dimensions.
    gamma : float
        Common slack, positive for valid plans.
    theta_seq : tuple of float
        Weight exponents, one per cut.
    margins : tuple of float
        Per-index margin of the gap inequality.
    window_margins : tuple of float
        Per-index ``lam(N_i+1) - slack * max_j (theta_i + j theta_{i-1})``; a
        diagnostic that may be negative when the slack factor exceeds the
        room left by a tiny ``gamma``.
    """

    n: int
    L1: float
    L2: float
    N_seq: tuple
    gamma: float
    theta_seq: tuple
    margins: tuple
    window_margins: tuple = ()
    lam: Callable = field(default=squares, repr=False, compare=False)

    def lam_at(self, N) -> float:
        return float(self.lam(N))

    def contraction_bound(self, i: int = 1) -> float:
        """(sqrt(lam(N_i+1)) L1 + L2) / min(theta_i - lam(N_i), lam(N_i+1) - theta_i)."""
        N = self.N_seq[i - 1]
        th = self.theta_seq[i - 1]
        num = np.sqrt(self.lam_at(N + 1)) * self.L1 + self.L2
        return float(num / min(th - self.lam_at(N), self.lam_at(N + 1) - th))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "L1": self.L1,
            "L2": self.L2,
            "N_seq": list(self.N_seq),
            "gamma": self.gamma,
            "theta_seq": list(self.theta_seq),
            "margins": list(self.margins),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def make_plan(
    n: int,
    L1: float,
    L2: float,
    N_seq: Sequence[int],
    lam=squares,
    window_slack: float = 1.01,
    strict_window: bool = False,
) -> GapPlan:
    """Validate ``N_seq`` and compute gamma and the weight exponents.

    Raises
    ------
    GapConditionError
        If the sequence is not strictly increasing, has the wrong length,
        or violates the gap inequality at some index (the error carries the
        1-based failing index and its margin).
    """
    N_seq = tuple(int(N) for N in N_seq)
    if n < 1:
        raise GapConditionError(f"smoothness order must be >= 1, got {n}")
    if len(N_seq) != n:
        raise GapConditionError(f"expected {n} cut dimensions, got {len(N_seq)}")
    if N_seq[0] < 1 or any(b <= a for a, b in zip(N_seq, N_seq[1:])):
        raise GapConditionError(f"cut dimensions must be positive and strictly increasing: {N_seq}")
    if L1 < 0 or L2 < 0:
        raise GapConditionError("Lipschitz constants must be non-negative")

    margins = []
    slacks = []
    for i, N in enumerate(N_seq, start=1):
        prev = N_seq[i - 2] if i > 1 else None
        m = float(condition_margin(i, N, prev, L1, L2, lam))
        if not m > 0:
            raise GapConditionError(
                f"gap condition fails at index {i} (N={N}): margin {m:.6g}", index=i, margin=m
            )
        margins.append(m)
        slacks.append(m / (i + 1))
    gamma = float(min(slacks))

    thetas = [
        float(lam(N) + gamma + np.sqrt(lam(N + 1)) * L1 + L2) for N in N_seq
    ]
    windows = []
    for i, N in enumerate(N_seq, start=1):
        th = thetas[i - 1]
        th_prev = thetas[i - 2] if i > 1 else 0.0
        top = max(th + j * th_prev for j in range(i))
        lo, hi = float(lam(N)), float(lam(N + 1))
        if not lo < th < hi or not top < hi:
            raise GapConditionError(f"weight window violated at index {i}", index=i)
        w = hi - window_slack * top
        if strict_window and w <= 0:
            raise GapConditionError(
                f"weight window with slack {window_slack} fails at index {i}", index=i, margin=w
            )
        windows.append(float(w))

    return GapPlan(
        n=n,
        L1=float(L1),
        L2=float(L2),
        N_seq=N_seq,
        gamma=gamma,
        theta_seq=tuple(thetas),
        margins=tuple(margins),
        window_margins=tuple(windows),
        lam=lam,
    )


def find_sequence(
    n: int,
    L1: float,
    L2: float,
    lam=squares,
    N_cap: int = 10_000,
    condition: str = "gap",
) -> GapPlan:
    """Greedy smallest admissible sequence ``N_1 < ... < N_n <= N_cap``.

    ``condition="gap"`` scans with the gap inequality itself; ``"strong"``
    uses the split inequalities of the constructive argument, which imply it.
    Because each inequality only gets harder as ``N_{i-1}`` grows, picking
    the smallest admissible index at every step gives the lexicographically
    smallest admissible sequence.

    Raises
    ------
    GapConditionError
        When no admissible sequence exists below ``N_cap``.
    """
    if condition not in ("gap", "strong"):
        raise ValueError(f"unknown condition {condition!r}")
    seq = []
    prev = None
    for i in range(1, n + 1):
        start = 1 if prev is None else prev + 1
        cand = np.arange(start, N_cap + 1)
        if cand.size == 0:
            raise GapConditionError(f"no sequence: index {i} exceeds N_cap={N_cap}", index=i)
        if condition == "gap":
            ok = condition_margin(i, cand, prev, L1, L2, lam) > 0
        else:
            ok = strong_margin(i, n, cand, prev, L1, L2, lam) > 0
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            raise GapConditionError(
                f"no sequence: no admissible N_{i} in [{start}, {N_cap}]; "
                "a larger K (smaller L1) is needed",
                index=i,
            )
        prev = int(cand[hits[0]])
        seq.append(prev)
    return make_plan(n, L1, L2, seq, lam)


def check_classical(n: int, L: float, lam=squares, N_cap: int = 10_000, C: float = 1.0):
    """Smallest N with ``(lam(N+1) - n lam(N)) / (sqrt(lam(N+1)) + sqrt(lam(N))) > C L``.

    Returns None when no such N <= N_cap exists.
    """
    N = np.arange(1, N_cap + 1)
    q = (lam(N + 1) - n * lam(N)) / (np.sqrt(lam(N + 1)) + np.sqrt(lam(N)))
    hits = np.flatnonzero(q > C * L)
    return int(N[hits[0]]) if hits.size else None


def check_kz(n: int, L: float, lam=squares, N_cap: int = 10_000, C1: float = 1.0, C2: float = 1.0):
    """Greedy sequence for the single-nonlinearity extension condition.

    Index i must satisfy
    ``(lam(N_i+1) - lam(N_i) - C1 lam(N_{i-1})) / (sqrt(lam(N_i+1)) + sqrt(lam(N_i))) > C2 L``.
    Returns the lexicographically smallest sequence or None.
    """
    seq = []
    prev = None
    for _ in range(n):
        start = 1 if prev is None else prev + 1
        N = np.arange(start, N_cap + 1)
        if N.size == 0:
            return None
        lp = 0.0 if prev is None else lam(prev)
        q = (lam(N + 1) - lam(N) - C1 * lp) / (np.sqrt(lam(N + 1)) + np.sqrt(lam(N)))
        hits = np.flatnonzero(q > C2 * L)
        if hits.size == 0:
            return None
        prev = int(N[hits[0]])
        seq.append(prev)
    return seq
