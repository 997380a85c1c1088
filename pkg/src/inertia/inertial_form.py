"""Reduced dynamics on the manifold graph and exponential-tracking diagnostics.

On the graph ``v = p + M(p)`` the low modes obey the finite system

    p' + lam p = P_N (I1 + I2)(p + M(p)),

which is stepped here with the same exponential integrator as the full
transformed equation.  Tracking is measured by the graph distance
``|Q_N v - M(P_N v)|_{H1_0}``, a computable proxy for the distance to the
shadowing manifold trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.interpolate

from .burgers import SimConfig, Stepper, Trajectory, run, transformed_rhs
from .perron import ManifoldMap
from .spectral import SpectralField, eigenvalues, h1_norm


@dataclass(frozen=True)
class ReducedState:
    """Low-mode state ``p`` (length n_max, zero above N) at time ``t``."""

    p: np.ndarray
    t: float = 0.0

    @classmethod
    def from_low(cls, p, N: int, n_max: int, t: float = 0.0) -> "ReducedState":
        c = np.zeros(n_max)
        pc = np.asarray(getattr(p, "coeffs", p), dtype=float)
        c[:N] = pc[:N]
        return cls(c, t)

    def check(self, N: int):
        if np.any(self.p[N:] != 0):
            raise ValueError(f"reduced state has content above mode N={N}")


@dataclass(frozen=True)
class ReducedTrajectory:
    times: np.ndarray
    states: np.ndarray
    N: int

    def lift(self, manifold) -> np.ndarray:
        """Full states ``p(t) + M(p(t))``."""
        return np.array([p + manifold(p) for p in self.states])


class TabulatedManifold:
    """Manifold map interpolated multilinearly from a tensor grid over modes 1..N.

    Cheaper than a Perron solve per call; the interpolation error is the
    price and grows with the grid spacing.
    """

    def __init__(self, axes, values, N: int, n_max: int, nl=None):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        if len(self.axes) != N:
            raise ValueError(f"need one axis per low mode, got {len(self.axes)} for N={N}")
        self.N = N
        self.n_max = n_max
        self.nl = nl
        self._interp = scipy.interpolate.RegularGridInterpolator(self.axes, values, method="linear")

    @classmethod
    def from_map(cls, mmap: ManifoldMap, axes) -> "TabulatedManifold":
        N, n = mmap.cfg.N, mmap.n_max
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.empty((len(pts), n))
        for i, q in enumerate(pts):
            c = np.zeros(n)
            c[:N] = q
            vals[i] = mmap(c)
        return cls(axes, vals.reshape(mesh[0].shape + (n,)), N, n, mmap.nl)

    def __call__(self, p) -> np.ndarray:
        c = np.asarray(getattr(p, "coeffs", p), dtype=float)
        return self._interp(c[: self.N][None, :])[0]


def _manifold_parts(manifold, plan, nl):
    N = getattr(getattr(manifold, "cfg", None), "N", None) or getattr(manifold, "N", None)
    if N is None:
        N = plan.N_seq[0]
    nl = nl if nl is not None else getattr(manifold, "nl", None)
    if nl is None:
        raise ValueError("no nonlinearity: pass nl or a manifold evaluator that carries one")
    return N, nl


def integrate_reduced(p0: ReducedState, plan, cfg: SimConfig, manifold, nl=None) -> ReducedTrajectory:
    """Step the inertial form from ``p0`` with the exponential integrator.

    Parameters
    ----------
    p0 : ReducedState
    plan : GapPlan
        Supplies N when the evaluator does not.
    cfg : SimConfig
        Step, horizon and scheme; ``cfg.nonlinear = False`` gives heat decay.
    manifold : callable
        ``p -> M(p)`` (a :class:`~inertia.perron.ManifoldMap` or
        :class:`TabulatedManifold`); failures propagate.
    nl : nonlinearity handle, optional
        Defaults to ``manifold.nl``.
    """
    N, nl = _manifold_parts(manifold, plan, nl)
    p0.check(N)
    n = p0.p.size
    full = transformed_rhs(nl, cfg.nonlinear)

    def N_red(p):
        shape = np.shape(p)
        batch = np.atleast_2d(p)
        out = np.zeros_like(batch)
        for i, q in enumerate(batch):
            q = q.copy()
            q[N:] = 0.0
            out[i, :N] = full((q + manifold(q))[None, :])[0, :N]
        return out.reshape(shape)

    lam = eigenvalues(n)
    st = Stepper(lam, N_red, cfg.dt, cfg.scheme)
    t, s = run(p0.p, st, cfg.steps, cfg.save_every)
    return ReducedTrajectory(t + p0.t, s, N)


@dataclass(frozen=True)
class TrackingReport:
    """Graph distances along a transformed trajectory and the fitted decay rate."""

    times: np.ndarray
    graph_distances: np.ndarray
    fitted_alpha: float
    fit_r2: float
    N: int

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "fitted_alpha": self.fitted_alpha,
            "fit_r2": self.fit_r2,
            "initial_distance": float(self.graph_distances[0]),
            "final_distance": float(self.graph_distances[-1]),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def rows(self):
        return np.column_stack([self.times, self.graph_distances])


def fit_decay(times, dist):
    """Least-squares fit of ``log d = c - alpha t`` on the tail half; returns (alpha, r2)."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(dist, dtype=float)
    tail = slice(len(t) // 2, None)
    t, d = t[tail], d[tail]
    keep = d > 0
    t, y = t[keep], np.log(d[keep])
    if t.size < 3:
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(-slope), float(r2)


def graph_distance(v, manifold, N: int) -> float:
    v = np.asarray(getattr(v, "coeffs", v), dtype=float)
    p = v.copy()
    p[N:] = 0.0
    q = v - p
    return float(h1_norm(q - manifold(p)))


def tracking_test(v0: SpectralField, plan, cfg: SimConfig, manifold, nl=None) -> TrackingReport:
    """Integrate the transformed equation from ``v0`` and record graph distances.

    Distances are evaluated at the saved times (``cfg.save_every``); the
    decay rate is fitted on the second half of the record.
    """
    N, nl = _manifold_parts(manifold, plan, nl)
    v0c = np.asarray(getattr(v0, "coeffs", v0), dtype=float)
    st = Stepper(eigenvalues(v0c.size), transformed_rhs(nl, cfg.nonlinear), cfg.dt, cfg.scheme)
    t, s = run(v0c, st, cfg.steps, cfg.save_every)
    d = np.array([graph_distance(v, manifold, N) for v in s])
    alpha, r2 = fit_decay(t, d)
    return TrackingReport(t, d, alpha, r2, N)


def transformed_trajectory(v0, cfg: SimConfig, nl) -> Trajectory:
    """Transformed-equation trajectory with an explicit nonlinearity handle."""
    v0c = np.asarray(getattr(v0, "coeffs", v0), dtype=float)
    st = Stepper(eigenvalues(v0c.size), transformed_rhs(nl, cfg.nonlinear), cfg.dt, cfg.scheme)
    t, s = run(v0c, st, cfg.steps, cfg.save_every)
    return Trajectory(t, s)
