"""Taylor jets of the manifold map and their Whitney-type compatibility.

Differentiating the backward problem ``v = T(F(v)) + H p`` in p gives the
variational problems solved here along a stored manifold trajectory ``v``:

    first:   V' = T(F'(v) V') + H xi
    second:  W'' = T_b(F'(v) W'' + 2 F''(v)[V', W'] - F''(v)[V', V'])

with ``F = I1 + I2``.  ``V'`` is taken in the chart of cut ``N_a`` and ``W'``
in the chart of cut ``N_b`` (same base trajectory, since the base point
lies on the smaller manifold); the second-order source is symmetrised by
polarisation.  When both charts coincide the source reduces to
``F''[V', V']`` and ``W''`` is the exact second variation of the discrete map.

Because every step is an exact change of unknowns on the same time grid,
the weight exponent only changes the norm in which the Picard iteration is
monitored, not the converged trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.interpolate

from .diffeo import smooth_step
from .perron import (
    PerronConfig,
    PerronError,
    WeightedTrajectory,
    homogeneous,
    lam,
    linearized_source,
    min_horizon,
    picard,
    quadratic_source,
    ratios_of,
    solve_manifold_point,
    solve_modes,
)
from .spectral import SpectralField, h1_norm


class JetError(RuntimeError):
    """A variational solve failed or a weight window is violated."""


def _low(p, N, n_max):
    c = np.zeros(n_max)
    pc = np.asarray(getattr(p, "coeffs", p), dtype=float)
    c[:N] = pc[:N]
    return c


@dataclass(frozen=True)
class JetBundle:
    """Value and jets of the manifold map at one base point.

    ``jet1[k]`` is ``M'(p) e_{k+1}`` and ``jet2[k, l]`` is
    ``M''(p)[e_{k+1}, e_{l+1}]`` (both high-mode fields).
    """

    base_p: np.ndarray
    value: np.ndarray
    jet1: np.ndarray
    jet2: np.ndarray
    theta_weights: tuple

    def taylor(self, eta, order: int = 2) -> np.ndarray:
        """``sum_{k<=order} D^k M(p)[eta^k] / k!`` for a low-mode offset ``eta``."""
        d = self.jet1.shape[0]
        e = np.asarray(eta, dtype=float)[:d]
        out = self.value.copy()
        if order >= 1:
            out = out + e @ self.jet1
        if order >= 2:
            out = out + 0.5 * np.einsum("k,l,kln->n", e, e, self.jet2)
        return out

    def to_dict(self) -> dict:
        return {
            "base_p": self.base_p.tolist(),
            "value": self.value.tolist(),
            "jet1": self.jet1.tolist(),
            "jet2": self.jet2.tolist(),
            "theta_weights": list(self.theta_weights),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class JetSolver:
    """Variational solves along manifold trajectories for a gap plan.

    Parameters
    ----------
    plan : GapPlan
        Supplies the cut dimensions and weight exponents.
    nl : nonlinearity handle
        Object with ``evaluate``, ``derivative`` and ``second`` batch methods.
    n_max : int
        Number of modes of the states.
    charts : (int, int), optional
        1-based plan indices of the V chart and the W chart.  Defaults to
        ``(1, plan.n)``; equal indices give exact derivatives of one map.
    dt, fp_tol, max_iter :
        Perron discretisation shared by all charts.
    """

    def __init__(self, plan, nl, n_max: int, charts=None, dt: float = 1e-2, fp_tol: float = 1e-9, max_iter: int = 200):
        self.plan = plan
        self.nl = nl
        self.n_max = n_max
        ia, ib = (1, plan.n) if charts is None else charts
        if not (1 <= ia <= ib <= plan.n):
            raise ValueError(f"chart indices must satisfy 1 <= a <= b <= {plan.n}, got {(ia, ib)}")
        self.ia, self.ib = ia, ib
        Na, Nb = plan.N_seq[ia - 1], plan.N_seq[ib - 1]
        th_a, th_b = plan.theta_seq[ia - 1], plan.theta_seq[ib - 1]
        if Na >= n_max or Nb >= n_max:
            raise ValueError("cut dimensions must be below n_max")
        T = max(min_horizon(Na, th_a, fp_tol), min_horizon(Nb, th_b, fp_tol))
        T = dt * np.ceil(T / dt)
        kw = dict(T_horizon=float(T), dt=dt, fp_tol=fp_tol, max_iter=max_iter, L1=plan.L1, L2=plan.L2)
        self.cfg_a = PerronConfig(N=Na, theta=th_a, **kw)
        self.cfg_b = PerronConfig(N=Nb, theta=th_b, **kw)
        self.theta2 = self._second_weight(Nb, th_a, th_b)
        self._base = {}

    def _second_weight(self, Nb, th_a, th_b):
        th2 = th_a + th_b
        if self.ia != self.ib:
            if not (lam(Nb) < th2 < lam(Nb + 1)):
                raise JetError(f"second-order weight {th2} outside ({lam(Nb)}, {lam(Nb + 1)})")
            return th2
        # one chart: th_a + th_b may leave the window; the weight only sets the
        # monitoring norm, so fall back to the chart's own exponent
        return th2 if lam(Nb) < th2 < lam(Nb + 1) else th_b

    @property
    def theta_weights(self) -> tuple:
        return (self.cfg_a.theta, self.cfg_b.theta, self.theta2)

    # -- base trajectory -------------------------------------------------------

    def base(self, p):
        """Manifold trajectory through the V-chart point ``P_{N_a} p`` (cached)."""
        c = _low(p, self.cfg_a.N, self.n_max)
        key = c.tobytes()
        if key not in self._base:
            m, traj, rep = solve_manifold_point(SpectralField(c), self.cfg_a, self.nl)
            self._base[key] = (m.coeffs, traj, rep)
        return self._base[key]

    def value(self, p) -> np.ndarray:
        return self.base(p)[0]

    # -- variations --------------------------------------------------------------

    def _variation(self, traj, xi, cfg):
        """Weighted ``V'`` for direction ``xi`` in the chart of ``cfg``."""
        Hx = homogeneous(_low(xi, cfg.N, self.n_max), cfg).weighted
        # base trajectory re-expressed with this chart's weight
        base = WeightedTrajectory(traj.times, traj.weighted * np.exp((cfg.theta - traj.theta) * traj.times)[:, None], cfg.theta)

        def step(D):
            return solve_modes(linearized_source(self.nl, base, D), cfg.N, cfg.theta, cfg.dt) + Hx

        try:
            D, updates = picard(step, Hx, cfg.dt, cfg.fp_tol, cfg.max_iter, "first variation")
        except PerronError as e:
            raise JetError(str(e)) from e
        return D, ratios_of(updates)

    def first_variation(self, p, xi, chart: str = "a"):
        cfg = self.cfg_a if chart == "a" else self.cfg_b
        _, traj, _ = self.base(p)
        return self._variation(traj, xi, cfg)[0]

    def first_jet(self, p, xi) -> np.ndarray:
        """``M'(p) xi`` in the V chart."""
        D = self.first_variation(p, xi, "a")
        out = D[-1].copy()
        out[: self.cfg_a.N] = 0.0
        return out

    def second_jet(self, p, xi, eta) -> np.ndarray:
        """Symmetrised second jet ``W''(p)[xi, eta]`` at t = 0 (modes above N_b)."""
        _, traj, _ = self.base(p)
        ca, cb = self.cfg_a, self.cfg_b
        th2 = self.theta2
        t = traj.times
        base = WeightedTrajectory(t, traj.weighted, traj.theta)
        Va_x = self._variation(traj, xi, ca)[0]
        Va_y = self._variation(traj, eta, ca)[0]
        # re-weight: V' carries theta_a, W' carries theta_b; the quadratic
        # source then carries their sum, converted to the storage weight th2
        if self.ia == self.ib:
            src = quadratic_source(self.nl, base, Va_x, Va_y) * np.exp((th2 - 2 * ca.theta) * t)[:, None]
        else:
            Wb_x = self._variation(traj, xi, cb)[0]
            Wb_y = self._variation(traj, eta, cb)[0]
            s_xy = quadratic_source(self.nl, base, Va_x, Wb_y)
            s_yx = quadratic_source(self.nl, base, Va_y, Wb_x)
            s_vv = quadratic_source(self.nl, base, Va_x, Va_y)
            src = (s_xy + s_yx) * np.exp((th2 - ca.theta - cb.theta) * t)[:, None]
            src = src - s_vv * np.exp((th2 - 2 * ca.theta) * t)[:, None]
        forced = solve_modes(src, cb.N, th2, cb.dt)
        lin = WeightedTrajectory(t, traj.weighted * np.exp((th2 - traj.theta) * t)[:, None], th2)

        def step(D):
            return solve_modes(linearized_source(self.nl, lin, D), cb.N, th2, cb.dt) + forced

        try:
            D, _ = picard(step, forced, cb.dt, cb.fp_tol, cb.max_iter, "second variation")
        except PerronError as e:
            raise JetError(str(e)) from e
        out = D[-1].copy()
        out[: cb.N] = 0.0
        return out

    def bundle(self, p, directions=None) -> JetBundle:
        """Value, first jet and symmetric second jet along ``directions``.

        ``directions`` (rows are low-mode vectors) default to the basis
        ``e_1..e_N``; chart coordinates of a sub-box use a subset.
        """
        N = self.cfg_a.N
        basis = np.eye(self.n_max)[:N] if directions is None else np.atleast_2d(directions)
        N = basis.shape[0]
        value = self.value(p)
        j1 = np.array([self.first_jet(p, e) for e in basis])
        j2 = np.zeros((N, N, self.n_max))
        for k in range(N):
            for l in range(k, N):
                j2[k, l] = j2[l, k] = self.second_jet(p, basis[k], basis[l])
        return JetBundle(_low(p, self.cfg_a.N, self.n_max), value, j1, j2, self.theta_weights)

    # -- compatibility ---------------------------------------------------------

    def compatibility_residual(self, p, p1, order: int, level: int = 0, xi=None) -> float:
        """Whitney-type residual between jets at ``p1`` and shifted jets at ``p``.

        With ``eta = p1 - p`` this is the H1_0 norm of
        ``D^l M(p1)[xi^l] - sum_{k=0}^{order-l} D^{l+k} M(p)[xi^l, eta^k] / k!``
        at t = 0, for ``l = level <= order <= 2``.  At ``level = 0`` it is the
        Taylor remainder of order ``order``.
        """
        if not (0 <= level <= order <= 2):
            raise ValueError("need 0 <= level <= order <= 2")
        N = self.cfg_a.N
        eta = _low(p1, N, self.n_max) - _low(p, N, self.n_max)
        xi = eta if xi is None else _low(xi, N, self.n_max)

        def D(q, k, dirs):
            if k == 0:
                return self.value(q)
            if k == 1:
                return self.first_jet(q, dirs[0])
            return self.second_jet(q, dirs[0], dirs[1])

        lhs = D(p1, level, [xi] * level)
        rhs = np.zeros(self.n_max)
        for k in range(order - level + 1):
            dirs = [xi] * level + [eta] * k
            if not np.any(eta) and k > 0:
                continue
            rhs = rhs + D(p, level + k, dirs) / factorial(k)
        return float(h1_norm(lhs - rhs))


def first_jet(p, xi, plan, nl, n_max=None, **kw) -> np.ndarray:
    n_max = np.size(getattr(p, "coeffs", p)) if n_max is None else n_max
    return JetSolver(plan, nl, n_max, **kw).first_jet(p, xi)


def second_jet(p, xi, eta, plan, nl, n_max=None, **kw) -> np.ndarray:
    n_max = np.size(getattr(p, "coeffs", p)) if n_max is None else n_max
    return JetSolver(plan, nl, n_max, **kw).second_jet(p, xi, eta)


def compatibility_residual(p, p1, order, plan, nl, n_max=None, level=0, **kw) -> float:
    n_max = np.size(getattr(p, "coeffs", p)) if n_max is None else n_max
    return JetSolver(plan, nl, n_max, **kw).compatibility_residual(p, p1, order, level)


# ---------------------------------------------------------------------------
# blend extension


def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


_BUMP_MASS = scipy.integrate.quad(lambda s: float(_bump(s)), -1, 1, epsabs=0.0, epsrel=1e-13, limit=200)[0]


def mollifier_kernel(x, mu: float):
    """Normalised 1-D bump supported on ``|x| < mu``."""
    return _bump(np.asarray(x) / mu) / (_BUMP_MASS * mu)


def mollifier_nodes(mu: float, n: int = 96):
    """Gauss-Legendre nodes and kernel-weighted weights on ``[-mu, mu]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return mu * x, w * mu * mollifier_kernel(mu * x, mu)


@dataclass(frozen=True)
class ExtensionConfig:
    mu: float
    chart_dim: int = 1
    nodes: int = 96

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.chart_dim not in (1, 2):
            raise ValueError("chart_dim must be 1 or 2")


@dataclass(frozen=True)
class SampledChart:
    """Manifold values on a tensor grid over a low-mode box, plus jets at base points.

    Attributes
    ----------
    axes : tuple of 1-D arrays
        Grid coordinates along each chart direction.
    values : ndarray
        ``values[i, (j,) :]`` is M at the grid point (shape grid + (n_out,)).
    base_points : ndarray
        Chart coordinates of the base set, shape (B, dim).
    base_jets : list of JetBundle
        Jets at the base points, in chart coordinates (``jet1`` rows and
        ``jet2`` entries are derivatives along the chart axes).
    """

    axes: tuple
    values: np.ndarray
    base_points: np.ndarray
    base_jets: list

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> float:
        return max(float(np.max(np.diff(a))) for a in self.axes)


def blend_extension_lowdim(chart: SampledChart, ext: ExtensionConfig) -> Callable:
    """Blend of jet continuation near the base set and mollified chart elsewhere.

    ``M~(p) = (1 - rho(p)) M^(p) + rho(p) (S_mu M)(p)`` with ``rho`` vanishing
    within ``mu`` of the base set and equal to one beyond ``2 mu``; ``M^`` is
    the second-order jet polynomial from the nearest base point and ``S_mu``
    the normalised tensor-product bump of radius ``mu`` applied to a cubic
    interpolant of the sampled chart.

    Raises
    ------
    ValueError
        If the chart dimension disagrees or the grid spacing exceeds mu / 2.
    """
    if chart.dim != ext.chart_dim:
        raise ValueError(f"chart has dimension {chart.dim}, config says {ext.chart_dim}")
    if chart.spacing > ext.mu / 2 * (1 + 1e-12):
        raise ValueError(f"chart under-sampled: spacing {chart.spacing:.3g} > mu/2 = {ext.mu / 2:.3g}")
    mu = ext.mu
    if chart.dim == 1:
        spline = scipy.interpolate.CubicSpline(chart.axes[0], chart.values, axis=0, extrapolate=True)

        def interp(pts):
            return spline(pts[:, 0])
    else:
        rgi = scipy.interpolate.RegularGridInterpolator(
            chart.axes, chart.values, method="cubic", bounds_error=False, fill_value=None
        )

        def interp(pts):
            return rgi(pts)

    x, w = mollifier_nodes(mu, ext.nodes)
    if chart.dim == 1:
        offsets, weights = x[:, None], w
    else:
        X, Y = np.meshgrid(x, x, indexing="ij")
        offsets = np.stack([X.ravel(), Y.ravel()], axis=1)
        weights = np.outer(w, w).ravel()
    base = np.asarray(chart.base_points, dtype=float).reshape(-1, chart.dim)

    def mollified(pt):
        return weights @ interp(pt[None, :] + offsets)

    def evaluate(p):
        pt = np.atleast_1d(np.asarray(p, dtype=float))
        d = np.linalg.norm(base - pt, axis=1)
        k = int(np.argmin(d))
        rho = 1.0 - float(smooth_step((d[k] - mu) / mu))
        out = 0.0
        if rho < 1.0:
            out = (1.0 - rho) * chart.base_jets[k].taylor(pt - base[k])
        if rho > 0.0:
            out = out + rho * mollified(pt)
        return out

    evaluate.mu = mu
    return evaluate


def kernel_mass(ext: ExtensionConfig) -> float:
    """Quadrature of the tensor-product mollifier (should be 1)."""
    _, w = mollifier_nodes(ext.mu, ext.nodes)
    return float(np.sum(w) ** ext.chart_dim)
