"""Backward boundary-value (Lyapunov-Perron) construction of the manifold map.

For a cut dimension N and weight ``theta`` in ``(lam_N, lam_{N+1})`` the
manifold trajectory through a low-mode point p solves

    v = T_theta(I1(v) + I2(v)) + H p        on t in [-T_horizon, 0],

where ``T_theta`` integrates ``v' + lam v = h`` forward from ``-T_horizon``
on the modes above N and backward from ``v(0) = 0`` on modes 1..N, and
``(H p)(t) = sum_{n<=N} exp(-lam_n t) p_n e_n``.  The map is
``M(p) = Q_N v(0)``.

Trajectories are stored in weighted form ``W(t) = exp(theta t) v(t)``: the
backward growth of the low modes then never overflows and the weighted
norm is a plain sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .burgers import phi1, phi2
from .spectral import SpectralField, eigenvalues, h1_norm


class PerronError(RuntimeError):
    """The fixed-point iteration did not converge (numerical gap violation)."""


def lam(n):
    return np.asarray(n, dtype=float) ** 2


def min_horizon(N: int, theta: float, fp_tol: float) -> float:
    """Smallest horizon with ``exp(-(lam_{N+1} - theta) T) <= fp_tol``."""
    return float(-np.log(fp_tol) / (lam(N + 1) - theta))


@dataclass(frozen=True)
class PerronConfig:
    """Discretisation of the backward problem.

    ``L1, L2`` are optional Lipschitz constants; when given, ``bound`` is the
    contraction factor ``(sqrt(lam_{N+1}) L1 + L2) / min(theta - lam_N,
    lam_{N+1} - theta)`` that the iteration should respect.
    """

    N: int
    theta: float
    T_horizon: float
    dt: float
    fp_tol: float = 1e-9
    max_iter: int = 200
    L1: float | None = None
    L2: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not (lam(self.N) < self.theta < lam(self.N + 1)):
            raise ValueError(
                f"theta={self.theta} outside the spectral window ({lam(self.N)}, {lam(self.N + 1)})"
            )
        if not (self.dt > 0 and self.T_horizon > 0 and self.fp_tol > 0):
            raise ValueError("dt, T_horizon and fp_tol must be positive")
        tail = np.exp(-(lam(self.N + 1) - self.theta) * self.T_horizon)
        if not tail < self.fp_tol * (1 + 1e-9):
            raise ValueError(
                f"T_horizon={self.T_horizon} too short: tail factor {tail:.3g} exceeds fp_tol={self.fp_tol:.3g}"
            )

    @property
    def steps(self) -> int:
        return int(round(self.T_horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        J = self.steps
        return -self.dt * np.arange(J, -1, -1, dtype=float)

    @property
    def gap(self) -> float:
        return float(min(self.theta - lam(self.N), lam(self.N + 1) - self.theta))

    @property
    def bound(self) -> float | None:
        if self.L1 is None or self.L2 is None:
            return None
        return float((np.sqrt(lam(self.N + 1)) * self.L1 + self.L2) / self.gap)

    @classmethod
    def build(cls, N, theta, dt, fp_tol=1e-9, horizon_factor=1.0, **kw) -> "PerronConfig":
        """Config with the horizon rounded up to a whole number of steps."""
        T = horizon_factor * min_horizon(N, theta, fp_tol)
        T = dt * np.ceil(T / dt)
        return cls(N=N, theta=theta, T_horizon=float(T), dt=dt, fp_tol=fp_tol, **kw)

    @classmethod
    def from_plan(cls, plan, index: int = 1, dt: float = 1e-2, fp_tol: float = 1e-9, **kw):
        """Config for the ``index``-th cut of a gap plan, with its weight exponent."""
        N = plan.N_seq[index - 1]
        return cls.build(N, plan.theta_seq[index - 1], dt, fp_tol, L1=plan.L1, L2=plan.L2, **kw)

    @classmethod
    def midpoint(cls, N: int, dt: float = 1e-2, fp_tol: float = 1e-9, **kw):
        return cls.build(N, 0.5 * float(lam(N) + lam(N + 1)), dt, fp_tol, **kw)


@dataclass(frozen=True)
class WeightedTrajectory:
    """History on ``[-T, 0]`` stored as ``weighted[j] = exp(theta t_j) v(t_j)``."""

    times: np.ndarray
    weighted: np.ndarray
    theta: float

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def states(self) -> np.ndarray:
        return self.weighted * np.exp(-self.theta * self.times)[:, None]

    def log_norms(self) -> np.ndarray:
        """``log ||v(t_j)||_{H1_0}`` without forming the unweighted states."""
        with np.errstate(divide="ignore"):
            return np.log(h1_norm(self.weighted)) - self.theta * self.times

    def norm(self) -> float:
        """Weighted norm ``(sum_j dt ||W_j||^2_{H1_0})^{1/2}``."""
        return float(np.sqrt(self.dt * np.sum(h1_norm(self.weighted) ** 2)))

    def at_zero(self) -> np.ndarray:
        return self.weighted[-1]

    def same_grid(self, other: "WeightedTrajectory") -> bool:
        return (
            self.times.shape == other.times.shape
            and np.array_equal(self.times, other.times)
            and self.theta == other.theta
        )


def weighted_norm(W: np.ndarray, dt: float) -> float:
    return float(np.sqrt(dt * np.sum(h1_norm(W) ** 2)))


# ---------------------------------------------------------------------------
# linear solution operator


def solve_modes(H: np.ndarray, N: int, theta: float, dt: float, modes=None) -> np.ndarray:
    """Weighted solution of ``v' + lam v = h`` (``H = exp(theta t) h``).

    ``H`` has the time axis first and the mode axis last; ``modes`` lists
    the wavenumbers of the last axis (1..n by default).  Modes above N start
    from zero at the left end; modes 1..N vanish at t = 0.  The unweighted
    source is taken piecewise linear in time and integrated exactly, with
    the recurrences written directly for the weighted unknowns.
    """
    H = np.asarray(H, dtype=float)
    modes = np.arange(1, H.shape[-1] + 1) if modes is None else np.asarray(modes)
    lam_n = lam(modes)
    out = np.zeros_like(H)
    J = H.shape[0] - 1
    grow = np.exp(theta * dt)

    hi = modes > N
    if np.any(hi):
        z = -lam_n[hi] * dt
        E = np.exp(z) * grow
        A = dt * phi1(z)
        B = dt * phi2(z)
        Hh = H[..., hi]
        block = np.zeros_like(Hh)
        for j in range(J):
            block[j + 1] = E * block[j] + A * grow * Hh[j] + B * (Hh[j + 1] - grow * Hh[j])
        out[..., hi] = block

    lo = ~hi
    if np.any(lo):
        z = lam_n[lo] * dt
        E = np.exp(z) / grow
        A = dt * phi1(z)
        B = dt * (phi1(z) - phi2(z))
        Hl = H[..., lo]
        block = np.zeros_like(Hl)
        for j in range(J - 1, -1, -1):
            block[j] = E * block[j + 1] - A * Hl[j] - B * (Hl[j + 1] / grow - Hl[j])
        out[..., lo] = block
    return out


def apply_T_theta(h1: WeightedTrajectory, h2: WeightedTrajectory, cfg: PerronConfig) -> WeightedTrajectory:
    """Solution operator applied to the sum of an L2-channel and an H1-channel source."""
    if not h1.same_grid(h2):
        raise ValueError("source trajectories live on different grids")
    if h1.theta != cfg.theta or h1.times.size != cfg.steps + 1 or not np.isclose(h1.dt, cfg.dt):
        raise ValueError("source grid does not match the Perron configuration")
    W = solve_modes(h1.weighted + h2.weighted, cfg.N, cfg.theta, cfg.dt)
    return WeightedTrajectory(h1.times, W, cfg.theta)


def homogeneous(p: SpectralField, cfg: PerronConfig) -> WeightedTrajectory:
    """``(H p)(t) = sum_{n<=N} exp(-lam_n t) p_n e_n`` in weighted form."""
    c = np.asarray(getattr(p, "coeffs", p), dtype=float)
    if np.any(c[cfg.N :] != 0):
        raise ValueError(f"p has content above mode N={cfg.N}")
    t = cfg.times
    n = np.arange(1, c.size + 1)
    W = np.zeros((t.size, c.size))
    W[:, : cfg.N] = np.exp(np.outer(t, cfg.theta - lam(n[: cfg.N]))) * c[: cfg.N]
    return WeightedTrajectory(t, W, cfg.theta)


def operator_norm(cfg: PerronConfig, n_max: int, iters: int = 60, seed: int = 0) -> float:
    """Power-iteration estimate of ``||T_theta||`` from weighted L2 to weighted H1_0.

    The operator is diagonal in the modes, so each mode's discrete
    convolution matrix is assembled column by column and its largest
    singular value found by power iteration on ``T^t T``; the result is
    ``max_n n sigma_n``.
    """
    J1 = cfg.steps + 1
    eye = np.eye(J1)[:, :, None]
    best = 0.0
    rng = np.random.default_rng(seed)
    for n in range(1, n_max + 1):
        T = solve_modes(eye, cfg.N, cfg.theta, cfg.dt, modes=[n])[:, :, 0]  # T[j, k]: output j, source k
        x = rng.standard_normal(J1)
        s = 0.0
        for _ in range(iters):
            y = T.T @ (T @ x)
            s = np.linalg.norm(y)
            x = y / s
        best = max(best, n * np.sqrt(s))
    return float(best)


# ---------------------------------------------------------------------------
# nonlinearity handles


class ZeroNonlinearity:
    """Test hook: both nonlinear terms vanish."""

    support_radius = None

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        return np.zeros_like(v), np.zeros_like(v)

    def derivative(self, v, w):
        w = np.asarray(w, dtype=float)
        return np.zeros_like(w), np.zeros_like(w)

    def second(self, v, w1, w2=None):
        w1 = np.asarray(w1, dtype=float)
        return np.zeros_like(w1), np.zeros_like(w1)


class ConstantNonlinearity(ZeroNonlinearity):
    """Test hook: the H1-channel term is a fixed field ``g`` at every state."""

    def __init__(self, g):
        self.g = np.asarray(getattr(g, "coeffs", g), dtype=float)

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        return np.zeros_like(v), np.broadcast_to(self.g, v.shape).copy()


class LinearNonlinearity(ZeroNonlinearity):
    """Test hook: ``I1(v) = A1 v`` and ``I2(v) = A2 v`` (second derivative zero)."""

    def __init__(self, A1, A2):
        self.A1 = np.asarray(A1, dtype=float)
        self.A2 = np.asarray(A2, dtype=float)

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        return v @ self.A1.T, v @ self.A2.T

    def derivative(self, v, w):
        return self.evaluate(w)


def _active(traj_log_norms, nl):
    R = getattr(nl, "support_radius", None)
    if R is None:
        return np.ones(traj_log_norms.shape, dtype=bool)
    return traj_log_norms < np.log(R)


def nonlinear_source(nl, V: WeightedTrajectory) -> np.ndarray:
    """Weighted ``I1(v) + I2(v)`` along a trajectory (zero where the cut-off vanishes)."""
    act = _active(V.log_norms(), nl)
    out = np.zeros_like(V.weighted)
    if np.any(act):
        w = np.exp(V.theta * V.times[act])
        i1, i2 = nl.evaluate(V.weighted[act] / w[:, None])
        out[act] = (i1 + i2) * w[:, None]
    return out


def linearized_source(nl, V: WeightedTrajectory, D: np.ndarray) -> np.ndarray:
    """``(I1' + I2')(v) d`` along the base trajectory; weights pass through unchanged."""
    act = _active(V.log_norms(), nl)
    out = np.zeros_like(D)
    if np.any(act):
        w = np.exp(V.theta * V.times[act])
        d1, d2 = nl.derivative(V.weighted[act] / w[:, None], D[act])
        out[act] = d1 + d2
    return out


def quadratic_source(nl, V: WeightedTrajectory, D1: np.ndarray, D2: np.ndarray | None = None) -> np.ndarray:
    """``(I1'' + I2'')(v)[d1, d2]``; the weight of the result is the sum of the two."""
    act = _active(V.log_norms(), nl)
    out = np.zeros_like(D1)
    if np.any(act):
        w = np.exp(V.theta * V.times[act])
        s1, s2 = nl.second(V.weighted[act] / w[:, None], D1[act], None if D2 is None else D2[act])
        out[act] = s1 + s2
    return out


# ---------------------------------------------------------------------------
# fixed point


@dataclass
class ContractionReport:
    iterations: int
    ratios: list
    theta: float
    N: int
    bound: float | None = None
    updates: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "ratios": list(self.ratios),
            "theta": self.theta,
            "N": self.N,
            "bound": self.bound,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def picard(apply, W0: np.ndarray, dt: float, fp_tol: float, max_iter: int, what: str = "fixed point"):
    """Iterate ``W <- apply(W)`` until the weighted update drops below ``fp_tol``.

    Returns the last iterate and the list of weighted update norms.
    """
    W = W0
    updates = []
    for _ in range(max_iter):
        W_new = apply(W)
        d = weighted_norm(W_new - W, dt)
        updates.append(d)
        W = W_new
        if d < fp_tol:
            return W, updates
        if not np.isfinite(d):
            break
    last = updates[-1] / updates[-2] if len(updates) > 1 and updates[-2] > 0 else float("nan")
    raise PerronError(
        f"{what} did not converge in {len(updates)} iterations "
        f"(last update {updates[-1]:.3g}, last ratio {last:.3g})"
    )


def ratios_of(updates) -> list:
    return [b / a for a, b in zip(updates, updates[1:]) if a > 0]


def solve_manifold_point(p: SpectralField, cfg: PerronConfig, nl, W_init: np.ndarray | None = None):
    """Manifold value ``M(p) = Q_N v(0)`` by Picard iteration from ``v = H p``.

    Returns
    -------
    (SpectralField, WeightedTrajectory, ContractionReport)

    Raises
    ------
    PerronError
        If ``max_iter`` iterations do not reach ``fp_tol``.
    """
    Hp = homogeneous(p, cfg)
    t, theta = Hp.times, cfg.theta

    def step(W):
        src = nonlinear_source(nl, WeightedTrajectory(t, W, theta))
        return solve_modes(src, cfg.N, theta, cfg.dt) + Hp.weighted

    W0 = Hp.weighted if W_init is None else W_init
    W, updates = picard(step, W0, cfg.dt, cfg.fp_tol, cfg.max_iter, "manifold fixed point")
    traj = WeightedTrajectory(t, W, theta)
    m = W[-1].copy()
    m[: cfg.N] = 0.0
    report = ContractionReport(len(updates), ratios_of(updates), theta, cfg.N, cfg.bound, updates)
    return SpectralField(m), traj, report


class ManifoldMap:
    """Callable ``p -> M(p)`` with warm starts between nearby calls."""

    def __init__(self, cfg: PerronConfig, nl, n_max: int):
        self.cfg = cfg
        self.nl = nl
        self.n_max = n_max
        self._last = None

    def solve(self, p):
        c = np.zeros(self.n_max)
        pc = np.asarray(getattr(p, "coeffs", p), dtype=float)
        c[: self.cfg.N] = pc[: self.cfg.N]
        m, traj, rep = solve_manifold_point(SpectralField(c), self.cfg, self.nl, self._last)
        self._last = traj.weighted
        return m, traj, rep

    def __call__(self, p) -> np.ndarray:
        return self.solve(p)[0].coeffs
