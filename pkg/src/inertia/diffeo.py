"""Smooth change of variables ``u = a(v) v`` and the transformed nonlinearities.

The profile ``a`` solves the nonlocal fixed point

    a(x) = exp(-1/2 int_0^x P_K(a v)(s) ds),

and its inverse profile ``b(u) = exp(1/2 int_0^x P_K u(s) ds)`` is explicit,
because ``P_K(a v) = P_K u`` on consistent pairs, so ``a b = 1`` and the
inverse change of variables is ``v = b(u) u``.

With ``P = P_K(a v)`` (a K-mode sine series) the equation
``u_t - u_xx = u u_x + g`` becomes ``v_t - v_xx = I1(v) + I2(v)`` with

    I1 = (u - P) v_x
    I2 = (1/4 P^2 - 1/2 P_x - a^{-1} a_t - 1/2 P u) v + g / a,

where ``a^{-1} a_t = -1/2 int_0^x P_K u_t`` and ``P_K u_t`` is read off the
Burgers right-hand side.  The cut-off versions multiply both terms by
``phi(||v||^2_{H1_0})``.

Every formula is evaluated on an interior quadrature grid several times
finer than the mode count (all integrands are odd, analytic and periodic, so
the discrete sine projection converges spectrally) and derivatives are
obtained by pushing Taylor jets through the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _taylor as tj
from .spectral import (
    SQRT_2_OVER_PI,
    Grid,
    SpectralField,
    derivative_values,
    h1_norm,
    sine_analysis,
    sine_synthesis,
    wavenumbers,
)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200


class DiffeoError(RuntimeError):
    """The fixed point for ``a(v)`` failed to converge."""


def quadrature_size(n_max: int, K: int) -> int:
    """Interior grid size used for products involving the profile ``a``."""
    return 4 * (n_max + K) - 1


# ---------------------------------------------------------------------------
# cut-off


@dataclass(frozen=True)
class CutoffConfig:
    """Inner radius ``r`` (cut-off equal to one) and outer radius ``R_big`` (zero)."""

    r: float
    R_big: float

    def __post_init__(self):
        if not (0 < self.r < self.R_big):
            raise ValueError(f"cut-off radii must satisfy 0 < r < R_big, got {self.r}, {self.R_big}")


def _q(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(s):
    """C-infinity step equal to 1 for s <= 0 and 0 for s >= 1."""
    s = np.asarray(s, dtype=float)
    q1, q0 = _q(1.0 - s), _q(s)
    return q1 / (q1 + q0)


def cutoff(z, cut: CutoffConfig):
    """phi(z) with z the squared H1_0 norm."""
    return smooth_step((np.asarray(z, dtype=float) - cut.r**2) / (cut.R_big**2 - cut.r**2))


def cutoff_jet(z, cut: CutoffConfig):
    """Taylor jet of phi along a jet of squared norms ``z``."""
    width = cut.R_big**2 - cut.r**2
    s = [(z[0] - cut.r**2) / width] + [zk / width for zk in z[1:]]
    inside = (s[0] > 0) & (s[0] < 1)
    if not np.any(inside):
        return tj.constant(smooth_step(s[0]), len(z) - 1)
    safe = [np.where(inside, s[0], 0.5)] + [np.where(inside, sk, 0.0) for sk in s[1:]]
    one_minus = [1.0 - safe[0]] + [-sk for sk in safe[1:]]
    q0 = tj.exp(tj.scale(-1.0, tj.reciprocal(safe)))
    q1 = tj.exp(tj.scale(-1.0, tj.reciprocal(one_minus)))
    psi = tj.mul(q1, tj.reciprocal(tj.add(q0, q1)))
    flat = tj.constant(smooth_step(s[0]), len(z) - 1)
    return tj.where(inside, psi, flat)


# ---------------------------------------------------------------------------
# low-mode tables on the quadrature grid


@lru_cache(maxsize=32)
def _tables(m: int, K: int):
    x = Grid(m).points
    k = wavenumbers(K)
    kx = np.outer(x, k)
    sine = SQRT_2_OVER_PI * np.sin(kx)  # e_k(x_j)
    dsine = SQRT_2_OVER_PI * k * np.cos(kx)  # e_k'(x_j)
    anti = SQRT_2_OVER_PI * (1.0 - np.cos(kx)) / k  # int_0^x e_k
    for t in (sine, dsine, anti):
        t.setflags(write=False)
    return sine, dsine, anti


def exponent_values(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``int_0^x sum_k c_k e_k`` at arbitrary points (closed-form antiderivatives)."""
    c = np.asarray(c, dtype=float)
    k = wavenumbers(c.shape[-1])
    return SQRT_2_OVER_PI * ((1.0 - np.cos(np.multiply.outer(x, k))) / k) @ c


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class DiffeoState:
    """Profiles ``a`` and ``b = 1/a`` on a quadrature grid.

    ``coeffs`` are the K sine coefficients of ``P_K(a v)`` (equivalently of
    ``P_K u``) that determine both profiles in closed form.
    """

    K: int
    grid: Grid
    coeffs: np.ndarray
    a: np.ndarray
    b: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    def a_at(self, x) -> np.ndarray:
        return np.exp(-0.5 * exponent_values(self.coeffs, np.asarray(x, dtype=float)))

    def b_at(self, x) -> np.ndarray:
        return np.exp(0.5 * exponent_values(self.coeffs, np.asarray(x, dtype=float)))


def _solve_exponent(v_vals, K, m, tol, max_iter, method):
    """Batched fixed point ``c = P_K(exp(-1/2 S c) v)``; returns (c, a, iterations)."""
    _, _, anti = _tables(m, K)
    c = np.zeros(v_vals.shape[:-1] + (K,))
    a = np.ones_like(v_vals)
    for it in range(1, max_iter + 1):
        if method == "picard":
            c = sine_analysis(a * v_vals, K)
        elif method == "newton":
            g = sine_analysis(a * v_vals, K) - c
            jac = _exponent_jacobian(a, v_vals, K, m)
            eye = np.eye(K)
            c = c + np.linalg.solve(eye - jac, g[..., None])[..., 0]
        else:
            raise ValueError(f"unknown fixed-point method {method!r}")
        a_new = np.exp(-0.5 * c @ anti.T)
        if not np.all(np.isfinite(a_new)):
            break
        change = np.max(np.abs(a_new - a))
        a = a_new
        if change < tol:
            return c, a, it
    raise DiffeoError(
        f"fixed point for a(v) did not converge in {max_iter} iterations (K={K}); "
        "K is likely below the convergence threshold for this radius"
    )


def _exponent_jacobian(a, v_vals, K, m):
    """d/dc of ``P_K(exp(-1/2 S c) v)`` at the profile ``a``; shape (..., K, K)."""
    _, _, anti = _tables(m, K)
    cols = (-0.5 * a * v_vals)[..., None, :] * anti.T  # (..., K_col, m)
    return np.swapaxes(sine_analysis(cols, K), -1, -2)


def _residual(c, a, v_vals, m, K):
    _, _, anti = _tables(m, K)
    c_again = sine_analysis(a * v_vals, K)
    return float(np.max(np.abs(a - np.exp(-0.5 * c_again @ anti.T))))


def _check_K(K, n_max):
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > n_max:
        raise ValueError(f"K={K} exceeds the field's n_max={n_max}")


def solve_a(
    v: SpectralField,
    K: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "picard",
    m: int | None = None,
) -> DiffeoState:
    """Profile ``a(v)`` by fixed-point iteration from ``a = 1``.

    Parameters
    ----------
    v : SpectralField
        Transformed state.
    K : int
        Projection order inside the exponent.
    tol : float
        Stop when the sup-norm change of ``a`` between iterates drops below it.
    method : {"picard", "newton"}
        Picard iteration on the exponential form, or Newton on the K
        exponent coefficients (same fixed point, quadratic convergence).

    Raises
    ------
    DiffeoError
        If the iteration does not converge within ``max_iter`` steps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_K(K, v.n_max)
    m = quadrature_size(v.n_max, K) if m is None else m
    vv = sine_synthesis(v.coeffs, m)
    c, a, it = _solve_exponent(vv, K, m, tol, max_iter, method)
    res = _residual(c, a, vv, m, K)
    return DiffeoState(K, Grid(m), c, a, 1.0 / a, iterations=it, residual=res)


def b_of_u(u: SpectralField, K: int, m: int | None = None) -> DiffeoState:
    """Explicit inverse profile ``b(u) = exp(1/2 int_0^x P_K u)``."""
    _check_K(K, u.n_max)
    m = quadrature_size(u.n_max, K) if m is None else m
    _, _, anti = _tables(m, K)
    c = u.coeffs[:K].copy()
    b = np.exp(0.5 * anti @ c)
    return DiffeoState(K, Grid(m), c, 1.0 / b, b)


def forward_map(v: SpectralField, K: int, **kw) -> SpectralField:
    """``U(v) = a(v) v`` projected on the field's modes."""
    st = solve_a(v, K, **kw)
    vv = sine_synthesis(v.coeffs, st.grid.m)
    return SpectralField(sine_analysis(st.a * vv, v.n_max))


def inverse_map(u: SpectralField, K: int, m: int | None = None) -> SpectralField:
    """``V(u) = b(u) u`` projected on the field's modes."""
    st = b_of_u(u, K, m)
    uu = sine_synthesis(u.coeffs, st.grid.m)
    return SpectralField(sine_analysis(st.b * uu, u.n_max))


# ---------------------------------------------------------------------------
# transformed nonlinearities


def _squared_norm_jet(v):
    w2 = wavenumbers(v[0].shape[-1]) ** 2
    return [np.sum(w2 * c, axis=-1) for c in tj.mul(v, v)]


class TransformedNonlinearity:
    """Evaluator for the cut-off nonlinearities and their derivatives.

    Parameters
    ----------
    n_max : int
        Number of sine modes of the states.
    K : int
        Projection order of the change of variables.
    g : array_like, optional
        Forcing coefficients (length n_max); zero by default.
    cut : CutoffConfig, optional
        Cut-off radii.  Without one the raw ``I1, I2`` are returned.
    time_derivative : {"derived", "verbatim"}
        ``"derived"`` uses ``a^{-1} a_t = -1/2 int P_K u_t`` (what
        differentiating ``a = 1/b(u)`` gives).  ``"verbatim"`` uses
        ``a_t = 1/2 b int P_K u_t`` as literally printed in the source
        derivation; it exists so the sign can be tested against finite
        differences along trajectories.
    method : {"picard", "newton"}
        Solver for the order-zero profile.

    Notes
    -----
    Batched calls take arrays with a trailing mode axis.  For derivatives a
    single base point (leading size 1) broadcasts against many directions.
    """

    def __init__(
        self,
        n_max: int,
        K: int,
        g=None,
        cut: CutoffConfig | None = None,
        m: int | None = None,
        time_derivative: str = "derived",
        method: str = "picard",
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
    ):
        _check_K(K, n_max)
        if time_derivative not in ("derived", "verbatim"):
            raise ValueError(f"unknown time_derivative {time_derivative!r}")
        self.n_max = n_max
        self.K = K
        self.g = np.zeros(n_max) if g is None else np.asarray(g, dtype=float).copy()
        if self.g.shape != (n_max,):
            raise ValueError("forcing must have n_max coefficients")
        self.cut = cut
        # states outside this H1_0 ball see a vanishing cut-off
        self.support_radius = cut.R_big if cut is not None else None
        self.m = quadrature_size(n_max, K) if m is None else m
        self.time_derivative = time_derivative
        self.method = method
        self.tol = tol
        self.max_iter = max_iter
        self._g_vals = sine_synthesis(self.g, self.m)

    # -- public API ---------------------------------------------------------

    def evaluate(self, v):
        """(I1, I2) at a batch of states; arrays shaped like ``v``."""
        v = np.asarray(v, dtype=float)
        i1, i2 = self.jet(v, [])
        return i1[0], i2[0]

    def derivative(self, v, w):
        """First derivatives ``(I1'(v) w, I2'(v) w)``."""
        i1, i2 = self.jet(np.asarray(v, dtype=float), [np.asarray(w, dtype=float)])
        return self._shape(i1[1], w), self._shape(i2[1], w)

    def second(self, v, w1, w2=None):
        """Second derivatives ``(I1''(v)[w1, w2], I2''(v)[w1, w2])``.

        The diagonal ``w2 = None`` is read from one order-2 jet; the
        off-diagonal case uses polarization of two diagonal evaluations.
        """
        w1 = np.asarray(w1, dtype=float)
        if w2 is None:
            i1, i2 = self.jet(np.asarray(v, dtype=float), [w1, np.zeros_like(w1)])
            return self._shape(2 * i1[2], w1), self._shape(2 * i2[2], w1)
        w2 = np.asarray(w2, dtype=float)
        p1, p2 = self.second(v, w1 + w2)
        m1, m2 = self.second(v, w1 - w2)
        return 0.25 * (p1 - m1), 0.25 * (p2 - m2)

    def second_fd(self, v, w1, w2=None, h: float = 1e-3):
        """Central second differences, a cross-check for :meth:`second`.

        The step is ``h`` times ``max(1, |v|_H1) / |w|_H1`` along each direction.
        """
        v = np.atleast_2d(np.asarray(v, dtype=float))
        w1 = np.atleast_2d(np.asarray(w1, dtype=float))
        if w2 is not None:
            w2 = np.atleast_2d(np.asarray(w2, dtype=float))
            p1, p2 = self.second_fd(v, w1 + w2, None, h)
            m1, m2 = self.second_fd(v, w1 - w2, None, h)
            return 0.25 * (p1 - m1), 0.25 * (p2 - m2)
        wn = h1_norm(w1)[..., None]
        s = h * np.maximum(1.0, h1_norm(v))[..., None] / np.where(wn > 0, wn, 1.0)
        f0 = self.evaluate(np.broadcast_to(v, np.broadcast_shapes(v.shape, w1.shape)))
        fp = self.evaluate(v + s * w1)
        fm = self.evaluate(v - s * w1)
        return tuple((a - 2 * b + c) / s**2 for a, b, c in zip(fp, f0, fm))

    @staticmethod
    def _shape(out, w):
        return np.broadcast_to(out, np.broadcast_shapes(out.shape, np.shape(w))).copy()

    # -- jet propagation -------------------------------------------------------

    def jet(self, v0, dirs):
        """Propagate the ray ``v0 + s dirs[0] + s^2 dirs[1] + ...``.

        Returns two jets (lists of arrays in mode space) for the cut-off
        nonlinearities.  Base points outside the outer radius contribute
        exact zeros.
        """
        v0 = np.atleast_2d(v0)
        order = len(dirs)
        dirs = [np.atleast_2d(d) for d in dirs]
        v = [v0] + dirs
        batch = np.broadcast_shapes(*(x.shape for x in v))
        out1 = [np.zeros(batch) for _ in range(order + 1)]
        out2 = [np.zeros(batch) for _ in range(order + 1)]

        if self.cut is not None:
            z = _squared_norm_jet(v)
            phi = cutoff_jet(z, self.cut)
            active = z[0] < self.cut.R_big**2
        else:
            phi = None
            active = np.ones(v0.shape[0], dtype=bool)
        if not np.any(active):
            return out1, out2
        if v0.shape[0] > 1 and not np.all(active):
            idx = np.flatnonzero(active)
            sub_v = [x[idx] if x.shape[0] > 1 else x for x in v]
            sub_phi = None if phi is None else [p[idx] if p.shape[0] > 1 else p for p in phi]
            r1, r2 = self._raw_jet(sub_v)
            for k in range(order + 1):
                f1, f2 = r1[k], r2[k]
                if sub_phi is not None:
                    f1, f2 = self._apply_cut(sub_phi, r1, r2, k)
                out1[k][idx] = f1
                out2[k][idx] = f2
            return out1, out2
        r1, r2 = self._raw_jet(v)
        for k in range(order + 1):
            if phi is None:
                out1[k] = out1[k] + r1[k]
                out2[k] = out2[k] + r2[k]
            else:
                f1, f2 = self._apply_cut(phi, r1, r2, k)
                out1[k] = out1[k] + f1
                out2[k] = out2[k] + f2
        return out1, out2

    @staticmethod
    def _apply_cut(phi, r1, r2, k):
        f1 = sum(phi[i][:, None] * r1[k - i] for i in range(k + 1))
        f2 = sum(phi[i][:, None] * r2[k - i] for i in range(k + 1))
        return f1, f2

    def _profile_jet(self, vals):
        """Jet of the exponent coefficients ``c`` (order by order)."""
        K, m = self.K, self.m
        _, _, anti = _tables(m, K)
        c0, a0, _ = _solve_exponent(vals[0], K, m, self.tol, self.max_iter, self.method)
        c = [c0]
        if len(vals) > 1:
            jac = _exponent_jacobian(a0, vals[0], K, m)
            inv = np.linalg.inv(np.eye(K) - jac)
            for k in range(1, len(vals)):
                trial = c + [np.zeros_like(c0)] * (len(vals) - k)
                expo = tj.apply(lambda x: -0.5 * (x @ anti.T), trial[: k + 1])
                prof = tj.exp(expo)
                rhs = sine_analysis(tj.mul(prof, vals[: k + 1])[k], K)
                c.append(np.matmul(inv, rhs[..., None])[..., 0])
        return c

    def _raw_jet(self, v):
        K, m, n_max = self.K, self.m, self.n_max
        sine, dsine, anti = _tables(m, K)
        vals = tj.apply(lambda x: sine_synthesis(x, m), v)
        vx = tj.apply(lambda x: derivative_values(x, m), v)
        c = self._profile_jet(vals)
        expo = tj.apply(lambda x: 0.5 * (x @ anti.T), c)
        a = tj.exp(tj.scale(-1.0, expo))
        b = tj.exp(expo)
        P = tj.apply(lambda x: x @ sine.T, c)
        Px = tj.apply(lambda x: x @ dsine.T, c)
        u = tj.mul(a, vals)

        i1 = tj.mul(tj.sub(u, P), vx)

        ux = tj.add(tj.scale(-0.5, tj.mul(P, u)), tj.mul(a, vx))
        lam_k = wavenumbers(K) ** 2
        q = tj.apply(lambda x: sine_analysis(x, K), tj.mul(u, ux))
        q = [qk - lam_k * ck for qk, ck in zip(q, c)]
        q[0] = q[0] + self.g[:K]
        Sq = tj.apply(lambda x: x @ anti.T, q)
        if self.time_derivative == "derived":
            minus_at_over_a = tj.scale(0.5, Sq)
        else:
            minus_at_over_a = tj.scale(-0.5, tj.mul(tj.mul(b, b), Sq))
        bracket = tj.add(
            tj.sub(tj.scale(0.25, tj.mul(P, P)), tj.scale(0.5, Px)),
            tj.sub(minus_at_over_a, tj.scale(0.5, tj.mul(P, u))),
        )
        i2 = tj.mul(bracket, vals)
        gb = [self._g_vals * bk for bk in b]
        i2 = tj.add(i2, gb)
        to_modes = lambda x: sine_analysis(x, n_max)  # noqa: E731
        return tj.apply(to_modes, i1), tj.apply(to_modes, i2)


def transformed_nonlinearities(v: SpectralField, K: int, g: SpectralField | None, cut: CutoffConfig):
    """Cut-off nonlinearities ``(I1(v), I2(v))`` as fields."""
    nl = TransformedNonlinearity(v.n_max, K, None if g is None else g.coeffs, cut)
    i1, i2 = nl.evaluate(v.coeffs[None])
    return SpectralField(i1[0]), SpectralField(i2[0])


def directional_derivative(which: str, v: SpectralField, w: SpectralField, K: int, g, cut: CutoffConfig):
    """Analytic derivative of ``I1_cut`` or ``I2_cut`` at ``v`` along ``w``."""
    if which not in ("I1_cut", "I2_cut"):
        raise ValueError(f"which must be 'I1_cut' or 'I2_cut', got {which!r}")
    nl = TransformedNonlinearity(v.n_max, K, None if g is None else g.coeffs, cut)
    d1, d2 = nl.derivative(v.coeffs[None], w.coeffs[None])
    return SpectralField((d1 if which == "I1_cut" else d2)[0])


# ---------------------------------------------------------------------------
# Lipschitz constants


@dataclass(frozen=True)
class LipschitzEstimate:
    L1: float
    L2: float
    K: int
    samples: int
    seed: int
    radius: float = 0.0
    n_max: int = 0


def lipschitz_samples(rng: np.random.Generator, n_max: int, K: int, radius: float, samples: int):
    """Sample states in the ball ``||v||_{H1_0} <= radius``.

    Half the samples are smooth (Gaussian coefficients decaying like
    ``exp(-n/4)``); the other half are high-pass kinks whose coefficients
    ``sin(n x0) / n^2`` live above mode K.  The latter nearly saturate the
    bound ``sup |(I - P_K) f| <= C K^{-1/2} ||f||_{H1_0}`` that controls I1.
    """
    n = wavenumbers(n_max)
    out = np.zeros((samples, n_max))
    for i in range(samples):
        rho = radius * rng.uniform(0.5, 1.0)
        if i % 2 == 0:
            c = rng.standard_normal(n_max) * np.exp(-n / 4.0)
        else:
            x0 = rng.uniform(0.2, np.pi - 0.2)
            c = np.where(n > K, np.sin(n * x0) / n**2, 0.0)
        out[i] = c * (rho / np.sqrt(np.sum((n * c) ** 2)))
    return out


def jacobian_norms(nl: TransformedNonlinearity, v: np.ndarray):
    """Operator norms ``||I1'(v)||_{H1_0 -> L2}`` and ``||I2'(v)||_{H1_0 -> H1_0}``."""
    n = wavenumbers(nl.n_max)
    eye = np.eye(nl.n_max)
    d1, d2 = nl.derivative(v[None], eye)  # row j = derivative along e_j
    j1 = d1.T / n  # columns scaled to unit H1_0 directions
    j2 = (n[:, None] * d2.T) / n
    return float(np.linalg.norm(j1, 2)), float(np.linalg.norm(j2, 2))


def estimate_lipschitz(
    K: int,
    radius: float,
    samples: int,
    seed: int,
    n_max: int | None = None,
    g=None,
    cut: CutoffConfig | None = None,
) -> LipschitzEstimate:
    """Sampled Lipschitz constants of the cut-off nonlinearities.

    For each sampled state the exact operator norm of the Jacobian is
    computed (the supremum over directions), and the maximum over states is
    reported.  ``n_max`` defaults to ``4 K`` so the resolved part of the
    mode tail above K is the same fraction of it for every K.  The default cut-off is ``r = radius, R_big = 2 radius``.
    """
    if samples < 10:
        raise ValueError("estimate_lipschitz needs at least 10 samples")
    n_max = 4 * K if n_max is None else n_max
    cut = CutoffConfig(radius, 2.0 * radius) if cut is None else cut
    nl = TransformedNonlinearity(n_max, K, g, cut)
    rng = np.random.default_rng(seed)
    L1 = L2 = 0.0
    for v in lipschitz_samples(rng, n_max, K, radius, samples):
        l1, l2 = jacobian_norms(nl, v)
        L1, L2 = max(L1, l1), max(L2, l2)
    return LipschitzEstimate(L1, L2, K, samples, seed, radius, n_max)


def empirical_K0(
    radius: float,
    n_max: int = 64,
    samples: int = 100,
    seed: int = 0,
    candidates=(1, 2, 4, 8, 16, 32, 64),
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Smallest candidate K for which the Picard iteration converges on all samples.

    Returns None when no candidate works.
    """
    rng = np.random.default_rng(seed)
    n = wavenumbers(n_max)
    c = rng.standard_normal((samples, n_max)) * np.exp(-n / 8.0)
    c *= (radius * rng.uniform(0, 1, samples) / np.sqrt(np.sum((n * c) ** 2, axis=-1)))[:, None]
    for K in candidates:
        if K > n_max:
            break
        m = quadrature_size(n_max, K)
        try:
            _solve_exponent(sine_synthesis(c, m), K, m, DEFAULT_TOL, max_iter, "picard")
        except DiffeoError:
            continue
        return K
    return None
