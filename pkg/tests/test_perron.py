import json

import numpy as np
import pytest

from inertia.perron import (
    ConstantNonlinearity,
    LinearNonlinearity,
    PerronConfig,
    PerronError,
    WeightedTrajectory,
    ZeroNonlinearity,
    apply_T_theta,
    homogeneous,
    operator_norm,
    solve_manifold_point,
    solve_modes,
)
from inertia.spectral import SpectralField, h1_norm


def low(n_max, *vals):
    c = np.zeros(n_max)
    c[: len(vals)] = vals
    return SpectralField(c)


@pytest.fixture(scope="module")
def cfg():
    return PerronConfig.midpoint(2, dt=1e-2)


def test_config_invariants():
    with pytest.raises(ValueError, match="window"):
        PerronConfig(2, 9.5, 10.0, 1e-2)
    with pytest.raises(ValueError, match="too short"):
        PerronConfig(2, 6.5, 1.0, 1e-2)
    c = PerronConfig.build(2, 6.5, 1e-2, 1e-9)
    assert np.exp(-(9 - 6.5) * c.T_horizon) < 1e-9
    assert c.times[0] == pytest.approx(-c.T_horizon) and c.times[-1] == 0.0


def test_zero_source(cfg):
    z = WeightedTrajectory(cfg.times, np.zeros((cfg.steps + 1, 8)), cfg.theta)
    assert not np.any(apply_T_theta(z, z, cfg).weighted)


def test_grid_mismatch(cfg):
    a = WeightedTrajectory(cfg.times, np.zeros((cfg.steps + 1, 8)), cfg.theta)
    b = WeightedTrajectory(cfg.times[1:], np.zeros((cfg.steps, 8)), cfg.theta)
    with pytest.raises(ValueError):
        apply_T_theta(a, b, cfg)


def test_constant_source_settles_at_steady_state(cfg):
    h = np.linspace(0.5, -0.3, 8)
    t = cfg.times
    W = solve_modes(np.exp(cfg.theta * t)[:, None] * h, cfg.N, cfg.theta, cfg.dt)
    v = W * np.exp(-cfg.theta * t)[:, None]
    n = np.arange(1, 9)
    away = t > t[0] + 2.0  # past the left boundary layer
    hi = n > cfg.N
    rel = np.abs(v[away][:, hi] - h[hi] / n[hi] ** 2) / np.abs(h[hi] / n[hi] ** 2)
    assert rel.max() < 1e-6
    # low modes vanish at t = 0
    assert np.all(v[-1, : cfg.N] == 0)


def test_operator_norm_bound():
    c = PerronConfig.build(2, 6.5, 1e-2, 1e-6)
    bound = 3.0 / min(6.5 - 4, 9 - 6.5)
    assert operator_norm(c, 8) <= 1.05 * bound


def test_homogeneous(cfg):
    p = low(8, 1.0, -0.5)
    H = homogeneous(p, cfg)
    np.testing.assert_array_equal(H.states[-1][:2], p.coeffs[:2])
    assert not np.any(H.states[-1][2:])
    j = np.argmin(np.abs(cfg.times + 1.0))
    assert H.states[j][0] == pytest.approx(np.e, rel=1e-12)
    assert not np.any(homogeneous(SpectralField.zeros(8), cfg).weighted)
    with pytest.raises(ValueError):
        homogeneous(SpectralField.mode(3, 8), cfg)


def test_zero_nonlinearity_gives_zero_manifold(cfg):
    m, _, rep = solve_manifold_point(low(8, 0.4, 0.2), cfg, ZeroNonlinearity())
    assert not np.any(m.coeffs)
    assert rep.iterations == 1


def test_constant_nonlinearity_oracle(cfg):
    g = np.linspace(0.3, -0.2, 8)
    m, _, _ = solve_manifold_point(low(8, 0.4, 0.2), cfg, ConstantNonlinearity(g))
    n = np.arange(3, 9)
    np.testing.assert_allclose(m.coeffs[2:], g[2:] / n**2, atol=1e-8)
    assert np.all(m.coeffs[:2] == 0)


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_non_contraction_is_reported(cfg):
    A = 50.0 * np.eye(8)
    with pytest.raises(PerronError, match="did not converge"):
        solve_manifold_point(low(8, 0.4), cfg, LinearNonlinearity(A, A))


def test_contraction_ratios_respect_bound(manifold, perron_cfg, base_p):
    m, traj, rep = manifold.solve(base_p)
    assert rep.ratios and max(rep.ratios) < 1
    assert max(rep.ratios) <= 1.1 * rep.bound
    assert np.all(m.coeffs[: perron_cfg.N] == 0)
    doc = json.loads(rep.to_json())
    assert set(doc) == {"iterations", "ratios", "theta", "N", "bound"}


def test_tail_truncation(perron_cfg, nl, base_p):
    longer = PerronConfig(perron_cfg.N, perron_cfg.theta, 2 * perron_cfg.T_horizon, perron_cfg.dt, perron_cfg.fp_tol)
    a = solve_manifold_point(SpectralField(base_p), perron_cfg, nl)[0].coeffs
    b = solve_manifold_point(SpectralField(base_p), longer, nl)[0].coeffs
    assert h1_norm(a - b) < 10 * perron_cfg.fp_tol


def test_grid_refinement(nl, base_p):
    # the steep cut-off transition makes pairwise orders oscillate (3.0, 1.3,
    # 1.98 from dt = 4e-2 down); the finest pair is close to second order
    M = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        c = PerronConfig(2, 6.5, 12.0, dt, 1e-12)
        M.append(solve_manifold_point(SpectralField(base_p), c, nl)[0].coeffs)
    d1, d2 = h1_norm(M[0] - M[1]), h1_norm(M[1] - M[2])
    assert np.log2(d1 / d2) >= 1.9


def test_manifold_lipschitz_is_bounded(manifold, plan):
    rng = np.random.default_rng(0)
    kappa = plan.contraction_bound()
    ratios = []
    for _ in range(5):
        p1 = np.zeros(16)
        p1[:2] = rng.uniform(-0.4, 0.4, 2)
        p2 = p1.copy()
        p2[:2] += rng.normal(size=2) * 0.05
        ratios.append(h1_norm(manifold(p1) - manifold(p2)) / h1_norm(p1 - p2))
    assert np.all(np.isfinite(ratios))
    assert max(ratios) <= kappa / (1 - kappa)
