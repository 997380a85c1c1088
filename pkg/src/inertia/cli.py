"""Command-line entry point: ``inertia <subcommand> [flags]``.

Settings come from built-in defaults, then an optional flat ``key = value``
file (``--config``), then command-line flags.  Every run writes its data
files plus ``manifest.json`` under ``output_dir``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 64 unknown
subcommand, 66 unreadable config file.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .burgers import BlowUpError, SimConfig, integrate_burgers
from .diffeo import (
    CutoffConfig,
    DiffeoError,
    TransformedNonlinearity,
    b_of_u,
    estimate_lipschitz,
    forward_map,
    inverse_map,
)
from .gaps import find_sequence, make_plan, squares
from .inertial_form import ReducedState, integrate_reduced, tracking_test
from .jets import JetError, JetSolver
from .perron import ConstantNonlinearity, ManifoldMap, PerronConfig, PerronError, solve_manifold_point
from .spectral import SpectralField, h1_norm, random_field, sine_analysis, sine_synthesis

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_USAGE, EXIT_NOINPUT = 0, 2, 3, 64, 66

COMMANDS = ("simulate", "roundtrip", "gaps", "manifold", "jets", "reduce", "track", "selftest")

# key -> (type, default)
SCHEMA = {
    "n_max": (int, 16),
    "grid_m": (int, None),
    "dt": (float, 1e-3),
    "t_end": (float, 1.0),
    "K": (int, 8),
    "r": (float, 0.5),
    "R_big": (float, 1.0),
    "n_order": (int, 1),
    "N_cap": (int, 10_000),
    "seed": (int, 0),
    "theta_policy": (str, "plan"),
    "fp_tol": (float, 1e-9),
    "T_horizon": (float, None),
    "output_dir": (str, "out"),
    "g1": (float, 0.2),
    "L1": (float, None),
    "L2": (float, None),
    "samples": (int, 20),
    "perron_dt": (float, 1e-2),
    "radius": (float, 5.0),
    "p": (str, "0.3,-0.1"),
    "perturbation": (float, 0.1),
}


class ConfigError(ValueError):
    """Unknown key or invalid value in the run configuration."""


def _convert(key: str, raw):
    typ, _ = SCHEMA[key]
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
        return None
    try:
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` starts a comment).

    Raises
    ------
    OSError
        If the file cannot be read.
    ConfigError
        On unknown keys or malformed lines.
    """
    text = Path(path).read_text()
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def validate(cfg: dict) -> dict:
    def positive(*keys):
        for k in keys:
            if cfg[k] is not None and not cfg[k] > 0:
                raise ConfigError(f"{k} must be positive, got {cfg[k]}")

    positive("n_max", "dt", "K", "r", "R_big", "n_order", "N_cap", "fp_tol", "samples", "perron_dt", "radius")
    positive("grid_m", "T_horizon")
    if cfg["t_end"] < 0:
        raise ConfigError(f"t_end must be non-negative, got {cfg['t_end']}")
    if not cfg["r"] < cfg["R_big"]:
        raise ConfigError("cut-off radii must satisfy r < R_big")
    if cfg["K"] > cfg["n_max"]:
        raise ConfigError(f"K={cfg['K']} exceeds n_max={cfg['n_max']}")
    if cfg["theta_policy"] not in ("plan", "midpoint"):
        raise ConfigError("theta_policy must be 'plan' or 'midpoint'")
    for k in ("L1", "L2"):
        if cfg[k] is not None and cfg[k] < 0:
            raise ConfigError(f"{k} must be non-negative")
    return cfg


def resolve_config(args) -> dict:
    cfg = {k: d for k, (_, d) in SCHEMA.items()}
    if args.config is not None:
        cfg.update(read_config(args.config))
    for k in SCHEMA:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = _convert(k, v)
    return validate(cfg)


def config_hash(cfg: dict) -> str:
    """Hash of the numerical settings; the output location is excluded."""
    settings = {k: v for k, v in cfg.items() if k != "output_dir"}
    blob = json.dumps(settings, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# output


class Outputs:
    """Tracks every file written for the manifest."""

    def __init__(self, root):
        self.root = Path(root)
        self.files = []

    def _path(self, name):
        self.root.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return self.root / name

    def json(self, name, obj):
        self._path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def csv(self, name, header, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        lines = [",".join(header)] + [",".join("%.17g" % x for x in row) for row in rows]
        self._path(name).write_text("\n".join(lines) + "\n")

    def manifest(self, command, cfg):
        entries = []
        for name in self.files:
            digest = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
            entries.append({"path": name, "sha256": digest})
        doc = {
            "command": command,
            "config-hash": config_hash(cfg),
            "versions": {
                "inertia": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "outputs": entries,
        }
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return doc


def _f(x) -> float:
    """Round-trip-exact float for JSON."""
    return float("%.17g" % x)


# ---------------------------------------------------------------------------
# shared problem set-up


def forcing(cfg) -> np.ndarray:
    g = np.zeros(cfg["n_max"])
    g[0] = cfg["g1"]
    return g


def build_problem(cfg):
    """Nonlinearity, gap plan and Perron configuration for the manifold commands."""
    n, K = cfg["n_max"], cfg["K"]
    cut = CutoffConfig(cfg["r"], cfg["R_big"])
    g = forcing(cfg)
    nl = TransformedNonlinearity(n, K, g, cut)
    L1, L2 = cfg["L1"], cfg["L2"]
    if L1 is None or L2 is None:
        est = estimate_lipschitz(K, cfg["R_big"], cfg["samples"], cfg["seed"], n_max=n, g=g, cut=cut)
        L1 = est.L1 if L1 is None else L1
        L2 = est.L2 if L2 is None else L2
    plan = find_sequence(cfg["n_order"], L1, L2, squares, cfg["N_cap"])
    pdt, tol = cfg["perron_dt"], cfg["fp_tol"]
    if cfg["theta_policy"] == "plan":
        theta = plan.theta_seq[0]
    else:
        N = plan.N_seq[0]
        theta = 0.5 * (N**2 + (N + 1) ** 2)
    if cfg["T_horizon"] is not None:
        pc = PerronConfig(plan.N_seq[0], theta, cfg["T_horizon"], pdt, tol, L1=plan.L1, L2=plan.L2)
    else:
        pc = PerronConfig.build(plan.N_seq[0], theta, pdt, tol, L1=plan.L1, L2=plan.L2)
    return nl, plan, pc


def base_point(cfg, N) -> np.ndarray:
    vals = [float(s) for s in cfg["p"].split(",") if s.strip()]
    c = np.zeros(cfg["n_max"])
    k = min(N, len(vals))
    c[:k] = vals[:k]
    return c


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out):
    n = cfg["n_max"]
    sim = SimConfig(cfg["dt"], cfg["t_end"], g=forcing(cfg), grid_m=cfg["grid_m"], save_every=max(1, int(round(0.01 / cfg["dt"]))))
    rng = np.random.default_rng(cfg["seed"])
    u0 = random_field(rng, n, cfg["radius"], decay=0.25)
    traj = integrate_burgers(u0, sim)
    out.csv("trajectory.csv", ["t"] + [f"c_{k}" for k in range(1, n + 1)], np.column_stack([traj.times, traj.states]))
    summary = {"steps": sim.steps, "final_h1": _f(h1_norm(traj.states[-1])), "initial_h1": _f(h1_norm(u0.coeffs))}
    out.json("simulate.json", summary)
    return summary


def cmd_roundtrip(cfg, out, count=20):
    K = cfg["K"]
    # fields live on modes 1..K; the extra modes resolve the products
    n = max(cfg["n_max"], 4 * K)
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for i in range(count):
        radius = cfg["radius"] * rng.uniform(0.1, 1.0)
        u = random_field(rng, n, radius, n_active=K)
        err = h1_norm(forward_map(inverse_map(u, K), K).coeffs - u.coeffs)
        rows.append((i, h1_norm(u.coeffs), err))
    rows = np.array(rows)
    out.csv("roundtrip.csv", ["sample", "h1_norm", "error"], rows)
    report = {"K": K, "n_max": n, "samples": count, "max_error": _f(rows[:, 2].max())}
    out.json("roundtrip.json", report)
    return report


def cmd_gaps(cfg, out):
    L1 = 0.0 if cfg["L1"] is None else cfg["L1"]
    L2 = 0.0 if cfg["L2"] is None else cfg["L2"]
    plan = find_sequence(cfg["n_order"], L1, L2, squares, cfg["N_cap"])
    doc = plan.to_dict()
    out.json("plan.json", doc)
    return doc


def cmd_manifold(cfg, out):
    nl, plan, pc = build_problem(cfg)
    p = base_point(cfg, pc.N)
    m, traj, rep = solve_manifold_point(SpectralField(p), pc, nl)
    out.json("plan.json", plan.to_dict())
    out.json("contraction.json", rep.to_dict())
    out.csv("manifold.csv", ["mode", "p", "M"], np.column_stack([np.arange(1, p.size + 1), p, m.coeffs]))
    return {"N": pc.N, "theta": pc.theta, "iterations": rep.iterations, "M_h1": _f(h1_norm(m.coeffs))}


def cmd_jets(cfg, out):
    nl, plan, pc = build_problem(cfg)
    js = JetSolver(plan, nl, cfg["n_max"], charts=(1, 1), dt=pc.dt, fp_tol=pc.fp_tol)
    bundle = js.bundle(base_point(cfg, pc.N))
    out.json("jets.json", json.loads(json.dumps(bundle.to_dict(), default=_f)))
    return {"N": pc.N, "jet1_h1": _f(float(np.max(h1_norm(bundle.jet1))))}


def cmd_reduce(cfg, out):
    nl, plan, pc = build_problem(cfg)
    mm = ManifoldMap(pc, nl, cfg["n_max"])
    dt = max(cfg["dt"], pc.dt)
    sim = SimConfig(dt, cfg["t_end"], save_every=max(1, int(round(0.1 / dt))))
    red = integrate_reduced(ReducedState(base_point(cfg, pc.N)), plan, sim, mm)
    n = cfg["n_max"]
    out.csv("reduced.csv", ["t"] + [f"p_{k}" for k in range(1, pc.N + 1)], np.column_stack([red.times, red.states[:, : pc.N]]))
    lifted = red.lift(mm)
    out.csv("lifted.csv", ["t"] + [f"c_{k}" for k in range(1, n + 1)], np.column_stack([red.times, lifted]))
    return {"N": pc.N, "steps": sim.steps, "final_h1": _f(h1_norm(lifted[-1]))}


def cmd_track(cfg, out):
    nl, plan, pc = build_problem(cfg)
    mm = ManifoldMap(pc, nl, cfg["n_max"])
    p = base_point(cfg, pc.N)
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["n_max"]
    pert = np.zeros(n)
    pert[pc.N :] = rng.standard_normal(n - pc.N) * np.exp(-0.5 * np.arange(n - pc.N))
    pert *= cfg["perturbation"] / h1_norm(pert)
    v0 = p + mm(p) + pert
    sim = SimConfig(cfg["dt"], cfg["t_end"], save_every=max(1, int(round(0.05 / cfg["dt"]))))
    rep = tracking_test(SpectralField(v0), plan, sim, mm)
    out.csv("tracking.csv", ["t", "distance"], rep.rows())
    out.json("tracking.json", rep.to_dict())
    return rep.to_dict()


def selftest_checks(seed: int):
    """Small deterministic oracle checks; returns a list of result dicts."""
    rng = np.random.default_rng(seed)
    checks = []

    def record(name, value, tol):
        checks.append({"name": name, "value": _f(value), "tol": tol, "passed": bool(value <= tol)})

    n, m = 32, 95
    c = rng.standard_normal((10, n))
    record("spectral_roundtrip", np.abs(sine_analysis(sine_synthesis(c, m), n) - c).max(), 1e-12)
    b = b_of_u(SpectralField(np.eye(n)[0]), 4)
    record("b_closed_form", abs(b.b_at(np.pi) - np.exp(np.sqrt(2 / np.pi))), 1e-12)
    K = 8
    errs = []
    for _ in range(3):
        u = random_field(rng, n, 2.0, n_active=K)
        errs.append(h1_norm(forward_map(inverse_map(u, K), K).coeffs - u.coeffs))
    record("diffeo_roundtrip", max(errs), 1e-8)
    plan = make_plan(1, 0.1, 1.0, [1], squares)
    record("gap_gamma", abs(plan.gamma - 0.3), 1e-12)
    pc = PerronConfig.midpoint(1, dt=1e-2)
    g = rng.standard_normal(8) * 0.1
    mval, _, _ = solve_manifold_point(SpectralField(np.eye(8)[0] * 0.2), pc, ConstantNonlinearity(g))
    k = np.arange(2, 9)
    record("perron_constant_source", np.abs(mval.coeffs[1:] - g[1:] / k**2).max(), 1e-8)
    traj = integrate_burgers(SpectralField(np.eye(8)[0]), SimConfig(1e-3, 0.5, nonlinear=False))
    record("heat_decay", abs(traj.states[-1, 0] - np.exp(-0.5)), 1e-8)
    return checks


def cmd_selftest(cfg, out):
    checks = selftest_checks(cfg["seed"])
    out.json("selftest.json", {"seed": cfg["seed"], "checks": checks})
    failed = [c["name"] for c in checks if not c["passed"]]
    if failed:
        raise PerronError("selftest failed: " + ", ".join(failed))
    return {"passed": len(checks)}


HANDLERS = {
    "simulate": cmd_simulate,
    "roundtrip": cmd_roundtrip,
    "gaps": cmd_gaps,
    "manifold": cmd_manifold,
    "jets": cmd_jets,
    "reduce": cmd_reduce,
    "track": cmd_track,
    "selftest": cmd_selftest,
}

FLAGS = {
    "n_max": ("--n-max",),
    "grid_m": ("--grid-m",),
    "dt": ("--dt",),
    "t_end": ("--t-end",),
    "K": ("--K",),
    "r": ("--r",),
    "R_big": ("--R-big",),
    "n_order": ("--n", "--n-order"),
    "N_cap": ("--N-cap",),
    "seed": ("--seed",),
    "theta_policy": ("--theta-policy",),
    "fp_tol": ("--fp-tol",),
    "T_horizon": ("--T-horizon",),
    "output_dir": ("--output-dir",),
    "g1": ("--g1",),
    "L1": ("--L1",),
    "L2": ("--L2",),
    "samples": ("--samples",),
    "perron_dt": ("--perron-dt",),
    "radius": ("--radius",),
    "p": ("--p",),
    "perturbation": ("--perturbation",),
}


def build_parser(command: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog=f"inertia {command}")
    ap.add_argument("--config", help="flat key = value settings file")
    for key, flags in FLAGS.items():
        ap.add_argument(*flags, dest=key, default=None, metavar=key.upper())
    return ap


@contextlib.contextmanager
def thread_limit():
    """Cap BLAS worker threads at ``INERTIA_THREADS`` when it is set."""
    raw = os.environ.get("INERTIA_THREADS")
    if not raw:
        yield
        return
    try:
        limit = int(raw)
    except ValueError:
        raise ConfigError(f"INERTIA_THREADS must be an integer, got {raw!r}") from None
    if limit < 1:
        raise ConfigError("INERTIA_THREADS must be >= 1")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=limit):
        yield


def run_command(argv) -> int:
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: inertia {" + ",".join(COMMANDS) + "} [flags]", file=sys.stderr)
        return EXIT_OK if argv else EXIT_USAGE
    command, rest = argv[0], argv[1:]
    if command not in HANDLERS:
        print(f"inertia: unknown subcommand {command!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = build_parser(command).parse_args(rest)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    try:
        cfg = resolve_config(args)
    except OSError as e:
        print(f"inertia: cannot read config: {e}", file=sys.stderr)
        return EXIT_NOINPUT
    except ConfigError as e:
        print(f"inertia: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    out = Outputs(cfg["output_dir"])
    try:
        with thread_limit():
            result = HANDLERS[command](cfg, out)
    except (PerronError, DiffeoError, BlowUpError, JetError) as e:
        print(f"inertia: numerical failure: {e}", file=sys.stderr)
        out.manifest(command, cfg)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"inertia: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    out.manifest(command, cfg)
    print(json.dumps(result, indent=2, sort_keys=True, default=_f))
    return EXIT_OK


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
