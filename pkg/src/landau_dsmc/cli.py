"""The ``sim`` command line: configured runs, expansion-order sweeps, the
cost/error comparison against Monte Carlo sampling of z, and the kernel
property report.

Run configurations are JSON with a versioned schema; unknown keys are
rejected.  Exit codes: 0 success, 2 configuration error, 3 numerical
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, benchmarks, kinetics, rng, schedulers
from ._backend import BACKEND
from .basis import PolyBasis, gauss_nodes, legendre_P
from .kinetics import KernelSpec
from .observables import l2p_error_z
from .schedulers import (ConfigError, ConservationError, Deterministic,
                         Ensemble, MonteCarloZ, SimConfig, StochasticGalerkin,
                         mc_z_run, run)

SCHEMA_VERSION = 1

PRESETS: dict[str, dict] = {
    # relaxing isotropic exact solution, maxwell interaction
    "test1-bkw": {
        "N": 200_000, "dt": 0.1, "t_end": 10.0, "epsilon": 0.1, "seed": 20,
        "scheme": "nb",
        "kernel": {"surrogate": "tanh", "interaction": "maxwell"},
        "mode": {"kind": "deterministic"},
        "initial": {"kind": "bkw", "T": 1.0},
        "observe_every": 1,
    },
    # anisotropic-temperature relaxation, maxwell interaction
    "test2-trubnikov": {
        "N": 200_000, "dt": 0.1, "t_end": 4.0, "epsilon": 0.1, "seed": 21,
        "scheme": "nb",
        "kernel": {"surrogate": "tanh", "interaction": "maxwell"},
        "mode": {"kind": "deterministic"},
        "initial": {"kind": "ellipsoid", "T_x": 0.085, "T_y": 0.085, "T_z": 0.04},
        "observe_every": 1,
    },
    # relaxing solution with uncertain initial temperature
    "test3-bkw-uq": {
        "N": 100_000, "dt": 0.1, "t_end": 1.0, "epsilon": 0.1, "seed": 22,
        "scheme": "nb",
        "kernel": {"surrogate": "tanh", "interaction": "maxwell"},
        "mode": {"kind": "sg", "order": 5, "n_quad": 64},
        "initial": {"kind": "bkw", "T": [0.95, 0.1]},
        "observe_every": 1,
    },
    # coulomb interaction with uncertain anisotropic temperature
    "test4-coulomb-uq": {
        "N": 100_000, "dt": 0.1, "t_end": 1.0, "epsilon": 0.1, "seed": 23,
        "scheme": "nb",
        "kernel": {"surrogate": "tanh", "interaction": "coulomb"},
        "mode": {"kind": "sg", "order": 5, "n_quad": 64},
        "initial": {"kind": "ellipsoid", "T_x": [1.0, 0.05], "T_y": 0.75,
                     "T_z": 0.75},
        "observe_every": 1,
    },
    # cost/error comparison base case
    "test5-cost": {
        "N": 20_000, "dt": 0.1, "t_end": 1.0, "epsilon": 0.1, "seed": 24,
        "scheme": "nb",
        "kernel": {"surrogate": "tanh", "interaction": "maxwell"},
        "mode": {"kind": "sg", "order": 4, "n_quad": 64},
        "initial": {"kind": "bkw", "T": [0.95, 0.1]},
        "observe_every": 10,
    },
}

_TOP_KEYS = {
    "schema", "preset", "N", "dt", "t_end", "epsilon", "rho", "seed", "scheme",
    "kernel", "mode", "initial", "observe_every", "log_mode", "log_path",
    "out_dir",
}
_KERNEL_KEYS = {"surrogate", "interaction", "c0", "charge", "eps0", "m_r",
                "log_lambda", "q_floor"}
_MODE_KEYS = {
    "deterministic": {"kind"},
    "sg": {"kind", "order", "n_quad"},
    "mcz": {"kind", "samples"},
}
_INITIAL_KEYS = {
    "bkw": {"kind", "T"},
    "ellipsoid": {"kind", "T_x", "T_y", "T_z"},
    "bimodal": {"kind", "T"},
    "bump_on_tail": {"kind", "T1"},
}


def _reject_unknown_kinded(section: dict, table: dict, where: str) -> None:
    kind = section.get("kind")
    if kind not in table:
        raise ConfigError(f"unknown {where} kind {kind!r}")
    _reject_unknown(section, table[kind], where)


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def load_config(source: dict | str | Path) -> dict:
    """Load, merge with any preset, and validate a run configuration."""
    if isinstance(source, (str, Path)):
        with open(source) as f:
            raw = json.load(f)
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "configuration")
    if raw.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {raw.get('schema')}")
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigError(
                f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
            )
        merged = json.loads(json.dumps(PRESETS[name]))  # deep copy
        for key, val in raw.items():
            if key in ("preset", "schema"):
                continue
            if isinstance(val, dict) and isinstance(merged.get(key), dict):
                merged[key].update(val)
            else:
                merged[key] = val
        merged["preset"] = name
        raw = merged
    for key in ("N", "dt", "t_end", "epsilon", "kernel", "mode", "initial"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    _reject_unknown(raw["kernel"], _KERNEL_KEYS, "kernel")
    _reject_unknown_kinded(raw["mode"], _MODE_KEYS, "mode")
    _reject_unknown_kinded(raw["initial"], _INITIAL_KEYS, "initial")
    raw.setdefault("schema", SCHEMA_VERSION)
    return raw


def build_kernel(section: dict, epsilon: float) -> KernelSpec:
    kwargs = {k: v for k, v in section.items() if k not in ("surrogate", "interaction")}
    return KernelSpec(section["surrogate"], section["interaction"],
                      epsilon=epsilon, **kwargs)


def build_mode(section: dict):
    kind = section.get("kind")
    if kind == "deterministic":
        return Deterministic()
    if kind == "sg":
        if "order" not in section:
            raise ConfigError("sg mode needs 'order'")
        return StochasticGalerkin(order=section["order"],
                                  n_quad=section.get("n_quad", 64))
    if kind == "mcz":
        if "samples" not in section:
            raise ConfigError("mcz mode needs 'samples'")
        return MonteCarloZ(samples=section["samples"])
    raise ConfigError(f"unknown mode kind {kind!r}")


def build_initial(section: dict) -> benchmarks.InitialCondition:
    kind = section.get("kind")
    try:
        if kind == "bkw":
            return benchmarks.bkw_ic(section.get("T", 1.0))
        if kind == "ellipsoid":
            return benchmarks.ellipsoid_ic(section["T_x"], section["T_y"],
                                           section["T_z"])
        if kind == "bimodal":
            return benchmarks.bimodal_ic(section.get("T", (0.1, 0.2)))
        if kind == "bump_on_tail":
            return benchmarks.bump_on_tail_ic(section.get("T1", (0.2, 0.2)))
    except KeyError as exc:
        raise ConfigError(f"initial condition {kind!r} missing key {exc}") from exc
    raise ConfigError(f"unknown initial condition kind {kind!r}")


def build_sim_config(cfg: dict, overrides: dict | None = None) -> SimConfig:
    cfg = dict(cfg)
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig(
        n_particles=cfg["N"],
        dt=cfg["dt"],
        t_end=cfg["t_end"],
        epsilon=cfg["epsilon"],
        kernel=build_kernel(cfg["kernel"], cfg["epsilon"]),
        rho=cfg.get("rho", 1.0),
        scheme=cfg.get("scheme", "nb"),
        mode=build_mode(cfg["mode"]),
        seed=cfg.get("seed", 0),
        log_mode=cfg.get("log_mode", "off"),
        log_path=cfg.get("log_path"),
        observe_every=cfg.get("observe_every", 1),
    )


def build_ensemble(cfg: SimConfig, ic: benchmarks.InitialCondition) -> Ensemble:
    if isinstance(cfg.mode, StochasticGalerkin):
        coeffs = benchmarks.sg_initialize(
            ic, cfg.n_particles, PolyBasis(cfg.mode.order),
            gauss_nodes(cfg.mode.n_quad), cfg.seed,
        )
        return Ensemble.stochastic_galerkin(coeffs)
    return Ensemble.deterministic(
        benchmarks.sample_initial(ic, cfg.n_particles, cfg.seed)
    )


def write_bundle(out_dir, cfg_dict: dict, series, wall_time: float) -> None:
    """Persist results: config echo, metadata, CSV series, optional log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as f:
        json.dump(cfg_dict, f, indent=2, sort_keys=True)
        f.write("\n")
    diag = series.meta.get("diagnostics")
    meta = {
        "version": __version__,
        "backend": BACKEND,
        "wall_time_s": wall_time,
        "collisions": getattr(diag, "collisions", None),
        "skipped_pairs": getattr(diag, "skipped_pairs", None),
        "q_floor_clamps": getattr(diag, "q_floor_clamps", None),
        "seed": series.meta.get("seed"),
        "cost": series.meta.get("cost"),
    }
    with open(out / "metadata.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    series.write_csv(out)
    if series.log is not None:
        series.log.save(out / "collisions.log")


def _apply_thread_limit(threads: int | None) -> None:
    if threads is None:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(threads)
    except ImportError:
        print(f"warning: threadpoolctl unavailable, --threads {threads} ignored",
              file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg_dict = load_config(args.config)
    overrides = {"seed": args.seed, "log_path": args.replay_log}
    if args.record_log:
        overrides["log_mode"] = "record"
    elif args.replay_log:
        overrides["log_mode"] = "replay"
    sim = build_sim_config(cfg_dict, overrides)
    ic = build_initial(cfg_dict["initial"])
    out_dir = args.out or cfg_dict.get("out_dir")
    cfg_echo = dict(cfg_dict)
    cfg_echo["seed"] = sim.seed
    t0 = time.perf_counter()
    try:
        if isinstance(sim.mode, MonteCarloZ):
            def sampler(z, seed):
                return Ensemble.deterministic(
                    benchmarks.sample_initial(ic, sim.n_particles, seed, z=z))

            series = mc_z_run(sim, sampler)
        else:
            series = run(sim, build_ensemble(sim, ic))
    except schedulers.ObserverError as exc:
        # flush whatever was observed before the failure
        if out_dir:
            write_bundle(out_dir, cfg_echo, exc.series,
                         time.perf_counter() - t0)
        raise
    wall = time.perf_counter() - t0
    if out_dir:
        write_bundle(out_dir, cfg_echo, series, wall)
        if args.record_log and series.log is not None:
            target = Path(args.record_log)
            if str(target) != str(Path(out_dir) / "collisions.log"):
                series.log.save(target)
    elif args.record_log and series.log is not None:
        series.log.save(args.record_log)
    diag = series.meta.get("diagnostics")
    ncoll = getattr(diag, "collisions", series.meta.get("cost", "n/a"))
    print(f"run complete: t_end={sim.t_end} collisions={ncoll} "
          f"wall={wall:.2f}s backend={BACKEND}")
    return 0


def _temperature_at_nodes(series) -> np.ndarray:
    return series.data["temperature"][-1]


def cmd_sweep_m(args) -> int:
    """Record a high-order reference, replay at each order, report errors."""
    cfg_dict = load_config(args.config)
    if cfg_dict["mode"].get("kind") != "sg":
        raise ConfigError("sweep-m needs an sg-mode configuration")
    orders = [int(x) for x in args.m.split(",")]
    ref_order = args.ref
    base = dict(cfg_dict)
    if args.seed is not None:
        base["seed"] = args.seed

    ref_cfg = json.loads(json.dumps(base))
    ref_cfg["mode"]["order"] = ref_order
    ref_sim = build_sim_config(ref_cfg, {"log_mode": "record"})
    ic = build_initial(base["initial"])
    print(f"reference run: order={ref_order} N={ref_sim.n_particles} "
          f"steps={ref_sim.n_steps}")
    ref_series = run(ref_sim, build_ensemble(ref_sim, ic))
    t_ref = _temperature_at_nodes(ref_series)
    weights = gauss_nodes(ref_sim.mode.n_quad).weights
    log = ref_series.log

    rows = []
    for order in orders:
        sub_cfg = json.loads(json.dumps(base))
        sub_cfg["mode"]["order"] = order
        sim = build_sim_config(sub_cfg, {"log_mode": "replay", "log_path": log})
        series = run(sim, build_ensemble(sim, ic))
        err = l2p_error_z(_temperature_at_nodes(series), t_ref, weights)
        rows.append((order, err))
        print(f"  order {order:3d}: L2_p temperature error {err:.6e}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep_m.csv", "w", newline="") as f:
            f.write("order,l2p_error\r\n")
            for order, err in rows:
                f.write(f"{order},{err!r}\r\n")
    return 0


def cmd_compare_mc(args) -> int:
    """Cost/error table: coefficient expansions vs Monte Carlo sampling of z."""
    cfg_dict = load_config(args.config)
    orders = [int(x) for x in args.m.split(",")]
    sample_counts = [int(x) for x in args.samples.split(",")]
    base = dict(cfg_dict)
    if args.seed is not None:
        base["seed"] = args.seed
    ic = build_initial(base["initial"])
    n = base["N"]

    # reference: collocation at the quadrature nodes with a larger ensemble
    ref_nodes = gauss_nodes(args.ref_nodes)
    n_ref = args.ref_particles or 4 * n
    ref_vals = []
    for qi, z in enumerate(ref_nodes.nodes):
        sub = dict(base)
        sub["mode"] = {"kind": "deterministic"}
        sub["N"] = n_ref
        sim = build_sim_config(sub, {"seed": rng.derive_seed(base.get("seed", 0),
                                                             10_000 + qi)})
        ens = Ensemble.deterministic(
            benchmarks.sample_initial(ic, n_ref, sim.seed, z=float(z)))
        series = run(sim, ens)
        ref_vals.append(series.data["m4"][-1])
    ref_m4 = float(np.dot(ref_nodes.weights, ref_vals))
    print(f"collocation reference: E_z[M4] = {ref_m4:.6f} "
          f"({args.ref_nodes} nodes, N={n_ref})")

    rows = []
    for order in orders:
        sub = json.loads(json.dumps(base))
        sub["mode"] = {"kind": "sg", "order": order,
                       "n_quad": base["mode"].get("n_quad", 64)}
        sim = build_sim_config(sub)
        series = run(sim, build_ensemble(sim, ic))
        e_m4 = float(series.expectation("m4")[-1])
        cost = n * (order + 1) ** 2
        rows.append(("sg", order, cost, abs(e_m4 - ref_m4)))
        print(f"  sg    order={order:3d} cost={cost:10d} error={rows[-1][3]:.6e}")
    for count in sample_counts:
        errs = []
        for rep in range(args.replicates):
            sub = dict(base)
            sub["mode"] = {"kind": "mcz", "samples": count}
            rep_seed = rng.derive_seed(base.get("seed", 0), 777 + rep)
            sim = build_sim_config(sub, {"seed": rep_seed})

            def sampler(z, seed):
                return Ensemble.deterministic(
                    benchmarks.sample_initial(ic, n, seed, z=z))

            series = mc_z_run(sim, sampler)
            errs.append(float(series.data["m4_mean"][-1]) - ref_m4)
        rms = float(np.sqrt(np.mean(np.square(errs))))
        cost = n * count
        rows.append(("mc", count, cost, rms))
        print(f"  mc  samples={count:4d} cost={cost:10d} error={rms:.6e} "
              f"(rms over {args.replicates})")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "compare_mc.csv", "w", newline="") as f:
            f.write("method,parameter,cost,error\r\n")
            for method, param, cost, err in rows:
                f.write(f"{method},{param},{cost},{err!r}\r\n")
    return 0


# -- kernel property report --------------------------------------------------

def _exp_kernel_moment(tau0_val: float, fn, n_nodes: int = 256) -> float:
    """E[fn(cos theta)] under the exponential surrogate, by quadrature.

    Moderate concentration integrates the density directly on [-1, 1].  For
    large A the density is a boundary layer at mu = 1; the substitution
    t = A (1 - mu) maps it to e^{-t} on [0, 2A] and the tail beyond 2A is
    below e^{-60}, so Gauss-Laguerre applies.
    """
    a = kinetics.solve_A(tau0_val)
    if a <= 30.0:
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        dens = a / (2.0 * np.sinh(a)) * np.exp(x * a)
        return float(np.sum(w * dens * fn(x)))
    x, w = np.polynomial.laguerre.laggauss(48)
    mu = 1.0 - x / a
    return float(np.sum(w * fn(mu)) / (1.0 - np.exp(-2.0 * a)))


def kernel_check_report() -> tuple[list[str], bool]:
    """Run the kernel property suite; returns (report lines, all passed)."""
    lines = []
    ok = True

    def check(name, value, bound):
        nonlocal ok
        passed = value < bound
        ok &= passed
        lines.append(f"[{'PASS' if passed else 'FAIL'}] {name}: "
                     f"{value:.3e} (bound {bound:.1e})")

    # normalization: exponential density integrates to 1 over the sphere
    for t0 in (0.05, 0.3, 1.0):
        a = kinetics.solve_A(t0)
        x, w = np.polynomial.legendre.leggauss(200)
        dens = a / (4.0 * np.pi * np.sinh(a)) * np.exp(x * a)
        check(f"exp normalization tau0={t0}", abs(2.0 * np.pi * w @ dens - 1.0),
              1e-10)
    # deterministic surrogates stay in [-1, 1]
    for surrogate in ("linear", "tanh"):
        spec = KernelSpec(surrogate, "maxwell", epsilon=0.2)
        taus = np.linspace(0.0, 5.0, 101)
        ang = kinetics.sample_angles(spec, taus, np.full(101, 0.3),
                                     np.full(101, 0.6))
        check(f"{surrogate} cos bounds", float(np.abs(ang.cos_theta).max()) - 1.0,
              1e-15)
    # grazing limit: deflection vanishes with tau0
    t0 = 1e-8
    for surrogate in ("linear", "tanh"):
        spec = KernelSpec(surrogate, "maxwell", epsilon=0.2)
        c = kinetics.sample_angles(spec, t0, 0.5, 0.5).cos_theta
        check(f"{surrogate} grazing limit", 1.0 - c, 3e-8)
    check("exp grazing limit (mean deflection)",
          1.0 - _exp_kernel_moment(t0, lambda mu: mu), 3e-8)
    # small-tau0 transfer rate: (1 - P_l(cos)) / tau0 -> l (l + 1)
    t0 = 1e-6
    for surrogate in ("linear", "tanh", "exp"):
        spec = KernelSpec(surrogate, "maxwell", epsilon=0.2)
        worst = 0.0
        for l in range(1, 6):
            if surrogate == "exp":
                val = _exp_kernel_moment(t0, lambda mu: 1.0 - legendre_P(l, mu))
            else:
                c = kinetics.sample_angles(spec, t0, 0.5, 0.5).cos_theta
                val = 1.0 - legendre_P(l, c)
            worst = max(worst, abs(val / t0 - l * (l + 1)) / (l * (l + 1)))
        check(f"{surrogate} transfer-rate limit l=1..5", worst, 1e-4)
    # exponential surrogate small-tau0 mean deflection
    t0 = 1e-3
    mean_c = _exp_kernel_moment(t0, lambda mu: mu)
    check("exp mean deflection vs 1-2*tau0",
          abs(mean_c - (1.0 - 2.0 * t0)) / (2.0 * t0), 1e-2)
    # sampled mean against the quadrature mean
    t0 = 0.3
    spec = KernelSpec("exp", "maxwell", epsilon=0.2)
    n_draws = 1_000_000
    r1 = rng.uniforms(1234, 0, np.arange(n_draws), 0)
    c = kinetics.sample_angles(spec, np.full(n_draws, t0), r1,
                               np.zeros(n_draws)).cos_theta
    mean_q = _exp_kernel_moment(t0, lambda mu: mu)
    var_q = _exp_kernel_moment(t0, lambda mu: mu * mu) - mean_q**2
    se = np.sqrt(var_q / n_draws)
    check("exp sampling vs quadrature mean (3 MC s.e.)",
          abs(float(c.mean()) - mean_q), 3 * se)
    return lines, ok


def cmd_kernel_check(args) -> int:
    lines, ok = kernel_check_report()
    print("\n".join(lines))
    print("kernel-check:", "all properties hold" if ok else "FAILURES above")
    return 0 if ok else 3


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sim",
        description="Particle solver for collisional plasma relaxation "
                    "with uncertainty propagation.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=None,
                        help="limit BLAS threads (best effort)")

    pr = sub.add_parser("run", parents=[common],
                        help="execute one configured simulation")
    pr.add_argument("config", help="JSON configuration file")
    pr.add_argument("--record-log", default=None,
                    help="record the collision tree to this file")
    pr.add_argument("--replay-log", default=None,
                    help="replay a recorded collision tree")
    pr.set_defaults(fn=cmd_run)

    ps = sub.add_parser("sweep-m", parents=[common],
                        help="expansion-order convergence on a frozen tree")
    ps.add_argument("config")
    ps.add_argument("--m", default="1,2,4,8,16",
                    help="comma-separated expansion orders")
    ps.add_argument("--ref", type=int, default=30, help="reference order")
    ps.set_defaults(fn=cmd_sweep_m)

    pc = sub.add_parser("compare-mc", parents=[common],
                        help="cost/error of expansions vs z-sampling")
    pc.add_argument("config")
    pc.add_argument("--m", default="1,2,4,8")
    pc.add_argument("--samples", default="4,16,64,256")
    pc.add_argument("--replicates", type=int, default=8)
    pc.add_argument("--ref-nodes", type=int, default=20)
    pc.add_argument("--ref-particles", type=int, default=None)
    pc.set_defaults(fn=cmd_compare_mc)

    pk = sub.add_parser("kernel-check", parents=[common],
                        help="verify the surrogate kernel properties")
    pk.set_defaults(fn=cmd_kernel_check)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    _apply_thread_limit(args.threads)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ConservationError, schedulers.ObserverError) as exc:
        print(f"numerical invariant violation: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"configuration error: invalid JSON ({exc})", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
