"""Time-stepping drivers: Nanbu-Babovsky and Bird schemes in deterministic,
stochastic-Galerkin, and Monte-Carlo-in-z modes.

One Nanbu-Babovsky step selects N_c = sround(rho N dt / (2 epsilon)) disjoint
pairs from a uniform random permutation and collides each selected pair once;
unselected particles are untouched, so the scheme requires rho dt <= epsilon.
Bird's no-time-counter scheme instead advances a persistent collision clock
by dt_c = 2 epsilon / (rho N) per collision, colliding one uniformly random
pair at a time (recollisions allowed) until the clock passes the step end.

All randomness is drawn from counter-based streams keyed by
(seed, step, pair, draw), so runs replay bit-exactly and the collision tree
is independent of the expansion order.  With log_mode="record" every
collision (step, i, j, r1, r2) is retained; "replay" consumes a recorded
tree instead of drawing pairs.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, replace
from typing import Callable, Union

import numpy as np

from . import observables, rng
from ._backend import BACKEND, core
from .basis import PolyBasis, gauss_nodes
from .kinetics import KernelSpec
from .observables import ObservableSeries
from .sgproj import CollisionLog, sg_collide_batch

__all__ = [
    "Deterministic",
    "StochasticGalerkin",
    "MonteCarloZ",
    "SimConfig",
    "Ensemble",
    "ConfigError",
    "ConservationError",
    "ObserverError",
    "RunDiagnostics",
    "nb_step",
    "bird_step",
    "run",
    "mc_z_run",
]


class ConfigError(ValueError):
    """Invalid simulation configuration."""


class ConservationError(RuntimeError):
    """A conserved quantity drifted beyond tolerance; the run is aborted."""


class ObserverError(RuntimeError):
    """An observer raised; ``series`` carries the partial output."""

    def __init__(self, message: str, series: ObservableSeries):
        super().__init__(message)
        self.series = series


@dataclass(frozen=True)
class Deterministic:
    kind: str = "deterministic"


@dataclass(frozen=True)
class StochasticGalerkin:
    order: int
    n_quad: int = 64
    kind: str = "sg"

    def __post_init__(self):
        if self.order < 0:
            raise ConfigError("expansion order must be >= 0")
        if self.n_quad < max(1, self.order + 1):
            raise ConfigError("need at least order + 1 quadrature nodes")


@dataclass(frozen=True)
class MonteCarloZ:
    samples: int
    kind: str = "mcz"

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError("need at least one z sample")


Mode = Union[Deterministic, StochasticGalerkin, MonteCarloZ]


@dataclass(frozen=True)
class SimConfig:
    """Full run description; validated on construction."""

    n_particles: int
    dt: float
    t_end: float
    epsilon: float
    kernel: KernelSpec
    rho: float = 1.0
    scheme: str = "nb"
    mode: Mode = Deterministic()
    seed: int = 0
    log_mode: str = "off"
    log_path: str | None = None
    observe_every: int = 1

    def __post_init__(self):
        if self.n_particles < 2:
            raise ConfigError("need at least two particles")
        if self.dt < 0:
            raise ConfigError("dt must be >= 0")
        if self.dt == 0 and self.t_end > 0:
            raise ConfigError("dt = 0 cannot reach t_end > 0")
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        if self.scheme not in ("nb", "bird"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.log_mode not in ("off", "record", "replay"):
            raise ConfigError(f"unknown log mode {self.log_mode!r}")
        if self.log_mode == "replay" and self.log_path is None:
            raise ConfigError("replay needs a log path")
        if self.observe_every < 1:
            raise ConfigError("observe_every must be >= 1")
        if self.scheme == "nb" and self.rho * self.dt > self.epsilon * (1 + 1e-12):
            raise ConfigError(
                "Nanbu-Babovsky requires rho*dt <= epsilon "
                f"(got rho*dt = {self.rho * self.dt}, epsilon = {self.epsilon})"
            )

    @property
    def n_steps(self) -> int:
        if self.t_end == 0:
            return 0
        return int(round(self.t_end / self.dt))


@dataclass
class RunDiagnostics:
    collisions: int = 0
    skipped_pairs: int = 0
    q_floor_clamps: int = 0
    wall_time: float = 0.0


@dataclass
class Ensemble:
    """Particle state: velocities (N, 3) or gPC coefficients (N, M+1, 3)."""

    kind: str                 # "deterministic" | "sg"
    data: np.ndarray
    time: float = 0.0
    step: int = 0
    t_bird: float = 0.0       # persistent Bird collision clock

    @classmethod
    def deterministic(cls, velocities: np.ndarray) -> "Ensemble":
        v = np.ascontiguousarray(velocities, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("velocities must have shape (N, 3)")
        return cls(kind="deterministic", data=v)

    @classmethod
    def stochastic_galerkin(cls, coeffs: np.ndarray) -> "Ensemble":
        c = np.ascontiguousarray(coeffs, dtype=np.float64)
        if c.ndim != 3 or c.shape[2] != 3:
            raise ValueError("coefficients must have shape (N, M+1, 3)")
        return cls(kind="sg", data=c)

    @property
    def n_particles(self) -> int:
        return self.data.shape[0]

    @property
    def order(self) -> int:
        if self.kind != "sg":
            raise ValueError("order defined only for sG ensembles")
        return self.data.shape[1] - 1

    def copy(self) -> "Ensemble":
        return Ensemble(self.kind, self.data.copy(), self.time, self.step, self.t_bird)


def _check_mode(ens: Ensemble, cfg: SimConfig) -> None:
    mode = cfg.mode
    if isinstance(mode, Deterministic) and ens.kind != "deterministic":
        raise ConfigError("deterministic mode needs a velocity ensemble")
    if isinstance(mode, StochasticGalerkin):
        if ens.kind != "sg" or ens.data.shape[1] != mode.order + 1:
            raise ConfigError("sG mode needs coefficients of shape (N, M+1, 3)")
    if ens.n_particles != cfg.n_particles:
        raise ConfigError("ensemble size does not match the configuration")


@functools.lru_cache(maxsize=8)
def _sg_tables(mode: StochasticGalerkin):
    quad = gauss_nodes(mode.n_quad)
    psi = PolyBasis(mode.order).table(quad.nodes)
    return quad, psi


def _collide_pairs(ens, cfg, idx_i, idx_j, r1, r2, diag, sequential):
    """Dispatch one batch of collisions to the right kernel."""
    mode = cfg.mode
    if ens.kind == "deterministic" or ens.data.shape[1] == 1:
        # order 0 carries no z dependence: reuse the deterministic kernels
        # on the k = 0 coefficients, which keeps M = 0 replays bit-identical
        view = ens.data if ens.kind == "deterministic" else ens.data[:, 0, :]
        fn = core.bird_chain if sequential else core.nb_collide_batch
        n_skip, n_clamp = fn(view, idx_i, idx_j, r1, r2, cfg.kernel)
    else:
        quad, psi = _sg_tables(mode)
        phi = 2.0 * np.pi * r2
        if sequential:
            n_skip = n_clamp = 0
            pos = 0
            n = idx_i.size
            while pos < n:
                seen: set[int] = set()
                end = pos
                while end < n:
                    a, b = int(idx_i[end]), int(idx_j[end])
                    if a in seen or b in seen:
                        break
                    seen.add(a)
                    seen.add(b)
                    end += 1
                s1, s2 = sg_collide_batch(
                    ens.data, idx_i[pos:end], idx_j[pos:end],
                    r1[pos:end], phi[pos:end], cfg.kernel, psi, quad.weights,
                )
                n_skip += s1
                n_clamp += s2
                pos = end
        else:
            n_skip, n_clamp = sg_collide_batch(
                ens.data, idx_i, idx_j, r1, phi, cfg.kernel, psi, quad.weights,
            )
    if diag is not None:
        diag.collisions += idx_i.size - n_skip
        diag.skipped_pairs += n_skip
        diag.q_floor_clamps += n_clamp
    return ens


def nb_step(ens: Ensemble, cfg: SimConfig, log: CollisionLog | None = None,
            replay: CollisionLog | None = None,
            diag: RunDiagnostics | None = None) -> Ensemble:
    """One Nanbu-Babovsky step: disjoint pairs, each collides at most once."""
    n = ens.n_particles
    step = ens.step
    if replay is not None:
        rec = replay.for_step(step)
        idx_i = rec["i"].astype(np.int64)
        idx_j = rec["j"].astype(np.int64)
        r1 = rec["r1"].copy()
        r2 = rec["r2"].copy()
    else:
        expected = cfg.rho * n * cfg.dt / (2.0 * cfg.epsilon)
        n_c = rng.sround(expected, rng.uniforms(cfg.seed, step, rng.PAIR_SROUND, 0))
        n_c = min(n_c, n // 2)
        keys = rng.uniforms(cfg.seed, step, rng.PAIR_PERM, np.arange(n))
        perm = np.argsort(keys, kind="stable")
        idx_i = perm[:n_c]
        idx_j = perm[n_c:2 * n_c]
        pair_ids = np.arange(n_c)
        r1 = rng.uniforms(cfg.seed, step, pair_ids, 0)
        r2 = rng.uniforms(cfg.seed, step, pair_ids, 1)
    if log is not None:
        log.append_step(step, idx_i, idx_j, r1, r2)
    _collide_pairs(ens, cfg, idx_i, idx_j, r1, r2, diag, sequential=False)
    ens.step += 1
    ens.time = ens.step * cfg.dt
    return ens


def bird_step(ens: Ensemble, cfg: SimConfig, log: CollisionLog | None = None,
              replay: CollisionLog | None = None,
              diag: RunDiagnostics | None = None) -> Ensemble:
    """One Bird step: single uniform pairs, recollisions allowed."""
    n = ens.n_particles
    step = ens.step
    dt_c = 2.0 * cfg.epsilon / (cfg.rho * n)
    t_next = (step + 1) * cfg.dt
    if replay is not None:
        rec = replay.for_step(step)
        idx_i = rec["i"].astype(np.int64)
        idx_j = rec["j"].astype(np.int64)
        r1 = rec["r1"].copy()
        r2 = rec["r2"].copy()
        ens.t_bird += dt_c * idx_i.size
    else:
        count = 0
        while ens.t_bird < t_next:
            ens.t_bird += dt_c
            count += 1
        pair_ids = np.arange(count)
        u_i = rng.uniforms(cfg.seed, step, pair_ids, 0)
        u_j = rng.uniforms(cfg.seed, step, pair_ids, 1)
        idx_i = np.minimum((u_i * n).astype(np.int64), n - 1)
        idx_j = np.minimum((u_j * (n - 1)).astype(np.int64), n - 2)
        idx_j += (idx_j >= idx_i).astype(np.int64)
        r1 = rng.uniforms(cfg.seed, step, pair_ids, 2)
        r2 = rng.uniforms(cfg.seed, step, pair_ids, 3)
    if log is not None:
        log.append_step(step, idx_i, idx_j, r1, r2)
    _collide_pairs(ens, cfg, idx_i, idx_j, r1, r2, diag, sequential=True)
    ens.step += 1
    ens.time = ens.step * cfg.dt
    return ens


def _default_observer(ens: Ensemble, cfg: SimConfig) -> dict:
    if ens.kind == "deterministic":
        mom = observables.moments(ens.data)
        p, e = observables.momentum_energy(ens.data)
        return {
            "m1": mom.m1,
            "temperature": mom.temperature,
            "t_dir": mom.t_dir,
            "m4": mom.m4,
            "momentum": p,
            "energy": e,
        }
    quad, psi = _sg_tables(cfg.mode)
    row = observables.node_moments(ens.data, psi)
    row["coeff_sum"] = observables.mode_sums(ens.data)
    return row


class _ConservationGuard:
    """Aborts a run when exactly-conserved quantities drift beyond guard bands."""

    _MOM_TOL = 1e-8
    _ENERGY_TOL = 1e-9

    def __init__(self, ens: Ensemble):
        if ens.kind == "deterministic":
            self.p0, self.e0 = observables.momentum_energy(ens.data)
            self.scale = max(1.0, np.sqrt(self.e0))
        else:
            self.sums0 = observables.mode_sums(ens.data)
            self.scale = max(1.0, float(np.abs(self.sums0).max()))

    def check(self, ens: Ensemble) -> None:
        if ens.kind == "deterministic":
            p, e = observables.momentum_energy(ens.data)
            if np.abs(p - self.p0).max() > self._MOM_TOL * self.scale:
                raise ConservationError(
                    f"momentum drift {np.abs(p - self.p0).max():.3e} at t={ens.time}"
                )
            if self.e0 > 0 and abs(e - self.e0) / self.e0 > self._ENERGY_TOL:
                raise ConservationError(
                    f"energy drift {abs(e - self.e0) / self.e0:.3e} at t={ens.time}"
                )
        else:
            drift = np.abs(observables.mode_sums(ens.data) - self.sums0).max()
            if drift > self._MOM_TOL * self.scale:
                raise ConservationError(
                    f"mode-sum drift {drift:.3e} at t={ens.time}"
                )


def run(cfg: SimConfig, init: Ensemble,
        observers: list[Callable[[Ensemble, SimConfig], dict]] | None = None,
        ) -> ObservableSeries:
    """Advance ``init`` to t_end, observing at the configured cadence.

    Returns the finalized series; a recorded collision log is attached as
    ``series.log``.  Conservation is guarded every observation.
    """
    if isinstance(cfg.mode, MonteCarloZ):
        raise ConfigError("use mc_z_run for Monte-Carlo-in-z configurations")
    _check_mode(init, cfg)
    ens = init
    weights = None
    if isinstance(cfg.mode, StochasticGalerkin):
        weights = gauss_nodes(cfg.mode.n_quad).weights
    series = ObservableSeries(weights=weights)
    series.meta.update(
        backend=BACKEND,
        scheme=cfg.scheme,
        n_particles=cfg.n_particles,
        seed=cfg.seed,
        n_steps=cfg.n_steps,
    )
    log = CollisionLog() if cfg.log_mode == "record" else None
    replay = None
    if cfg.log_mode == "replay":
        replay = (cfg.log_path if isinstance(cfg.log_path, CollisionLog)
                  else CollisionLog.load(cfg.log_path))
        if replay.max_index() >= cfg.n_particles:
            raise ConfigError("collision log indexes more particles than N")
    obs = observers if observers is not None else []
    guard = _ConservationGuard(ens)
    diag = RunDiagnostics()
    stepper = nb_step if cfg.scheme == "nb" else bird_step

    def observe() -> None:
        row = _default_observer(ens, cfg)
        try:
            for fn in obs:
                row.update(fn(ens, cfg))
        except Exception as exc:
            raise ObserverError(f"observer failed at t={ens.time}: {exc}",
                                series.finalize()) from exc
        series.append(ens.time, row)

    t_start = time.perf_counter()
    observe()
    n_steps = cfg.n_steps
    for n in range(n_steps):
        stepper(ens, cfg, log=log, replay=replay, diag=diag)
        if (n + 1) % cfg.observe_every == 0 or n + 1 == n_steps:
            observe()
            guard.check(ens)
    diag.wall_time = time.perf_counter() - t_start
    series.meta["diagnostics"] = diag
    series.log = log
    return series.finalize()


def mc_z_run(cfg: SimConfig, init_sampler: Callable[[float, int], Ensemble],
             observers=None) -> ObservableSeries:
    """Monte Carlo over the random parameter: independent deterministic runs.

    ``init_sampler(z, seed)`` must build the initial ensemble conditioned on
    z.  Scalar observables are aggregated into ``<name>_mean`` and
    ``<name>_var`` columns by plain sample averaging; the cost model
    N * samples is reported in the metadata.
    """
    if not isinstance(cfg.mode, MonteCarloZ):
        raise ConfigError("mc_z_run needs a MonteCarloZ mode")
    samples = cfg.mode.samples
    all_series: list[ObservableSeries] = []
    zs = []
    for m in range(samples):
        z_m = rng.uniforms(cfg.seed, rng.STEP_ZDRAW, m, 0)
        seed_m = rng.derive_seed(cfg.seed, m)
        sub = replace(cfg, mode=Deterministic(), seed=seed_m, log_mode="off")
        ens = init_sampler(z_m, seed_m)
        all_series.append(run(sub, ens, observers))
        zs.append(z_m)
    out = ObservableSeries()
    out.times = all_series[0].times
    for name, first in all_series[0].data.items():
        stacked = np.stack([s.data[name] for s in all_series])  # (S, n_t, ...)
        mean = stacked.mean(axis=0)
        var = (stacked * stacked).mean(axis=0) - mean * mean
        out.data[name + "_mean"] = mean
        out.data[name + "_var"] = var
    out.meta.update(
        backend=BACKEND,
        samples=samples,
        z_values=np.array(zs),
        cost=cfg.n_particles * samples,
        n_particles=cfg.n_particles,
        seed=cfg.seed,
    )
    return out
