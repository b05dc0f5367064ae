"""Time-stepping simulator for the N-particle integrate-and-fire system.

State is kept in the reformulated variables (Z, M) with X = Z - M.
Each grid step is an Euler-Maruyama move of every Z^i followed, when
some X^i has reached 1, by one physical cascade: every Z^i moves by the
same kick alpha*|Gamma|/N and M^i grows by one for i in Gamma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .cascade import cascade_counts, physical_criterion_check, threshold
from .errors import ConfigError, SimulationError
from .paths import CadlagPath
from .rng import NoiseStreams, init_generator

DRIFT_KINDS = ("zero", "constant", "affine", "piecewise_linear")
INIT_KINDS = ("point", "uniform", "truncated_gaussian", "explicit")
HIST_BINS = 20


@dataclass(frozen=True)
class DriftSpec:
    kind: str = "zero"
    c: float = 0.0
    a: float = 0.0
    b: float = 0.0
    breakpoints: tuple = ()

    def validate(self):
        if self.kind not in DRIFT_KINDS:
            raise ConfigError(f"unknown drift kind {self.kind!r}", field="drift")
        if self.kind == "piecewise_linear":
            pts = np.asarray(self.breakpoints, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise ConfigError("piecewise_linear drift needs >= 2 (x, y) pairs",
                                  field="drift_breakpoints")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ConfigError("drift breakpoints must have increasing x",
                                  field="drift_breakpoints")

    @property
    def lipschitz(self) -> float:
        if self.kind == "affine":
            return abs(self.a)
        if self.kind == "piecewise_linear":
            pts = np.asarray(self.breakpoints, dtype=float)
            return float(np.max(np.abs(np.diff(pts[:, 1]) / np.diff(pts[:, 0]))))
        return 0.0

    def __call__(self, x):
        x = np.minimum(np.asarray(x, dtype=float), 1.0)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "constant":
            return np.full_like(x, self.c)
        if self.kind == "affine":
            return self.a * x + self.b
        pts = np.asarray(self.breakpoints, dtype=float)
        return np.interp(x, pts[:, 0], pts[:, 1])


def drift_eval(spec: DriftSpec, x):
    """b(x), with arguments above the threshold clamped to b(1)."""
    out = spec(x)
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class InitialLaw:
    kind: str = "point"
    x0: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    mu: float = 0.0
    sigma: float = 1.0
    values: tuple = ()
    epsilon0: float = 0.01

    def validate(self, n: int | None = None):
        if self.kind not in INIT_KINDS:
            raise ConfigError(f"unknown initial law {self.kind!r}", field="init")
        if not self.epsilon0 > 0:
            raise ConfigError("epsilon0 must be positive", field="epsilon0")
        cap = 1.0 - self.epsilon0 + 1e-12
        if self.kind == "point" and self.x0 > cap:
            raise ConfigError("point mass above 1 - epsilon0", field="init_x0")
        if self.kind == "uniform":
            if not self.lo < self.hi:
                raise ConfigError("uniform law needs lo < hi", field="init_lo")
            if self.hi > cap:
                raise ConfigError("uniform support exceeds 1 - epsilon0", field="init_hi")
        if self.kind == "truncated_gaussian":
            if not self.sigma > 0:
                raise ConfigError("sigma must be positive", field="init_sigma")
            if self.hi > cap:
                raise ConfigError("truncation point exceeds 1 - epsilon0", field="init_hi")
        if self.kind == "explicit":
            vals = np.asarray(self.values, dtype=float)
            if vals.size == 0 or np.any(vals > cap):
                raise ConfigError("explicit initial values must be <= 1 - epsilon0",
                                  field="init_values")
            if n is not None and vals.size != n:
                raise ConfigError(f"{vals.size} explicit initial values for n = {n}",
                                  field="init_values")


def sample_initial(init: InitialLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    init.validate(n)
    if init.kind == "point":
        return np.full(n, float(init.x0))
    if init.kind == "explicit":
        return np.array(init.values, dtype=float)
    u = rng.random(n)
    if init.kind == "uniform":
        return init.lo + (init.hi - init.lo) * u
    # upper-truncated gaussian by inverse CDF
    top = ndtr((init.hi - init.mu) / init.sigma)
    x = init.mu + init.sigma * ndtri(u * top)
    return np.minimum(x, init.hi)


@dataclass(frozen=True)
class SimConfig:
    n: int
    horizon: float
    dt: float
    alpha: float
    drift: DriftSpec = field(default_factory=DriftSpec)
    init: InitialLaw = field(default_factory=InitialLaw)
    noise_scale: float = 1.0
    seed: int = 0
    record_trajectories: bool = False
    record_count: int = 100
    capture_fraction: float = 0.05

    def validate(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ConfigError("n must be a positive integer", field="n")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive", field="horizon")
        if not self.dt > 0:
            raise ConfigError("dt must be positive", field="dt")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)", field="alpha")
        if not self.noise_scale >= 0:
            raise ConfigError("noise_scale must be >= 0", field="noise_scale")
        if self.record_count < 0:
            raise ConfigError("record_count must be >= 0", field="record_count")
        self.steps  # raises on a horizon that is not a multiple of dt
        self.drift.validate()
        self.init.validate(self.n)

    @property
    def steps(self) -> int:
        steps = int(round(self.horizon / self.dt))
        if steps < 1 or abs(steps * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ConfigError("horizon must be an integer multiple of dt", field="dt")
        return steps

    @property
    def canonical(self) -> bool:
        return self.noise_scale in (0.0, 1.0)

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=int(seed))


@dataclass(eq=False)
class CascadeRecord:
    time: float
    step: int
    gamma: np.ndarray
    round_sizes: list
    pre_hist: list
    criterion_pass: bool
    criterion_margin: float
    n: int
    pre_potentials: np.ndarray | None = None

    @property
    def gamma_size(self) -> int:
        return len(self.gamma)

    @property
    def jump_fraction(self) -> float:
        return len(self.gamma) / self.n

    def to_json(self) -> dict:
        return {
            "t": float(self.time),
            "gamma_size": self.gamma_size,
            "jump_fraction": self.jump_fraction,
            "rounds": list(self.round_sizes),
            "pre_hist": list(self.pre_hist),
            "criterion_pass": bool(self.criterion_pass),
        }


@dataclass(eq=False)
class SimOutput:
    config: SimConfig
    ebar: CadlagPath
    ebar_sq: np.ndarray
    events: list
    moments: dict
    recorded: np.ndarray
    z_paths: list | None = None
    m_paths: list | None = None

    @property
    def times(self) -> np.ndarray:
        return self.ebar.times

    @property
    def n(self) -> int:
        return self.config.n

    def ebar_se(self) -> np.ndarray:
        """Pointwise Monte Carlo standard error of ebar across particles."""
        var = np.maximum(self.ebar_sq - self.ebar.values ** 2, 0.0)
        return np.sqrt(var / self.n)

    def max_cascade_fraction(self) -> float:
        return max((e.jump_fraction for e in self.events), default=0.0)


def _pre_hist(x: np.ndarray, alpha: float) -> list:
    lo = 1.0 - alpha
    clipped = np.minimum(x[x >= lo], 1.0)
    counts, _ = np.histogram(clipped, bins=HIST_BINS, range=(lo, 1.0))
    return counts.tolist()


def run_particle_system(config: SimConfig, threads: int = 1) -> SimOutput:
    config.validate()
    n, alpha, dt = config.n, config.alpha, config.dt
    steps = config.steps
    times = np.linspace(0.0, config.horizon, steps + 1)
    dt = config.horizon / steps

    z = sample_initial(config.init, n, init_generator(config.seed))
    m = np.zeros(n)
    noise = (NoiseStreams(config.seed, n, threads=threads)
             if config.noise_scale > 0 else None)
    noise_amp = math.sqrt(dt) * config.noise_scale
    drift = config.drift
    has_drift = drift.kind != "zero"

    ebar = np.zeros(steps + 1)
    ebar_sq = np.zeros(steps + 1)
    spikes_total = 0
    spikes_sq_total = 0.0

    rec = (np.arange(min(config.record_count, n)) if config.record_trajectories
           else np.arange(0))
    z_rec = np.empty((steps + 1, len(rec)))
    m_rec = np.empty((steps + 1, len(rec)))
    z_left = {}
    z_rec[0] = z[rec]
    m_rec[0] = 0.0
    sup_abs = np.abs(z)
    events = []

    for k in range(1, steps + 1):
        if has_drift:
            z += drift(z - m) * dt
        if noise is not None:
            z += noise_amp * noise.next()
        x = z - m
        top = x.max()
        if not math.isfinite(top):
            raise SimulationError(f"non-finite potential at step {k} (t={times[k]:.6g})",
                                  step=k, time=float(times[k]))
        if top >= 1.0:
            counts = cascade_counts(x, alpha, n)
            size = counts[-1]
            thr = threshold(alpha, size, n)
            spiked = np.flatnonzero(x >= thr)
            report = physical_criterion_check(x[spiked], alpha, size / n, grid=64,
                                              n=n)
            keep = x.copy() if size / n >= config.capture_fraction else None
            rounds = np.diff(np.concatenate(([0], counts))).tolist()
            events.append(CascadeRecord(
                time=float(times[k]), step=k, gamma=spiked, round_sizes=rounds,
                pre_hist=_pre_hist(x, alpha), criterion_pass=report.passed,
                criterion_margin=report.worst_margin, n=n, pre_potentials=keep,
            ))
            if len(rec):
                z_left[k] = z[rec].copy()
            z += alpha * size / n
            spikes_sq_total += float(np.sum(2.0 * m[spiked] + 1.0))
            m[spiked] += 1.0
            spikes_total += size
            if (z - m).max() >= 1.0:
                raise SimulationError(f"cascade left a particle at threshold at step {k}",
                                      step=k, time=float(times[k]))
        np.maximum(sup_abs, np.abs(z), out=sup_abs)
        ebar[k] = spikes_total / n
        ebar_sq[k] = spikes_sq_total / n
        if len(rec):
            z_rec[k] = z[rec]
            m_rec[k] = m[rec]

    z_paths = m_paths = None
    if len(rec):
        ev_steps = np.array(sorted(z_left), dtype=int)
        mask = np.zeros(steps + 1, dtype=bool)
        mask[ev_steps] = True
        left = np.full((steps + 1, len(rec)), np.nan)
        for s in ev_steps:
            left[s] = z_left[s]
        z_paths = [CadlagPath.linear(times, z_rec[:, j], mask, left[:, j])
                   for j in range(len(rec))]
        m_paths = [CadlagPath.step(times, m_rec[:, j]) for j in range(len(rec))]

    m_sq = m ** 2
    moments = {
        "mean_sup_abs_z": float(sup_abs.mean()),
        "se_sup_abs_z": float(sup_abs.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "mean_m_sq": float(m_sq.mean()),
        "se_m_sq": float(m_sq.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
    }
    return SimOutput(
        config=config,
        ebar=CadlagPath.step(times, ebar),
        ebar_sq=ebar_sq,
        events=events,
        moments=moments,
        recorded=rec,
        z_paths=z_paths,
        m_paths=m_paths,
    )
