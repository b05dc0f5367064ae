"""Windowed Monte Carlo solver for the delayed mean-field equation.

On each window (k*delta, (k+1)*delta] the delayed firing input
e_delta(t) = E(M_{t - delta}) only looks back into windows that are
already finished, so the replicas evolve as independent
integrate-and-fire diffusions driven by a known deterministic input.
After the window, the replica average of M becomes the input for the
next window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import curve_and_se, gap_profile
from .errors import ConfigError, DomainError, SimulationError
from .particles import DriftSpec, InitialLaw, sample_initial
from .paths import CadlagPath, m1_distance
from .rng import NoiseStreams, init_generator


@dataclass(frozen=True)
class DelayedConfig:
    delta: float
    replicas: int
    horizon: float
    dt: float
    alpha: float
    drift: DriftSpec = field(default_factory=DriftSpec)
    init: InitialLaw = field(default_factory=InitialLaw)
    noise_scale: float = 1.0
    seed: int = 0
    record_count: int = 0

    def validate(self):
        if not (isinstance(self.replicas, (int, np.integer)) and self.replicas >= 1):
            raise ConfigError("replicas must be a positive integer", field="replicas")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive", field="horizon")
        if not self.dt > 0:
            raise ConfigError("dt must be positive", field="dt")
        if not self.delta >= self.dt:
            raise ConfigError("delta must be at least dt", field="delta")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)", field="alpha")
        if not self.noise_scale >= 0:
            raise ConfigError("noise_scale must be >= 0", field="noise_scale")
        self.steps
        self.lag
        self.drift.validate()
        self.init.validate(self.replicas)

    @property
    def steps(self) -> int:
        steps = int(round(self.horizon / self.dt))
        if steps < 1 or abs(steps * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ConfigError("horizon must be an integer multiple of dt", field="dt")
        return steps

    @property
    def lag(self) -> int:
        """The delay in grid steps."""
        lag = int(round(self.delta / self.dt))
        if abs(lag * self.dt - self.delta) > 1e-9 * self.delta:
            raise ConfigError("delta must be an integer multiple of dt", field="delta")
        return lag

    @property
    def windows(self) -> int:
        return math.ceil(self.steps / self.lag)

    def with_seed(self, seed: int) -> "DelayedConfig":
        return replace(self, seed=int(seed))


@dataclass(eq=False)
class DelayedOutput:
    config: DelayedConfig
    e_delta: CadlagPath
    m_mean: CadlagPath
    m_sq_mean: np.ndarray
    replica_count: int
    spike_steps: list
    sample_m_paths: list | None = None

    @property
    def times(self) -> np.ndarray:
        return self.e_delta.times

    def m_mean_se(self) -> np.ndarray:
        var = np.maximum(self.m_sq_mean - self.m_mean.values ** 2, 0.0)
        return np.sqrt(var / self.replica_count)

    def e_delta_se(self) -> np.ndarray:
        lag = self.config.lag
        se = np.zeros(len(self.times))
        se[lag + 1:] = self.m_mean_se()[1:len(self.times) - lag]
        return se


def run_delayed(config: DelayedConfig, threads: int = 1, e_input=None) -> DelayedOutput:
    """Simulate ``replicas`` copies of the delayed equation window by window.

    ``e_input`` replaces the self-consistent input by a frozen grid of
    e_delta values (same length as the time grid).
    """
    config.validate()
    r, alpha = config.replicas, config.alpha
    steps, lag = config.steps, config.lag
    times = np.linspace(0.0, config.horizon, steps + 1)
    dt = config.horizon / steps
    if e_input is not None:
        e_input = np.asarray(e_input, dtype=float)
        if e_input.shape != times.shape:
            raise DomainError("frozen input must live on the simulation grid")

    x = sample_initial(config.init, r, init_generator(config.seed))
    m = np.zeros(r)
    noise = (NoiseStreams(config.seed, r, threads=threads)
             if config.noise_scale > 0 else None)
    noise_amp = math.sqrt(dt) * config.noise_scale
    drift = config.drift
    has_drift = drift.kind != "zero"

    e = np.zeros(steps + 1)
    m_mean = np.zeros(steps + 1)
    m_sq = np.zeros(steps + 1)
    total, total_sq = 0.0, 0.0
    n_rec = min(config.record_count, r)
    spikes = [[] for _ in range(n_rec)]
    m_rec = np.zeros((steps + 1, n_rec))

    for w in range(config.windows):
        lo, hi = w * lag + 1, min((w + 1) * lag, steps)
        if e_input is None:
            src = np.arange(lo, hi + 1) - lag
            e[lo:hi + 1] = np.where(src >= 1, m_mean[np.maximum(src, 0)], 0.0)
        else:
            e[lo:hi + 1] = e_input[lo:hi + 1]
        for k in range(lo, hi + 1):
            if has_drift:
                x += drift(x) * dt
            kick = alpha * (e[k] - e[k - 1])
            if kick:
                x += kick
            if noise is not None:
                x += noise_amp * noise.next()
            top = x.max()
            if not math.isfinite(top):
                raise SimulationError(f"non-finite potential at step {k} (t={times[k]:.6g})",
                                      step=k, time=float(times[k]))
            if top >= 1.0:
                fired = np.flatnonzero(x >= 1.0)
                x[fired] -= 1.0
                total_sq += float(np.sum(2.0 * m[fired] + 1.0))
                m[fired] += 1.0
                total += len(fired)
                if x[fired].max() >= 1.0:
                    raise SimulationError(f"replica would spike twice at step {k}",
                                          step=k, time=float(times[k]))
                for i in fired[fired < n_rec]:
                    spikes[i].append(k)
            m_mean[k] = total / r
            m_sq[k] = total_sq / r
            if n_rec:
                m_rec[k] = m[:n_rec]

    return DelayedOutput(
        config=config,
        e_delta=CadlagPath.linear(times, e),
        m_mean=CadlagPath.step(times, m_mean),
        m_sq_mean=m_sq,
        replica_count=r,
        spike_steps=spikes,
        sample_m_paths=[CadlagPath.step(times, m_rec[:, j]) for j in range(n_rec)] or None,
    )


@dataclass
class DelayedComparison:
    deltas: list
    pointwise_gaps: list
    pointwise_se: list
    m1_gaps: list
    monotone_pointwise: bool
    monotone_m1: bool

    def to_json(self) -> dict:
        return {
            "deltas": self.deltas,
            "pointwise_gaps": self.pointwise_gaps,
            "pointwise_se": self.pointwise_se,
            "m1_gaps": self.m1_gaps,
            "monotone_pointwise": self.monotone_pointwise,
            "monotone_m1": self.monotone_m1,
            "m1_is_upper_bound": True,
        }


def delayed_to_limit_compare(outputs, reference, times=None, bandwidth=None,
                             threshold: float = 0.05, resolution: int = 2000,
                             ) -> DelayedComparison:
    """Gaps of e_delta curves (ordered by decreasing delta) to a reference.

    ``outputs`` holds DelayedOutput objects or lists of them (seed
    batches); ``reference`` is a path, a SimOutput, or a batch.
    Monotonicity is judged on the raw gaps; callers wanting a margin
    compare against the reported standard errors.
    """
    batches = [o if isinstance(o, (list, tuple)) else [o] for o in outputs]
    if not batches:
        raise DomainError("no delayed outputs to compare")
    ref_curve, ref_se = curve_and_se(reference)
    horizons = {b[0].config.horizon for b in batches}
    if any(abs(h - ref_curve.horizon) > 1e-12 for h in horizons):
        raise DomainError("delayed outputs and reference have different horizons")
    order = sorted(range(len(batches)), key=lambda i: -batches[i][0].config.delta)
    deltas, pw, pw_se, m1 = [], [], [], []
    for i in order:
        curve, se = curve_and_se(batches[i])
        prof = gap_profile(curve, se, ref_curve, ref_se, times=times,
                           bandwidth=bandwidth, threshold=threshold)
        deltas.append(float(batches[i][0].config.delta))
        pw.append(prof["gap"])
        pw_se.append(prof["se"])
        m1.append(m1_distance(curve, ref_curve, resolution))
    return DelayedComparison(
        deltas=deltas,
        pointwise_gaps=pw,
        pointwise_se=pw_se,
        m1_gaps=m1,
        monotone_pointwise=bool(np.all(np.diff(pw) <= 0)),
        monotone_m1=bool(np.all(np.diff(m1) <= 0)),
    )
