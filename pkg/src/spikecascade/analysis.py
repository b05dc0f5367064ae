"""Post-processing of firing maps: jumps, rates, physical checks, convergence."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cascade import physical_criterion_check, physical_jump_size
from .errors import DomainError
from .paths import STEP, CadlagPath, evaluate, m1_distance

DEFAULT_JUMP_THRESHOLD = 0.05
_MONOTONE_SLACK = 1e-12


@dataclass(eq=False)
class JumpEvent:
    time: float
    size: float
    pre_state_hist: list = field(default_factory=list)
    samples: np.ndarray | None = None
    criterion_pass: bool | None = None
    logged_size: float | None = None


@dataclass
class JumpVerification:
    verifiable: bool
    passed: bool
    size: float
    recomputed: float | None = None
    worst_margin: float | None = None


def _curve(obj) -> CadlagPath:
    if isinstance(obj, CadlagPath):
        return obj
    if hasattr(obj, "ebar"):
        return obj.ebar
    if hasattr(obj, "e_delta"):
        return obj.e_delta
    raise DomainError(f"cannot extract a firing curve from {type(obj).__name__}")


def _own_se(obj) -> np.ndarray:
    if hasattr(obj, "ebar_se"):
        return obj.ebar_se()
    if hasattr(obj, "e_delta_se"):
        return obj.e_delta_se()
    return np.zeros(len(_curve(obj)))


def curve_and_se(obj):
    """Firing curve and its pointwise standard error.

    A list or tuple is a seed batch: its curves are averaged and the
    standard error is the spread across seeds.
    """
    if not isinstance(obj, (list, tuple)):
        return _curve(obj), _own_se(obj)
    if len(obj) == 1:
        return curve_and_se(obj[0])
    curves = [_curve(o) for o in obj]
    base = curves[0]
    stack = np.vstack([c.values if np.array_equal(c.times, base.times)
                       else evaluate(c, base.times) for c in curves])
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / np.sqrt(len(curves))
    if base.kind == STEP:
        return CadlagPath.step(base.times, mean), se
    return CadlagPath.linear(base.times, mean), se


def _se_at(path: CadlagPath, se: np.ndarray, t: np.ndarray) -> np.ndarray:
    k = np.clip(np.searchsorted(path.times, t, side="right") - 1, 0, len(se) - 1)
    return se[k]


def _increments(e: CadlagPath):
    v = e.values
    if np.any(np.diff(v) < -_MONOTONE_SLACK):
        raise DomainError("firing curve must be non-decreasing")
    return np.diff(v)


def detect_jumps(e: CadlagPath, threshold: float = DEFAULT_JUMP_THRESHOLD,
                 events=None) -> list:
    """Grid steps where ``e`` rises by at least ``threshold``.

    With ``events`` (cascade records of a particle run) every detected
    jump is matched to the logged cascade of that step; a missing or
    size-mismatched log entry raises.
    """
    if not 0.0 < threshold < 1.0:
        raise DomainError("threshold must lie in (0, 1)")
    inc = _increments(e)
    idx = np.flatnonzero(inc >= threshold) + 1
    by_time = {}
    if events is not None:
        by_time = {ev.time: ev for ev in events}
    out = []
    for k in idx:
        t, size = float(e.times[k]), float(inc[k - 1])
        jump = JumpEvent(time=t, size=size)
        if events is not None:
            rec = by_time.get(t)
            if rec is None:
                raise DomainError(f"jump at t={t} has no logged cascade")
            if abs(rec.jump_fraction - size) > 1.0 / rec.n:
                raise DomainError(f"jump at t={t}: curve says {size}, log says "
                                  f"{rec.jump_fraction}")
            jump.pre_state_hist = list(rec.pre_hist)
            jump.samples = rec.pre_potentials
            jump.criterion_pass = rec.criterion_pass
            jump.logged_size = rec.jump_fraction
        out.append(jump)
    return out


def verify_physical_jump(event: JumpEvent, alpha: float, tol: float = 1e-12
                         ) -> JumpVerification:
    """Recompute the physical jump size from the pre-jump samples."""
    if event.size <= 0.0:
        return JumpVerification(True, True, event.size)
    if event.samples is None or len(event.samples) == 0:
        return JumpVerification(False, False, event.size)
    x = np.asarray(event.samples, dtype=float)
    recomputed = physical_jump_size(x, alpha)
    crit = physical_criterion_check(x, alpha, event.size)
    ok = abs(recomputed - event.size) <= 1.0 / len(x) + tol and crit.passed
    return JumpVerification(True, bool(ok), event.size, recomputed, crit.worst_margin)


@dataclass(eq=False)
class RateEstimate:
    rate: CadlagPath
    jumps: list


def firing_rate(e: CadlagPath, bandwidth: float,
                threshold: float = DEFAULT_JUMP_THRESHOLD) -> RateEstimate:
    """Centered difference quotient of the jump-free part of ``e``.

    Macroscopic jumps (rate +infinity) are removed before differencing
    and returned separately.
    """
    spacing = float(np.min(np.diff(e.times)))
    if bandwidth < spacing * (1 - 1e-9):
        raise DomainError("bandwidth must be at least the grid step")
    jumps = detect_jumps(e, threshold)
    values = e.values.copy()
    for j in jumps:
        values[e.times >= j.time] -= j.size
    cont = (CadlagPath.step(e.times, values) if e.kind == STEP
            else CadlagPath.linear(e.times, values))
    t = e.times
    hi = np.minimum(t + bandwidth, e.horizon)
    lo = np.maximum(t - bandwidth, 0.0)
    rate = (evaluate(cont, hi) - evaluate(cont, lo)) / (hi - lo)
    return RateEstimate(CadlagPath.linear(t, rate), jumps)


def gap_profile(curve, se, ref, ref_se, times=None, bandwidth=None,
                threshold: float = DEFAULT_JUMP_THRESHOLD) -> dict:
    """Pointwise |curve - ref| on continuity times with combined SE."""
    if abs(curve.horizon - ref.horizon) > 1e-12 * max(1.0, ref.horizon):
        raise DomainError("curves live on different horizons")
    if bandwidth is None:
        bandwidth = 5.0 * float(np.median(np.diff(ref.times)))
    t = np.asarray(ref.times if times is None else times, dtype=float)
    keep = np.ones(len(t), dtype=bool)
    for c in (curve, ref):
        for j in detect_jumps(c, threshold):
            keep &= np.abs(t - j.time) > 2.0 * bandwidth
    t = t[keep]
    if len(t) == 0:
        return {"gap": 0.0, "se": 0.0, "time": None, "times": t,
                "diff": t, "diff_se": t, "bandwidth": bandwidth}
    diff = evaluate(curve, t) - evaluate(ref, t)
    diff_se = np.sqrt(_se_at(curve, se, t) ** 2 + _se_at(ref, ref_se, t) ** 2)
    i = int(np.argmax(np.abs(diff)))
    return {"gap": float(abs(diff[i])), "se": float(diff_se[i]), "time": float(t[i]),
            "times": t, "diff": diff, "diff_se": diff_se, "bandwidth": bandwidth}


@dataclass
class ConvergenceReport:
    rows: list
    tolerances: dict
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"rows": self.rows, "tolerances": self.tolerances, "notes": self.notes}


def convergence_report(runs, reference, labels=None, times=None, bandwidth=None,
                       threshold: float = DEFAULT_JUMP_THRESHOLD,
                       resolution: int = 2000) -> ConvergenceReport:
    """Tabulate pointwise and M1 gaps of each run (or seed batch) to a reference."""
    if len(runs) < 2:
        raise DomainError("a convergence report needs at least two runs")
    labels = list(labels) if labels is not None else [str(i) for i in range(len(runs))]
    ref_curve, ref_se = curve_and_se(reference)
    rows = []
    used_bw = bandwidth
    for label, entry in zip(labels, runs):
        batch = list(entry) if isinstance(entry, (list, tuple)) else [entry]
        curve, se = curve_and_se(batch)
        prof = gap_profile(curve, se, ref_curve, ref_se, times=times,
                           bandwidth=bandwidth, threshold=threshold)
        used_bw = prof["bandwidth"]
        m1 = m1_distance(curve, ref_curve, resolution)
        seed_m1 = [m1_distance(_curve(b), ref_curve, resolution) for b in batch] \
            if len(batch) > 1 else [m1]
        m1_se = (float(np.std(seed_m1, ddof=1) / np.sqrt(len(seed_m1)))
                 if len(seed_m1) > 1 else prof["se"])
        rows.append({
            "label": label,
            "seeds": len(batch),
            "pointwise_gap": prof["gap"],
            "pointwise_se": prof["se"],
            "gap_time": prof["time"],
            "m1_gap": m1,
            "m1_se": m1_se,
            "m1_gap_per_seed": [float(v) for v in seed_m1],
            "jumps": [[j.time, j.size] for j in detect_jumps(curve, threshold)],
        })
    notes = ["m1 gaps are upper bounds from a discrete alignment"]
    if detect_jumps(ref_curve, threshold):
        notes.append("reference has macroscopic jumps; disagreement after a jump is "
                     "informational only (uniqueness after synchronisation is open)")
    return ConvergenceReport(
        rows=rows,
        tolerances={"jump_threshold": threshold, "bandwidth": used_bw,
                    "m1_resolution": resolution},
        notes=notes,
    )
