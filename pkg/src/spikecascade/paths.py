"""Cadlag paths on [0, T] and M1-Skorohod diagnostics.

A path is a sample grid plus a jump registry.  Two interpolation kinds
are supported:

* ``linear``: piecewise linear between samples; a flagged sample t_k
  carries its left limit f(t_k-) separately (diffusive paths such as Z).
* ``step``: piecewise constant, right-continuous; the left limit at t_k
  is the previous sample, so the registry is derived (counting paths,
  empirical firing maps).

The M1 distance is approximated from above by a discrete Frechet
alignment of two densely sampled parametric representations of the
completed graphs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError

LINEAR = "linear"
STEP = "step"


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CadlagPath:
    times: np.ndarray
    values: np.ndarray
    jump_mask: np.ndarray
    left_values: np.ndarray
    kind: str = LINEAR

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise DomainError("times and values must be 1-D arrays of equal length")
        if len(times) < 2:
            raise DomainError("a path needs at least two samples")
        if times[0] != 0.0:
            raise DomainError("first sample time must be 0")
        if np.any(np.diff(times) <= 0):
            raise DomainError("sample times must be strictly increasing")
        if self.kind not in (LINEAR, STEP):
            raise DomainError(f"unknown interpolation kind {self.kind!r}")

        if self.kind == STEP:
            left = np.empty_like(values)
            left[0] = np.nan
            left[1:] = values[:-1]
            mask = np.zeros(len(values), dtype=bool)
            mask[1:] = values[1:] != values[:-1]
            left[~mask] = np.nan
        else:
            mask = np.asarray(self.jump_mask, dtype=bool)
            left = np.asarray(self.left_values, dtype=float)
            if mask.shape != times.shape or left.shape != times.shape:
                raise DomainError("jump registry must align with the sample grid")
            if mask[0]:
                raise DomainError("no jump is allowed at t = 0")
            if not np.all(np.isfinite(left[mask])):
                raise DomainError("left values at jumps must be finite")
            left = np.where(mask, left, np.nan)

        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "jump_mask", _frozen(mask, bool))
        object.__setattr__(self, "left_values", _frozen(left))

    @classmethod
    def linear(cls, times, values, jump_mask=None, left_values=None):
        n = len(times)
        if jump_mask is None:
            jump_mask = np.zeros(n, dtype=bool)
            left_values = np.full(n, np.nan)
        return cls(times, values, jump_mask, left_values, LINEAR)

    @classmethod
    def step(cls, times, values):
        n = len(times)
        return cls(times, values, np.zeros(n, dtype=bool), np.full(n, np.nan), STEP)

    @classmethod
    def constant(cls, value, horizon, kind=LINEAR):
        if kind == STEP:
            return cls.step([0.0, horizon], [value, value])
        return cls.linear([0.0, horizon], [value, value])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def jump_times(self) -> np.ndarray:
        return self.times[self.jump_mask]

    @property
    def jump_sizes(self) -> np.ndarray:
        return (self.values - self.left_values)[self.jump_mask]

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class ParametricRepresentation:
    u: np.ndarray
    r: np.ndarray

    def __len__(self):
        return len(self.u)


def _check_domain(path, t):
    if np.any(t < 0.0) or np.any(t > path.horizon):
        raise DomainError(f"evaluation time outside [0, {path.horizon}]")


def _unwrap(t, out):
    return float(out) if np.ndim(t) == 0 else out


def evaluate(path: CadlagPath, t):
    """Right-continuous evaluation f(t); accepts a scalar or an array."""
    ts = np.asarray(t, dtype=float)
    _check_domain(path, ts)
    times, values = path.times, path.values
    k = np.clip(np.searchsorted(times, ts, side="right") - 1, 0, len(times) - 1)
    if path.kind == STEP:
        return _unwrap(t, values[k])
    nxt = np.minimum(k + 1, len(times) - 1)
    end = np.where(path.jump_mask[nxt], path.left_values[nxt], values[nxt])
    span = times[nxt] - times[k]
    frac = np.where(nxt > k, (ts - times[k]) / np.where(span > 0, span, 1.0), 0.0)
    out = values[k] + frac * (end - values[k])
    out = np.where(times[k] == ts, values[k], out)
    return _unwrap(t, out)


def evaluate_left(path: CadlagPath, t):
    """Left limit f(t-); equals f(0) at t = 0."""
    ts = np.asarray(t, dtype=float)
    out = np.asarray(evaluate(path, ts), dtype=float)
    k = np.clip(np.searchsorted(path.times, ts, side="left"), 0, len(path) - 1)
    at_jump = (path.times[k] == ts) & path.jump_mask[k]
    out = np.where(at_jump, path.left_values[k], out)
    return _unwrap(t, out)


def hat(path: CadlagPath) -> CadlagPath:
    """Force left-continuity at the terminal time (value(T) := f(T-))."""
    if not path.jump_mask[-1]:
        return path
    values = path.values.copy()
    if path.kind == STEP:
        values[-1] = values[-2]
        return CadlagPath.step(path.times, values)
    values[-1] = path.left_values[-1]
    mask = path.jump_mask.copy()
    mask[-1] = False
    return CadlagPath.linear(path.times, values, mask, path.left_values)


def restrict(path: CadlagPath, horizon: float) -> CadlagPath:
    """Truncate to [0, horizon] and apply :func:`hat` at the new end point."""
    if not 0.0 < horizon <= path.horizon:
        raise DomainError("restriction horizon must lie in (0, T]")
    keep = path.times < horizon
    times = np.append(path.times[keep], horizon)
    end = evaluate_left(path, horizon)
    values = np.append(path.values[keep], end)
    if path.kind == STEP:
        return CadlagPath.step(times, values)
    mask = np.append(path.jump_mask[keep], False)
    left = np.append(path.left_values[keep], np.nan)
    return CadlagPath.linear(times, values, mask, left)


def graph_vertices(path: CadlagPath):
    """Vertices (r, u) of the completed graph, traced left to right.

    Between consecutive vertices the graph is a straight segment; a
    vertical segment (equal r) is a jump.
    """
    times, values = path.times, path.values
    if path.kind == STEP:
        changed = np.zeros(len(times), dtype=bool)
        changed[1:] = values[1:] != values[:-1]
        # every t_k (k>=1) contributes (t_k, f(t_k-)); jumps add (t_k, f(t_k))
        reps = np.where(changed, 2, 1)
        reps[0] = 1
        r = np.repeat(times, reps)
        u = np.empty(len(r))
        pos = np.cumsum(reps) - 1  # index of the right value of each sample
        u[pos] = values
        first = pos[changed] - 1
        u[first] = values[np.flatnonzero(changed) - 1]
        return r, u
    mask = path.jump_mask
    reps = np.where(mask, 2, 1)
    r = np.repeat(times, reps)
    u = np.empty(len(r))
    pos = np.cumsum(reps) - 1
    u[pos] = values
    u[pos[mask] - 1] = path.left_values[mask]
    return r, u


def counting_map(z: CadlagPath) -> CadlagPath:
    """Return t -> floor((sup_{s<=t} z_s)_+) as a step path.

    Crossings of new integer levels inside linear segments are located
    exactly and inserted as extra breakpoints.
    """
    r, u = graph_vertices(z)
    running = u[0]
    level = math.floor(max(running, 0.0))
    ev_t = [0.0]
    ev_level = [level]
    for p in range(1, len(r)):
        u1 = u[p]
        if u1 <= running:
            continue
        new_level = math.floor(max(u1, 0.0))
        if new_level > level:
            t0, t1, u0 = r[p - 1], r[p], u[p - 1]
            if t1 > t0:
                for j in range(level + 1, new_level + 1):
                    tc = t0 + (j - u0) / (u1 - u0) * (t1 - t0)
                    ev_t.append(min(max(tc, t0), t1))
                    ev_level.append(j)
            else:
                ev_t.append(t1)
                ev_level.append(new_level)
            level = new_level
        running = u1
    ev_t = np.asarray(ev_t)
    ev_level = np.asarray(ev_level, dtype=float)
    times = np.union1d(z.times, ev_t)
    idx = np.searchsorted(ev_t, times, side="right") - 1
    return CadlagPath.step(times, ev_level[idx])


def _window_points(f: CadlagPath, t: float, delta: float) -> np.ndarray:
    if delta <= 0:
        raise DomainError("delta must be positive")
    if not 0.0 <= t <= f.horizon:
        raise DomainError(f"t outside [0, {f.horizon}]")
    lo, hi = max(0.0, t - delta), min(f.horizon, t + delta)
    r, u = graph_vertices(f)
    inner = u[(r > lo) & (r < hi)]
    return np.concatenate(
        ([evaluate(f, lo)], inner, [evaluate_left(f, hi), evaluate(f, hi)])
    )


def oscillation_w(f: CadlagPath, t: float, delta: float) -> float:
    """M1 oscillation: sup of dist(f(t2), [f(t1), f(t3)]) over the window."""
    y = _window_points(f, t, delta)
    if len(y) < 3:
        return 0.0
    pre_min = np.minimum.accumulate(y)[:-2]
    pre_max = np.maximum.accumulate(y)[:-2]
    suf_min = np.minimum.accumulate(y[::-1])[::-1][2:]
    suf_max = np.maximum.accumulate(y[::-1])[::-1][2:]
    mid = y[1:-1]
    above = mid - np.maximum(pre_min, suf_min)
    below = np.minimum(pre_max, suf_max) - mid
    return float(max(0.0, above.max(), below.max()))


def oscillation_v(f: CadlagPath, t: float, delta: float) -> float:
    y = _window_points(f, t, delta)
    return float(y.max() - y.min())


def build_parametric(f: CadlagPath, resolution: int) -> ParametricRepresentation:
    """Trace the completed graph of f with ``resolution`` parameter points.

    Every graph vertex is hit exactly; the remaining points are spread
    over segments in proportion to their normalised length, so a jump
    gets its own stretch of parameter on which r is constant.  If the
    graph has more vertices than ``resolution`` the vertex count is used.
    """
    if resolution < 2:
        raise DomainError("resolution must be at least 2")
    r, u = graph_vertices(f)
    u_span = float(u.max() - u.min())
    seg = np.abs(np.diff(r)) / f.horizon
    if u_span > 0:
        seg = seg + np.abs(np.diff(u)) / u_span
    keep = np.concatenate(([True], seg > 0))
    r, u, seg = r[keep], u[keep], seg[seg > 0]
    n_seg = len(seg)
    if n_seg == 0:
        return ParametricRepresentation(u=_frozen(u), r=_frozen(r))
    extra = max(resolution - 1 - n_seg, 0)
    share = seg / seg.sum() * extra
    counts = np.floor(share).astype(int)
    left_over = extra - counts.sum()
    if left_over > 0:
        order = np.argsort(-(share - counts), kind="stable")
        counts[order[:left_over]] += 1
    counts += 1

    seg_idx = np.repeat(np.arange(n_seg), counts)
    k = np.arange(len(seg_idx)) - np.repeat(np.cumsum(counts) - counts, counts) + 1
    m = counts[seg_idx]
    frac = k / m
    last = k == m
    r_pts = np.where(last, r[seg_idx + 1], r[seg_idx] + frac * (r[seg_idx + 1] - r[seg_idx]))
    u_pts = np.where(last, u[seg_idx + 1], u[seg_idx] + frac * (u[seg_idx + 1] - u[seg_idx]))
    return ParametricRepresentation(
        u=_frozen(np.concatenate(([u[0]], u_pts))),
        r=_frozen(np.concatenate(([r[0]], r_pts))),
    )


def check_parametric(f: CadlagPath, rep: ParametricRepresentation, eps: float = 1e-9):
    """Graph membership and order checks; returns (on_graph, ordered)."""
    r, u = np.asarray(rep.r), np.asarray(rep.u)
    if r[0] != 0.0 or r[-1] != f.horizon or np.any(np.diff(r) < 0):
        return False, False
    right = evaluate(f, r)
    left = evaluate_left(f, r)
    lo, hi = np.minimum(left, right), np.maximum(left, right)
    on_graph = bool(np.all((u >= lo - eps) & (u <= hi + eps)))
    same_t = np.diff(r) == 0
    dist = np.abs(u - left)
    ordered = bool(np.all(~same_t | (dist[1:] >= dist[:-1] - eps)))
    return on_graph, ordered


@njit(cache=True)
def _frechet_linf(u1, r1, u2, r2):
    n, m = len(u1), len(u2)
    prev = np.empty(m)
    cur = np.empty(m)
    for i in range(n):
        for j in range(m):
            c = max(abs(u1[i] - u2[j]), abs(r1[i] - r2[j]))
            if i == 0 and j == 0:
                best = c
            elif i == 0:
                best = max(c, cur[j - 1])
            elif j == 0:
                best = max(c, prev[0])
            else:
                best = max(c, min(prev[j], prev[j - 1], cur[j - 1]))
            cur[j] = best
        prev, cur = cur, prev
    return prev[m - 1]


def m1_distance(f: CadlagPath, g: CadlagPath, resolution: int = 2000) -> float:
    """Upper approximation of d_M1(f, g).

    Both paths are made left-continuous at T, traced with
    :func:`build_parametric`, and aligned by a monotone discrete
    coupling minimising max(|u1-u2|, |r1-r2|).  Any such coupling is a
    valid pair of parametric representations, hence the bound.
    """
    if abs(f.horizon - g.horizon) > 1e-12 * max(1.0, f.horizon):
        raise DomainError("paths live on different horizons")
    a = build_parametric(hat(f), resolution)
    b = build_parametric(hat(g), resolution)
    return float(_frechet_linf(
        np.ascontiguousarray(a.u), np.ascontiguousarray(a.r),
        np.ascontiguousarray(b.u), np.ascontiguousarray(b.r),
    ))


def sup_distance(f: CadlagPath, g: CadlagPath, times=None) -> float:
    if times is None:
        times = np.union1d(f.times, g.times)
    return float(np.max(np.abs(evaluate(f, times) - evaluate(g, times))))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_path_csv(path: CadlagPath, fh) -> None:
    """Write ``t,value,is_jump,left_value``; floats use shortest round-trip repr."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "value", "is_jump", "left_value"])
    for t, v, j, lv in zip(path.times, path.values, path.jump_mask, path.left_values):
        w.writerow([_fmt(t), _fmt(v), "1" if j else "0", _fmt(lv) if j else ""])


def read_path_csv(fh, kind: str = LINEAR) -> CadlagPath:
    rows = list(csv.DictReader(fh))
    if not rows:
        raise DomainError("empty path file")
    times = np.array([float(r["t"]) for r in rows])
    values = np.array([float(r["value"]) for r in rows])
    if kind == STEP:
        return CadlagPath.step(times, values)
    mask = np.array([r["is_jump"] == "1" for r in rows])
    left = np.array([float(r["left_value"]) if r["left_value"] else np.nan for r in rows])
    return CadlagPath.linear(times, values, mask, left)
