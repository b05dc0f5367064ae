"""Physical spike cascades for N particles and the jump-size rule.

At a spike time the set of spiking particles is built round by round:
round 0 holds every particle at (or, on a time grid, above) the
threshold 1, and round k+1 holds the particles pushed over the
threshold by the kick alpha*|rounds 0..k|/N.  Everybody then receives
the total kick alpha*|Gamma|/N and the spikers are reset by -1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

# rounds resolved by full-array counting before switching to a sorted scan
_DIRECT_ROUNDS = 8
# ties P = eta are not strict drops; absorbs rounding in (1 - x) / alpha
_TIE_TOL = 1e-12


def threshold(alpha: float, k: int, n: int) -> float:
    """Potential above which a particle spikes once k particles have fired."""
    return 1.0 - alpha * k / n


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}", field="alpha")


@dataclass(frozen=True, eq=False)
class SpikeState:
    potentials: np.ndarray
    alpha: float

    def __post_init__(self):
        x = np.asarray(self.potentials, dtype=float)
        if x.ndim != 1 or len(x) == 0:
            raise DomainError("potentials must be a non-empty 1-D array")
        _check_alpha(self.alpha)
        object.__setattr__(self, "potentials", x)

    @property
    def n(self) -> int:
        return len(self.potentials)


@dataclass(frozen=True, eq=False)
class CascadeResult:
    gamma: frozenset
    rounds: list
    post_potentials: np.ndarray
    jump_fraction: float
    n: int = field(default=0)

    @property
    def size(self) -> int:
        return len(self.gamma)

    @property
    def round_sizes(self) -> list:
        return [len(r) for r in self.rounds]


def cascade_counts(x: np.ndarray, alpha: float, n: int) -> list:
    """Cumulative spike counts |Gamma_0|, |Gamma_0 u Gamma_1|, ... .

    ``x`` may be any superset of the particles above 1 - alpha (particles
    below can never be reached); ``n`` is the population size.
    """
    total = int(np.count_nonzero(x >= 1.0))
    if total == 0:
        return []
    counts = [total]
    for _ in range(_DIRECT_ROUNDS):
        nxt = int(np.count_nonzero(x >= threshold(alpha, total, n)))
        if nxt == total:
            return counts
        counts.append(nxt)
        total = nxt
    asc = np.sort(x[x >= threshold(alpha, n, n)])
    m = len(asc)
    while True:
        nxt = m - int(np.searchsorted(asc, threshold(alpha, total, n), side="left"))
        if nxt == total:
            return counts
        counts.append(nxt)
        total = nxt


def resolve_cascade(state: SpikeState) -> CascadeResult:
    x, alpha, n = state.potentials, state.alpha, state.n
    counts = cascade_counts(x, alpha, n)
    if not counts:
        return CascadeResult(frozenset(), [], x.copy(), 0.0, n)
    rounds = []
    upper = np.inf
    prev = 0
    for c in counts:
        lower = 1.0 if prev == 0 else threshold(alpha, prev, n)
        rounds.append(np.flatnonzero((x >= lower) & (x < upper)))
        upper = lower
        prev = c
    size = counts[-1]
    kick = alpha * size / n
    spiked = x >= threshold(alpha, size, n)
    post = x + kick - spiked
    return CascadeResult(
        gamma=frozenset(np.flatnonzero(spiked).tolist()),
        rounds=rounds,
        post_potentials=post,
        jump_fraction=size / n,
        n=n,
    )


def cascade_size_inf(state: SpikeState) -> int:
    """inf{k in 0..N : #{i : X_i >= 1 - alpha k / N} <= k}, by direct scan."""
    x, alpha, n = state.potentials, state.alpha, state.n
    asc = np.sort(x)
    k = np.arange(n + 1)
    thr = 1.0 - alpha * k / n
    counts = n - np.searchsorted(asc, thr, side="left")
    return int(k[np.argmax(counts <= k)])


def physical_jump_size(samples, alpha: float) -> float:
    """inf{eta >= 0 : P_emp(X + alpha*eta >= 1) < eta} for the empirical law.

    The empirical probability is a right-continuous step function of
    eta with breakpoints (1 - x_i)/alpha, so the infimum is found by an
    exact scan of those intervals.  A drop below eta must exceed a
    1e-12 tie tolerance, so rounding in the breakpoints cannot turn an
    exact tie P = eta into a spurious stop.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("samples must be non-empty")
    _check_alpha(alpha)
    n = x.size
    brk = np.sort(np.maximum((1.0 - x) / alpha, 0.0))
    starts = np.unique(np.concatenate(([0.0], brk)))
    level = np.searchsorted(brk, starts, side="right") / n
    ends = np.append(starts[1:], np.inf)
    hit = np.flatnonzero(level < ends - _TIE_TOL)[0]
    return float(max(level[hit], starts[hit]))


@dataclass(frozen=True)
class CriterionReport:
    passed: bool
    worst_margin: float
    worst_eta: float
    tolerance: float


def physical_criterion_check(samples, alpha: float, jump: float, grid: int = 256,
                             tol: float | None = None, n: int | None = None) -> CriterionReport:
    """Check P(X >= 1 - alpha*eta) >= eta on ``grid`` points of [0, jump].

    ``n`` is the population size when ``samples`` holds only its upper
    tail (every particle above 1 - alpha*jump must be included).  ``tol``
    defaults to 1/N, the quantisation of an empirical law.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if n is None:
        n = x.size
    if tol is None:
        tol = 1.0 / n if n else 0.0
    if jump <= 0.0 or n == 0:
        return CriterionReport(True, 0.0, 0.0, tol)
    eta = np.linspace(0.0, jump, max(int(grid), 2))
    prob = (x.size - np.searchsorted(x, 1.0 - alpha * eta, side="left")) / n
    margin = prob - eta
    i = int(np.argmin(margin))
    return CriterionReport(bool(margin[i] >= -tol), float(margin[i]), float(eta[i]), tol)
