"""Threshold functionals of a random vector, computed from its marginals.

For marginals ``X_1, ..., X_n``::

    t(k)   = inf{ t > 0 : (1/t) * sum_i E|X_i| 1{|X_i| >= t} <= k }
    t*(p)  = inf{ t > 0 : sum_i P(|X_i| >= t) <= p },   0 < p < n

Both defining sums are nonincreasing in ``t``, so each threshold is found by
bracketed bisection.  Any positive real level is accepted (levels such as
``k - 1/2`` and ``k - k**(5/6)/2`` occur in the bounds checked downstream).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .marginals import Marginal
from .reports import FAIL, INFORMATIONAL, PASS, BoundReport

XTOL_REL = 1e-10
FTOL_REL = 1e-9
MAX_ITER = 500
LO_REL = 1e-12

T = "t"
TSTAR = "tstar"


@dataclass(frozen=True)
class ThresholdQuery:
    marginals: tuple[Marginal, ...]
    level: float
    kind: str = T

    def __post_init__(self):
        if self.kind not in (T, TSTAR):
            raise DomainError(f"unknown threshold kind {self.kind!r}")
        object.__setattr__(self, "marginals", tuple(self.marginals))


@dataclass(frozen=True)
class ThresholdResult:
    """Computed threshold.

    ``residual`` is ``G(value) - level`` for the defining sum ``G``; it is
    nonpositive by construction and tiny unless the value is the endpoint 0.
    ``extended`` marks ``t*(p)`` with ``p >= n`` (defined as 0).
    """

    value: float
    residual: float
    iterations: int
    bracket: tuple[float, float]
    kind: str
    level: float
    extended: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "value": self.value,
            "residual": self.residual,
            "iterations": self.iterations,
            "bracket": list(self.bracket),
            "extended": self.extended,
        }


class _Sum:
    """Defining sum evaluated over groups of identical marginals."""

    def __init__(self, marginals: Sequence[Marginal], kind: str):
        counts = Counter(marginals)
        self.groups = [(m, c) for m, c in counts.items() if not m.degenerate]
        self.kind = kind
        self.scale = max((m.scale for m, _ in self.groups), default=0.0)

    def __call__(self, t: float) -> float:
        if self.kind == TSTAR:
            return math.fsum(c * m.survival_abs(t) for m, c in self.groups)
        return math.fsum(c * m.truncated_abs_mean(t) for m, c in self.groups) / t


def _bisect(G: Callable[[float], float], level: float, lo: float, hi: float,
            xtol: float, ftol: float) -> tuple[float, float, int, tuple[float, float]]:
    # invariant: G(lo) > level >= G(hi)
    it = 0
    g_hi = G(hi)
    while it < MAX_ITER:
        width_ok = hi - lo <= xtol
        if width_ok and level - g_hi <= ftol:
            break
        if hi - lo <= 4 * math.ulp(hi):
            break
        mid = 0.5 * (lo + hi)
        g_mid = G(mid)
        if g_mid <= level:
            hi, g_hi = mid, g_mid
        else:
            lo = mid
        it += 1
    return hi, g_hi - level, it, (lo, hi)


def solve(query: ThresholdQuery) -> ThresholdResult:
    """Compute ``t(k)`` or ``t*(p)`` for a :class:`ThresholdQuery`."""
    level = float(query.level)
    if not (level > 0 and math.isfinite(level)):
        raise DomainError(f"level must be a positive real, got {query.level!r}")
    n = len(query.marginals)
    if n == 0:
        raise DomainError("need at least one marginal")
    G = _Sum(query.marginals, query.kind)
    extended = query.kind == TSTAR and level >= n
    if not G.groups or extended:
        return ThresholdResult(0.0, -level if not G.groups else G(0.0) - level, 0, (0.0, 0.0),
                               query.kind, level, extended)
    scale = G.scale
    lo = LO_REL * scale
    if G(lo) <= level:
        return ThresholdResult(0.0, G(lo) - level, 0, (0.0, lo), query.kind, level)
    hi = scale
    while G(hi) > level:
        lo, hi = hi, 2 * hi
        if hi > 1e300:
            raise DomainError("could not bracket threshold (non-finite first moment?)")
    value, resid, it, bracket = _bisect(G, level, lo, hi, XTOL_REL * scale, FTOL_REL * max(level, 1.0))
    return ThresholdResult(value, resid, it, bracket, query.kind, level)


def t_threshold(marginals: Sequence[Marginal], k: float) -> ThresholdResult:
    """``t(k, X)`` from the marginal laws."""
    return solve(ThresholdQuery(tuple(marginals), k, T))


def tstar_threshold(marginals: Sequence[Marginal], p: float) -> ThresholdResult:
    """``t*(p, X)`` from the marginal laws."""
    if not p > 0:
        raise DomainError(f"p must be positive, got {p}")
    return solve(ThresholdQuery(tuple(marginals), p, TSTAR))


def topk_mean_upper_bound(marginals: Sequence[Marginal], k: float) -> float:
    """``2k t(k)``, an upper bound for ``E max_{|I|=k} sum_{i in I} |X_i|`` valid for any X."""
    return 2.0 * k * t_threshold(marginals, k).value


def topk_marginal_means(marginals: Sequence[Marginal], k: int) -> float:
    """``max_{|I|=k} sum_{i in I} E|X_i|``."""
    means = sorted((m.abs_mean() for m in marginals), reverse=True)
    return math.fsum(means[:k])


def sandwich_check(marginals: Sequence[Marginal], k: int, model: str = "") -> BoundReport:
    """Compare ``t(k)`` with ``t*(k) + M/k`` (M = sum of the k largest E|X_i|).

    Pass iff ``(t* + M/k)/3 <= t(k) <= 4 (t* + M/k)``; the lemma assumes
    symmetric marginals, and asymmetric input is flagged in ``details``.
    """
    marginals = list(marginals)
    n = len(marginals)
    tk = t_threshold(marginals, k).value
    ts = tstar_threshold(marginals, k).value
    base = ts + topk_marginal_means(marginals, k) / k
    lower, upper = base / 3.0, 4.0 * base
    symmetric = all(m.symmetric for m in marginals)
    tol = 1e-9 * max(base, 1e-300)
    ok = lower - tol <= tk <= upper + tol
    return BoundReport(
        theorem_id="lemma51_sandwich",
        model=model or _describe(marginals),
        n=n,
        k=k,
        lhs=tk,
        lhs_stderr=0.0,
        rhs=base,
        ratio=tk / base if base > 0 else math.nan,
        verdict=PASS if ok else FAIL,
        tolerance_policy="analytic: (1/3)*rhs <= lhs <= 4*rhs",
        details={"tstar": ts, "lower": lower, "upper": upper, "hypothesis_symmetric": symmetric},
    )


DEFAULT_ASYMPTOTIC_WINDOW = (0.05, 20.0)


def isotropic_asymptotics_check(marginals: Sequence[Marginal], p_grid: Sequence[float] = (),
                                k_grid: Sequence[float] = (),
                                window: tuple[float, float] | None = DEFAULT_ASYMPTOTIC_WINDOW,
                                model: str = "") -> list[BoundReport]:
    """Ratios whose boundedness expresses the isotropic asymptotics of the thresholds.

    * ``t*(p) * n / (n - p)`` for ``p >= n/4``
    * ``t*(k/2) / t*(k)`` and ``t(k) / t*(k)`` for ``k <= n/2``
    """
    marginals = list(marginals)
    n = len(marginals)
    label = model or _describe(marginals)
    isotropic = all(m.centered and m.symmetric and abs(m.variance() - 1) < 1e-9 for m in marginals)
    out = []

    def report(tid, level, value, num, den, policy):
        verdict = INFORMATIONAL
        if window is not None:
            verdict = PASS if window[0] <= value <= window[1] else FAIL
        out.append(BoundReport(tid, label, n, level, num, 0.0, den, value, verdict, policy,
                               details={"hypothesis_isotropic_symmetric": isotropic}))

    policy = "analytic ratio in window" if window is None else f"analytic ratio in [{window[0]:g}, {window[1]:g}]"
    for p in p_grid:
        if not (n / 4 <= p < n):
            raise DomainError(f"p={p} outside [n/4, n)")
        ts = tstar_threshold(marginals, p).value
        target = (n - p) / n
        report("lemma66_tstar_linear", p, ts / target, ts, target, policy)
    for k in k_grid:
        if not (0 < k <= n / 2):
            raise DomainError(f"k={k} outside (0, n/2]")
        ts_k = tstar_threshold(marginals, k).value
        ts_half = tstar_threshold(marginals, k / 2).value
        tk = t_threshold(marginals, k).value
        report("lemma66_tstar_half", k, ts_half / ts_k, ts_half, ts_k, policy)
        report("lemma66_t_over_tstar", k, tk / ts_k, tk, ts_k, policy)
    return out


# --- empirical fallback -------------------------------------------------------

class EmpiricalMarginal(Marginal):
    """Empirical law of observed values; used when no catalog marginal applies."""

    family = "empirical"

    def __init__(self, values):
        v = np.sort(np.abs(np.asarray(values, dtype=float).ravel()))
        if v.size == 0:
            raise DomainError("empty sample")
        self._abs = v
        self._suffix = np.concatenate([np.cumsum(v[::-1])[::-1], [0.0]])
        self._m = v.size
        self._signed_mean = float(np.mean(values))
        self._var = float(np.var(values))
        self.symmetric = True
        self.centered = True

    def survival_abs(self, t):
        idx = np.searchsorted(self._abs, np.asarray(t, dtype=float), side="left")
        val = (self._m - idx) / self._m
        return float(val) if np.ndim(t) == 0 else val

    def truncated_abs_mean(self, t):
        idx = np.searchsorted(self._abs, np.asarray(t, dtype=float), side="left")
        val = self._suffix[idx] / self._m
        return float(val) if np.ndim(t) == 0 else val

    def mean(self):
        return self._signed_mean

    def variance(self):
        return self._var

    def params(self):
        return {"size": self._m}

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other


def empirical_marginals(draws: np.ndarray) -> list[EmpiricalMarginal]:
    """One empirical marginal per column of ``draws``."""
    return [EmpiricalMarginal(draws[:, i]) for i in range(draws.shape[1])]


def empirical_threshold_stderr(marginals: Sequence[EmpiricalMarginal], value: float, kind: str) -> float:
    """Delta-method standard error of an empirical threshold.

    The variance of the empirical defining sum at ``value`` is divided by the
    squared slope of that sum, the slope being a central difference with
    bandwidth ``m**(-1/3)`` times the sample scale.
    """
    var = 0.0
    for em in marginals:
        x = em._abs
        m = em._m
        if kind == TSTAR:
            p = em.survival_abs(value)
            var += p * (1 - p) / m
        else:
            y = np.where(x >= value, x, 0.0) / value
            var += float(np.var(y)) / m
    G = _Sum(marginals, kind)
    h = max(G.scale, 1e-300) * max(em._m for em in marginals) ** (-1 / 3)
    lo = max(value - h, 0.5 * value)
    slope = (G(lo) - G(value + h)) / (value + h - lo)
    if slope <= 0:
        return math.inf
    return math.sqrt(var) / slope


def _describe(marginals: Sequence[Marginal]) -> str:
    uniq = Counter(m.label() for m in marginals)
    return "+".join(f"{c}x{lab}" for lab, c in uniq.items())
