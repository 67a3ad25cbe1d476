"""Stability of monomorphic populations and the mistake-rate bands that support it."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .analytic import (
    DiscriminantInputs,
    FocalContext,
    d_decomposition,
    delta_curve,
    delta_ratio,
    delta_ratio_limit,
    errorfree_group_value,
    v_err,
)
from .errors import DomainError, NumericError
from .game import EnvParams, GameParams, check_strategy, coop_defect_ratio

EVOLUTIONARILY_STABLE = "EvolutionarilyStable"
NEUTRALLY_STABLE = "NeutrallyStable"
UNSTABLE = "Unstable"

SCAN_POINTS = 1024
EDGE_TOL = 1e-9
DEFAULT_GRID = (1e-4, 1.0 - 1e-4)


@dataclass(frozen=True)
class StabilityVerdict:
    """``witnesses`` holds ``(invader, W_incumbent - W_invader)`` for every other strategy."""

    k: int
    verdict: str
    witnesses: tuple[tuple[int, float], ...]

    @property
    def invaders(self) -> tuple[int, ...]:
        return tuple(j for j, gap in self.witnesses if gap < 0)

    @property
    def ties(self) -> tuple[int, ...]:
        return tuple(j for j, gap in self.witnesses if gap == 0)

    def gap(self, invader: int) -> float:
        for j, g in self.witnesses:
            if j == invader:
                return g
        raise DomainError(f"no witness for invader {invader}")

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "verdict": self.verdict,
            "witnesses": [{"invader": j, "gap": g} for j, g in self.witnesses],
        }


def _verdict(gaps: Sequence[float]) -> str:
    if all(g > 0 for g in gaps):
        return EVOLUTIONARILY_STABLE
    if all(g >= 0 for g in gaps):
        return NEUTRALLY_STABLE
    return UNSTABLE


def classify(k: int, params: GameParams, env: EnvParams) -> StabilityVerdict:
    """Classify the population in which everybody plays ``T_k``.

    Each of the other ``n`` strategies enters as a single mutant.  Without
    mistakes the incumbent and the mutant values come from the same
    deterministic evaluator, so behaviourally identical strategies tie
    exactly rather than within a tolerance.
    """
    n = params.n
    k = check_strategy(k, n - 1)
    witnesses = []
    if env.epsilon == 0.0:
        env.require_finite_horizon()
        home = errorfree_group_value([k] * n, n - 1, params, env.delta)
        for j in range(n + 1):
            if j != k:
                mutant = errorfree_group_value([k] * (n - 1) + [j], n - 1, params, env.delta)
                witnesses.append((j, home - mutant))
    else:
        home = v_err(FocalContext(k, k), params, env)
        for j in range(n + 1):
            if j != k:
                witnesses.append((j, home - v_err(FocalContext(k, j), params, env)))
    return StabilityVerdict(k, _verdict([g for _, g in witnesses]), tuple(witnesses))


def min_delta_for_stability(params: GameParams) -> float:
    """Smallest continuation probability at which ``T_{n-1}`` repels defectors without mistakes."""
    r = params.b / params.n
    return (params.c - r) / (params.b - r)


# ---------------------------------------------------------------------------
# bands


@dataclass(frozen=True)
class ThresholdBand:
    k: int
    eps_lower: float | None
    eps_upper: float | None
    delta: float
    empty: bool

    @property
    def midpoint(self) -> float:
        if self.empty:
            raise DomainError(f"the band of T_{self.k} is empty")
        return 0.5 * (self.eps_lower + self.eps_upper)

    def contains(self, epsilon: float) -> bool:
        return not self.empty and self.eps_lower < epsilon < self.eps_upper

    def to_json(self) -> dict:
        return asdict(self)


def band_threshold(params: GameParams) -> float:
    """Level the discriminant must exceed: ``1 - coop_defect_ratio``."""
    return 1.0 - coop_defect_ratio(params)


def _discriminant(eps: float, k: int, delta: float, n: int) -> float:
    return delta_ratio(DiscriminantInputs(eps, k, delta, n))


def _limit_at_zero(k: int, delta: float, n: int) -> float:
    if k == n - 1:
        return delta
    return 1.0 if delta == 1.0 else 0.0


def _scan_grid(k: int, delta: float, n: int) -> np.ndarray:
    pts = [np.linspace(0.0, 1.0, SCAN_POINTS + 2)[1:-1], np.logspace(-12, -3, 40)]
    if k < n - 1 and delta < 1.0:
        pts.append([epsilon_star(k, delta, n)])
    return np.unique(np.concatenate(pts))


def _bisect(fn, lo: float, hi: float, what: str, diagnostics: dict) -> float:
    try:
        root, info = optimize.bisect(fn, lo, hi, xtol=1e-15, maxiter=200, full_output=True,
                                     disp=False)
    except (ValueError, RuntimeError) as exc:
        raise NumericError(f"bisection for {what} failed: {exc}",
                           {**diagnostics, "bracket": (lo, hi)}) from exc
    if not info.converged:
        raise NumericError(f"bisection for {what} did not converge",
                           {**diagnostics, "bracket": (lo, hi), "iterations": info.iterations})
    return root


def ess_epsilon_band(k: int, params: GameParams, delta: float) -> ThresholdBand:
    """Interval of mistake rates in which ``T_k`` repels the unconditional defector.

    The positive set of ``g(eps) = Delta(eps; k) - (1 - ratio)`` is located
    on a scan grid, and each edge is refined by bisection.  Emptiness is
    reported, never assumed.
    """
    n = params.n
    if int(k) != k or not 1 <= k <= n - 1:
        raise DomainError(f"k out of range: need 1 <= k <= n-1, got {k}")
    k = int(k)
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    thr = band_threshold(params)

    def g(eps):
        return _discriminant(eps, k, delta, n) - thr

    grid = _scan_grid(k, delta, n)
    values = np.array([g(e) for e in grid])
    inside = values > 0.0
    starts_inside = _limit_at_zero(k, delta, n) > thr
    diag = {"k": k, "delta": delta, "n": n, "threshold": thr}

    if not inside.any():
        if starts_inside:
            raise NumericError("band starts at zero but no grid point lies inside it", diag)
        return ThresholdBand(k, None, None, float(delta), True)
    first, last = np.flatnonzero(inside)[[0, -1]]
    if not inside[first:last + 1].all():
        raise NumericError("discriminant exceeds the threshold on more than one interval",
                           {**diag, "grid_hits": int(inside.sum())})
    if last == len(grid) - 1:
        raise NumericError("band reaches the top of the scan grid", diag)

    if first == 0 and starts_inside:
        lower = 0.0
    elif first == 0:
        lower = _bisect(g, grid[0] * 1e-6, grid[0], "lower edge", diag)
    else:
        lower = _bisect(g, grid[first - 1], grid[first], "lower edge", diag)
    upper = _bisect(g, grid[last], grid[last + 1], "upper edge", diag)
    for edge in (lower, upper):
        if edge > 0.0 and abs(g(edge)) >= EDGE_TOL:
            raise NumericError("band edge misses the root", {**diag, "edge": edge, "g": g(edge)})
    return ThresholdBand(k, float(lower), float(upper), float(delta), False)


def epsilon_star(k: int, delta: float, n: int) -> float | None:
    """Interior minimiser of ``D1 + D2``, or ``None`` for ``k = n - 1``."""
    DiscriminantInputs(0.5, k, delta, n)
    if not delta < 1.0:
        raise DomainError("epsilon_star needs delta < 1")
    if k == n - 1:
        return None

    def h(z):
        eps = 1.0 / (1.0 + math.exp(-z))
        if not 0.0 < eps < 1.0:
            return math.inf
        return math.fsum(d_decomposition(DiscriminantInputs(eps, k, delta, n)))

    zs = np.linspace(-30.0, 30.0, 601)
    hs = np.array([h(z) for z in zs])
    i = int(np.argmin(hs))
    if i in (0, len(zs) - 1):
        raise NumericError("D1 + D2 has no interior minimum on the scan",
                           {"k": k, "delta": delta, "n": n, "argmin_logit": float(zs[i])})
    try:
        z = optimize.golden(h, brack=(zs[i - 1], zs[i], zs[i + 1]), tol=1e-12, maxiter=500)
    except (ValueError, RuntimeError) as exc:
        raise NumericError(f"golden-section search failed: {exc}",
                           {"k": k, "delta": delta, "n": n}) from exc
    return 1.0 / (1.0 + math.exp(-z))


# ---------------------------------------------------------------------------
# ordering across k


def default_grid(points: int = 10_000) -> np.ndarray:
    return np.linspace(*DEFAULT_GRID, points)


def _sign_changes(x: np.ndarray) -> np.ndarray:
    """Indices ``i`` where the sign flips between consecutive non-zero entries."""
    nz = np.flatnonzero(x != 0.0)
    s = np.sign(x[nz])
    return nz[:-1][s[:-1] != s[1:]]


@dataclass(frozen=True)
class Crossing:
    k: int
    crossings: int
    at: float | None
    on_descending_branch: bool


@dataclass
class OrderingReport:
    delta: float
    bands: list[ThresholdBand]
    upper_increasing: bool
    lower_increasing: bool
    crossings: list[Crossing] = field(default_factory=list)
    pointwise_dominance: bool | None = None

    @property
    def non_empty(self) -> list[ThresholdBand]:
        return [b for b in self.bands if not b.empty]

    @property
    def ok(self) -> bool:
        checks = [self.upper_increasing, self.lower_increasing]
        if self.pointwise_dominance is not None:
            checks.append(self.pointwise_dominance)
        checks.extend(c.crossings == 1 and c.on_descending_branch for c in self.crossings)
        return all(checks)

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "bands": [b.to_json() for b in self.bands],
            "upper_increasing": self.upper_increasing,
            "lower_increasing": self.lower_increasing,
            "crossings": [asdict(c) for c in self.crossings],
            "pointwise_dominance": self.pointwise_dominance,
            "ok": self.ok,
        }


def _strictly_increasing(xs: Sequence[float]) -> bool:
    return all(a < b for a, b in zip(xs, xs[1:]))


def band_ordering_report(params: GameParams, delta: float,
                         grid: np.ndarray | None = None) -> OrderingReport:
    """Bands for ``k = n-1, ..., 1`` and checks of how they nest.

    Edges are compared over the non-empty bands only.  With ``delta < 1``
    each pair of neighbouring discriminant curves is checked for a single
    crossing on the falling side of the harder strategy's curve; with
    ``delta = 1`` the softer curve must lie above everywhere.
    """
    n = params.n
    bands = [ess_epsilon_band(k, params, delta) for k in range(n - 1, 0, -1)]
    live = [b for b in bands if not b.empty]
    upper_ok = _strictly_increasing([b.eps_upper for b in live])
    if delta == 1.0:
        lower_ok = all(b.eps_lower == 0.0 for b in live)
    else:
        hard = [b for b in live if b.k == n - 1]
        soft = [b for b in live if b.k < n - 1]
        lower_ok = all(b.eps_lower == 0.0 for b in hard) and all(b.eps_lower > 0.0 for b in soft)
        lower_ok = lower_ok and _strictly_increasing([b.eps_lower for b in live])
    report = OrderingReport(float(delta), bands, upper_ok, lower_ok)

    eps = default_grid() if grid is None else np.asarray(grid, dtype=float)
    curves = {k: delta_curve(eps, k, delta, n) for k in range(1, n)}
    if delta == 1.0:
        report.pointwise_dominance = all(
            bool(np.all(curves[k] > curves[k + 1])) for k in range(1, n - 1)
        )
        return report
    for k in range(1, n - 1):
        flips = _sign_changes(curves[k] - curves[k + 1])
        if len(flips) == 1:
            i = int(flips[0])
            descending = bool(curves[k + 1][i + 1] < curves[k + 1][i])
            report.crossings.append(Crossing(k, 1, float(eps[i]), descending))
        else:
            report.crossings.append(Crossing(k, len(flips), None, False))
    return report


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepTable:
    n: int
    deltas: tuple[float, ...]
    ks: tuple[int, ...]
    epsilon: np.ndarray
    cells: np.ndarray  # (len(deltas), len(ks), len(epsilon))
    threshold: float | None = None

    def curve(self, delta: float, k: int) -> np.ndarray:
        return self.cells[self.deltas.index(delta), self.ks.index(k)]

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["delta", "k", "epsilon", "Delta", "threshold"])
        thr = "" if self.threshold is None else repr(self.threshold)
        for i, d in enumerate(self.deltas):
            for j, k in enumerate(self.ks):
                for e, v in zip(self.epsilon, self.cells[i, j]):
                    writer.writerow([repr(d), k, repr(float(e)), repr(float(v)), thr])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def gnuplot_script(self, csv_path: str) -> str:
        """Plot script for the CSV, one panel per continuation probability."""
        lines = [
            "set datafile separator ','",
            "set key outside right",
            "set xlabel 'epsilon'",
            "set ylabel 'Delta'",
            f"set multiplot layout 1,{len(self.deltas)}",
        ]
        for d in self.deltas:
            parts = [
                f"'{csv_path}' every ::1 using ($1=={d!r} && $2=={k} ? $3 : 1/0):4 "
                f"with lines title 'k={k}'"
                for k in self.ks
            ]
            if self.threshold is not None:
                parts.append(f"{self.threshold!r} with lines dashtype 2 title 'threshold'")
            lines.append(f"set title 'delta = {d!r}'")
            lines.append("plot " + ", \\\n     ".join(parts))
        lines.append("unset multiplot")
        return "\n".join(lines) + "\n"


def sweep_delta_curves(n: int, deltas: Iterable[float], ks: Iterable[int] | None = None,
                       epsilon: Sequence[float] | None = None,
                       params: GameParams | None = None) -> SweepTable:
    """Discriminant curves over a mistake-rate grid for several ``delta`` and ``k``."""
    deltas = tuple(float(d) for d in deltas)
    ks = tuple(range(1, n)) if ks is None else tuple(int(k) for k in ks)
    eps = default_grid(999) if epsilon is None else np.asarray(epsilon, dtype=float)
    if eps.ndim != 1 or len(eps) < 2 or not np.all(np.diff(eps) > 0):
        raise DomainError("epsilon grid must be strictly increasing")
    if params is not None and params.n != n:
        raise DomainError("params.n does not match n")
    cells = np.empty((len(deltas), len(ks), len(eps)))
    for i, d in enumerate(deltas):
        for j, k in enumerate(ks):
            cells[i, j] = delta_curve(eps, k, d, n)
    if not np.all(np.isfinite(cells)) or np.any(cells < 0):
        raise NumericError("sweep produced a negative or non-finite discriminant", {"n": n})
    thr = None if params is None else band_threshold(params)
    return SweepTable(n, deltas, ks, eps, cells, thr)


__all__ = [
    "EVOLUTIONARILY_STABLE", "NEUTRALLY_STABLE", "UNSTABLE", "StabilityVerdict",
    "ThresholdBand", "OrderingReport", "Crossing", "SweepTable", "classify",
    "min_delta_for_stability", "band_threshold", "ess_epsilon_band", "epsilon_star",
    "band_ordering_report", "sweep_delta_curves", "default_grid", "delta_ratio_limit",
]
