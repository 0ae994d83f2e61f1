"""Bebutov distance, epsilon-almost periods and epsilon-shifts on finite grids."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .signals import Signal

L_RATIO = 1.2
MODES = ("almost_period", "shift")


def l_grid(l_max: float, ratio: float = L_RATIO) -> np.ndarray:
    """Geometric grid 1, r, r^2, ... capped by (and ending at) ``l_max``."""
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    n = int(math.floor(math.log(l_max) / math.log(ratio) + 1e-12))
    ls = ratio ** np.arange(n + 1)
    if ls[-1] < l_max * (1 - 1e-12):
        ls = np.append(ls, l_max)
    return ls


def symmetric_grid(span: float, step: float) -> np.ndarray:
    k = int(math.ceil(span / step - 1e-9))
    return step * np.arange(-k, k + 1)


def _caps(t: np.ndarray, ls: np.ndarray) -> np.ndarray:
    """1/l(t) with l(t) the smallest grid value >= |t| (0 beyond the last l)."""
    pos = np.searchsorted(ls, np.abs(t) * (1 - 1e-12), side="left")
    inv = np.concatenate([1.0 / ls, [0.0]])
    return inv[pos]


def bebutov_distance(f: Signal, g: Signal, l_max: float, grid_step: float) -> float:
    """Grid version of sup_l min(max_{|t|<=l} |f(t)-g(t)|, 1/l) over l in ``l_grid``.

    Rewritten as max_t min(|f(t)-g(t)|, 1/l(t)); the two forms agree exactly.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    ls = l_grid(l_max)
    t = symmetric_grid(l_max, grid_step)
    t = t[np.abs(t) <= l_max * (1 + 1e-12)]
    rho = np.linalg.norm(f(t) - g(t), axis=-1)
    return float(np.max(np.minimum(rho, _caps(t, ls))))


class _ResidualKernel:
    """Residuals r(tau) = max_t min(|phi(t+tau) - phi(t)|, cap(t)) on a fixed t-grid.

    ``cap`` is infinite for almost periods and 1/l(t) for shifts, so the shift
    residual equals the grid Bebutov distance d(phi^tau, phi).
    """

    def __init__(self, signal: Signal, mode: str, span: float, step: float, chunk_elems: int = 4_000_000):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.signal = signal
        self.t = symmetric_grid(span, step)
        if mode == "shift":
            self.t = self.t[np.abs(self.t) <= span * (1 + 1e-12)]
            self.cap = _caps(self.t, l_grid(span))
        else:
            self.cap = np.full(self.t.shape, np.inf)
        self.base = signal(self.t)
        self.chunk_elems = chunk_elems
        centre = int(np.argmin(np.abs(self.t)))
        n = self.t.size
        coarse = np.unique(np.linspace(0, n - 1, min(n, 64)).astype(int))
        self.stages = [np.array([centre]), coarse, np.arange(n)]

    def _residual(self, taus: np.ndarray, sel: np.ndarray) -> np.ndarray:
        out = np.empty(taus.size)
        per = max(1, self.chunk_elems // max(sel.size, 1))
        t, base, cap = self.t[sel], self.base[sel], self.cap[sel]
        for s in range(0, taus.size, per):
            tau = taus[s : s + per]
            vals = self.signal(tau[:, None] + t[None, :])
            rho = np.linalg.norm(vals - base[None], axis=-1)
            out[s : s + per] = np.max(np.minimum(rho, cap[None]), axis=1)
        return out

    def residuals(self, taus) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        return self._residual(taus, self.stages[-1])

    def test(self, taus, epsilon: float):
        """(passed mask, residuals); residuals are exact where passed, lower bounds elsewhere."""
        taus = np.asarray(taus, dtype=float)
        alive = np.arange(taus.size)
        res = np.zeros(taus.size)
        for sel in self.stages:
            if alive.size == 0:
                break
            r = self._residual(taus[alive], sel)
            res[alive] = r
            alive = alive[r < epsilon]
        passed = np.zeros(taus.size, dtype=bool)
        passed[alive] = True
        return passed, res


@dataclass
class AlmostPeriodReport:
    epsilon: float
    window: tuple
    mode: str
    scan_step: float
    verify_span: float
    periods: np.ndarray
    residuals: np.ndarray
    representatives: np.ndarray
    max_gap: float
    indices: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def window_length(self) -> float:
        return self.window[1] - self.window[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["tau", "residual"])
            for tau, r in zip(self.periods, self.residuals):
                out.writerow([f"{tau:.12g}", f"{r:.12g}"])


def _runs(idx: np.ndarray):
    if idx.size == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [idx.size - 1]])
    return [(int(idx[s]), int(idx[e])) for s, e in zip(starts, ends)]


def _extend(kernel: _ResidualKernel, j: int, direction: int, epsilon: float, step: float, limit: int) -> int:
    """Last grid index reached walking from ``j`` while the test keeps passing."""
    block = 256
    reached = j
    while abs(reached - j) < limit:
        cand = reached + direction * np.arange(1, block + 1)
        ok, _ = kernel.test(cand * step, epsilon)
        if ok.all():
            reached = int(cand[-1])
            continue
        first_bad = int(np.argmin(ok))
        return int(cand[first_bad - 1]) if first_bad > 0 else reached
    return reached


def scan_almost_periods(
    signal: Signal,
    epsilon: float,
    window,
    scan_step: float,
    verify_span: float,
    mode: str = "almost_period",
    verify_step: float | None = None,
) -> AlmostPeriodReport:
    """All grid tau in ``window`` passing the almost-period (or shift) test.

    The tau-grid is the multiples of ``scan_step`` inside the window, so scans
    of different signals with the same step can be intersected by index.
    Residuals are checked on the symmetric t-grid of step ``verify_step``
    (default ``scan_step``) covering ``|t| <= verify_span``.
    """
    a, b = float(window[0]), float(window[1])
    if not b > a:
        raise ValueError(f"empty window [{a}, {b}]")
    if epsilon <= 0 or scan_step <= 0:
        raise ValueError("epsilon and scan_step must be positive")
    if verify_span < 1.0 / epsilon * (1 - 1e-12):
        raise ValueError(f"verify_span {verify_span} < 1/epsilon = {1 / epsilon}")
    verify_step = scan_step if verify_step is None else verify_step
    kernel = _ResidualKernel(signal, mode, verify_span, verify_step)

    j0 = int(math.ceil(a / scan_step - 1e-9))
    j1 = int(math.floor(b / scan_step + 1e-9))
    grid_idx = np.arange(j0, j1 + 1, dtype=np.int64)
    passed_idx, residuals = [], []
    block = 1_000_000
    for s in range(0, grid_idx.size, block):
        idx = grid_idx[s : s + block]
        ok, res = kernel.test(idx * scan_step, epsilon)
        passed_idx.append(idx[ok])
        residuals.append(res[ok])
    idx = np.concatenate(passed_idx) if passed_idx else np.zeros(0, dtype=np.int64)
    res = np.concatenate(residuals) if residuals else np.zeros(0)

    runs = _runs(idx)
    limit = j1 - j0 + 1
    reps = []
    for k, (lo, hi) in enumerate(runs):
        if k == 0 and lo == j0:
            lo = _extend(kernel, lo, -1, epsilon, scan_step, limit)
        if k == len(runs) - 1 and hi == j1:
            hi = _extend(kernel, hi, +1, epsilon, scan_step, limit)
        reps.append(0.5 * (lo + hi) * scan_step)
    reps = np.asarray(reps)
    periods = idx * scan_step
    return AlmostPeriodReport(
        epsilon=epsilon,
        window=(a, b),
        mode=mode,
        scan_step=scan_step,
        verify_span=verify_span,
        periods=periods,
        residuals=res,
        representatives=reps,
        max_gap=_max_gap(periods, reps, a, b, scan_step),
        indices=idx,
    )


def _max_gap(periods, reps, a, b, step) -> float:
    length = b - a
    if periods.size == 0:
        return length
    gaps = [periods[0] - a, b - periods[-1], step]
    if reps.size > 1:
        gaps.append(float(np.max(np.diff(reps))))
    return float(min(max(gaps), length))


def relative_density_gap(report: AlmostPeriodReport) -> float:
    """Empirical inclusion length of the detected period set in its window."""
    if report.periods.size == 0:
        return report.window_length
    return report.max_gap


def shift_test(signal: Signal, taus, epsilon: float, verify_span: float, verify_step: float, mode: str = "shift"):
    """Pass mask and residuals of the given tau values (no window scan)."""
    kernel = _ResidualKernel(signal, mode, verify_span, verify_step)
    return kernel.test(taus, epsilon)


def levitan_inclusion_check(
    phi: Signal,
    psi: Signal,
    epsilon: float,
    delta: float,
    window,
    scan_step: float,
    verify_span: float,
    verify_step: float | None = None,
) -> float:
    """Fraction of the delta-almost periods of ``psi`` that are epsilon-shifts of ``phi``."""
    if delta <= 0 or epsilon <= 0:
        raise ValueError("epsilon and delta must be positive")
    report = scan_almost_periods(psi, delta, window, scan_step, verify_span, "almost_period", verify_step)
    if report.periods.size == 0:
        return 1.0
    ok, _ = shift_test(phi, report.periods, epsilon, verify_span, verify_step or scan_step)
    return float(ok.mean())
