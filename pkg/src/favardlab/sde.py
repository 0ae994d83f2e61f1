"""Linear SDEs dx = (A(t) x + f(t)) dt + g(t) dW with scalar Brownian motion:
Euler-Maruyama ensembles, exact Gaussian moment curves, pullback construction.

Brownian increments are indexed by absolute time: the step [k h, (k+1) h] of
path i always receives the same normal draw, whatever the start time of the
simulation. Draws come in chunks of ``CHUNK`` steps from generators seeded by
``SeedSequence(base_seed + i, spawn_key=(stream, chunk))``; negative times use
their own stream, so the two halves of the two-sided Brownian motion are
independent.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cocycle import LinearSystem, StabilityReport, solve_linear, stability_probe
from .errors import DomainError, PreconditionError
from .measures import EmpiricalMeasure, bl_auto
from .signals import Signal, constant, translate

CHUNK = 4096
BLOCK_PATHS = 1000
_INIT_STREAM, _POS_STREAM, _NEG_STREAM = 0, 1, 2


@dataclass(frozen=True, eq=False)
class SdeSystem:
    A: LinearSystem
    f: Signal
    g: Signal

    def __post_init__(self):
        d = self.A.dim
        if self.f.dim != d or self.g.dim != d:
            raise ValueError(f"dimension mismatch: A is {d}x{d}, f has {self.f.dim}, g has {self.g.dim}")

    @property
    def dim(self) -> int:
        return self.A.dim

    def translate(self, h: float) -> "SdeSystem":
        """Simultaneous translate of the coefficient triple."""
        return SdeSystem(self.A.translate(h), translate(self.f, h), translate(self.g, h))

    @classmethod
    def scalar(cls, a: Signal | float, f: Signal | float = 0.0, g: Signal | float = 0.0) -> "SdeSystem":
        as_sig = lambda v: v if isinstance(v, Signal) else constant(float(v))
        return cls(LinearSystem(((as_sig(a),),)), as_sig(f), as_sig(g))

    def to_dict(self) -> dict:
        return {"A": self.A.to_dict(), "f": self.f.to_dict(), "g": self.g.to_dict()}


# ---------------------------------------------------------------------------
# Initial laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointMass:
    x: np.ndarray

    def sample(self, rngs, d: int) -> np.ndarray:
        x = np.broadcast_to(np.asarray(self.x, dtype=float), (d,))
        return np.tile(x, (len(rngs), 1))

    def moments(self, d: int):
        return np.broadcast_to(np.asarray(self.x, dtype=float), (d,)).copy(), np.zeros((d, d))


@dataclass(frozen=True, eq=False)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def _root(self, d: int) -> np.ndarray:
        c = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if c.shape != (d, d):
            c = np.broadcast_to(c, (d, d)) * np.eye(d) if c.size == 1 else c
        w, q = np.linalg.eigh((c + c.T) / 2)
        if w.min() < -1e-10 * max(1.0, abs(w).max()):
            raise ValueError("covariance is not positive semidefinite")
        return q * np.sqrt(np.clip(w, 0.0, None))

    def sample(self, rngs, d: int) -> np.ndarray:
        root = self._root(d)
        mean = np.broadcast_to(np.asarray(self.mean, dtype=float), (d,))
        z = np.array([r.standard_normal(d) for r in rngs]).reshape(len(rngs), d)
        out = np.empty_like(z)
        for i in range(d):  # explicit sums keep rows independent of the batch
            acc = np.full(z.shape[0], mean[i])
            for j in range(d):
                acc = acc + root[i, j] * z[:, j]
            out[:, i] = acc
        return out

    def moments(self, d: int):
        root = self._root(d)
        return np.broadcast_to(np.asarray(self.mean, dtype=float), (d,)).copy(), root @ root.T


@dataclass(frozen=True, eq=False)
class Empirical:
    """Path i starts at ``points[i % n]``."""

    points: np.ndarray

    def sample(self, rngs, d: int, first: int = 0) -> np.ndarray:
        pts = np.asarray(self.points, dtype=float).reshape(-1, d)
        idx = (first + np.arange(len(rngs))) % pts.shape[0]
        return pts[idx].copy()

    def moments(self, d: int):
        m = EmpiricalMeasure.uniform(np.asarray(self.points, dtype=float).reshape(-1, d))
        return m.mean(), m.cov()


def initial_law_from_dict(doc: dict, d: int):
    kind = doc.get("kind", "point")
    if kind == "point":
        return PointMass(np.broadcast_to(np.asarray(doc.get("x", 0.0), dtype=float), (d,)).copy())
    if kind == "gaussian":
        return Gaussian(np.asarray(doc.get("mean", 0.0), dtype=float), np.asarray(doc.get("cov", 1.0), dtype=float))
    if kind == "empirical":
        return Empirical(np.asarray(doc["points"], dtype=float))
    raise ValueError(f"unknown initial law kind {kind!r}")


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class PathEnsemble:
    times: np.ndarray
    paths: np.ndarray  # (n_paths, len(times), d)
    base_seed: int
    step: float
    stride: int
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} is not on the recorded grid")
        return k

    def restrict(self, a: float, b: float) -> "PathEnsemble":
        i, j = self.index_of(a), self.index_of(b)
        return PathEnsemble(self.times[i : j + 1], self.paths[:, i : j + 1], self.base_seed, self.step,
                            self.stride, dict(self.meta))

    def merge(self, other: "PathEnsemble") -> "PathEnsemble":
        if self.times.shape != other.times.shape or np.any(self.times != other.times):
            raise ValueError("ensembles live on different grids")
        return PathEnsemble(self.times, np.concatenate([self.paths, other.paths]), self.base_seed, self.step,
                            self.stride, dict(self.meta))

    def to_csv(self, path, times=None) -> None:
        """Slice marginals as rows (path_id, t, x0, ...)."""
        ks = range(self.times.size) if times is None else [self.index_of(t) for t in times]
        d = self.paths.shape[2]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["path_id", "t"] + [f"x{i}" for i in range(d)])
            for k in ks:
                tk = f"{self.times[k]:.12g}"
                for p in range(self.n_paths):
                    out.writerow([p, tk] + [f"{v:.12g}" for v in self.paths[p, k]])


def marginal_law(ensemble: PathEnsemble, t: float) -> EmpiricalMeasure:
    """Uniform empirical measure on the slice at grid time ``t``."""
    return EmpiricalMeasure.uniform(ensemble.paths[:, ensemble.index_of(t)])


def _grid_index(t: float, step: float) -> int:
    k = t / step
    if abs(k - round(k)) > 1e-7:
        raise ValueError(f"time {t} is not a multiple of the step {step}")
    return int(round(k))


def _chunk_rng(seed: int, c: int) -> np.random.Generator:
    key = (_POS_STREAM, c) if c >= 0 else (_NEG_STREAM, -c - 1)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _normals(seeds, k0: int, k1: int) -> np.ndarray:
    """Increment draws for absolute steps k0 <= k < k1, one row per seed."""
    out = np.empty((len(seeds), k1 - k0))
    c0, c1 = k0 // CHUNK, (k1 - 1) // CHUNK
    for c in range(c0, c1 + 1):
        lo, hi = max(k0, c * CHUNK), min(k1, (c + 1) * CHUNK)
        for r, s in enumerate(seeds):
            out[r, lo - k0 : hi - k0] = _chunk_rng(s, c).standard_normal(CHUNK)[lo - c * CHUNK : hi - c * CHUNK]
    return out


def _simulate_block(first, count, base_seed, x0_law, coefs, k_start, n_steps, h, stride):
    a_k, f_k, g_k = coefs
    d = a_k.shape[-1]
    seeds = [base_seed + first + r for r in range(count)]
    init_rngs = [np.random.default_rng(np.random.SeedSequence(s, spawn_key=(_INIT_STREAM,))) for s in seeds]
    if isinstance(x0_law, Empirical):
        x = x0_law.sample(init_rngs, d, first)
    else:
        x = x0_law.sample(init_rngs, d)
    out = np.empty((count, n_steps // stride + 1, d))
    out[:, 0] = x
    sqh = math.sqrt(h)
    with np.errstate(over="ignore", invalid="ignore"):
        for s0 in range(0, n_steps, CHUNK):
            s1 = min(n_steps, s0 + CHUNK)
            xi = _normals(seeds, k_start + s0, k_start + s1)
            for k in range(s0, s1):
                a, f, g, z = a_k[k], f_k[k], g_k[k], xi[:, k - s0]
                new = np.empty_like(x)
                for i in range(d):
                    drift = np.full(count, f[i])
                    for j in range(d):
                        drift = drift + a[i, j] * x[:, j]
                    new[:, i] = x[:, i] + drift * h + g[i] * sqh * z
                x = new
                if (k + 1) % stride == 0:
                    out[:, (k + 1) // stride] = x
    return out


def simulate_paths(
    sys: SdeSystem,
    t0: float,
    t1: float,
    x0_law,
    n_paths: int,
    step: float,
    base_seed: int,
    record_stride: int = 1,
    workers: int = 1,
) -> PathEnsemble:
    """Euler-Maruyama ensemble on the grid t0, t0 + step, ..., t1.

    Path i uses seed ``base_seed + i``; the initial state is drawn first from
    its own stream, then the increments. Drift sums are written out per
    component so that a path's values do not depend on how the ensemble is
    partitioned into blocks or across ``workers``.
    """
    if step <= 0 or n_paths < 1:
        raise ValueError("step must be positive and n_paths >= 1")
    k_start, k_end = _grid_index(t0, step), _grid_index(t1, step)
    n_steps = k_end - k_start
    if n_steps < 0:
        raise ValueError("t1 must not precede t0")
    if n_steps % record_stride:
        raise ValueError(f"{n_steps} steps not divisible by record_stride {record_stride}")
    tk = (k_start + np.arange(n_steps)) * step
    coefs = (sys.A.matrix(tk), sys.f(tk), sys.g(tk))
    size = min(BLOCK_PATHS, max(1, -(-n_paths // max(1, workers))))
    blocks = [(s, min(size, n_paths - s)) for s in range(0, n_paths, size)]
    job = lambda blk: _simulate_block(blk[0], blk[1], base_seed, x0_law, coefs, k_start, n_steps, step, record_stride)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]
    paths = np.concatenate(parts)
    times = (k_start + record_stride * np.arange(n_steps // record_stride + 1)) * step
    bad = ~np.all(np.isfinite(paths), axis=(1, 2))
    if np.any(bad):
        p = int(np.argmax(bad))
        k = int(np.argmax(~np.all(np.isfinite(paths[p]), axis=1)))
        raise OverflowError(f"path {p} became non-finite by t={times[k]:.6g}")
    return PathEnsemble(times, paths, base_seed, step, record_stride, {"t0": t0, "t1": t1, "workers": workers})


# ---------------------------------------------------------------------------
# Exact Gaussian moments
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MomentCurve:
    times: np.ndarray
    mean: np.ndarray  # (M+1, d)
    cov: np.ndarray  # (M+1, d, d)

    def at(self, t):
        """Linear interpolation of (mean, cov) at ``t`` (scalar or array)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0] - 1e-9) or np.any(t > self.times[-1] + 1e-9):
            raise DomainError("time outside the moment curve")
        flat = t.ravel()
        d = self.mean.shape[1]
        m = np.stack([np.interp(flat, self.times, self.mean[:, i]) for i in range(d)], axis=-1)
        c = np.stack([np.interp(flat, self.times, self.cov[:, i, j]) for i in range(d) for j in range(d)], axis=-1)
        return m.reshape(t.shape + (d,)), c.reshape(t.shape + (d, d))

    def to_csv(self, path) -> None:
        d = self.mean.shape[1]
        iu = np.triu_indices(d)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t"] + [f"m{i}" for i in range(d)] + [f"v{i}{j}" for i, j in zip(*iu)])
            for t, m, c in zip(self.times, self.mean, self.cov):
                out.writerow([f"{t:.12g}"] + [f"{v:.12g}" for v in m] + [f"{v:.12g}" for v in c[iu]])


def moment_odes(sys: SdeSystem, t0: float, t1: float, m0, V0, step: float, record_stride: int = 1) -> MomentCurve:
    """RK4 for m' = A m + f and V' = A V + V A^T + g g^T as one affine system
    in (m, vec V), with vec in row-major order."""
    d = sys.dim
    m0 = np.broadcast_to(np.asarray(m0, dtype=float), (d,))
    V0 = np.atleast_2d(np.asarray(V0, dtype=float))
    if V0.shape != (d, d):
        raise ValueError(f"V0 must be {d}x{d}")
    if np.abs(V0 - V0.T).max() > 1e-12 or np.linalg.eigvalsh((V0 + V0.T) / 2).min() < -1e-10:
        raise ValueError("V0 must be symmetric positive semidefinite")
    eye = np.eye(d)
    D = d + d * d

    def coef(ts):
        a = sys.A.matrix(ts)
        out = np.zeros(a.shape[:-2] + (D, D))
        out[..., :d, :d] = a
        out[..., d:, d:] = np.einsum("...ij,kl->...ikjl", a, eye).reshape(a.shape[:-2] + (d * d, d * d))
        out[..., d:, d:] += np.einsum("ij,...kl->...ikjl", eye, a).reshape(a.shape[:-2] + (d * d, d * d))
        return out

    def forcing(ts):
        g = sys.g(ts)
        return np.concatenate([sys.f(ts), (g[..., :, None] * g[..., None, :]).reshape(g.shape[:-1] + (d * d,))], axis=-1)

    z0 = np.concatenate([m0, V0.ravel()])
    times, z = solve_linear(coef, forcing, t0, t1, z0, step, record=True, stride=record_stride)
    cov = z[:, d:].reshape(-1, d, d)
    return MomentCurve(times, z[:, :d].copy(), 0.5 * (cov + np.swapaxes(cov, 1, 2)))


# ---------------------------------------------------------------------------
# Pullback construction
# ---------------------------------------------------------------------------


def pullback_solution(
    sys: SdeSystem,
    window,
    n_paths: int,
    step: float,
    base_seed: int,
    burn_in: float | None = None,
    target_tol: float = 0.05,
    record_stride: int = 1,
    workers: int = 1,
    probe: StabilityReport | None = None,
    check_times: int = 3,
    check: bool = True,
) -> PathEnsemble:
    """Ensemble started at 0 at time a - burn_in, restricted to [a, b].

    Requires the stability probe to pass. The default burn-in is
    ln(100 / target_tol) / rate with the probe's fitted decay rate. With
    ``check`` the run is repeated with twice the burn-in and the largest
    BL distance between window marginals at ``check_times`` times is stored
    in ``meta['self_consistency']``.
    """
    a, b = float(window[0]), float(window[1])
    if not b > a:
        raise ValueError(f"empty window [{a}, {b}]")
    if probe is None:
        probe = stability_probe(sys.A, 20.0, step, 8, seed=base_seed, t0=a)
    if not probe.stable:
        raise PreconditionError(
            f"pullback needs an asymptotically stable A: probe terminal norm {probe.max_terminal_norm:.3g}, "
            f"decay rate {probe.decay_rate:.3g}",
            report=probe,
        )
    if burn_in is None:
        burn_in = math.log(100.0 / target_tol) / probe.decay_rate
    unit = step * record_stride
    burn_in = unit * math.ceil(burn_in / unit - 1e-9)
    zero = PointMass(np.zeros(sys.dim))

    def run(burn):
        ens = simulate_paths(sys, a - burn, b, zero, n_paths, step, base_seed, record_stride, workers)
        return ens.restrict(a, b)

    ens = run(burn_in)
    ens.meta.update({"burn_in": burn_in, "probe_rate": probe.decay_rate, "window": (a, b)})
    if check:
        twice = run(2 * burn_in)
        ks = np.unique(np.linspace(0, ens.times.size - 1, check_times).astype(int))
        betas = [
            bl_auto(EmpiricalMeasure.uniform(ens.paths[:, k]), EmpiricalMeasure.uniform(twice.paths[:, k]),
                    seed=base_seed + int(k), paired=True)[0]
            for k in ks
        ]
        ens.meta["self_consistency"] = float(max(betas))
        ens.meta["self_consistent"] = bool(max(betas) < target_tol)
    return ens


@dataclass
class BoundednessReport:
    radius: float
    half_radius: float
    growth: bool
    quantile: float


def boundedness_probe(ensemble: PathEnsemble, quantile: float = 0.99) -> BoundednessReport:
    """Largest per-time quantile of |x(t)|, the same for the first half of the
    paths, and a growth flag (last third of the window well above the first)."""
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    norms = np.linalg.norm(ensemble.paths, axis=2)
    per_time = np.quantile(norms, quantile, axis=0)
    half = max(1, ensemble.n_paths // 2)
    half_radius = float(np.quantile(norms[:half], quantile, axis=0).max())
    m = per_time.size
    growth = False
    if m >= 3:
        first, last = per_time[: m // 3].max(), per_time[-(m // 3) :].max()
        growth = bool(last > 2.0 * max(first, 1e-300) and last > per_time[0])
    return BoundednessReport(float(per_time.max()), half_radius, growth, quantile)
