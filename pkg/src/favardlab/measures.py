"""Finitely supported probability measures and the bounded-Lipschitz metric.

The metric is

    beta(mu, nu) = sup { |int f dmu - int f dnu| : Lip(f) + sup|f| <= 1 }

and on finite supports it is the optimum of one linear program in the values
of f at the support points together with the split ``alpha`` between the
Lipschitz budget and the sup budget.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

EXACT_MAX_SUPPORT = 2000


class SupportTooLargeError(ValueError):
    """Raised when the exact LP would exceed the supported size."""


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or w.shape != (pts.shape[0],):
            raise ValueError(f"shape mismatch: points {pts.shape}, weights {w.shape}")
        if pts.shape[0] == 0:
            raise ValueError("empty measure")
        if np.any(w < 0):
            raise ValueError("negative weight")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        pts = np.asarray(points, dtype=float)
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, x) -> "EmpiricalMeasure":
        return cls(np.atleast_1d(np.asarray(x, dtype=float))[None, :], np.ones(1))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def cov(self) -> np.ndarray:
        c = self.points - self.mean()
        return (c * self.weights[:, None]).T @ c

    def shifted(self, c) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.points + np.asarray(c, dtype=float), self.weights)

    def mixture(self, other: "EmpiricalMeasure", weight: float = 0.5) -> "EmpiricalMeasure":
        pts = np.vstack([self.points, other.points])
        w = np.concatenate([weight * self.weights, (1.0 - weight) * other.weights])
        return EmpiricalMeasure(pts, w / w.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["weight"] + [f"x{i}" for i in range(self.dim)])
            for w, x in zip(self.weights, self.points):
                out.writerow([f"{w:.12g}"] + [f"{v:.12g}" for v in x])

    @classmethod
    def from_csv(cls, path) -> "EmpiricalMeasure":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        w = data[:, 0]
        return cls(data[:, 1:], w / w.sum())


def _merge_supports(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    """Union of supports with the signed weight difference mu - nu per point."""
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    pts = np.vstack([mu.points, nu.points])
    signed = np.concatenate([mu.weights, -nu.weights])
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    diff = np.zeros(uniq.shape[0])
    np.add.at(diff, inv.ravel(), signed)
    return uniq, diff


def _lipschitz_pairs(points: np.ndarray):
    """Index pairs whose Lipschitz constraints imply all the others.

    On the line, constraints between sorted neighbours suffice (the rest follow
    by the triangle inequality); in higher dimension every pair is needed.
    """
    n = points.shape[0]
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0], kind="stable")
        i, j = order[:-1], order[1:]
    else:
        i, j = np.triu_indices(n, k=1)
    dist = np.linalg.norm(points[i] - points[j], axis=1)
    return i, j, dist


def bl_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact bounded-Lipschitz distance between two finitely supported laws."""
    if mu.size + nu.size > EXACT_MAX_SUPPORT:
        raise SupportTooLargeError(
            f"combined support {mu.size + nu.size} exceeds {EXACT_MAX_SUPPORT}; "
            "use bl_distance_subsampled"
        )
    pts, diff = _merge_supports(mu, nu)
    n = pts.shape[0]
    if n == 1 or np.all(np.abs(diff) <= 1e-15):
        return 0.0
    i, j, dist = _lipschitz_pairs(pts)
    m = i.size
    # variables: f_0..f_{n-1}, alpha
    rows = np.repeat(np.arange(2 * m), 3)
    cols = np.column_stack([i, j, np.full(m, n)]).ravel()
    cols = np.concatenate([cols, np.column_stack([j, i, np.full(m, n)]).ravel()])
    vals = np.column_stack([np.ones(m), -np.ones(m), -dist]).ravel()
    vals = np.concatenate([vals, vals])
    lip = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * m, n + 1))
    # |f_i| + alpha <= 1
    eye = sparse.identity(n, format="csr")
    ones = sparse.csr_matrix(np.ones((n, 1)))
    sup = sparse.vstack([sparse.hstack([eye, ones]), sparse.hstack([-eye, ones])])
    a_ub = sparse.vstack([lip, sup]).tocsr()
    b_ub = np.concatenate([np.zeros(2 * m), np.ones(2 * n)])
    c = np.concatenate([-diff, [0.0]])
    bounds = [(-1.0, 1.0)] * n + [(0.0, 1.0)]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"BL linear program failed: status={res.status} {res.message}")
    return max(float(-res.fun), 0.0) + 0.0


def bl_distance_subsampled(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    k: int,
    repeats: int,
    seed: int,
    paired: bool = False,
) -> tuple[float, float]:
    """Average of exact distances between random ``k``-point subsamples.

    Subsamples are drawn without replacement according to the weights and
    treated as uniform measures. With ``paired`` (equal-size, equally
    weighted measures whose points are coupled by index, e.g. ensembles
    sharing seeds) both sides use the same indices. Returns ``(mean, std)``.
    """
    if k > min(mu.size, nu.size) or 2 * k > EXACT_MAX_SUPPORT:
        raise ValueError(f"k={k} too large for supports {mu.size}, {nu.size}")
    if paired and (mu.size != nu.size or not np.array_equal(mu.weights, nu.weights)):
        raise ValueError("paired subsampling needs equally weighted measures of the same size")
    children = np.random.SeedSequence(seed).spawn(repeats)
    vals = np.empty(repeats)
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        a = rng.choice(mu.size, size=k, replace=False, p=mu.weights)
        b = a if paired else rng.choice(nu.size, size=k, replace=False, p=nu.weights)
        vals[r] = bl_distance(EmpiricalMeasure.uniform(mu.points[a]), EmpiricalMeasure.uniform(nu.points[b]))
    return float(vals.mean()), float(vals.std(ddof=1) if repeats > 1 else 0.0)


def bl_auto(mu: EmpiricalMeasure, nu: EmpiricalMeasure, k: int = 500, repeats: int = 20, seed: int = 0,
            paired: bool = False):
    """Exact distance when the LP is small enough, subsampled estimate otherwise."""
    if mu.size + nu.size <= EXACT_MAX_SUPPORT:
        return bl_distance(mu, nu), 0.0
    k = min(k, mu.size, nu.size, EXACT_MAX_SUPPORT // 2)
    return bl_distance_subsampled(mu, nu, k, repeats, seed, paired)


def weak_convergence_curve(laws, target: EmpiricalMeasure, k: int = 500, repeats: int = 20, seed: int = 0):
    """Distances from each law in ``laws`` to ``target``.

    Returns a list of ``(beta, spread)``; spread is 0 for exact evaluations.
    """
    laws = list(laws)
    if not laws:
        raise ValueError("empty list of laws")
    return [bl_auto(mu, target, k=k, repeats=repeats, seed=seed + i) for i, mu in enumerate(laws)]


def write_curve_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["index", "beta", "spread"])
        for i, (b, s) in enumerate(values):
            out.writerow([i, f"{b:.12g}", f"{s:.12g}"])


def gaussian_w2(m1, v1, m2, v2) -> float:
    """2-Wasserstein distance between Gaussian laws (Bures formula).

    Serves as an upper bound for the bounded-Lipschitz distance, since
    beta <= W1 <= W2.
    """
    m1, m2 = np.atleast_1d(m1), np.atleast_1d(m2)
    v1, v2 = np.atleast_2d(v1), np.atleast_2d(v2)
    if v1.shape == (1, 1):
        s1, s2 = np.sqrt(max(v1[0, 0], 0.0)), np.sqrt(max(v2[0, 0], 0.0))
        return float(np.sqrt(np.sum((m1 - m2) ** 2) + (s1 - s2) ** 2))
    r1 = _psd_sqrt(v1)
    cross = _psd_sqrt(r1 @ v2 @ r1)
    bures = np.trace(v1) + np.trace(v2) - 2.0 * np.trace(cross)
    return float(np.sqrt(np.sum((m1 - m2) ** 2) + max(bures, 0.0)))


def gaussian_bl_bound(m1, v1, m2, v2) -> float:
    return min(2.0, gaussian_w2(m1, v1, m2, v2))


def gaussian_bl_bound_batch(m1, v1, m2, v2) -> np.ndarray:
    """Vectorised ``gaussian_bl_bound`` over a leading time axis (1-D states use a fast path)."""
    m1, m2 = np.asarray(m1), np.asarray(m2)
    v1, v2 = np.asarray(v1), np.asarray(v2)
    if m1.shape[-1] == 1:
        s1 = np.sqrt(np.clip(v1[..., 0, 0], 0.0, None))
        s2 = np.sqrt(np.clip(v2[..., 0, 0], 0.0, None))
        w2 = np.sqrt((m1[..., 0] - m2[..., 0]) ** 2 + (s1 - s2) ** 2)
        return np.minimum(w2, 2.0)
    return np.array([gaussian_bl_bound(a, b, c, d) for a, b, c, d in zip(m1, v1, m2, v2)])


def _psd_sqrt(v: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh((v + v.T) / 2.0)
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T
