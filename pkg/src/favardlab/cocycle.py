"""Linear non-autonomous systems x' = A(t) x: Cauchy operators, the cocycle
identity, exponential-dichotomy certificates and stability probes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoDichotomyError
from .signals import Signal, constant, translate

# each (sub)step satisfies h * ||A|| <= MAX_STEP_NORM (Frobenius norm)
MAX_STEP_NORM = 0.1
GAP_RATIO = 10.0
SPLIT_FACTOR = 2.0
BLOCK = 20_000


# ---------------------------------------------------------------------------
# RK4 for linear (affine) ODEs z' = B(t) z + c(t)
# ---------------------------------------------------------------------------


def _rk4_affine(b0, bm, b1, c0, cm, c1, h):
    """Exact one-step RK4 map (M, c) for affine right-hand sides, batched over steps."""
    h = np.asarray(h, dtype=float)[:, None, None]
    dim = b0.shape[-1]
    eye = np.eye(dim)
    k1 = b0
    k2 = bm + 0.5 * h * (bm @ k1)
    k3 = bm + 0.5 * h * (bm @ k2)
    k4 = b1 + h * (b1 @ k3)
    m = eye + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if c0 is None:
        return m, None
    hv = h[..., 0]
    d1 = c0
    d2 = 0.5 * hv * np.einsum("nij,nj->ni", bm, d1) + cm
    d3 = 0.5 * hv * np.einsum("nij,nj->ni", bm, d2) + cm
    d4 = hv * np.einsum("nij,nj->ni", b1, d3) + c1
    c = hv / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
    return m, c


def _grid(t0: float, t1: float, step: float):
    if step <= 0:
        raise ValueError("step must be positive")
    n = max(1, int(math.ceil(abs(t1 - t0) / step - 1e-9)))
    return n, (t1 - t0) / n


def step_maps(coef, forcing, t0: float, t1: float, step: float):
    """Per-step affine maps of RK4 on the uniform grid from ``t0`` to ``t1``.

    Steps whose coefficient norm violates ``h*||B|| <= MAX_STEP_NORM`` are
    split into substeps and the substep maps composed, so outputs stay on the
    uniform grid. Yields ``(k0, M, c)`` blocks; ``c`` is None without forcing.
    """
    n, h = _grid(t0, t1, step)
    for k0 in range(0, n, BLOCK):
        k = np.arange(k0, min(n, k0 + BLOCK))
        ts = t0 + k * h
        b0, bm, b1 = coef(ts), coef(ts + 0.5 * h), coef(ts + h)
        if forcing is not None:
            c0, cm, c1 = forcing(ts), forcing(ts + 0.5 * h), forcing(ts + h)
        else:
            c0 = cm = c1 = None
        norm = np.maximum.reduce([np.linalg.norm(b, axis=(-2, -1)) for b in (b0, bm, b1)])
        nsub = np.maximum(1, np.ceil(abs(h) * norm / MAX_STEP_NORM).astype(np.int64))
        m, c = _rk4_affine(b0, bm, b1, c0, cm, c1, np.full(k.size, h))
        for i in np.nonzero(nsub > 1)[0]:
            m[i], ci = _substeps(coef, forcing, ts[i], h, int(nsub[i]))
            if c is not None:
                c[i] = ci
        yield k0, m, c


def _substeps(coef, forcing, t: float, h: float, nsub: int):
    hs = h / nsub
    ts = t + hs * np.arange(nsub)
    b0, bm, b1 = coef(ts), coef(ts + 0.5 * hs), coef(ts + hs)
    if forcing is not None:
        f = (forcing(ts), forcing(ts + 0.5 * hs), forcing(ts + hs))
    else:
        f = (None, None, None)
    ms, cs = _rk4_affine(b0, bm, b1, *f, np.full(nsub, hs))
    m = ms[0]
    c = None if cs is None else cs[0]
    for j in range(1, nsub):
        m = ms[j] @ m
        if c is not None:
            c = ms[j] @ c + cs[j]
    return m, c


def solve_linear(coef, forcing, t0, t1, x0, step, record=False, stride=1):
    """Integrate z' = B(t) z + c(t) from ``t0`` to ``t1`` (backward if t1 < t0).

    ``x0`` may be a vector or a matrix of column vectors. With ``record`` the
    states at every ``stride``-th grid point are returned as ``(times, states)``.
    """
    x = np.array(x0, dtype=float)
    if t1 == t0:
        return (np.array([t0]), x[None].copy()) if record else x
    n, h = _grid(t0, t1, step)
    if record:
        if n % stride:
            raise ValueError(f"{n} steps not divisible by stride {stride}")
        out = np.empty((n // stride + 1,) + x.shape)
        out[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k0, m, c in step_maps(coef, forcing, t0, t1, step):
            for i in range(m.shape[0]):
                x = m[i] @ x
                if c is not None:
                    x = x + (c[i] if x.ndim == 1 else c[i][:, None])
                k = k0 + i + 1
                if record and k % stride == 0:
                    out[k // stride] = x
            if not np.all(np.isfinite(x)):
                raise OverflowError(
                    f"non-finite state during integration, first detected by t={t0 + h * (k0 + m.shape[0]):.6g}"
                )
    if record:
        return t0 + h * stride * np.arange(n // stride + 1), out
    return x


# ---------------------------------------------------------------------------
# Linear systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """A(t) assembled from a d x d table of scalar signals.

    ``bound`` is the declared sup of ||A(t)||, spot-checked on construction;
    None declares an unbounded coefficient (e.g. the Levitan example).
    """

    entries: tuple
    bound: float | None = None

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        d = len(rows)
        if d == 0 or any(len(r) != d for r in rows):
            raise ValueError("entries must form a square table")
        if any(e.dim != 1 for r in rows for e in r):
            raise ValueError("entries must be scalar signals")
        object.__setattr__(self, "entries", rows)
        if self.bound is not None:
            ts = np.linspace(-50.0, 50.0, 101)
            worst = float(np.max(np.linalg.norm(self.matrix(ts), ord=2, axis=(-2, -1))))
            if worst > self.bound * (1 + 1e-9) + 1e-12:
                raise ValueError(f"declared bound {self.bound} violated: ||A(t)|| reaches {worst}")

    @property
    def dim(self) -> int:
        return len(self.entries)

    def matrix(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        d = self.dim
        cache: dict[int, np.ndarray] = {}
        out = np.empty(t.shape + (d, d))
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                key = id(e)
                if key not in cache:
                    cache[key] = e.scalar(t)
                out[..., i, j] = cache[key]
        return out

    __call__ = matrix

    def translate(self, h: float) -> "LinearSystem":
        return LinearSystem(tuple(tuple(translate(e, h) for e in r) for r in self.entries), self.bound)

    def signals(self) -> list:
        """Distinct entry signals (by identity)."""
        seen, out = set(), []
        for r in self.entries:
            for e in r:
                if id(e) not in seen:
                    seen.add(id(e))
                    out.append(e)
        return out

    @classmethod
    def constant(cls, a, bound: float | None = None) -> "LinearSystem":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if bound is None:
            bound = float(np.linalg.norm(a, 2))
        return cls(tuple(tuple(constant(v) for v in row) for row in a), bound)

    @classmethod
    def scalar_identity(cls, sig: Signal, dim: int = 1, bound: float | None = None) -> "LinearSystem":
        """A(t) = sig(t) * I."""
        zero = constant(0.0)
        rows = tuple(tuple(sig if i == j else zero for j in range(dim)) for i in range(dim))
        return cls(rows, bound)

    def to_dict(self) -> dict:
        return {"A": [[e.to_dict() for e in r] for r in self.entries], "bound": self.bound}


def propagate(system: LinearSystem, t0: float, t1: float, u0, step: float) -> np.ndarray:
    """Solution at ``t1`` of x' = A(t) x with x(t0) = u0 (classical RK4)."""
    return solve_linear(system.matrix, None, t0, t1, np.asarray(u0, dtype=float), step)


@dataclass(eq=False)
class CauchyOperator:
    system: LinearSystem = field(repr=False)
    s: float
    t: float
    matrix: np.ndarray
    step: float


def cauchy_operator(system: LinearSystem, s: float, t: float, step: float) -> CauchyOperator:
    """U(t, s): columns are the propagated standard basis vectors."""
    u = solve_linear(system.matrix, None, s, t, np.eye(system.dim), step)
    return CauchyOperator(system, s, t, u, step)


def cocycle_residual(system: LinearSystem, t: float, tau: float, step: float) -> float:
    """|| U(t+tau, A) - U(t, A^tau) U(tau, A) || with U(., B) started at time 0."""
    if t == 0 or tau == 0:
        return 0.0
    whole = cauchy_operator(system, 0.0, t + tau, step).matrix
    first = cauchy_operator(system, 0.0, tau, step).matrix
    second = cauchy_operator(system.translate(tau), 0.0, t, step).matrix
    return float(np.linalg.norm(whole - second @ first, 2))


def _adjoint(system: LinearSystem):
    # Y = U(0, t)^T solves Y' = -A(t)^T Y
    return lambda ts: -np.swapaxes(system.matrix(ts), -1, -2)


def _two_sided(coef, x0, horizon: float, samples: int, step: float):
    """Solutions of z' = B(t) z through z(0) = x0, recorded at ``samples``
    points per side of [-horizon, horizon]; integration step at most ``step``."""
    per = max(1, int(math.ceil(horizon / samples / step - 1e-9)))
    h = horizon / (samples * per)
    tf, zf = solve_linear(coef, None, 0.0, horizon, x0, h, record=True, stride=per)
    tb, zb = solve_linear(coef, None, 0.0, -horizon, x0, h, record=True, stride=per)
    return np.concatenate([tb[:0:-1], tf]), np.concatenate([zb[:0:-1], zf])


def transition_grid(system: LinearSystem, horizon: float, step: float, samples: int | None = None):
    """Times on [-horizon, horizon] with U(t, 0) and U(0, t) at each of them.

    U(0, t) comes from integrating the adjoint equation, not from inverting.
    """
    samples = samples or _grid(0.0, horizon, step)[0]
    eye = np.eye(system.dim)
    times, phi = _two_sided(system.matrix, eye, horizon, samples, step)
    _, y = _two_sided(_adjoint(system), eye, horizon, samples, step)
    return times, phi, np.swapaxes(y, -1, -2)


def _rank_factors(proj: np.ndarray):
    """proj = left @ right with ``rank`` columns / rows."""
    u, s, vt = np.linalg.svd(proj)
    r = int(np.sum(s > 1e-8 * max(s[0], 1.0)))
    return u[:, :r] * s[:r], vt[:r]


def bound_factors(system: LinearSystem, proj: np.ndarray, horizon: float, samples: int, step: float):
    """Times and factors (X, Y) with U(t, 0) proj U(0, tau) = X(t) @ Y(tau).T.

    X(t) = U(t, 0) left and Y(tau) = U(0, tau)^T right^T are integrated
    directly, so no product cancels large entries of U(t, 0) against U(0, tau).
    """
    left, right = _rank_factors(proj)
    if left.shape[1] == 0:
        times = np.linspace(-horizon, horizon, 2 * samples + 1)
        zero = np.zeros((times.size, system.dim, 0))
        return times, zero, zero
    times, x = _two_sided(system.matrix, left, horizon, samples, step)
    _, y = _two_sided(_adjoint(system), right.T, horizon, samples, step)
    return times, x, y


# ---------------------------------------------------------------------------
# Exponential dichotomy
# ---------------------------------------------------------------------------


class Splitting:
    """Stable and unstable subspaces along a uniform time grid.

    Orthonormal bases are carried in the direction in which each subspace
    attracts (stable backward from ``t_hi + burn``, unstable forward from
    ``t_lo - burn``) with a QR step at every grid point. The triangular QR
    factors record the growth inside each subspace, so

        ||U(t_i, t_j) P(t_j)|| = ||Cs_i^-1 Cs_j Pi_s(t_j)||,   t_i > t_j,

    with Pi_s the stable rows of [E_s E_u]^-1 (and likewise for Q), without
    ever forming U(t, 0) and U(0, tau) separately.
    """

    def __init__(self, system: LinearSystem, k_s: int, t_lo: float, t_hi: float, n: int, step: float,
                 burn: float, seed: int = 0):
        d = system.dim
        self.times = np.linspace(t_lo, t_hi, n + 1)
        self.k_s = k_s
        rng = np.random.default_rng(seed)
        self.E_s, rs = self._sweep(system, rng.standard_normal((d, k_s)), self.times[::-1], burn, step)
        self.E_s = self.E_s[::-1]
        self.E_u, ru = self._sweep(system, rng.standard_normal((d, d - k_s)), self.times, burn, step)
        # Cs[m] = Rs[0] ... Rs[m-1] (Rs[k] maps E_s at t_{k+1} back to t_k);
        # Cu[m] = Ru[m-1] ... Ru[0] (Ru[k] maps E_u at t_k forward to t_{k+1})
        self.cs, self.ls = _cumulative(rs[::-1], left=False)
        self.cu, self.lu = _cumulative(ru, left=True)
        basis = np.concatenate([self.E_s, self.E_u], axis=2)
        inv = np.linalg.inv(basis)
        self.pi_s, self.pi_u = inv[:, :k_s], inv[:, k_s:]

    @staticmethod
    def _sweep(system, basis, times, burn, step):
        d, k = basis.shape
        n = times.size
        bases = np.zeros((n, d, k))
        factors = np.zeros((n - 1, k, k))
        if k == 0:
            return bases, factors
        direction = np.sign(times[-1] - times[0])
        x = _settle_subspace(system, basis, times[0] - direction * burn, times[0], step)
        bases[0] = x
        maps = interval_maps(system, times[0], times[-1], n - 1, step)
        for m in range(1, n):
            y = maps[m - 1] @ x
            if k == 1:
                r = np.linalg.norm(y)
                x, r = y / r, np.array([[r]])
            else:
                x, r = np.linalg.qr(y)
                sgn = np.where(np.diag(r) < 0, -1.0, 1.0)
                x, r = x * sgn, r * sgn[:, None]
            bases[m], factors[m - 1] = x, r
        return bases, factors

    def projection(self, m: int) -> np.ndarray:
        return self.E_s[m] @ self.pi_s[m]

    def projections(self) -> np.ndarray:
        return self.E_s @ self.pi_s

    def norms(self, i, j) -> np.ndarray:
        """||U(t_i, t_j) P(t_j)|| where t_i > t_j, ||U(t_i, t_j) Q(t_j)|| otherwise."""
        i, j = np.asarray(i), np.asarray(j)
        out = np.zeros(i.size)
        fwd = i > j
        if self.k_s and np.any(fwd):
            a, b = i[fwd], j[fwd]
            grow = np.linalg.solve(self.cs[a], self.cs[b]) * np.exp(self.ls[b] - self.ls[a])[:, None, None]
            out[fwd] = np.linalg.norm(grow @ self.pi_s[b], 2, axis=(-2, -1))
        if self.k_s < self.E_s.shape[1] and np.any(~fwd):
            a, b = i[~fwd], j[~fwd]
            grow = np.swapaxes(np.linalg.solve(np.swapaxes(self.cu[b], -1, -2), np.swapaxes(self.cu[a], -1, -2)), -1, -2)
            grow = grow * np.exp(self.lu[a] - self.lu[b])[:, None, None]
            out[~fwd] = np.linalg.norm(grow @ self.pi_u[b], 2, axis=(-2, -1))
        return out


def interval_maps(system: LinearSystem, t0: float, t1: float, n: int, step: float) -> np.ndarray:
    """U(t_{m+1}, t_m) for the n intervals of the uniform grid from t0 to t1
    (either direction), each composed of RK4 steps no longer than ``step``."""
    per = max(1, int(math.ceil(abs(t1 - t0) / n / step - 1e-9)))
    fine = np.concatenate([m for _, m, _ in step_maps(system.matrix, None, t0, t1, abs(t1 - t0) / (n * per))])
    fine = fine.reshape(n, per, system.dim, system.dim)
    out = fine[:, 0]
    for j in range(1, per):
        out = fine[:, j] @ out
    return out


def _cumulative(factors, left: bool):
    """Running products of square factors, stored as (normalised matrix, log scale)."""
    n = factors.shape[0]
    k = factors.shape[1]
    mats = np.zeros((n + 1, k, k))
    logs = np.zeros(n + 1)
    if k == 0:
        return mats, logs
    cur = np.eye(k)
    mats[0] = cur
    for m in range(n):
        cur = factors[m] @ cur if left else cur @ factors[m]
        scale = np.linalg.norm(cur)
        cur = cur / scale
        mats[m + 1] = cur
        logs[m + 1] = logs[m] + math.log(scale)
    return mats, logs


@dataclass(eq=False)
class DichotomyCertificate:
    P: np.ndarray
    N_const: float
    nu: float
    residual: float
    horizon: float
    step: float
    richardson: float = 0.0
    justification: str = "hyperbolicity"
    system: LinearSystem | None = field(default=None, repr=False)
    _split: Splitting | None = field(default=None, repr=False)
    _factors: tuple | None = field(default=None, repr=False)

    @property
    def Q(self) -> np.ndarray:
        return np.eye(self.P.shape[0]) - self.P

    @property
    def stable_rank(self) -> int:
        return int(round(np.trace(self.P)))

    def splitting(self) -> Splitting:
        if self._split is None or self._split.k_s != self.stable_rank:
            n = _sample_count(self.horizon, self.step)
            self._split = Splitting(self.system, self.stable_rank, -self.horizon, self.horizon, 2 * n, self.step,
                                    SPLIT_FACTOR * self.horizon - self.horizon)
        return self._split

    def sample_times(self) -> np.ndarray:
        return self.splitting().times

    def pair_norms(self, i, j) -> np.ndarray:
        """Bound norms at grid pairs; P-bound where t_i > t_j, Q-bound otherwise.

        Uses the tracked splitting when ``P`` is its projection at 0, and
        otherwise evaluates the hand-supplied ``P`` through ``bound_factors``.
        """
        split = self.splitting()
        mid = split.times.size // 2
        if np.linalg.norm(split.projection(mid) - self.P) <= 1e-8 * max(1.0, np.linalg.norm(self.P)):
            return split.norms(i, j)
        key = self.P.tobytes()
        if self._factors is None or self._factors[0] != key:
            _, xp, yp = bound_factors(self.system, self.P, self.horizon, mid, self.step)
            _, xq, yq = bound_factors(self.system, self.Q, self.horizon, mid, self.step)
            self._factors = (key, (xp, yp), (xq, yq))
        _, p_f, q_f = self._factors
        fwd = i > j
        out = np.empty(i.size)
        out[fwd] = _factor_norms(p_f, i[fwd], j[fwd])
        out[~fwd] = _factor_norms(q_f, i[~fwd], j[~fwd])
        return out

    def to_dict(self) -> dict:
        return {
            "P": [float(v) for v in self.P.ravel()],
            "dim": int(self.P.shape[0]),
            "N_const": self.N_const,
            "nu": self.nu,
            "residual": self.residual,
            "horizon": self.horizon,
            "step": self.step,
            "richardson": self.richardson,
            "justification": self.justification,
        }


def _sample_count(horizon: float, step: float, target: int = 1000) -> int:
    """Grid intervals per side for bound sampling: about ``target``, never finer than ``step``."""
    return max(1, min(target, int(round(horizon / step))))


def split_index(singular_values, ratio: float = GAP_RATIO) -> int:
    """Number of expanding directions, read off the largest multiplicative gap.

    The value 1 is inserted as a neutral reference so that purely contracting
    or purely expanding transitions still exhibit a gap.
    """
    s = np.sort(np.asarray(singular_values, dtype=float))[::-1]
    aug = np.sort(np.append(s, 1.0))[::-1]
    with np.errstate(divide="ignore"):
        ratios = aug[:-1] / aug[1:]
    best = int(np.argmax(ratios))
    if not ratios[best] > ratio:
        raise NoDichotomyError(
            f"no dichotomy detected: largest singular-value gap {ratios[best]:.3g} <= {ratio}"
        )
    return int(np.sum(s > aug[best + 1] * (1 + 1e-12)))


def _factor_norms(factors, i, j):
    x, y = factors
    ops = x[i] @ np.swapaxes(y[j], -1, -2)
    return np.linalg.norm(ops, ord=2, axis=(-2, -1))


def _sample_pairs(n: int, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=samples)
    j = rng.integers(0, n, size=samples)
    keep = i != j
    return i[keep], j[keep]


def _bound_data(cert: DichotomyCertificate, samples: int, seed: int):
    """Distances |t - tau|, bound norms and the forward mask on random grid pairs."""
    times = cert.sample_times()
    i, j = _sample_pairs(times.size, samples, seed)
    return np.abs(times[i] - times[j]), cert.pair_norms(i, j), i > j


def fit_dichotomy(
    system: LinearSystem,
    horizon: float,
    step: float = 1e-3,
    samples: int = 400,
    seed: int = 0,
) -> DichotomyCertificate:
    """Split at the singular-value gap of U(H, -H), then fit (N, nu) by
    log-linear least squares over sampled (t, tau) pairs."""
    d = system.dim
    total = solve_linear(system.matrix, None, -horizon, horizon, np.eye(d), step)
    k_u = split_index(np.linalg.svd(total, compute_uv=False))
    n = _sample_count(horizon, step)
    split = Splitting(system, d - k_u, -horizon, horizon, 2 * n, step, SPLIT_FACTOR * horizon - horizon, seed)
    p = split.projection(n)
    cert = DichotomyCertificate(p, 1.0, 1.0, 0.0, horizon, step, system=system, _split=split)
    s, norms, fwd = _bound_data(cert, samples, seed)
    ok = norms > 1e-300
    if np.count_nonzero(ok) < 2:
        raise NoDichotomyError("not enough nonzero samples to fit the dichotomy constants")
    # common rate, one intercept per bound; N is the larger intercept
    branches = [b for b in (ok & fwd, ok & ~fwd) if np.any(b)]
    design = np.column_stack([b[ok] for b in branches] + [-s[ok]]).astype(float)
    coefs, *_ = np.linalg.lstsq(design, np.log(norms[ok]), rcond=None)
    nu = coefs[-1]
    if not nu > 0:
        raise NoDichotomyError(f"no dichotomy detected: fitted rate {nu:.3g} is not positive")
    cert.nu = float(nu)
    cert.N_const = float(max(1.0, math.exp(max(coefs[:-1]))))
    cert.residual = float(max(0.0, np.max(norms - cert.N_const * np.exp(-cert.nu * s))))

    # Richardson check on the long transition: halve the step once
    half = solve_linear(system.matrix, None, -horizon, horizon, np.eye(d), step / 2)
    cert.richardson = float(np.linalg.norm(half - total, 2) / max(np.linalg.norm(total, 2), 1e-300))
    return cert


def _settle_subspace(system, basis, t0: float, t1: float, step: float, segment: float = 1.0):
    """Orthonormal basis of the span of ``basis`` carried from ``t0`` to ``t1``."""
    x, _ = np.linalg.qr(basis)
    if x.shape[1] == 0 or t0 == t1:
        return x
    n = max(1, int(math.ceil(abs(t1 - t0) / segment)))
    edges = np.linspace(t0, t1, n + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        x, _ = np.linalg.qr(solve_linear(system.matrix, None, a, b, x, step))
    return x


def verify_dichotomy_bounds(cert: DichotomyCertificate, samples: int, seed: int = 12345) -> float:
    """Max relative violation of both dichotomy bounds on fresh (t, tau) pairs."""
    s, norms, _ = _bound_data(cert, samples, seed)
    bound = cert.N_const * np.exp(-cert.nu * s)
    return float(max(0.0, np.max((norms - bound) / bound)))


def translated_projection(system: LinearSystem, cert: DichotomyCertificate, t: float, step: float) -> np.ndarray:
    """P(t) = U(t, 0) P U(0, t)."""
    if t == 0:
        return cert.P.copy()
    d = system.dim
    fwd = solve_linear(system.matrix, None, 0.0, t, np.eye(d), step)
    back = solve_linear(system.matrix, None, t, 0.0, np.eye(d), step)
    return fwd @ cert.P @ back


def projection_path(system: LinearSystem, cert: DichotomyCertificate, t_start: float, t_end: float, step: float):
    """P(t) on a uniform grid, robust for long time ranges (see ``Splitting``)."""
    n, _ = _grid(t_start, t_end, step)
    split = Splitting(system, cert.stable_rank, t_start, t_end, n, min(step, cert.step), SPLIT_FACTOR * cert.horizon)
    return split.times, split.projections()


def rigidity_margin(
    system: LinearSystem,
    cert: DichotomyCertificate,
    T: float,
    step: float,
    trials: int = 16,
    seed: int = 0,
    vectors=None,
) -> float:
    """min over unit vectors with a nonzero unstable component of
    sup_{|t|<=T} ||x(t)|| divided by exp(0.9 nu T) / N.

    Values >= 1 witness that no such trajectory stays bounded on both sides.
    """
    d = system.dim
    if vectors is None:
        rng = np.random.default_rng(seed)
        vectors = rng.standard_normal((trials, d))
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    vectors = vectors[np.linalg.norm(vectors @ cert.Q.T, axis=1) > 1e-12]
    if vectors.size == 0:
        raise ValueError("no vector with a nonzero unstable component")
    _, fwd = solve_linear(system.matrix, None, 0.0, T, vectors.T, step, record=True, stride=1)
    _, back = solve_linear(system.matrix, None, 0.0, -T, vectors.T, step, record=True, stride=1)
    sup = np.maximum(np.linalg.norm(fwd, axis=1).max(axis=0), np.linalg.norm(back, axis=1).max(axis=0))
    target = math.exp(0.9 * cert.nu * T) / cert.N_const
    return float(sup.min() / target)


# ---------------------------------------------------------------------------
# Asymptotic stability
# ---------------------------------------------------------------------------


@dataclass
class StabilityReport:
    max_terminal_norm: float
    decay_rate: float
    stable: bool
    unstable_direction: bool
    t_max: float
    trials: int


def stability_probe(
    system: LinearSystem,
    t_max: float,
    step: float,
    trials: int,
    seed: int = 0,
    t0: float = 0.0,
    threshold: float = 1e-3,
) -> StabilityReport:
    """Push random unit vectors from ``t0`` to ``t0 + t_max``.

    The maximal terminal norm below ``threshold`` is the numerical proxy for
    asymptotic stability; the decay rate is the negative slope of the log of
    the largest norm against time.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((system.dim, trials))
    v /= np.linalg.norm(v, axis=0)
    n, _ = _grid(t0, t0 + t_max, step)
    stride = max(1, n // 200)
    while n % stride:
        stride -= 1
    try:
        times, states = solve_linear(system.matrix, None, t0, t0 + t_max, v, step, record=True, stride=stride)
    except OverflowError:
        return StabilityReport(math.inf, -math.inf, False, True, t_max, trials)
    norms = np.linalg.norm(states, axis=1).max(axis=1)
    terminal = float(norms[-1])
    ok = norms > 1e-300
    if np.count_nonzero(ok) >= 2:
        slope = np.polyfit(times[ok] - t0, np.log(norms[ok]), 1)[0]
    else:
        slope = -math.inf
    unstable = terminal > 1.0 and slope > 0
    return StabilityReport(terminal, float(-slope), terminal < threshold, bool(unstable), t_max, trials)


def write_transition_csv(path, times, mats) -> None:
    mats = np.asarray(mats)
    d = mats.shape[-1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t"] + [f"u{i}{j}" for i in range(d) for j in range(d)] + ["norm"])
        for t, m in zip(times, mats):
            out.writerow([f"{t:.12g}"] + [f"{v:.12g}" for v in m.ravel()] + [f"{np.linalg.norm(m, 2):.12g}"])
