"""Driver signals: closed-form quasi-periodic maps, rational compositions,
sampled grids, and exact time translation.

Every signal is callable on a scalar or an array of times and returns values
with a trailing component axis of length ``dim``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


class Signal:
    dim: int = 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self._eval(t)

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def scalar(self, t):
        """Values of a one-component signal without the trailing axis."""
        return self(t)[..., 0]

    def translate(self, h: float) -> "Signal":
        return translate(self, h)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class QuasiPeriodicSpec(Signal):
    """phi(t) = Phi(nu_1 t, ..., nu_k t) with Phi a real trigonometric polynomial.

    ``indices`` is an (n_terms, k) integer array of multi-indices and
    ``amplitudes`` an (n_terms, dim) complex array; the amplitude of -m must be
    the conjugate of the amplitude of m so that values are real.
    """

    frequencies: tuple
    indices: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        freqs = tuple(float(v) for v in self.frequencies)
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.ndim == 1:
            amp = amp[:, None]
        idx = np.asarray(self.indices, dtype=np.int64).reshape(amp.shape[0], len(freqs))
        if amp.shape[0] != idx.shape[0]:
            raise ValueError("one amplitude row per multi-index required")
        if any(v <= 0 for v in freqs):
            raise ValueError(f"frequencies must be positive: {freqs}")
        if len(set(freqs)) != len(freqs):
            raise ValueError(f"frequencies must be distinct: {freqs}")
        if len({tuple(r) for r in idx}) != idx.shape[0]:
            raise ValueError("duplicate multi-index")
        lookup = {tuple(r): a for r, a in zip(idx, amp)}
        for r, a in lookup.items():
            partner = lookup.get(tuple(-np.asarray(r)))
            if partner is None:
                if np.any(np.abs(a) > 0):
                    raise ValueError(f"multi-index {r} lacks its conjugate partner")
            elif not np.allclose(partner, np.conj(a), rtol=0, atol=1e-14):
                raise ValueError(f"amplitudes at {r} and its negative are not conjugate")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "amplitudes", amp)
        # precomputed angular rates of each term
        object.__setattr__(self, "_rates", idx @ np.asarray(freqs, dtype=float) if freqs else np.zeros(idx.shape[0]))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[1]

    def _eval(self, t):
        theta = t[..., None] * self._rates
        re, im = self.amplitudes.real, self.amplitudes.imag
        return np.cos(theta) @ re - np.sin(theta) @ im

    def torus_map(self, u) -> np.ndarray:
        """Phi evaluated at torus coordinates ``u`` (shape (..., k))."""
        theta = np.asarray(u, dtype=float) @ self.indices.T
        return np.cos(theta) @ self.amplitudes.real - np.sin(theta) @ self.amplitudes.imag

    def sup_bound(self) -> float:
        return float(np.sum(np.linalg.norm(self.amplitudes, axis=1)))

    def to_dict(self) -> dict:
        return {
            "kind": "quasi_periodic",
            "frequencies": list(self.frequencies),
            "coefficients": [
                {"index": [int(v) for v in m], "value": [[float(z.real), float(z.imag)] for z in a]}
                for m, a in zip(self.indices, self.amplitudes)
            ],
        }


def trig(frequencies=(), const=0.0, cos=None, sin=None, dim: int = 1) -> QuasiPeriodicSpec:
    """Build a real trigonometric polynomial from cosine/sine terms.

    ``cos`` and ``sin`` map multi-index tuples to amplitudes (scalars or
    ``dim``-vectors): ``a*cos(m.nu t)`` and ``b*sin(m.nu t)``.
    """
    k = len(frequencies)
    terms: dict[tuple, np.ndarray] = {}

    def add(m, z):
        m = tuple(int(v) for v in m)
        terms[m] = terms.get(m, np.zeros(dim, dtype=complex)) + z

    add((0,) * k, np.broadcast_to(np.asarray(const, dtype=complex), (dim,)))
    for m, a in (cos or {}).items():
        a = np.broadcast_to(np.asarray(a, dtype=float), (dim,))
        add(m, a / 2)
        add(tuple(-v for v in m), a / 2)
    for m, b in (sin or {}).items():
        b = np.broadcast_to(np.asarray(b, dtype=float), (dim,))
        add(m, -0.5j * b)
        add(tuple(-v for v in m), 0.5j * b)
    amp = np.array(list(terms.values()))
    idx = np.array(list(terms), dtype=np.int64).reshape(amp.shape[0], k)
    return QuasiPeriodicSpec(tuple(frequencies), idx, amp)


def constant(value) -> QuasiPeriodicSpec:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    return QuasiPeriodicSpec((), np.zeros((1, 0), dtype=np.int64), value[None, :].astype(complex))


@dataclass(frozen=True, eq=False)
class Composed(Signal):
    """numerator(t) / denominator(t) for closed-form scalar-denominator signals.

    ``lower_bound`` is the declared positive lower bound of the denominator on
    the times the signal is evaluated at; evaluation raises if it is violated.
    """

    numerator: Signal
    denominator: Signal
    lower_bound: float

    def __post_init__(self):
        if self.lower_bound <= 0:
            raise ValueError("denominator lower bound must be positive")
        if self.denominator.dim != 1:
            raise ValueError("denominator must be scalar-valued")

    @property
    def dim(self) -> int:
        return self.numerator.dim

    def _eval(self, t):
        den = self.denominator(t)
        if np.any(den < self.lower_bound):
            bad = np.asarray(t).reshape(-1)[np.argmin(den.reshape(-1))]
            raise DomainError(f"denominator below declared bound {self.lower_bound} at t={bad}")
        return self.numerator(t) / den

    def to_dict(self) -> dict:
        return {
            "kind": "composed",
            "numerator": self.numerator.to_dict(),
            "denominator": self.denominator.to_dict(),
            "lower_bound": self.lower_bound,
        }


@dataclass(frozen=True, eq=False)
class Sampled(Signal):
    """Values on the uniform grid ``t0 + k*step``; linear interpolation inside."""

    t0: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if self.step <= 0 or v.shape[0] < 2:
            raise ValueError("sampled signal needs step > 0 and at least two samples")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t1(self) -> float:
        return self.t0 + (self.values.shape[0] - 1) * self.step

    def _eval(self, t):
        s = (t - self.t0) / self.step
        n = self.values.shape[0]
        tol = 1e-9
        if np.any(s < -tol) or np.any(s > n - 1 + tol):
            raise DomainError(f"time outside sampled grid [{self.t0}, {self.t1}]")
        s = np.clip(s, 0.0, n - 1)
        k = np.minimum(np.floor(s).astype(np.int64), n - 2)
        w = (s - k)[..., None]
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]

    def to_dict(self) -> dict:
        return {"kind": "sampled", "t0": self.t0, "step": self.step, "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class Stacked(Signal):
    """Vector signal concatenating the components of its parts."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("stack needs at least one component")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return sum(c.dim for c in self.components)

    def _eval(self, t):
        return np.concatenate([c(t) for c in self.components], axis=-1)

    def to_dict(self) -> dict:
        return {"kind": "stack", "components": [c.to_dict() for c in self.components]}


@dataclass(frozen=True, eq=False)
class Shifted(Signal):
    base: Signal
    offset: float

    @property
    def dim(self) -> int:
        return self.base.dim

    def _eval(self, t):
        return self.base(t + self.offset)

    def to_dict(self) -> dict:
        return {"kind": "shifted", "offset": self.offset, "base": self.base.to_dict()}


@dataclass(frozen=True, eq=False)
class Scaled(Signal):
    base: Signal
    factor: float

    @property
    def dim(self) -> int:
        return self.base.dim

    def _eval(self, t):
        return self.factor * self.base(t)

    def to_dict(self) -> dict:
        return {"kind": "scaled", "factor": self.factor, "base": self.base.to_dict()}


def translate(signal: Signal, h: float) -> Signal:
    """The h-translate t -> signal(t + h)."""
    h = float(h)
    if isinstance(signal, Sampled):
        k = h / signal.step
        if abs(k - round(k)) > 1e-9:
            raise DomainError(f"shift {h} is not a multiple of the grid step {signal.step}")
        return Sampled(signal.t0 - round(k) * signal.step, signal.step, signal.values)
    if h == 0.0:
        return signal
    if isinstance(signal, Shifted):
        total = signal.offset + h
        return signal.base if total == 0.0 else Shifted(signal.base, total)
    return Shifted(signal, h)


def levitan_example(scale: float = 1.0, lower_bound: float = 1e-12) -> Composed:
    """scale / (2 + cos t + cos(sqrt 2 t)): Levitan almost periodic, not Bohr."""
    return Composed(constant(scale), bohr_witness(const=2.0), lower_bound)


def bohr_witness(const: float = 0.0) -> QuasiPeriodicSpec:
    """const + cos t + cos(sqrt 2 t)."""
    return trig((1.0, np.sqrt(2.0)), const=const, cos={(1, 0): 1.0, (0, 1): 1.0})


def noise_signal(seed: int, t0: float, t1: float, step: float, scale: float = 1.0, smooth: int = 1) -> Sampled:
    """Noise-like sampled signal: moving-average filtered Gaussian samples."""
    n = int(round((t1 - t0) / step)) + 1
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(n + smooth - 1)
    vals = np.convolve(raw, np.ones(smooth) / np.sqrt(smooth), mode="valid")
    return Sampled(t0, step, scale * vals)


def signal_from_dict(doc: dict) -> Signal:
    """Inverse of ``Signal.to_dict``; also accepts the ``trig``, ``constant``,
    ``levitan`` and ``noise`` shorthand kinds used in config files."""
    kind = doc.get("kind")
    if kind == "quasi_periodic":
        freqs = tuple(doc.get("frequencies", ()))
        coeffs = doc["coefficients"]
        amp = np.array([[complex(re, im) for re, im in c["value"]] for c in coeffs])
        idx = np.array([c["index"] for c in coeffs], dtype=np.int64).reshape(amp.shape[0], len(freqs))
        return QuasiPeriodicSpec(freqs, idx, amp)
    if kind == "trig":
        freqs = tuple(float(v) for v in doc.get("frequencies", ()))
        parse = lambda terms: {tuple(t["index"]): t["amp"] for t in terms or []}
        return trig(freqs, const=doc.get("const", 0.0), cos=parse(doc.get("cos")), sin=parse(doc.get("sin")))
    if kind == "constant":
        return constant(doc["value"])
    if kind == "composed":
        return Composed(signal_from_dict(doc["numerator"]), signal_from_dict(doc["denominator"]), float(doc["lower_bound"]))
    if kind == "levitan":
        return levitan_example(float(doc.get("scale", 1.0)), float(doc.get("lower_bound", 1e-12)))
    if kind == "sampled":
        return Sampled(float(doc["t0"]), float(doc["step"]), np.asarray(doc["values"], dtype=float))
    if kind == "noise":
        return noise_signal(int(doc["seed"]), float(doc["t0"]), float(doc["t1"]), float(doc["step"]),
                            float(doc.get("scale", 1.0)), int(doc.get("smooth", 1)))
    if kind == "stack":
        return Stacked(tuple(signal_from_dict(c) for c in doc["components"]))
    if kind == "shifted":
        return translate(signal_from_dict(doc["base"]), float(doc["offset"]))
    if kind == "scaled":
        return Scaled(signal_from_dict(doc["base"]), float(doc["factor"]))
    raise ValueError(f"unknown signal kind {kind!r}")
