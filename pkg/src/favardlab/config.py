"""YAML config documents for experiments and the scan, dichotomy and simulate
commands.

Signals in configs are either a number (a constant), a list of numbers (a
constant vector) or a mapping understood by ``signal_from_dict``. A system's
``A`` is a scalar signal (1 x 1), a square table of signals, or
``{identity: <signal>, dim: d}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .cocycle import LinearSystem
from .errors import ConfigError
from .harness import CLASS_LABELS, ExperimentConfig
from .sde import SdeSystem, initial_law_from_dict
from .signals import Signal, Stacked, constant, signal_from_dict


class _Doc:
    """A parsed document plus the line of every field, for diagnostics."""

    def __init__(self, text: str, source: str):
        self.source = source
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{source}:{mark.line + 1}" if mark is not None else source
            raise ConfigError(f"{where}: malformed YAML: {getattr(exc, 'problem', exc)}") from None
        if not isinstance(self.data, dict):
            raise ConfigError(f"{source}: top level must be a mapping")
        self.lines: dict[str, int] = {}
        self._index(node, "")

    def _index(self, node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                sub = f"{path}.{k.value}" if path else str(k.value)
                self.lines[sub] = k.start_mark.line + 1
                self._index(v, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                sub = f"{path}[{i}]"
                self.lines[sub] = v.start_mark.line + 1
                self._index(v, sub)

    def error(self, field: str, message: str) -> ConfigError:
        probe = field
        while probe and probe not in self.lines:
            probe = probe.rpartition(".")[0] if "." in probe else ""
        line = f":{self.lines[probe]}" if probe else ""
        return ConfigError(f"{self.source}{line}: field '{field}': {message}")


def _read(path) -> _Doc:
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    return _Doc(text, str(path))


def config_digest(path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Field helpers
# ---------------------------------------------------------------------------

_MISSING = object()


def _get(doc: _Doc, data: dict, key: str, prefix: str, default=_MISSING):
    if key in data and data[key] is not None:
        return data[key]
    if default is _MISSING:
        raise doc.error(f"{prefix}{key}", "required field is missing")
    return default


def _number(doc, data, key, prefix="", default=_MISSING, positive=False, integer=False):
    raw = _get(doc, data, key, prefix, default)
    if raw is None:
        return None
    try:
        val = int(raw) if integer else float(raw)
        if integer and float(raw) != val:
            raise ValueError
    except (TypeError, ValueError):
        raise doc.error(f"{prefix}{key}", f"expected {'an integer' if integer else 'a number'}, got {raw!r}") from None
    if positive and not val > 0:
        raise doc.error(f"{prefix}{key}", f"must be positive, got {val}")
    return val


def _window(doc, data, key, prefix=""):
    raw = _get(doc, data, key, prefix)
    try:
        a, b = (float(v) for v in raw)
    except (TypeError, ValueError):
        raise doc.error(f"{prefix}{key}", f"expected [start, end], got {raw!r}") from None
    if not b > a:
        raise doc.error(f"{prefix}{key}", f"empty window [{a}, {b}]")
    return (a, b)


def _signal(doc, raw, field) -> Signal:
    try:
        if isinstance(raw, (int, float)):
            return constant(float(raw))
        if isinstance(raw, list) and all(isinstance(v, (int, float)) for v in raw):
            return constant(np.asarray(raw, dtype=float))
        if isinstance(raw, list):
            return Stacked(tuple(_signal(doc, v, f"{field}[{i}]") for i, v in enumerate(raw)))
        if isinstance(raw, dict):
            return signal_from_dict(raw)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise doc.error(field, f"invalid signal: {exc}") from None
    raise doc.error(field, f"expected a number, list or signal mapping, got {raw!r}")


def _linear_system(doc, raw, field) -> LinearSystem:
    bound = None
    if isinstance(raw, dict) and "identity" in raw:
        sig = _signal(doc, raw["identity"], f"{field}.identity")
        dim = raw.get("dim", 1)
        bound = raw.get("bound")
        try:
            return LinearSystem.scalar_identity(sig, int(dim), bound)
        except ValueError as exc:
            raise doc.error(field, str(exc)) from None
    if isinstance(raw, dict) and "entries" in raw:
        bound = raw.get("bound")
        raw = raw["entries"]
        field = f"{field}.entries"
    if isinstance(raw, list) and raw and all(isinstance(r, list) for r in raw):
        rows = tuple(tuple(_signal(doc, e, f"{field}[{i}][{j}]") for j, e in enumerate(r)) for i, r in enumerate(raw))
    else:
        rows = ((_signal(doc, raw, field),),)
    try:
        return LinearSystem(rows, None if bound is None else float(bound))
    except ValueError as exc:
        raise doc.error(field, str(exc)) from None


def _sde_system(doc, raw, field) -> SdeSystem:
    if not isinstance(raw, dict):
        raise doc.error(field, "expected a mapping with A, f and g")
    A = _linear_system(doc, _get(doc, raw, "A", f"{field}."), f"{field}.A")
    d = A.dim

    def vec(key):
        sig = _signal(doc, raw.get(key, 0.0), f"{field}.{key}")
        if sig.dim == 1 and d > 1 and isinstance(raw.get(key, 0.0), (int, float)):
            sig = constant(np.full(d, float(raw.get(key, 0.0))))
        return sig

    try:
        return SdeSystem(A, vec("f"), vec("g"))
    except ValueError as exc:
        raise doc.error(field, str(exc)) from None


def _initial_law(doc, raw, field, d):
    if isinstance(raw, (int, float, list)):
        raw = {"kind": "point", "x": raw}
    if not isinstance(raw, dict):
        raise doc.error(field, f"expected an initial law mapping, got {raw!r}")
    try:
        return initial_law_from_dict(raw, d)
    except (KeyError, TypeError, ValueError) as exc:
        raise doc.error(field, f"invalid initial law: {exc}") from None


# ---------------------------------------------------------------------------
# Experiment configs
# ---------------------------------------------------------------------------


def _experiment_params(doc, data, sys: SdeSystem) -> dict:
    params = dict(data.get("params") or {})
    if "initial_laws" in params:
        laws = params["initial_laws"]
        if not isinstance(laws, list) or len(laws) != 2:
            raise doc.error("params.initial_laws", "expected a list of two initial laws")
        params["initial_laws"] = [_initial_law(doc, v, f"params.initial_laws[{i}]", sys.dim) for i, v in enumerate(laws)]
    if "witness" in params:
        params["witness"] = _signal(doc, params["witness"], "params.witness")
    if "reference_system" in params:
        params["reference_system"] = _sde_system(doc, params["reference_system"], "params.reference_system")
    if "scan" in params:
        scan = params["scan"]
        if not isinstance(scan, dict):
            raise doc.error("params.scan", "expected a mapping")
        _window(doc, scan, "window", "params.scan.")
        _number(doc, scan, "scan_step", "params.scan.", positive=True)
        _number(doc, scan, "verify_span", "params.scan.", positive=True)
        _number(doc, scan, "verify_step", "params.scan.", default=None, positive=True)
    for key in ("delta", "epsilon", "period"):
        if key in params:
            _number(doc, params, key, "params.", positive=True)
    return params


def experiment_from_doc(doc: _Doc, seed: int | None = None, n_paths: int | None = None) -> ExperimentConfig:
    data = doc.data
    name = str(_get(doc, data, "name", ""))
    label = _get(doc, data, "class_label", "")
    if label not in CLASS_LABELS:
        raise doc.error("class_label", f"must be one of {', '.join(CLASS_LABELS)}, got {label!r}")
    sys = _sde_system(doc, _get(doc, data, "system", ""), "system")
    paths = _number(doc, data, "n_paths", integer=True, positive=True)
    step = _number(doc, data, "step", positive=True)
    window = _window(doc, data, "window")
    burn = _number(doc, data, "burn_in", default=None, positive=True)
    seeds = data.get("seeds") or {"base": 0}
    if not isinstance(seeds, dict):
        raise doc.error("seeds", "expected a mapping such as {base: 0}")
    seeds = {k: _number(doc, seeds, k, "seeds.", integer=True) for k in seeds}
    tolerances = data.get("tolerances") or {}
    if not isinstance(tolerances, dict):
        raise doc.error("tolerances", "expected a mapping of named tolerances")
    tolerances = {k: _number(doc, tolerances, k, "tolerances.", positive=True) for k in tolerances}
    params = _experiment_params(doc, data, sys)
    if seed is not None:
        seeds["base"] = int(seed)
    if n_paths is not None:
        paths = int(n_paths)
    try:
        return ExperimentConfig(name, label, sys, paths, step, window, burn, seeds, tolerances, params,
                                bool(data.get("expect_pass", True)))
    except ValueError as exc:
        raise doc.error("params" if "period" in str(exc) else "window", str(exc)) from None


def load_experiment(path, seed: int | None = None, n_paths: int | None = None) -> ExperimentConfig:
    return experiment_from_doc(_read(path), seed, n_paths)


# ---------------------------------------------------------------------------
# Command configs
# ---------------------------------------------------------------------------


@dataclass
class ScanConfig:
    signal: Signal
    epsilon: float
    window: tuple
    scan_step: float
    verify_span: float
    verify_step: float | None = None
    mode: str = "almost_period"


def load_scan(path) -> ScanConfig:
    doc = _read(path)
    data = doc.data
    sig = _signal(doc, _get(doc, data, "signal", ""), "signal")
    eps = _number(doc, data, "epsilon", positive=True)
    window = _window(doc, data, "window")
    step = _number(doc, data, "scan_step", positive=True)
    span = _number(doc, data, "verify_span", default=max(1.0 / eps, 50.0), positive=True)
    if span < 1.0 / eps:
        raise doc.error("verify_span", f"must be at least 1/epsilon = {1 / eps}")
    mode = data.get("mode", "almost_period")
    if mode not in ("almost_period", "shift"):
        raise doc.error("mode", f"must be almost_period or shift, got {mode!r}")
    return ScanConfig(sig, eps, window, step, span, _number(doc, data, "verify_step", default=None, positive=True), mode)


@dataclass
class DichotomyConfig:
    system: LinearSystem
    horizon: float
    step: float
    samples: int = 400
    seed: int = 0


def load_dichotomy(path, seed: int | None = None) -> DichotomyConfig:
    doc = _read(path)
    data = doc.data
    raw = _get(doc, data, "system", "")
    field = "system"
    if isinstance(raw, dict) and "A" in raw:
        raw, field = raw["A"], "system.A"
    system = _linear_system(doc, raw, field)
    seeds = data.get("seeds") or {}
    base = seed if seed is not None else int(seeds.get("base", 0)) if isinstance(seeds, dict) else 0
    return DichotomyConfig(
        system,
        _number(doc, data, "horizon", positive=True),
        _number(doc, data, "step", default=1e-3, positive=True),
        _number(doc, data, "samples", default=400, integer=True, positive=True),
        base,
    )


@dataclass
class SimulateConfig:
    system: SdeSystem
    t0: float
    t1: float
    step: float
    n_paths: int
    initial_law: object
    seed: int = 0
    record_stride: int = 1
    workers: int = 1
    moments: bool = True


def load_simulate(path, seed: int | None = None, n_paths: int | None = None) -> SimulateConfig:
    doc = _read(path)
    data = doc.data
    sys = _sde_system(doc, _get(doc, data, "system", ""), "system")
    t0, t1 = _window(doc, data, "window")
    step = _number(doc, data, "step", positive=True)
    for key, t in (("window", t0), ("window", t1)):
        if abs(t / step - round(t / step)) > 1e-6:
            raise doc.error(key, f"endpoint {t} is not a multiple of step {step}")
    paths = _number(doc, data, "n_paths", integer=True, positive=True)
    law = _initial_law(doc, data.get("initial_law", 0.0), "initial_law", sys.dim)
    seeds = data.get("seeds") or {}
    base = int(seeds.get("base", 0)) if isinstance(seeds, dict) else 0
    return SimulateConfig(
        sys, t0, t1, step,
        int(paths) if n_paths is None else int(n_paths),
        law,
        base if seed is None else int(seed),
        _number(doc, data, "record_stride", default=1, integer=True, positive=True),
        _number(doc, data, "workers", default=1, integer=True, positive=True),
        bool(data.get("moments", True)),
    )
