from pathlib import Path

import numpy as np
import pytest

from favardlab.config import load_dichotomy, load_experiment, load_scan, load_simulate, config_digest
from favardlab.errors import ConfigError
from favardlab.sde import Gaussian, PointMass

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
EXPERIMENTS = sorted(p for p in CONFIGS.glob("*.yaml") if not p.name.startswith(("scan", "dichotomy", "simulate")))


@pytest.mark.parametrize("path", EXPERIMENTS, ids=lambda p: p.stem)
def test_shipped_experiment_configs_load(path):
    cfg = load_experiment(path)
    assert cfg.expect_pass == (not path.stem.endswith("negative"))
    assert all(v > 0 for v in cfg.tolerances.values())


def test_each_class_ships_a_negative_control():
    labels = {}
    for p in EXPERIMENTS:
        cfg = load_experiment(p)
        labels.setdefault(cfg.class_label, set()).add(cfg.expect_pass)
    assert set(labels) == {"periodic", "quasi_periodic_bohr", "levitan", "convergence", "hyperbolic_deterministic"}
    assert all(v == {True, False} for v in labels.values())


def test_overrides_and_parsed_objects():
    cfg = load_experiment(CONFIGS / "convergence.yaml", seed=5, n_paths=123)
    assert cfg.seed == 5 and cfg.n_paths == 123
    laws = cfg.params["initial_laws"]
    assert isinstance(laws[0], PointMass) and isinstance(laws[1], Gaussian)
    hyp = load_experiment(CONFIGS / "hyperbolic.yaml")
    assert hyp.system.dim == 2 and np.allclose(hyp.system.A.matrix(0.0), np.diag([-1.0, 1.0]))
    assert np.allclose(hyp.system.f(0.0), [1.0, 1.0]) and np.allclose(hyp.system.g(3.0), [0.0, 0.0])
    lev = load_experiment(CONFIGS / "levitan.yaml")
    assert lev.system.A.matrix(0.0)[0, 0] == pytest.approx(-0.25)
    assert lev.params["witness"].scalar(0.0) == pytest.approx(2.0)


def test_command_configs():
    scan = load_scan(CONFIGS / "scan_cos.yaml")
    assert scan.epsilon == 0.1 and scan.window == (1.0, 20.0)
    d = load_dichotomy(CONFIGS / "dichotomy_diag.yaml")
    assert d.system.dim == 2 and d.horizon == 10.0
    s = load_simulate(CONFIGS / "simulate_ou.yaml", n_paths=7)
    assert s.n_paths == 7 and s.record_stride == 1000


def _write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


BASE = """name: x
class_label: convergence
system: {A: -1.0, f: 0.0, g: 1.0}
n_paths: 100
step: 0.001
window: [0.0, 1.0]
"""


def test_missing_field_is_named(tmp_path):
    p = _write(tmp_path, BASE.replace("n_paths: 100\n", ""))
    with pytest.raises(ConfigError, match="'n_paths'.*missing"):
        load_experiment(p)


def test_bad_values_carry_line_numbers(tmp_path):
    p = _write(tmp_path, BASE.replace("step: 0.001", "step: -1"))
    with pytest.raises(ConfigError, match=r"c\.yaml:5: field 'step'"):
        load_experiment(p)
    p = _write(tmp_path, BASE.replace("window: [0.0, 1.0]", "window: [2.0, 1.0]"))
    with pytest.raises(ConfigError, match=r":6: field 'window': empty"):
        load_experiment(p)
    p = _write(tmp_path, BASE.replace("class_label: convergence", "class_label: nope"))
    with pytest.raises(ConfigError, match="class_label"):
        load_experiment(p)
    p = _write(tmp_path, BASE + "tolerances: {beta: 0}\n")
    with pytest.raises(ConfigError, match="tolerances.beta"):
        load_experiment(p)
    p = _write(tmp_path, BASE.replace("A: -1.0", "A: {kind: wavelet}"))
    with pytest.raises(ConfigError, match="system.A"):
        load_experiment(p)


def test_malformed_yaml_and_unreadable(tmp_path):
    p = _write(tmp_path, "name: [unclosed\n")
    with pytest.raises(ConfigError, match="malformed YAML"):
        load_experiment(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_experiment(tmp_path / "absent.yaml")
    with pytest.raises(ConfigError, match="mapping"):
        load_experiment(_write(tmp_path, "- 1\n- 2\n"))


def test_short_periodic_window_rejected(tmp_path):
    p = _write(tmp_path, BASE.replace("convergence", "periodic") + "params: {period: 6.283185307179586}\n")
    with pytest.raises(ConfigError, match="4 driver periods"):
        load_experiment(p)


def test_digest_tracks_content(tmp_path):
    p = _write(tmp_path, BASE)
    first = config_digest(p)
    assert first == config_digest(p) and len(first) == 64
    p.write_text(BASE + "# comment\n")
    assert config_digest(p) != first
