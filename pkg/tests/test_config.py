import math

import pytest

from sivstark.config import EXAMPLE_CONFIG, load_config, parse_config_text
from sivstark.errors import ConfigError
from sivstark.model import TransitionLabel


def test_example_config_parses_fully():
    cfg = parse_config_text(EXAMPLE_CONFIG)
    g = cfg.geometry()
    assert g.gap_um == 7.6
    assert g.epsilon_diamond == 5.7
    assert cfg.resolution() == 304
    assert cfg.probe().x_um == 1.9
    assert cfg.transition() is TransitionLabel.C
    emitter = cfg.emitter()
    assert emitter.stark[TransitionLabel.C].alpha_mhz == 15.0
    assert cfg.voltages() == [10.0 * k for k in range(11)]
    assert cfg.detunings().size == 200
    assert cfg.lineshape().gamma0_mhz == 400.0
    assert cfg.amplitude().v_peak_v == 75.0
    assert cfg.ensemble_spec().n == 9
    assert cfg.tuning().kappa_for("any") == 0.21
    assert cfg.objective() == "max-matched"


def test_defaults_for_missing_sections():
    cfg = parse_config_text("[geometry]\ngap_um = 7.6\n")
    assert cfg.probe().x_um == 1.9
    assert cfg.integration_time() == 0.05
    assert cfg.scan_seed() == 1234


def test_voltage_list_forms():
    cfg = parse_config_text("[scan]\nvoltages_V = 0,5,12.5\n")
    assert cfg.voltages() == [0.0, 5.0, 12.5]
    cfg = parse_config_text("[scan]\nvoltages_V = 0:20:5\n")
    assert cfg.voltages() == [0.0, 5.0, 10.0, 15.0, 20.0]


def test_infinite_integration_time():
    cfg = parse_config_text("[scan]\nintegration_time_s = inf\n")
    assert math.isinf(cfg.integration_time())


def test_errors_carry_key_path():
    cfg = parse_config_text("[geometry]\ngap_um = oops\n")
    with pytest.raises(ConfigError) as err:
        cfg.geometry()
    assert "geometry.gap_um" in str(err.value)

    cfg = parse_config_text("[emitter]\ntransition = Q\n")
    with pytest.raises(ConfigError) as err:
        cfg.transition()
    assert "emitter.transition" in str(err.value)

    cfg = parse_config_text("[tuning]\nobjective = fastest\n")
    with pytest.raises(ConfigError) as err:
        cfg.objective()
    assert "tuning.objective" in str(err.value)

    cfg = parse_config_text("[scan]\nvoltages_V = 1;2;3\n")
    with pytest.raises(ConfigError) as err:
        cfg.voltages()
    assert "scan.voltages_V" in str(err.value)


def test_invalid_domain_reported_as_geometry_error():
    cfg = parse_config_text("[geometry]\ndomain_width_um = 10.0\n")
    with pytest.raises(ConfigError) as err:
        cfg.geometry()
    assert str(err.value).startswith("geometry")


def test_probe_outside_gap_rejected():
    cfg = parse_config_text("[probe]\nx_um = 9.0\n")
    with pytest.raises(ConfigError) as err:
        cfg.probe()
    assert "probe.x_um" in str(err.value)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.cfg"))
