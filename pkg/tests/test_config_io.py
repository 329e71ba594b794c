import math

import numpy as np
import pytest

from avianjump import config as cfg
from avianjump import logio
from avianjump.model import DEG
from avianjump.sim import Scenario, run_takeoff


def test_default_config_reproduces_defaults():
    conf = cfg.load_default()
    assert conf.scenario == Scenario()
    assert conf.sweep == {"gear_ratio": [15.0, 19.13, 25.0]}
    assert conf.metrics.leg_length == 0.24
    assert conf.version == cfg.SCHEMA_VERSION


@pytest.mark.parametrize(
    "text,dim,expect",
    [
        ("25 deg", "angle", 25 * DEG),
        ("25 °", "angle", 25 * DEG),
        ("0.2 ms", "time", 2e-4),
        ("3.207 Nmm/°", "stiffness", 3.207e-3 / DEG),
        ("0.63 kg", "force", 0.63 * 9.81),
        ("0, 0.02 m", "length", (0.0, 0.02)),
        ("0.4 kg, 0.5 kg", "mass", (0.4, 0.5)),
    ],
)
def test_parse_quantity(text, dim, expect):
    assert cfg.parse_quantity(text, dim) == pytest.approx(expect)


@pytest.mark.parametrize("text", ["25", "25 furlongs", "abc deg", "1 m, 2 mm"])
def test_parse_quantity_errors(text):
    with pytest.raises(cfg.ConfigError):
        cfg.parse_quantity(text, "angle" if "deg" in text or text[0] == "2" else "length")


def test_malformed_unit_names_key_and_line():
    text = "[meta]\nversion = 1\n\n[params]\nl_1 = 0.1 furlongs\n"
    with pytest.raises(cfg.ConfigError) as err:
        cfg.loads(text, "bad.ini")
    msg = str(err.value)
    assert msg.startswith("bad.ini:5: [params] l_1") and "furlongs" in msg


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[meta]\nversion = 2\n", "schema version 2"),
        ("[bogus]\n", "unknown section"),
        ("[params]\nnope = 1\n", "nope"),
        ("[integration]\ndt = 1 s\n", "dt"),
        ("[controller]\nstrategy = bang\n", "strategy"),
        ("[params]\ntoe_stop = maybe\n", "toe_stop"),
        ("not an ini", "bad.ini"),
    ],
)
def test_config_errors(text, needle):
    with pytest.raises(cfg.ConfigError) as err:
        cfg.loads(text, "bad.ini")
    assert needle in str(err.value)


def test_overrides_and_table_names():
    conf = cfg.loads(
        "[params]\nBody mass = 400 g\nMax thrust = 0.5 kg\n[initial_state]\nInitial hip angle = 120 deg\n"
        "[controller]\nkp_pitch = 100\nflight_hold = false\n[thrust_schedule]\nbreakpoints = 0 s: 0.0, 0.1 s: 0.5\n"
        "[gait]\nmode = ForwardHop\nn_steps = 8\n[sweep]\nBody mass = 0.4 kg, 0.5 kg\nworkers = 2\n"
        "[metrics]\nV_avg = 11.1 V\n"
    )
    sc = conf.scenario
    assert sc.params.m_body == pytest.approx(0.4)
    assert sc.params.max_thrust == pytest.approx(0.5 * 9.81)
    assert sc.state0.q[3] == pytest.approx(120 * DEG)
    assert sc.control.gains["pitch"] == (100.0, 40.0)
    assert sc.control.flight_hold is False
    assert sc.thrust_schedule == ((0.0, 0.0), (0.1, 0.5))
    assert conf.gait.mode.value == "ForwardHop" and conf.gait.config.n_steps == 8
    assert conf.sweep == {"m_body": [0.4, 0.5]} and conf.sweep_workers == 2
    assert conf.metrics.V_avg == 11.1


def test_gait_mode_lenient():
    assert cfg.parse_gait_mode("walk").value == "Walk"
    assert cfg.parse_gait_mode("jump_takeoff").value == "JumpTakeoff"
    with pytest.raises(ValueError):
        cfg.parse_gait_mode("gallop")
    with pytest.raises(cfg.ConfigError, match=r"x.ini:2: \[gait\] mode"):
        cfg.loads("[gait]\nmode = gallop\n", "x.ini")


def test_load_file(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(cfg.default_config_text())
    assert cfg.load(p).scenario == Scenario()
    with pytest.raises(cfg.ConfigError):
        cfg.load(tmp_path / "missing.ini")


# -- CSV ------------------------------------------------------------------------------


def test_log_csv_round_trip(tmp_path):
    log = run_takeoff(Scenario(duration=0.02))
    p = tmp_path / "log.csv"
    logio.write_log_csv(log, p)
    t = logio.read_log_csv(p)
    for name in ("t", "q", "qd", "tau", "fc", "com", "vcom", "p_mech", "e_mech"):
        np.testing.assert_array_equal(getattr(t, name), np.asarray(getattr(log, name)), err_msg=name)
    assert t.mode == log.mode
    logio.write_events_csv(log.events, tmp_path / "ev.csv")
    assert logio.read_events_csv(tmp_path / "ev.csv") == [(e.time, e.kind.value) for e in log.events]
    assert logio.detect_format(p) == "sim"


def test_float_format_is_lossless():
    rng = np.random.default_rng(0)
    for x in rng.normal(size=200) * 10.0 ** rng.integers(-300, 300, 200):
        assert float(logio.fmt(x)) == x
    assert logio.fmt(True) == "true" and logio.fmt(3) == "3"


def test_power_logs(tmp_path):
    t = np.linspace(0, 1, 11)
    logio.write_hardware_csv(t, np.full(11, 11.1), np.full(11, 2.0), tmp_path / "hw.csv")
    s = logio.read_power_csv(tmp_path / "hw.csv")
    assert s.source == "hardware" and np.allclose(s.power, 22.2)
    logio.write_rows(tmp_path / "cur.csv", logio.CURRENT_HEADER, zip(t, np.full(11, 2.0)))
    with pytest.raises(logio.LogFormatError):
        logio.read_power_csv(tmp_path / "cur.csv")
    assert np.allclose(logio.read_power_csv(tmp_path / "cur.csv", 10.0).power, 20.0)
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    with pytest.raises(logio.LogFormatError):
        logio.detect_format(tmp_path / "junk.csv")
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(logio.LogFormatError):
        logio.read_power_csv(tmp_path / "empty.csv")
    (tmp_path / "bad.csv").write_text("t,V,I\n0,1,x\n")
    with pytest.raises(logio.LogFormatError):
        logio.read_power_csv(tmp_path / "bad.csv")


def test_table_and_pairs_round_trip(tmp_path):
    rows = [{"a": 1.5, "ok": True, "n": 3, "msg": ""}, {"a": math.pi, "ok": False, "n": -1, "msg": "x y"}]
    logio.write_table_csv(rows, tmp_path / "t.csv")
    assert logio.read_table_csv(tmp_path / "t.csv") == rows
    x, y = np.geomspace(0.1, 2, 5), np.linspace(0.01, 0.3, 5)
    logio.write_pairs_csv(x, y, tmp_path / "p.csv")
    bx, by = logio.read_pairs_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(bx, x)
    np.testing.assert_array_equal(by, y)
    with pytest.raises(logio.LogFormatError):
        logio.read_pairs_csv(tmp_path / "t.csv")
