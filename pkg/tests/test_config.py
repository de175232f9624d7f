import pytest

from npinfer import config
from npinfer.errors import ConfigError

GOOD = """
[population]
N = 5000
H = 20
M_h = 10
N_hj = 25

[samples]
n_A = 250
n_R = 200
m_h = 2
n_hj = 5
gamma1 = 0.3

[run]
B = 20
L = 5
K = 200
seed = 7
scenarios = LIN, SIN
outcome = continuous
"""


def test_round_trip_of_a_full_file():
    cfg = config.sim_config_from_values(config.parse_config_text(GOOD))
    assert cfg.N == 5000 and cfg.H == 20
    assert cfg.scenarios == ("LIN", "SIN")
    assert cfg.qr_spec == "both" and cfg.pm_spec == "both"
    assert cfg.methods == config.METHOD_NAMES


def test_comments_and_sections_are_cosmetic():
    text = "N = 10 # ten\n[whatever]\nH = 1\n"
    values = config.parse_config_text(text)
    assert values == {"N": 10, "H": 1}


def test_unknown_key_is_an_error_with_line_number():
    with pytest.raises(ConfigError, match=r":2: unknown key 'frobnicate'"):
        config.parse_config_text("N = 5\nfrobnicate = 1\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        config.parse_config_text("N = 5\nN = 6\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        config.parse_config_text("this is not a setting\n")


def test_missing_required_keys_listed():
    with pytest.raises(ConfigError, match="missing required keys"):
        config.sim_config_from_values({"N": 10})


def test_dimension_identities_enforced():
    values = config.parse_config_text(GOOD)
    values["N"] = 4999
    with pytest.raises(ConfigError, match="H \\* M_h \\* N_hj"):
        config.sim_config_from_values(values)
    values = config.parse_config_text(GOOD)
    values["n_R"] = 199
    with pytest.raises(ConfigError, match="h \\* m_h \\* n_hj|H \\* m_h \\* n_hj"):
        config.sim_config_from_values(values)


def test_single_psu_design_rejected():
    values = config.parse_config_text(GOOD)
    values["m_h"] = 1
    values["n_R"] = 100
    with pytest.raises(ConfigError, match="m_h"):
        config.sim_config_from_values(values)


def test_unknown_scenario_and_method_rejected():
    values = config.parse_config_text(GOOD)
    values["scenarios"] = ("LIN", "QUAD")
    with pytest.raises(ConfigError, match="unknown scenario"):
        config.sim_config_from_values(values)
    values = config.parse_config_text(GOOD)
    values["methods"] = ("GPPP", "MAGIC")
    with pytest.raises(ConfigError, match="unknown method"):
        config.sim_config_from_values(values)


def test_methods_all_expands():
    values = config.parse_config_text(GOOD)
    values["methods"] = ("all",)
    cfg = config.sim_config_from_values(values)
    assert cfg.methods == config.METHOD_NAMES


def test_spec_grid():
    cfg = config.sim_config_from_values(config.parse_config_text(GOOD))
    assert cfg.spec_grid("qr") == (True, False)
    values = config.parse_config_text(GOOD)
    values["qr_spec"] = "true"
    values["pm_spec"] = "false"
    cfg = config.sim_config_from_values(values)
    assert cfg.spec_grid("qr") == (True,)
    assert cfg.spec_grid("pm") == (False,)


def test_estimate_config_requires_only_replication_keys(tmp_path):
    p = tmp_path / "est.cfg"
    p.write_text("B = 10\nL = 2\nseed = 3\n")
    values = config.load_estimate_config(str(p))
    assert values == {"B": 10, "L": 2, "seed": 3}
    p.write_text("B = 10\n")
    with pytest.raises(ConfigError, match="missing required"):
        config.load_estimate_config(str(p))


def test_worker_resolution_order(monkeypatch):
    monkeypatch.delenv(config.WORKERS_ENV, raising=False)
    assert config.resolve_workers(3, 5) == 3
    assert config.resolve_workers(None, 5) == 5
    monkeypatch.setenv(config.WORKERS_ENV, "4")
    assert config.resolve_workers(None, None) == 4
    monkeypatch.setenv(config.WORKERS_ENV, "nope")
    with pytest.raises(ConfigError):
        config.resolve_workers(None, None)
    monkeypatch.delenv(config.WORKERS_ENV)
    assert config.resolve_workers(None, None) >= 1
