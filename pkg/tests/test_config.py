import math

import pytest

from chiral_squeeze.config import ConfigError, load_config, parse_config

BASE = """\
seed: 7
ensemble:
  beta: 0.007
  n_atoms: 169
drive:
  s: 0.51
"""


def test_defaults_and_conversion():
    cfg = parse_config(BASE)
    assert cfg.seed == 7
    assert cfg.gamma_tot == pytest.approx(2 * math.pi * 5.2e6)
    ens = cfg.ensemble()
    assert ens.gamma_tot == cfg.gamma_tot and ens.n_atoms == 169
    assert cfg.ensemble(natural_units=True).gamma_tot == 1.0
    assert cfg.get("synth", "eta") == 0.22
    assert cfg.grid().size == 4096


def test_detuning_in_mhz():
    cfg = parse_config(BASE.replace("n_atoms: 169", "n_atoms: 169\n  delta_mhz: 5.2"))
    assert cfg.ensemble(natural_units=True).delta == pytest.approx(1.0)
    assert cfg.ensemble().delta == pytest.approx(2 * math.pi * 5.2e6)
    assert cfg.ensemble().detuning == pytest.approx(1.0)


@pytest.mark.parametrize(
    "text,line,key",
    [
        (BASE + "synth:\n  etta: 0.2\n", 8, "synth.etta"),
        (BASE + "plotting:\n  dpi: 300\n", 7, "plotting"),
        (BASE.replace("beta: 0.007", "beta: 1.7"), 3, "ensemble.beta"),
        (BASE.replace("n_atoms: 169", "n_atoms: 16.9"), 4, "ensemble.n_atoms"),
        (BASE.replace("s: 0.51", "s: yes"), 6, "drive.s"),
        (BASE + "drive:\n  s: 1\n", 7, "drive"),
        (BASE.replace("seed: 7", "seed: -1"), 1, "seed"),
    ],
)
def test_diagnostics(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "run.yaml")
    assert str(exc.value).startswith(f"run.yaml:{line}: {key}:")


def test_missing_required():
    with pytest.raises(ConfigError, match="ensemble.n_atoms"):
        parse_config("ensemble:\n  beta: 0.1\ndrive:\n  s: 1\n")


def test_band_order():
    with pytest.raises(ConfigError, match="f_min"):
        parse_config(BASE + "analysis:\n  f_min_mhz: 30\n")


def test_integer_accepted_for_float():
    cfg = parse_config(BASE.replace("s: 0.51", "s: 1"))
    assert isinstance(cfg.drive().s, float)


def test_override_validates():
    cfg = parse_config(BASE)
    cfg.override("grid", "n_points", 513)
    assert cfg.grid().size == 513
    with pytest.raises(ConfigError):
        cfg.override("grid", "n_points", 1)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")
