import pytest

from mdirl.config import EXPERIMENTS, ExperimentConfig, default_config, load_config, parse_config
from mdirl.errors import ConfigError


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_round_trip(experiment):
    cfg = default_config(experiment, noise_epsilon=0.25, lam=0.03)
    assert parse_config(cfg.to_ini()) == cfg


def test_defaults_and_overrides():
    cfg = parse_config("[bandit]\ntotal_steps = 50\nregularizer = tsallis:q=2.0,k=1.0\n")
    assert cfg.total_steps == 50
    assert cfg.seeds == (0, 1, 2, 3, 4)
    assert cfg.reg.kind == "tsallis"


def test_default_section_fallback():
    cfg = parse_config("[DEFAULT]\ntotal_steps = 7\n", experiment="mdp")
    assert cfg.total_steps == 7


@pytest.mark.parametrize("text, path", [
    ("[bandit]\ntotal_steps = 0\n", "bandit.total_steps"),
    ("[bandit]\ntotal_steps = many\n", "bandit.total_steps"),
    ("[bandit]\ngamma = 1.0\n", "bandit.gamma"),
    ("[bandit]\nregularizer = entropy\n", "bandit.regularizer"),
    ("[gaussian_toy]\nregularizer = exp\n", "gaussian_toy.regularizer"),
    ("[bandit]\nschedule = constant:eta=-1\n", "bandit.schedule"),
    ("[bandit]\nbogus = 1\n", "bandit.bogus"),
    ("[schedule_sweep]\nsweep_pairs = 1.0:0.0\n", "schedule_sweep.sweep_pairs"),
    ("[schedule_sweep]\nsweep_regularizers = shannon; cos\n", "schedule_sweep.sweep_regularizers"),
])
def test_errors_name_the_field(text, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        parse_config(text)


def test_section_count_and_unknown_experiment():
    with pytest.raises(ConfigError):
        parse_config("[bandit]\n[mdp]\n")
    with pytest.raises(ConfigError):
        parse_config("[nope]\n")
    with pytest.raises(ConfigError):
        ExperimentConfig("nope")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.ini")
    p = tmp_path / "c.ini"
    p.write_text(default_config("verify").to_ini())
    assert load_config(p).experiment == "verify"
