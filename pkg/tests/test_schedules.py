import pytest

from mdirl.errors import ConfigError
from mdirl.schedules import StepSchedule, schedule_eta


def test_examples():
    assert schedule_eta(StepSchedule("harmonic", {"c": 4.0}), 1) == 2.0
    s = StepSchedule("linear_alpha", {"alpha_1": 0.5, "alpha_T": 2.0, "T": 300})
    assert s.eta(1) == pytest.approx(2.0)
    assert s.eta(300) == pytest.approx(0.5)
    # alpha is linear in t, so 1/eta at the midpoint is the mean of the endpoints
    assert 1.0 / s.eta(150) == pytest.approx(0.5 + 149 * 1.5 / 299)


def test_power_and_constant():
    assert StepSchedule("power", {"c": 1.0, "p": 2.0}).eta(10) == pytest.approx(0.01)
    assert StepSchedule("power").eta(4) == pytest.approx(0.25)
    assert StepSchedule("constant", {"eta": 0.3}).eta(1000) == 0.3


def test_eta_endpoints_alias():
    s = StepSchedule("linear_alpha", {"eta_1": 1.0, "eta_T": 0.1, "T": 100})
    assert s.eta(1) == pytest.approx(1.0)
    assert s.eta(100) == pytest.approx(0.1)


def test_single_step_horizon():
    assert StepSchedule("linear_alpha", {"T": 1}).eta(1) == pytest.approx(2.0)


@pytest.mark.parametrize("t", [0, -1, 1.5])
def test_bad_step_index(t):
    with pytest.raises(ValueError):
        schedule_eta(StepSchedule("constant"), t)


def test_beyond_horizon_and_missing_horizon():
    with pytest.raises(ValueError):
        StepSchedule("linear_alpha", {"T": 10}).eta(11)
    with pytest.raises(ValueError):
        StepSchedule("linear_alpha").eta(1)


@pytest.mark.parametrize("text", ["bogus", "constant:eta=-1", "harmonic:c=0", "linear_alpha:alpha_1=0",
                                  "constant:eta=abc", "constant:eta"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        StepSchedule.parse(text, 10)


def test_parse_round_trip():
    for text in ("constant:eta=0.2", "harmonic:c=4.0", "power:c=1.0,p=2.0", "linear_alpha:alpha_1=0.5,alpha_T=2.0"):
        s = StepSchedule.parse(text, 50)
        assert StepSchedule.parse(str(s)) == s
    assert StepSchedule.parse("linear_alpha", 50).with_horizon(80).params["T"] == 80
