import pytest

from hdrvqa.config import KNOBS, RunConfig, env_name
from hdrvqa.expansive import GLOBAL


def test_defaults():
    cfg = RunConfig.layered(environ={})
    assert cfg["nl.delta"] == 4.0 and cfg["nl.window"] == 17 and cfg["chips.T"] == 5
    assert cfg["svr.c"] == "auto" and cfg["svr.eps"] == 0.1
    assert cfg["svr.grid"] == tuple(10.0 ** k for k in range(-3, 4))
    ex = cfg.extraction()
    assert ex.gamut == "bt2020" and ex.nl.delta == 4.0 and ex.chips.T == 5
    assert cfg.video_overrides() == {}


def test_env_names():
    assert env_name("nl.delta") == "HDRVQA_NL_DELTA"
    assert env_name("chips.T") == "HDRVQA_CHIPS_T"
    assert env_name("bit_depth") == "HDRVQA_BIT_DEPTH"


def test_layering_precedence():
    file_values = {"nl.delta": "2", "nl.window": "9", "seed": "5"}
    env = {"HDRVQA_NL_DELTA": "3", "HDRVQA_NL_WINDOW": "global"}
    cfg = RunConfig.layered(file_values, env, {"nl.delta": "6"})
    assert cfg["nl.delta"] == 6.0  # flag beats env beats file
    assert cfg["nl.window"] == GLOBAL  # env beats file
    assert cfg["seed"] == 5  # file beats default


def test_from_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nnl.delta = 1.5\nchips.taps = -1, 0, 1\nsvr.c = 10\nwidth = 640\n")
    cfg = RunConfig.from_file(p, environ={})
    assert cfg["nl.delta"] == 1.5 and cfg["chips.taps"] == (-1.0, 0.0, 1.0)
    assert cfg["svr.c"] == 10.0 and cfg.video_overrides() == {"width": 640}


@pytest.mark.parametrize("values", [
    {"nl.dleta": "4"}, {"nl.delta": "abc"}, {"nl.delta": "0"}, {"nl.window": "16"}, {"svr.c": "-1"},
    {"svr.eps": "-0.1"}, {"workers": "0"}, {"chips.taps": "1,1"}, {"chips.criterion": "max"},
])
def test_invalid_values_rejected(values):
    with pytest.raises(ValueError):
        RunConfig.layered(values, {})


def test_every_knob_has_help_and_default_parses():
    for k in KNOBS.values():
        assert k.help
        if k.default is not None:
            assert k.parse(k.default) == k.default
