import math

import pytest

from modspace.errors import ConfigError
from modspace.harness.config import (
    build_config,
    load_config,
    parse_config_text,
    parse_number,
)
from modspace.harness.experiments import RUNNERS
from modspace.modulation import WindowEvolution


@pytest.mark.parametrize(
    "text,value",
    [
        ("1e-3", 1e-3),
        ("inf", math.inf),
        ("pi", math.pi),
        ("pi/2", math.pi / 2),
        ("-pi/4", -math.pi / 4),
        ("2pi", 2 * math.pi),
        ("0.5*pi", 0.5 * math.pi),
        (3, 3.0),
    ],
)
def test_parse_number(text, value):
    assert parse_number(text) == pytest.approx(value)


def test_parse_number_rejects_garbage():
    with pytest.raises(ValueError):
        parse_number("fast")


CONFIG = """
# comment line
experiment.name = demo
experiment.kind = norm_conservation   # trailing comment
grid.N = 64
grid.L = 8
potential.kind = harmonic
window.mode = same_equation
norm.p = 1, inf
norm.q = 2
time.list = 0, pi/2
"""


def test_parse_and_build():
    config = build_config(parse_config_text(CONFIG))
    assert config.name == "demo"
    assert config.window.mode is WindowEvolution.SAME_EQUATION
    assert [s.label for s in config.norm.specs()] == ["M^{1,2}", "M^{inf,2}"]
    assert config.time.times() == pytest.approx([0.0, math.pi / 2])
    grid = config.grid.build()
    assert grid.counts == (64,) and grid.half_widths == (8.0,)
    assert config.potential.build(1).name == "harmonic"


@pytest.mark.parametrize(
    "text,message",
    [
        ("experiment.name demo", "expected 'key = value'"),
        ("name = demo", "not namespaced"),
        ("solverx.dt = 1", "unknown namespace"),
        ("experiment.name = a\nexperiment.name = b", "duplicate"),
    ],
)
def test_malformed_lines(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config_text(text)


def test_unknown_key():
    sections = parse_config_text("experiment.name = a\nexperiment.kind = b\ngrid.size = 3")
    with pytest.raises(ConfigError):
        build_config(sections)


def test_missing_experiment_section():
    with pytest.raises(ConfigError):
        build_config(parse_config_text("grid.N = 64"))


def test_square_grid():
    sections = parse_config_text("experiment.name = a\nexperiment.kind = b\ngrid.N = 512\ngrid.square = true")
    grid = build_config(sections).grid.build()
    assert grid.is_square_phase_space


def test_time_range_and_pairs():
    sections = parse_config_text(
        "experiment.name = a\nexperiment.kind = b\n"
        "time.range = 0, 8, 9\nnorm.pairs = inf,1; 2,2\nnorm.reference = 1,1"
    )
    config = build_config(sections)
    assert config.time.times() == pytest.approx(list(range(9)))
    assert [s.label for s in config.norm.specs()] == ["M^{inf,1}", "M^{2,2}"]
    assert config.norm.reference_spec().label == "M^{1,1}"


def test_bad_pair():
    sections = parse_config_text("experiment.name = a\nexperiment.kind = b\nnorm.pairs = 1")
    with pytest.raises(ConfigError, match="exponent pair"):
        build_config(sections).norm.specs()


def test_diagonal_norms():
    sections = parse_config_text(
        "experiment.name = a\nexperiment.kind = b\nnorm.p = 1, 2, inf\nnorm.diagonal = true"
    )
    labels = [s.label for s in build_config(sections).norm.specs()]
    assert labels == ["M^{1,1}", "M^{2,2}", "M^{inf,inf}"]


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")


def test_shipped_experiments_parse(experiments_dir):
    paths = sorted(experiments_dir.glob("*.cfg"))
    assert len(paths) >= 11
    names = set()
    for path in paths:
        config = load_config(path)
        assert config.experiment.kind in RUNNERS
        assert config.experiment.reference
        config.grid.build()
        config.norm.specs()
        config.time.times()
        names.add(config.name)
    assert len(names) == len(paths)
