import numpy as np
import pytest

from src.errors import ConfigError, InstanceParseError
from src.instance_io import (
    expand_sweeps,
    format_instance,
    parse_experiment_config,
    parse_instance_text,
    read_instance,
    write_instance,
)
from src.network import validate_topology


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_chain_instance(chain_instance_text):
    inst = parse_instance_text(chain_instance_text)
    assert inst.dim == 2
    assert (inst.topology.n_sensors, inst.topology.n_anchors) == (3, 1)
    assert inst.topology.to_one_based() == [(1, 2), (2, 3), (3, 4)]
    assert inst.positions.coords.tolist() == [[1, 0], [0, 0], [0, 1], [1, 1]]
    assert not inst.has_ranges and inst.sigma is None
    assert validate_topology(inst.topology) == []


def test_parse_ranges_and_sigmas():
    text = "2 1 2\n0.5 0.5\n0 0\n1 0\n1 2 0.70 0.1\n1 3 0.71 0.2  # second anchor\n"
    inst = parse_instance_text(text)
    assert inst.has_ranges
    assert inst.rho.tolist() == [0.70, 0.71]
    assert inst.sigma.tolist() == [0.1, 0.2]


@pytest.mark.parametrize(
    "text,line,column",
    [
        ("2 3\n", 1, 1),
        ("2 1 1\n0 x\n1 1\n1 2\n", 2, 3),
        ("2 1 1\n0 0 5\n1 1\n1 2\n", 2, 5),
        ("2 1 1\n0 0\n1 1\n1 9\n", 4, 3),
        ("2 1 2\n0 0\n1 1\n2 0\n1 2 1.4\n1 3\n", 6, 3),
        ("2 1 1\n0 0\n1 1\n1 2 1.4 -1\n", 4, 9),
        ("# only a comment\n2 2 1\n0 0\n", 4, 1),
    ],
)
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(InstanceParseError) as exc:
        parse_instance_text(text)
    assert (exc.value.line, exc.value.column) == (line, column)
    assert f"line {line}" in str(exc.value)


def test_empty_instance_rejected():
    with pytest.raises(InstanceParseError):
        parse_instance_text("# nothing here\n\n")


def test_written_instance_reads_back_exactly(tmp_path, supported_chain_topology, supported_chain_positions):
    rho = supported_chain_positions.link_distances(supported_chain_topology) + 1e-3 / 3
    path = write_instance(tmp_path / "net.txt", supported_chain_topology, supported_chain_positions, rho=rho)
    inst = read_instance(path)
    assert inst.topology == supported_chain_topology
    assert np.array_equal(inst.positions.coords, supported_chain_positions.coords)
    assert np.array_equal(inst.rho, rho)
    assert format_instance(inst.topology, inst.positions).splitlines()[0] == "2 3 3"


def test_config_grid_order(tmp_path):
    path = _write(tmp_path, "\n".join([
        "# ERG sweep",
        "trials = 20",
        "seed = 5",
        "sweep.1.model = erg",
        "sweep.1.n_sensors = 8,16",
        "sweep.1.p = 0.3,0.5",
        "",
    ]))
    config = parse_experiment_config(path)
    assert config.trials == 20 and config.seed == 5
    assert [(p["n_sensors"], p["p"]) for p in config.points] == [(8, 0.3), (8, 0.5), (16, 0.3), (16, 0.5)]
    assert all(p["model"] == "erg" for p in config.points)


def test_config_ranges_and_blocks_in_index_order(tmp_path):
    path = _write(tmp_path, "\n".join([
        "sweep.2.model = erg",
        "sweep.2.p = 1",
        "sweep.2.n_sensors = 1",
        "sweep.1.model = erg",
        "sweep.1.p = 1",
        "sweep.1.n_sensors = 1",
        "sweep.1.anchors = directions",
        "sweep.1.n_anchors = 3..9",
        "policy = propagate",
    ]))
    config = parse_experiment_config(path)
    assert [p["n_anchors"] for p in config.points[:7]] == list(range(3, 10))
    assert config.points[0]["anchors"] == "directions"
    assert len(config.points) == 8
    assert "n_anchors" not in config.points[7]
    assert config.policy == "propagate"


def test_config_without_blocks_has_no_points(tmp_path):
    config = parse_experiment_config(_write(tmp_path, "trials = 3\n"))
    assert config.points == [] and config.trials == 3


@pytest.mark.parametrize(
    "text",
    [
        "trails = 10\n",
        "sweep.1.model = erg\nsweep.1.color = red\n",
        "sweep.1.p = 0.5\n",
        "trials = 0\n",
        "trials =\n",
        "sweep.1.model = erg\nsweep.1.n_sensors = 9..3\n",
        "sweep.1.model = erg\nsweep.1.p = 0.1,,0.2\n",
        "policy = drop\n",
    ],
)
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        parse_experiment_config(_write(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_experiment_config(tmp_path / "absent.cfg")


def test_expand_sweeps_keeps_strings():
    points = expand_sweeps({1: {"model": "rgg", "r": "0.25, 0.5", "n_sensors": "4"}})
    assert points == [
        {"model": "rgg", "n_sensors": 4, "r": 0.25},
        {"model": "rgg", "n_sensors": 4, "r": 0.5},
    ]
