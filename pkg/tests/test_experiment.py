"""Unit tests for experiment config parsing, validation and presets."""

import pytest

from src.config.experiment import build_config, parse_config, parse_text
from src.config.presets import PRESETS
from src.core.errors import ConfigError
from src.services.ddpg import DdpgConfig

SMALL_KS = """\
[env]
kind = ks
L = 22

[sensors]
count = 8
sigma = 0.8

[training]
episodes = 2
episode_steps = 5
"""


def test_ks_l22_preset_matches_published_setup():
    """L=22, M=P=8, S=1, sigma=0.8 and 6/140 networks."""
    config = parse_config("ks-L22")
    run = config.train_config()

    assert config.env.L == 22.0
    assert run.sensors.count == 8
    assert run.actuators.count == 8
    assert run.sensors.neighborhood == 1
    assert run.sensors.kernel.shape == "gaussian"
    assert run.sensors.kernel.sigma == 0.8
    assert config.agent.actor_hidden == (6,)
    assert config.agent.critic_hidden == (140,)
    assert run.state_dim == 1


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_builds(name):
    """Shipped presets are valid experiments."""
    config = parse_config(f"{name}.cfg")
    run = config.train_config()

    assert config.source == f"preset:{name}"
    assert run.actuators.count <= run.sensors.count


def test_keller_segel_preset_geometry():
    """M=40, P=36 in the middle, S=3 over two components with one delay: twelve inputs."""
    run = parse_config("keller-segel").train_config()

    assert run.sensors.count == 40
    assert run.actuators.count == 36
    assert run.actuators.acting_sensors()[0] == 2
    assert run.state_dim == 12
    assert run.reward.target == 1.0
    assert run.delay_steps == 20
    assert run.sensors.boundary == "truncate"


def test_turbulence_preset_uses_square_lattice():
    """16 x 16 agents on the 128^2 grid with 3 x 3 neighborhoods."""
    run = parse_config("turbulence-16").train_config()

    assert run.sensors.count == 256
    assert run.sensors.axis_count == 16
    assert run.state_dim == 9
    assert run.warmup_time == 1.0


def test_empty_agent_section_takes_defaults():
    """An empty [agent] section yields the default hyperparameters, echoed in full."""
    config = build_config(SMALL_KS + "\n[agent]\n")
    echo = config.echo()

    assert config.agent == DdpgConfig()
    assert echo["agent"]["gamma"] == DdpgConfig().gamma
    assert echo["env"]["kind"] == "ks"
    assert echo["training"]["episodes"] == 2


def test_ks_resolution_follows_domain_length():
    """Without n_points the KS grid scales with L."""
    config = build_config("[env]\nL = 200\n[sensors]\ncount = 80\n")
    assert config.env.n_points == 512


def test_even_neighborhood_rejected_with_line_number():
    """S must be odd; the error points at the offending line."""
    text = "[env]\nL = 22\n[sensors]\ncount = 8\nneighborhood = 2\n"
    with pytest.raises(ConfigError, match="must be odd") as exc:
        build_config(text, "bad.cfg")
    assert exc.value.line == 5
    assert str(exc.value).startswith("bad.cfg:5:")


def test_unknown_key_rejected_with_line_number():
    """Typos are refused rather than ignored."""
    with pytest.raises(ConfigError, match="unknown key 'episodez'") as exc:
        build_config(SMALL_KS + "episodez = 3\n")
    assert exc.value.line == 12


def test_key_of_other_environment_rejected():
    """KS has no chemotactic sensitivity."""
    with pytest.raises(ConfigError, match="unknown key 'chi'") as exc:
        build_config("[env]\nkind = ks\nchi = 5.6\n")
    assert exc.value.line == 3


def test_type_mismatch_rejected_with_line_number():
    """Values must parse as the field type."""
    with pytest.raises(ConfigError, match=r"\[training\] episodes") as exc:
        build_config("[training]\n\nepisodes = many\n")
    assert exc.value.line == 3


def test_physical_invariants_checked_at_parse_time():
    """A non-positive domain length never reaches the integrator."""
    with pytest.raises(ConfigError, match=r"\[env\] L") as exc:
        build_config("[env]\nL = -1\nn_points = 64\n")
    assert exc.value.line == 2


def test_u_max_belongs_to_actuators():
    """The action bound is set once, on the actuators."""
    with pytest.raises(ConfigError, match="belongs to"):
        build_config("[agent]\nu_max = 2\n")


def test_actuator_bound_reaches_the_agent():
    """[actuators] u_max is the agent's action bound."""
    config = build_config(SMALL_KS + "[actuators]\nu_max = 0.5\n")
    assert config.agent.u_max == 0.5
    assert config.train_config().actuators.u_max == 0.5


def test_more_actuators_than_sensors_is_inconsistent():
    """P > M only shows up once the sections are combined."""
    with pytest.raises(ConfigError, match="inconsistent experiment"):
        build_config(SMALL_KS + "[actuators]\ncount = 9\n")


@pytest.mark.parametrize(
    "text, message, line",
    [
        ("[env\n", "malformed section header", 1),
        ("[physics]\n", "unknown section", 1),
        ("[env]\n[env]\n", "duplicate section", 2),
        ("L = 22\n", "outside of any section", 1),
        ("[env]\nL 22\n", "expected 'key = value'", 2),
        ("[env]\nL = 22\nL = 23\n", "duplicate key", 3),
        ("[env]\nkind = navier\n", "unknown environment kind", 2),
    ],
)
def test_grammar_errors(text, message, line):
    """Malformed documents fail with the line of the problem."""
    with pytest.raises(ConfigError, match=message) as exc:
        build_config(text)
    assert exc.value.line == line


def test_comments_and_lists():
    """`#` starts a comment; comma lists fill tuple fields."""
    sections = parse_text("[agent]  # networks\nactor_hidden = 20, 20  # two layers\n")
    assert sections["agent"].entries["actor_hidden"].value == "20, 20"

    config = build_config(SMALL_KS + "[agent]\nactor_hidden = 20, 20\n")
    assert config.agent.actor_hidden == (20, 20)


def test_snapshot_switch_defaults_to_activation_and_end():
    """With snapshots on and no explicit times, the start and end of control are kept."""
    config = build_config(SMALL_KS + "warmup = 1\n[output]\nsnapshots = true\n")
    times = config.train_config().training.snapshot_times
    assert times == pytest.approx((1.0, 1.25))

    off = build_config(SMALL_KS + "snapshot_times = 0.5\n")
    assert off.train_config().training.snapshot_times == ()


def test_config_file_and_unknown_preset(tmp_path):
    """Files are read from disk; unknown names list the presets."""
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_KS, encoding="utf-8")

    assert parse_config(path).training.episodes == 2
    with pytest.raises(ConfigError, match="presets: "):
        parse_config(tmp_path / "missing.cfg")


def test_seed_override_is_echoed():
    """with_seed replaces the training seed in the manifest echo."""
    config = build_config(SMALL_KS).with_seed(7)
    assert config.echo()["training"]["seed"] == 7
    assert config.train_config().training.seed == 7
