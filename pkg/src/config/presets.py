"""
Shipped experiment configs.

Each preset is plain config text, accepted anywhere a config path is.
"""

_KS_AGENT = """
[agent]
actor_hidden = 6
critic_hidden = 140

[reward]
alpha = 0.01
"""


def _ks(length: float, agents: int, mu: float = 0.0, episodes: int = 300) -> str:
    return f"""
# Kuramoto-Sivashinsky on [0, {length:g}), one agent per Gaussian sensor.
[env]
kind = ks
L = {length:g}
mu = {mu:g}
dt = 0.05

[sensors]
count = {agents}
neighborhood = 1
kernel = gaussian
sigma = 0.8

[actuators]
count = {agents}
u_max = 1.0
{_KS_AGENT}
[training]
episodes = {episodes}
episode_steps = 400
warmup = 100
eval_every = 25
eval_episodes = 3
"""


_KELLER_SEGEL = """
# Keller-Segel chemotaxis, stabilized at y = z = 1.
[env]
kind = keller_segel
L = 10
D = 1
chi = 5.6
q = 1

[sensors]
count = 40
neighborhood = 3
kernel = indicator
width = 0.25

[actuators]
count = 36
u_max = 1.0

[reward]
alpha = 0.01
target = 1.0
tracked_components = 0

[agent]
actor_hidden = 20, 20
critic_hidden = 20, 20

[training]
episodes = 300
episode_steps = 600
warmup = 21
delays = 1
delay_interval = 1.0
eval_every = 25
"""


def _turbulence(side: int, episodes: int = 100) -> str:
    sigma = 3.141592653589793 / side
    return f"""
# Decaying 2D turbulence, {side} x {side} lattice of agents.
[env]
kind = vorticity2d
n_grid = 128
Re = 500

[sensors]
count = {side * side}
neighborhood = 9
kernel = gaussian
sigma = {sigma:.6f}

[actuators]
u_max = 1.0

[reward]
alpha = 0.01

[agent]
actor_hidden = 4
critic_hidden = 4

[training]
episodes = {episodes}
episode_steps = 400
warmup = 1.0
eval_every = 10
eval_episodes = 2
"""


PRESETS: dict[str, str] = {
    "ks-L22": _ks(22.0, 8, episodes=500),
    "ks-L200": _ks(200.0, 80),
    "ks-L500": _ks(500.0, 200),
    "ks-L22-mu002": _ks(22.0, 8, mu=0.02, episodes=500),
    "keller-segel": _KELLER_SEGEL,
    "turbulence-8": _turbulence(8),
    "turbulence-16": _turbulence(16),
    "turbulence-32": _turbulence(32),
}
