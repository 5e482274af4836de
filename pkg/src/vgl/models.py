"""Problem definitions: the n-step toy line-world and the 1-D lunar lander.

Discrete models expose ``step`` plus analytic first partials of both model
functions; the lander exposes the continuous-time ``fbar``/``rbar`` family.
All partials follow the row-layout convention documented in ``core``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# n-step toy problem: move along a line to the origin in n steps.
# step t < n:  x' = x + a, reward -k a^2
# step t = n:  x' = x,     reward -x^2   (action-independent final scoring)
# ---------------------------------------------------------------------------

def toy_step(m, t: int, x: float, a: float):
    """One model step; returns (next state, reward). Scalar in, scalar out."""
    if t > m.n:
        raise ValueError(f"step {t} is past the episode end (n={m.n})")
    if t < m.n:
        return x + a, -m.k * a * a
    if m.final_reward is not None:
        return x, m.final_reward(x)
    return x, -x * x


def toy_optimal_action(m, t: int, x: float) -> float:
    """Optimal action -x/(n-t+k); defined for 0 <= t < n."""
    if not 0 <= t < m.n:
        raise ValueError(f"no action at step {t} of an {m.n}-step problem")
    return -x / (m.n - t + m.k)


def toy_optimal_value(m, t: int, x: float) -> float:
    """Reward-to-go of the optimal policy: -k x^2/(n-t+k) for t <= n."""
    if t > m.n + 1:
        raise ValueError(f"step {t} is past the episode end (n={m.n})")
    if t == m.n + 1:
        return 0.0
    return -m.k * x * x / (m.n - t + m.k)


@dataclass
class ToyProblem:
    """n-step toy problem with action-cost parameter k >= 0.

    ``final_reward``/``final_reward_dx`` optionally replace the terminal
    -x^2 scoring (used by the residual-gradient counterexample).  With
    ``bounded`` set, actions are constrained to [-1, 1].
    """

    n: int
    k: float
    bounded: bool = False
    final_reward: object = None
    final_reward_dx: object = None
    final_reward_d2x: object = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if (self.final_reward is None) != (self.final_reward_dx is None):
            raise ValueError("final_reward and final_reward_dx go together")

    @property
    def state_dim(self):
        return 1

    @property
    def horizon(self):
        # terminal index F: steps 0..n happen, x_{n+1} is terminal
        return self.n + 1

    def terminal(self, t: int) -> bool:
        return t >= self.n + 1

    def action_relevant(self, t: int) -> bool:
        return t < self.n

    def step(self, t, x, a):
        xn, r = toy_step(self, t, float(x[0]), float(a))
        return np.array([xn]), r

    def dfdx(self, t, x, a):
        return np.array([[1.0]])

    def dfda(self, t, x, a):
        return np.array([1.0 if t < self.n else 0.0])

    def drdx(self, t, x, a):
        if t < self.n:
            return np.array([0.0])
        if self.final_reward_dx is not None:
            return np.array([float(self.final_reward_dx(float(x[0])))])
        return np.array([-2.0 * float(x[0])])

    def drda(self, t, x, a):
        return -2.0 * self.k * float(a) if t < self.n else 0.0

    def d2rda2(self, t, x, a):
        # f is linear in a, so the generic d2Q/da2 hook only needs this
        return -2.0 * self.k if t < self.n else 0.0

    def d2rdx2(self, t, x, a):
        if t < self.n:
            return 0.0
        if self.final_reward is not None:
            if self.final_reward_d2x is None:
                raise NotImplementedError("custom final reward lacks a second derivative")
            return float(self.final_reward_d2x(float(x[0])))
        return -2.0

    def action_bounds(self):
        return (-1.0, 1.0) if self.bounded else None


def ripple_toy() -> ToyProblem:
    """1-step, k=0 variant whose final reward -x^2 + 4 cos x has inflections."""
    return ToyProblem(
        n=1,
        k=0.0,
        final_reward=lambda x: -x * x + 4.0 * math.cos(x),
        final_reward_dx=lambda x: -2.0 * x - 4.0 * math.sin(x),
        final_reward_d2x=lambda x: -2.0 - 4.0 * math.cos(x),
    )


# ---------------------------------------------------------------------------
# Continuous-time 1-D lunar lander.
# State (h, v, u) = height, velocity, fuel. Thrust a in (0, 1).
#   hdot = v, vdot = a - kg, udot = -a
#   rbar = -kf a + action-cost  (action cost from the squashing function)
# Terminal when h <= 0 or u <= 0; impulse reward -v^2 - 2 kg h on arrival.
# ---------------------------------------------------------------------------

@dataclass
class LunarLander:
    c: float = 0.01          # squash scale; small c approaches bang-bang thrust
    kg: float = 0.2
    kf: float = 2.0
    step_cap: int = 10_000   # Euler steps before a rollout counts as runaway
    _dfda: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("squash scale c must be > 0")
        self._dfda = np.array([0.0, 1.0, -1.0])

    state_dim = 3
    action_midpoint = 0.5

    def fbar(self, x, a):
        return np.array([x[1], a - self.kg, -a])

    def dfbar_dx(self, x, a):
        # element (i, j) = d fbar[j] / d x[i]; only h picks up v
        m = np.zeros((3, 3))
        m[1, 0] = 1.0
        return m

    def dfbar_da(self, x, a):
        return self._dfda

    def rbar(self, x, a):
        rc, _ = self.action_cost(a)
        return -self.kf * a + rc

    def rbar_linear_da(self):
        return -self.kf

    def drbar_dx(self, x, a):
        return np.zeros(3)

    def drbar_da(self, x, a):
        rc, drc = self.action_cost(a)
        return -self.kf + drc

    def action_cost(self, a):
        """Squash-induced action cost and its derivative.

        rc(a) = -integral_{1/2}^{a} g^{-1}(s) ds with g the shifted tanh
        squash, so rc'(a) = -c artanh(2a - 1); rc <= 0 with equality only
        at the midpoint a = 1/2.
        """
        if not 0.0 < a < 1.0:
            raise ValueError(f"action {a} outside the open squash range (0,1)")
        y = 2.0 * a - 1.0
        at = math.atanh(y)
        rc = -0.5 * self.c * (y * at + 0.5 * math.log1p(-y * y))
        return rc, -self.c * at

    def g(self, pre):
        # clamp away from {0, 1}: tanh saturates in floating point around
        # |pre/c| > 19 and the action-cost integrand has endpoint singularities
        a = 0.5 * (math.tanh(pre / self.c) + 1.0)
        return min(max(a, 1e-12), 1.0 - 1e-12)

    def gprime(self, pre):
        # computed through the clamped action as 2 a (1-a) / c: sech^2
        # underflows to an exact zero around |pre/c| > 350, which would erase
        # the update direction information sign-based optimisers rely on
        a = self.g(pre)
        return 2.0 * a * (1.0 - a) / self.c

    def g_batch(self, pre):
        a = 0.5 * (np.tanh(np.asarray(pre) / self.c) + 1.0)
        return np.clip(a, 1e-12, 1.0 - 1e-12)

    def gprime_batch(self, pre):
        a = self.g_batch(pre)
        return 2.0 * a * (1.0 - a) / self.c

    def ct_partials_batch(self, states, actions):
        """Per-node model partials as arrays (drdx, drda, dfdx, dfda); the
        two Jacobians are state-independent for this model."""
        n = len(actions)
        drdx = np.zeros((n, 3))
        drda = -self.kf - self.c * np.arctanh(2.0 * np.asarray(actions) - 1.0)
        return drdx, drda, self.dfbar_dx(None, None), self._dfda

    def terminal(self, x) -> bool:
        return x[0] <= 0.0 or x[2] <= 0.0

    def impulse(self, x) -> float:
        """Terminal reward: kinetic plus potential energy deficit."""
        return -x[1] * x[1] - 2.0 * self.kg * x[0]


def lander_dynamics(m: LunarLander, x, a):
    """Time derivative of (h, v, u) under thrust a in (0, 1)."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"action {a} outside (0, 1)")
    return m.fbar(np.asarray(x, dtype=float), float(a))


def terminal_impulse(m: LunarLander, x) -> float:
    return m.impulse(np.asarray(x, dtype=float))
