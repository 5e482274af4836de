import math

import numpy as np
import pytest

from vgl.core import SeededRng, fd_gradient, fd_scalar, rel_err
from vgl.models import (LunarLander, ToyProblem, lander_dynamics, ripple_toy,
                        terminal_impulse, toy_optimal_action, toy_optimal_value, toy_step)


class TestToyStep:
    def test_intermediate(self):
        m = ToyProblem(n=2, k=1.0)
        assert toy_step(m, 0, 0.0, 0.5) == (0.5, -0.25)

    def test_final_scoring_step(self):
        m = ToyProblem(n=2, k=1.0)
        assert toy_step(m, 2, 3.0, 17.0) == (3.0, -9.0)

    def test_k_zero_kills_intermediate_reward(self):
        m = ToyProblem(n=3, k=0.0)
        for t in range(3):
            assert toy_step(m, t, 1.7, -2.2)[1] == 0.0

    def test_past_end_raises(self):
        with pytest.raises(ValueError):
            toy_step(ToyProblem(n=1, k=1.0), 2, 0.0, 0.0)


class TestToyOptima:
    def test_action(self):
        m = ToyProblem(n=2, k=1.0)
        assert toy_optimal_action(m, 0, 3.0) == -1.0
        assert toy_optimal_action(m, 1, 0.0) == 0.0

    def test_one_step_k1_half(self):
        assert toy_optimal_action(ToyProblem(n=1, k=1.0), 0, 5.0) == -2.5

    def test_value(self):
        m = ToyProblem(n=2, k=1.0)
        assert toy_optimal_value(m, 0, 3.0) == -3.0
        assert toy_optimal_value(ToyProblem(n=2, k=0.0), 0, 3.0) == 0.0

    def test_optimal_rollout_reaches_optimal_value(self):
        rng = SeededRng(3)
        for _ in range(25):
            n = int(rng.uniform(1, 5))
            m = ToyProblem(n=n, k=float(rng.uniform(0.1, 3.0)))
            x0 = float(rng.uniform(-8, 8))
            x, total = x0, 0.0
            for t in range(n + 1):
                a = toy_optimal_action(m, t, x) if t < n else 0.0
                x, r = toy_step(m, t, x, a)
                total += r
            assert abs(total - toy_optimal_value(m, 0, x0)) < 1e-9

    def test_value_matches_brute_force_action_search(self):
        # maximize R over a grid then polish with coordinate descent
        m = ToyProblem(n=2, k=1.0)
        x0 = 3.0

        def total(a0, a1):
            x, r = toy_step(m, 0, x0, a0)
            x, r1 = toy_step(m, 1, x, a1)
            _, r2 = toy_step(m, 2, x, 0.0)
            return r + r1 + r2

        grid = np.linspace(-4, 4, 161)
        best = max((total(a0, a1), a0, a1) for a0 in grid for a1 in grid)
        _, a0, a1 = best
        for _ in range(200):
            da = 1e-3
            for i in (0, 1):
                while True:
                    cand = (a0 + da, a1) if i == 0 else (a0, a1 + da)
                    if total(*cand) > total(a0, a1):
                        a0, a1 = cand
                        continue
                    cand = (a0 - da, a1) if i == 0 else (a0, a1 - da)
                    if total(*cand) > total(a0, a1):
                        a0, a1 = cand
                        continue
                    break
            da /= 2
        assert abs(total(a0, a1) - toy_optimal_value(m, 0, x0)) < 1e-6


def test_toy_partials_match_fd():
    rng = SeededRng(11)
    for _ in range(100):
        n = int(rng.uniform(1, 5))
        m = ToyProblem(n=n, k=float(rng.uniform(0.0, 3.0)))
        t = int(rng.uniform(0, n + 1))
        x = np.asarray(rng.uniform(-5, 5, 1))
        a = float(rng.uniform(-3, 3))
        fx = fd_gradient(lambda v: m.step(t, v, a)[0][0], x)
        assert rel_err(m.dfdx(t, x, a)[:, 0], fx, floor=1e-3) < 1e-5
        fa = fd_scalar(lambda v: m.step(t, x, v)[0][0], a)
        assert abs(m.dfda(t, x, a)[0] - fa) < 1e-5
        rx = fd_gradient(lambda v: m.step(t, v, a)[1], x)
        assert rel_err(m.drdx(t, x, a), rx, floor=1e-3) < 1e-5
        ra = fd_scalar(lambda v: m.step(t, x, v)[1], a)
        assert rel_err(m.drda(t, x, a), ra, floor=1e-3) < 1e-5


def test_toy_concavity_hessian():
    # n=2, k=1: Hessian of R over (a0, a1) is constant [[-4,-2],[-2,-4]]
    m = ToyProblem(n=2, k=1.0)
    x0 = 1.3

    def total(a):
        x, r0 = toy_step(m, 0, x0, float(a[0]))
        x, r1 = toy_step(m, 1, x, float(a[1]))
        _, r2 = toy_step(m, 2, x, 0.0)
        return r0 + r1 + r2

    a = np.array([0.7, -0.4])
    hess = np.zeros((2, 2))
    for j in range(2):
        hess[:, j] = fd_gradient(lambda v: fd_gradient(total, v)[j], a)
    assert np.allclose(hess, [[-4, -2], [-2, -4]], atol=1e-4)
    evals = np.linalg.eigvalsh(hess)
    assert np.all(evals < 0)

    # n = 1 and n = 3 are negative definite too
    for n in (1, 3):
        m = ToyProblem(n=n, k=1.0)

        def tot(a, m=m, n=n):
            x, total_r = x0, 0.0
            for t in range(n):
                x, r = toy_step(m, t, x, float(a[t]))
                total_r += r
            _, r = toy_step(m, n, x, 0.0)
            return total_r + r

        aa = np.asarray(SeededRng(n).uniform(-1, 1, n))
        h = np.zeros((n, n))
        for j in range(n):
            h[:, j] = fd_gradient(lambda v: fd_gradient(tot, v)[j], aa)
        assert np.all(np.linalg.eigvalsh(h) < -1e-6)


class TestLander:
    def test_hover(self):
        m = LunarLander()
        xd = lander_dynamics(m, np.array([10.0, 0.0, 5.0]), 0.2)
        assert np.allclose(xd, [0.0, 0.0, -0.2])

    def test_near_full_thrust(self):
        m = LunarLander()
        xd = lander_dynamics(m, np.array([3.0, -1.0, 5.0]), 0.999)
        assert np.allclose(xd, [-1.0, 0.799, -0.999])

    def test_dfdx_structure(self):
        m = LunarLander()
        want = np.zeros((3, 3))
        want[1, 0] = 1.0      # only height picks up velocity
        assert np.array_equal(m.dfbar_dx(np.array([1.0, 2.0, 3.0]), 0.5), want)

    def test_action_cost_midpoint(self):
        m = LunarLander(c=0.01)
        rc, drc = m.action_cost(0.5)
        assert rc == 0.0 and drc == 0.0

    def test_action_cost_closed_form(self):
        m = LunarLander(c=0.01)
        _, drc = m.action_cost(0.75)
        assert abs(drc + 0.01 * math.atanh(0.5)) < 1e-12
        assert abs(drc + 0.0054930614) < 1e-8

    def test_total_drda_at_midpoint(self):
        m = LunarLander(c=0.01)
        assert abs(m.drbar_da(np.zeros(3), 0.5) + m.kf) < 1e-12

    def test_action_cost_negative_away_from_midpoint(self):
        m = LunarLander(c=0.3)
        for a in np.linspace(0.02, 0.98, 25):
            rc, _ = m.action_cost(a)
            if abs(a - 0.5) < 1e-12:
                assert rc == 0.0
            else:
                assert rc < 0.0

    def test_action_cost_derivative_vs_fd(self):
        m = LunarLander(c=0.05)
        for a in np.arange(0.1, 0.95, 0.1):
            want = fd_scalar(lambda v: m.action_cost(v)[0], float(a))
            _, drc = m.action_cost(float(a))
            assert rel_err(drc, want, floor=1e-4) < 1e-5
            assert abs(drc + m.c * math.atanh(2 * a - 1)) < 1e-12

    def test_action_cost_domain_error(self):
        m = LunarLander()
        for bad in (0.0, 1.0, -0.2, 1.4):
            with pytest.raises(ValueError):
                m.action_cost(bad)

    def test_partials_match_fd(self):
        m = LunarLander(c=0.2)
        rng = SeededRng(21)
        for _ in range(100):
            x = np.array([rng.uniform(0.5, 100), rng.uniform(-10, 10), rng.uniform(1, 50)])
            a = float(rng.uniform(0.05, 0.95))
            jf = np.column_stack([fd_gradient(lambda v, j=j: m.fbar(v, a)[j], x)
                                  for j in range(3)])
            assert np.allclose(m.dfbar_dx(x, a), jf, atol=1e-6)
            fa = np.array([fd_scalar(lambda v, j=j: m.fbar(x, v)[j], a) for j in range(3)])
            assert np.allclose(m.dfbar_da(x, a), fa, atol=1e-6)
            ra = fd_scalar(lambda v: m.rbar(x, v), a)
            assert rel_err(m.drbar_da(x, a), ra, floor=1e-3) < 1e-5

    def test_impulse(self):
        m = LunarLander()
        assert terminal_impulse(m, np.array([0.0, 0.0, 3.0])) == 0.0
        assert terminal_impulse(m, np.array([0.0, -2.0, 3.0])) == -4.0
        assert terminal_impulse(m, np.array([5.0, -1.0, 0.0])) == -3.0


def test_ripple_final_reward_derivatives():
    m = ripple_toy()
    x = np.array([1.7])
    rx = fd_gradient(lambda v: m.step(1, v, 0.0)[1], x)
    assert rel_err(m.drdx(1, x, 0.0), rx, floor=1e-3) < 1e-6
