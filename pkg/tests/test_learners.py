import numpy as np

from vgl.core import SeededRng, fd_gradient, fd_step, rel_err
from vgl.critics import MlpCritic, QuadCritic, appendix_b_critic, exp1_critic, exp2_critic, exp4_critic
from vgl.learners import (RpropState, UpdateVector, actor_update, bptt, ct_td, ct_vgl,
                          gradient_error, parametric_rollout, rprop_apply, sgd_apply,
                          td_lambda, td_lambda_traces, vgl, vgl_rg)
from vgl.models import LunarLander, ToyProblem
from vgl.targets import (compute_omega, compute_targets_G, compute_targets_V,
                         ct_rollout, ct_targets_G, ct_targets_V, make_ct_evals, rollout)


def greedy_total_reward(model, critic, x0):
    return rollout(model, critic, x0).total_reward


def rand_toy_setup(rng, n_max=3):
    n = int(rng.uniform(1, n_max + 1))
    m = ToyProblem(n=n, k=float(rng.uniform(0.3, 2.0)))
    crit = QuadCritic(q=rng.uniform(0.2, 1.5, n), u=rng.uniform(-1, 1, n),
                      S=rng.uniform(-1, 1, (n, 4)), B=rng.uniform(-1, 1, (n, 4)),
                      w=rng.uniform(-3, 3, 4))
    return m, crit, np.asarray(rng.uniform(-3, 3, 1))


class TestTdLambda:
    def test_appendix_b_fixed_point(self):
        m = ToyProblem(n=1, k=1.0)
        traj = rollout(m, appendix_b_critic(w=[-25.0, 0.0]), np.array([5.0]))
        upd = td_lambda(traj, compute_targets_V(traj, 0.7), 0.1)
        assert np.all(upd.dw == 0.0)

    def test_appendix_b_from_zero_weights(self):
        m = ToyProblem(n=1, k=1.0)
        traj = rollout(m, appendix_b_critic(w=[0.0, 0.0]), np.array([5.0]))
        upd = td_lambda(traj, compute_targets_V(traj, 0.0), 0.01)
        # V1 = 0, V'1 = -25, dV/dw = (1, x1) = (1, 5)
        assert np.allclose(upd.dw, 0.01 * np.array([-25.0, -125.0]))

    def test_zero_error_zero_update(self):
        m = ToyProblem(n=2, k=1.0)
        traj = rollout(m, exp2_critic(0.5, 1.0, w=np.zeros(4)), np.array([2.0]))
        upd = td_lambda(traj, compute_targets_V(traj, 1.0), 0.1)
        assert np.allclose(upd.dw, 0.0, atol=1e-12)

    def test_trace_form_identity(self):
        rng = SeededRng(71)
        for lam in (0.0, 0.3, 1.0):
            for _ in (range(34) if lam != 1.0 else range(33)):
                m, crit, x0 = rand_toy_setup(rng)
                traj = rollout(m, crit, x0)
                a = td_lambda(traj, compute_targets_V(traj, lam), 0.05).dw
                b = td_lambda_traces(traj, lam, 0.05).dw
                assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))

    def test_single_step_any_lambda(self):
        m = ToyProblem(n=1, k=1.0)
        crit = appendix_b_critic(w=[2.0, -1.0])
        traj = rollout(m, crit, np.array([1.0]))
        for lam in (0.0, 0.5, 1.0):
            a = td_lambda(traj, compute_targets_V(traj, lam), 0.1).dw
            b = td_lambda_traces(traj, lam, 0.1).dw
            assert np.allclose(a, b, atol=1e-15)


class TestVgl:
    def test_exp1_update_closed_form(self):
        c1 = 1.3
        m = ToyProblem(n=1, k=0.0)
        crit = exp1_critic(c1, w=[0.7, 5.0])
        traj = rollout(m, crit, np.array([0.0]))
        upd = vgl(traj, compute_targets_G(traj, 1.0), 0.1)
        assert abs(upd.dw[0] - 0.1 * (-(2 * c1 + 0.7))) < 1e-12
        assert upd.dw[1] == 0.0

    def test_exp1_alpha_one_single_iteration(self):
        c1 = 2.0
        m = ToyProblem(n=1, k=0.0)
        crit = exp1_critic(c1, w=[7.1, -3.0])
        traj = rollout(m, crit, np.array([0.0]))
        w = sgd_apply(crit.w, vgl(traj, compute_targets_G(traj, 1.0), 1.0))
        assert abs(w[0] - (-2 * c1)) < 1e-12

    def test_zero_at_fixed_point(self):
        m = ToyProblem(n=2, k=1.0)
        crit = exp2_critic(0.5, 1.0, w=np.zeros(4))
        traj = rollout(m, crit, np.array([2.0]))
        gp = compute_targets_G(traj, 1.0)
        assert np.allclose(vgl(traj, gp, 0.1).dw, 0.0, atol=1e-12)
        assert np.allclose(vgl(traj, gp, 0.1, compute_omega(traj)).dw, 0.0, atol=1e-12)

    def test_omega_mode_is_reward_gradient(self):
        # the curvature-weighted update at lambda=1 is exact ascent on R^pi
        rng = SeededRng(83)
        for _ in range(20):
            m, crit, x0 = rand_toy_setup(rng)
            traj = rollout(m, crit, x0)
            gp = compute_targets_G(traj, 1.0)
            upd = vgl(traj, gp, 1.0, compute_omega(traj))
            want = fd_gradient(lambda ww: greedy_total_reward(m, crit.copy_with(ww), x0),
                               crit.w)
            assert rel_err(upd.dw, want, floor=1e-5) < 1e-5

    def test_monotone_ascent_on_shared_weight_critic(self):
        m = ToyProblem(n=2, k=2.0)
        crit = exp4_critic(w=[9.0])
        last = greedy_total_reward(m, crit, np.array([0.0]))
        w = crit.w
        for _ in range(4000):
            traj = rollout(m, crit.copy_with(w), np.array([0.0]))
            upd = vgl(traj, compute_targets_G(traj, 1.0), 0.01, compute_omega(traj))
            w = sgd_apply(w, upd)
            r = greedy_total_reward(m, crit.copy_with(w), np.array([0.0]))
            assert r >= last - 1e-12
            last = r
            if np.max(np.abs(upd.dw)) < 1e-9 * 0.01:
                break
        assert abs(w[0] - 4600.0 / 627.0) < 1e-4


class TestResidualGradients:
    def test_backends_agree(self):
        rng = SeededRng(97)
        for lam in (0.0, 1.0):
            for _ in range(20):
                c1, c2 = float(rng.uniform(0.2, 2)), float(rng.uniform(0.2, 2))
                m = ToyProblem(n=2, k=float(rng.uniform(0.3, 2)))
                crit = exp2_critic(c1, c2, w=rng.uniform(-5, 5, 4))
                x0 = np.asarray(rng.uniform(-2, 2, 1))
                a = vgl_rg(m, crit, x0, lam, 0.1, backend="numeric").dw
                b = vgl_rg(m, crit, x0, lam, 0.1, backend="analytic").dw
                assert rel_err(b, a, floor=1e-5) < 1e-3

    def test_zero_update_at_error_minimum(self):
        m = ToyProblem(n=2, k=1.0)
        crit = exp2_critic(0.5, 1.0, w=np.zeros(4))
        assert gradient_error(m, crit, np.array([0.0]), 1.0) == 0.0
        upd = vgl_rg(m, crit, np.array([0.0]), 1.0, 0.1)
        assert np.allclose(upd.dw, 0.0, atol=1e-10)


class QuadraticPolicy:
    """a = z0 + z1 x + z2 x^2, for the BPTT and actor tests."""

    def act(self, t, x, z):
        return float(z[0] + z[1] * x[0] + z[2] * x[0] ** 2)

    def dpi_dz(self, t, x, z):
        return np.array([1.0, x[0], x[0] ** 2])

    def dpi_dx(self, t, x, z):
        return np.array([z[1] + 2.0 * z[2] * x[0]])


class TestBptt:
    def test_matches_fd_of_total_reward(self):
        rng = SeededRng(101)
        pol = QuadraticPolicy()
        for _ in range(20):
            n = int(rng.uniform(1, 4))
            m = ToyProblem(n=n, k=float(rng.uniform(0.3, 2)))
            z = np.asarray(rng.uniform(-1, 1, 3))
            x0 = np.asarray(rng.uniform(-2, 2, 1))
            upd = bptt(m, pol, z, x0, 1.0)

            def total(zz):
                _, _, rws = parametric_rollout(m, pol, zz, x0)
                return sum(rws)

            want = fd_gradient(total, z)
            assert rel_err(upd.dw, want, floor=1e-4) < 1e-5

    def test_zero_at_optimal_policy(self):
        # optimal toy policy is linear: a = -x/(n-t+k); time-independent only
        # when n=1, so use the 1-step problem
        m = ToyProblem(n=1, k=1.0)
        pol = QuadraticPolicy()
        z = np.array([0.0, -1.0 / (1.0 + 1.0), 0.0])
        upd = bptt(m, pol, z, np.array([3.0]), 1.0)
        assert np.allclose(upd.dw, 0.0, atol=1e-10)

    def test_one_step_hand_derivative(self):
        # policy a = z: R = -z^2 - (x0+z)^2, dR/dz = -2z - 2(x0+z)
        class ConstPolicy:
            def act(self, t, x, z):
                return float(z[0])

            def dpi_dz(self, t, x, z):
                return np.array([1.0])

            def dpi_dx(self, t, x, z):
                return np.array([0.0])

        m = ToyProblem(n=1, k=1.0)
        z = np.array([0.8])
        x0 = 2.5
        upd = bptt(m, ConstPolicy(), z, np.array([x0]), 0.1)
        assert abs(upd.dw[0] - 0.1 * (-2 * 0.8 - 2 * (x0 + 0.8))) < 1e-12


class TestActorUpdate:
    def test_ideal_critic_equals_bptt(self):
        rng = SeededRng(103)
        pol = QuadraticPolicy()
        for _ in range(10):
            n = int(rng.uniform(1, 4))
            m = ToyProblem(n=n, k=float(rng.uniform(0.3, 2)))
            z = np.asarray(rng.uniform(-1, 1, 3))
            x0 = np.asarray(rng.uniform(-2, 2, 1))
            # ideal critic: G_t = (dR^pi/dx)_t computed by the backward recursion
            states, actions, _ = parametric_rollout(m, pol, z, x0)
            F = len(actions)
            ps = {F: np.zeros(1)}
            for t in range(F - 1, -1, -1):
                x, a = states[t], actions[t]
                pix = pol.dpi_dx(t, x, z) if m.action_relevant(t) else np.zeros(1)
                ps[t] = (m.drdx(t, x, a) + pix * m.drda(t, x, a)) \
                    + (m.dfdx(t, x, a) + np.outer(pix, m.dfda(t, x, a))) @ ps[t + 1]
            upd_a = actor_update(m, pol, z, x0, 1.0, lambda t, x: ps[t])
            upd_b = bptt(m, pol, z, x0, 1.0)
            assert np.max(np.abs(upd_a.dw - upd_b.dw)) < 1e-10

    def test_zero_critic_reduces_to_reward_term(self):
        m = ToyProblem(n=2, k=1.0)
        pol = QuadraticPolicy()
        z = np.array([0.5, -0.2, 0.1])
        x0 = np.array([1.0])
        upd = actor_update(m, pol, z, x0, 1.0, lambda t, x: np.zeros(1))
        states, actions, _ = parametric_rollout(m, pol, z, x0)
        want = sum(pol.dpi_dz(t, states[t], z) * m.drda(t, states[t], actions[t])
                   for t in range(2))
        assert np.allclose(upd.dw, want)

    def test_srv_monte_carlo_consistency(self):
        # uniform action noise in [-eps, eps]: the SRV estimator
        # n * dpi/dz * td_error averages to (eps^2/3) times the actor term
        m = ToyProblem(n=1, k=1.0)
        crit = QuadCritic(q=[0.7], u=[0.3], S=[[1.0]], B=[[0.0]], w=[1.1])
        x0, a0 = 1.4, -0.3
        eps = 0.5
        rng = SeededRng(11)
        n_s = np.asarray(rng.uniform(-eps, eps, 10 ** 6))
        a_s = a0 + n_s
        x1_s = x0 + a_s
        r_s = -m.k * a_s ** 2
        q, lin = 0.7, 0.3 + 1.1
        v1_s = -q * x1_s ** 2 + lin * x1_s
        mc = float(np.mean(n_s * (r_s + v1_s)))
        g1 = -2 * q * (x0 + a0) + lin
        want = (eps ** 2 / 3.0) * (-2 * m.k * a0 + g1)
        assert rel_err(mc, want, floor=1e-6) < 5e-2


class TestCtUpdates:
    def test_omega_update_is_reward_gradient(self):
        # needs a responsive squash (large enough c) or the reward gradient
        # underflows and the comparison is vacuous
        m = LunarLander(c=1.0)
        rng = SeededRng(107)
        mlp = MlpCritic()
        mlp.init_weights(rng)
        mlp.w = mlp.w * 0.3
        x0 = np.array([5.0, -0.5, 10.0])
        dt = 1e-2
        traj = ct_rollout(m, mlp, x0, dt=dt)
        evals = make_ct_evals(mlp, traj)
        gp = ct_targets_G(m, traj, 0.0, evals)
        upd = ct_vgl(m, traj, evals, gp, 1.0, mode="omega")

        def total(ww):
            m2 = MlpCritic()
            m2.w = ww
            return ct_rollout(m, m2, x0, dt=dt).total_reward

        want = fd_gradient(total, mlp.w, h=1e-4)
        assert np.max(np.abs(want)) > 1e-4      # the probe must be non-vacuous
        assert rel_err(upd.dw, want, floor=np.max(np.abs(want)) * 1e-2) < 1e-2

    def test_zero_error_zero_update(self):
        m = LunarLander(c=0.1)
        rng = SeededRng(109)
        mlp = MlpCritic()
        mlp.init_weights(rng)
        traj = ct_rollout(m, mlp, np.array([2.0, -0.5, 10.0]), dt=0.05)
        evals = make_ct_evals(mlp, traj)
        for mode in ("omega", "identity"):
            upd = ct_vgl(m, traj, evals, evals.G.copy(), 1.0, mode=mode)
            assert np.allclose(upd.dw, 0.0)

    def test_omega_weighting_rank_one_psd(self):
        m = LunarLander(c=0.1)
        dfda = m.dfbar_da(np.zeros(3), 0.5)
        for pre in (-1.0, 0.0, 2.0):
            om = m.gprime(pre) * np.outer(dfda, dfda)
            assert np.linalg.matrix_rank(om) <= 1
            assert np.all(np.linalg.eigvalsh(om) >= -1e-15)

    def test_ct_td_zero_at_consistent_values(self):
        m = LunarLander(c=0.1)
        rng = SeededRng(113)
        mlp = MlpCritic()
        mlp.init_weights(rng)
        traj = ct_rollout(m, mlp, np.array([2.0, -0.5, 10.0]), dt=0.05)
        evals = make_ct_evals(mlp, traj)
        vp = ct_targets_V(m, traj, 0.0, evals.V)
        upd = ct_td(traj, evals, evals.V.copy(), 0.1)
        assert np.allclose(upd.dw, 0.0)
        assert abs(vp[0] - traj.total_reward) < 1e-9


class TestRprop:
    def test_constant_sign_growth(self):
        w = np.zeros(1)
        st = RpropState.fresh(1)
        for i in range(10):
            w, st = rprop_apply(w, np.array([3.0]), st)
        assert abs(st.step[0] - min(0.1 * 1.2 ** 9, 50.0)) < 1e-12
        assert abs(w[0] - sum(min(0.1 * 1.2 ** i, 50.0) for i in range(10))) < 1e-12

    def test_sign_flip_halves_and_suppresses(self):
        w = np.zeros(1)
        st = RpropState.fresh(1)
        w, st = rprop_apply(w, np.array([1.0]), st)
        w1 = w.copy()
        w, st = rprop_apply(w, np.array([-1.0]), st)
        assert np.array_equal(w, w1)                 # move suppressed
        assert abs(st.step[0] - 0.05) < 1e-15        # halved
        assert st.prev[0] == 0.0                     # no adaptation next time
        w, st = rprop_apply(w, np.array([-1.0]), st)
        assert abs(w[0] - (w1[0] - 0.05)) < 1e-15    # moves again, no growth

    def test_objective_guarded_backtracking(self):
        w = np.zeros(1)
        st = RpropState.fresh(1)
        w, st = rprop_apply(w, np.array([1.0]), st, objective=-10.0)
        w1 = w.copy()
        # flip with a worse objective: the previous move is reverted
        w, st = rprop_apply(w, np.array([-1.0]), st, objective=-12.0)
        assert np.array_equal(w, np.zeros(1))
        assert abs(st.step[0] - 0.05) < 1e-15
        # flip with a better objective: position is kept
        w2, st2 = rprop_apply(np.zeros(1), np.array([1.0]),
                              RpropState.fresh(1), objective=-10.0)
        w2, st2 = rprop_apply(w2, np.array([-1.0]), st2, objective=-8.0)
        assert abs(w2[0] - 0.1) < 1e-15

    def test_zero_gradient_noop(self):
        w = np.array([1.0, -2.0])
        st = RpropState.fresh(2)
        w2, st = rprop_apply(w, np.zeros(2), st)
        assert np.array_equal(w, w2)
        assert np.all(st.step == 0.1) and np.all(st.prev == 0.0)

    def test_step_bounds(self):
        st = RpropState.fresh(1, step0=40.0)
        w = np.zeros(1)
        for _ in range(5):
            w, st = rprop_apply(w, np.ones(1), st)
        assert st.step[0] == 50.0
        st2 = RpropState.fresh(1, step0=2e-6)
        w = np.zeros(1)
        g = 1.0
        for _ in range(6):
            w, st2 = rprop_apply(w, np.array([g]), st2)
            g = -g
        assert st2.step[0] >= 1e-6
