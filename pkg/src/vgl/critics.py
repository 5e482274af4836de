"""Value-function approximators exposing the full derivative bundle.

Every critic can report, at a state x and time index t:
    V, G = dV/dx, dV/dw, dG/dw, dG/dx
all analytically (no internal finite differences).  Layouts follow ``core``:
``dGdw[i, j] = dG[j]/dw[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CriticBundle:
    V: float
    G: np.ndarray       # (d,)
    dVdw: np.ndarray    # (m,)
    dGdw: np.ndarray    # (m, d)
    dGdx: np.ndarray    # (d, d)


class QuadCritic:
    """Time-indexed scalar quadratic critic for the toy problems.

    V_t(x) = -q_t x^2 + (u_t + S_t.w) x + (b_t + B_t.w)  for t = 1..T,
    and V identically zero outside that range.  The learnable weight vector
    w enters linearly, which makes every greedy policy on this critic an
    affine function of state and weights.
    """

    def __init__(self, q, u, S, B, b=None, w=None, tag=""):
        self.q = np.asarray(q, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.S = np.asarray(S, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.T = self.q.size
        self.m = self.S.shape[1]
        self.b = np.zeros(self.T) if b is None else np.asarray(b, dtype=float)
        self.w = np.zeros(self.m) if w is None else np.asarray(w, dtype=float)
        self.tag = tag
        assert self.S.shape == (self.T, self.m) and self.B.shape == (self.T, self.m)

    state_dim = 1

    def copy_with(self, w):
        return QuadCritic(self.q, self.u, self.S, self.B, self.b, np.asarray(w, float), self.tag)

    def in_range(self, t: int) -> bool:
        return 1 <= t <= self.T

    def quad_params(self, t: int):
        """(q_t, linear x-coefficient) of V_t; zero outside the indexed range."""
        if not self.in_range(t):
            return 0.0, 0.0
        i = t - 1
        return float(self.q[i]), float(self.u[i] + self.S[i] @ self.w)

    def eval(self, t: int, x) -> CriticBundle:
        d, m = 1, self.m
        if not self.in_range(t):
            return CriticBundle(0.0, np.zeros(d), np.zeros(m),
                                np.zeros((m, d)), np.zeros((d, d)))
        i = t - 1
        xv = float(x[0])
        lin = self.u[i] + self.S[i] @ self.w
        V = -self.q[i] * xv * xv + lin * xv + self.b[i] + self.B[i] @ self.w
        G = np.array([-2.0 * self.q[i] * xv + lin])
        dVdw = self.S[i] * xv + self.B[i]
        dGdw = self.S[i][:, None].copy()
        dGdx = np.array([[-2.0 * self.q[i]]])
        return CriticBundle(float(V), G, dVdw, dGdw, dGdx)

    def layout(self) -> str:
        return f"quad {self.T} {self.m}"


def exp1_critic(c1: float, w=None) -> QuadCritic:
    """1-step critic V_1 = -(x-c1)^2 + w1 x + w2 (V_2 = 0); two weights."""
    return QuadCritic(q=[1.0], u=[2.0 * c1], S=[[1.0, 0.0]],
                      B=[[0.0, 1.0]], b=[-c1 * c1], w=w, tag="exp1")


def exp2_critic(c1: float, c2: float, w=None) -> QuadCritic:
    """2-step critic, four weights: V_t = -c_t x^2 + w(2t-1) x + w(2t)."""
    return QuadCritic(q=[c1, c2], u=[0.0, 0.0],
                      S=[[1, 0, 0, 0], [0, 0, 1, 0]],
                      B=[[0, 1, 0, 0], [0, 0, 0, 1]], w=w, tag="exp2")


def exp4_critic(c1: float = 2.0, c2: float = 0.1, c3: float = 10.0, w=None) -> QuadCritic:
    """2-step critic sharing one weight: V_1 = -c1 x^2 + w1 x,
    V_2 = -c2 x^2 + (w1 - c3) x.  The shared weight forces a compromise."""
    return QuadCritic(q=[c1, c2], u=[0.0, -c3],
                      S=[[1.0], [1.0]], B=[[0.0], [0.0]], w=w, tag="exp4")


def appendix_b_critic(w=None) -> QuadCritic:
    """Linear 1-step critic V_1 = w1 + w2 x."""
    return QuadCritic(q=[0.0], u=[0.0], S=[[0.0, 1.0]], B=[[1.0, 0.0]],
                      w=w, tag="appendix_b")


def ripple_critic(w=None) -> QuadCritic:
    """Single-weight critic V_1 = -x^2 + w x for the spurious-minima example."""
    return QuadCritic(q=[1.0], u=[0.0], S=[[1.0]], B=[[0.0]], w=w, tag="ripple")


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class MlpCritic:
    """3-input MLP critic with one hidden layer and input-to-output shortcuts.

    Inputs are scaled (h/100, v/10, u/50), passed through sigmoid units
    (the input layer is sigmoidal too; set identity_inputs=True for plain
    scaled inputs), then 6 sigmoid hidden units and a linear output whose
    value is multiplied by 100.  Time index is ignored; the critic is a
    pure function of state.
    """

    def __init__(self, n_in=3, n_hidden=6, input_scale=(0.01, 0.1, 0.02),
                 out_scale=100.0, identity_inputs=False):
        self.n_in = n_in
        self.n_hidden = n_hidden
        self.scale = np.asarray(input_scale, dtype=float)
        self.out_scale = float(out_scale)
        self.identity_inputs = identity_inputs
        self.W1 = np.zeros((n_in, n_hidden))
        self.b1 = np.zeros(n_hidden)
        self.W2 = np.zeros(n_hidden)
        self.b2 = 0.0
        self.Ws = np.zeros(n_in)

    @property
    def state_dim(self):
        return self.n_in

    @property
    def n_weights(self):
        return self.n_in * self.n_hidden + self.n_hidden * 2 + 1 + self.n_in

    def init_weights(self, rng):
        self.w = rng.uniform(-1.0, 1.0, self.n_weights)

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2,
                               [self.b2], self.Ws])

    @w.setter
    def w(self, value):
        v = np.asarray(value, dtype=float)
        ni, nh = self.n_in, self.n_hidden
        k = ni * nh
        self.W1 = v[:k].reshape(ni, nh).copy()
        self.b1 = v[k:k + nh].copy()
        self.W2 = v[k + nh:k + 2 * nh].copy()
        self.b2 = float(v[k + 2 * nh])
        self.Ws = v[k + 2 * nh + 1:].copy()

    def _forward(self, X):
        s = X * self.scale                      # (T, ni)
        if self.identity_inputs:
            iv, c1, c1x = s, np.broadcast_to(self.scale, s.shape), np.zeros_like(s)
        else:
            iv = _sigmoid(s)
            sp = iv * (1.0 - iv)
            c1 = sp * self.scale                # d iv / d x
            c1x = sp * (1.0 - 2.0 * iv) * self.scale ** 2   # d c1 / d x
        p = iv @ self.W1 + self.b1              # (T, nh)
        z = _sigmoid(p)
        zp = z * (1.0 - z)
        zpp = zp * (1.0 - 2.0 * z)
        return iv, c1, c1x, p, z, zp, zpp

    def value_batch(self, X):
        """(V, G) for a batch of states, shape (T, n_in) -> (T,), (T, n_in)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        iv, c1, c1x, p, z, zp, zpp = self._forward(X)
        y = z @ self.W2 + iv @ self.Ws + self.b2
        A = (self.W2 * zp) @ self.W1.T + self.Ws     # (T, ni)
        return self.out_scale * y, self.out_scale * c1 * A

    def eval_batch(self, X):
        """Full derivative bundle for a batch of states.

        Returns (V, G, dVdw, dGdw, dGdx) with shapes
        (T,), (T,d), (T,m), (T,m,d), (T,d,d).  The mixed second derivatives
        are exact second-order backprop through both scaling layers and the
        shortcut connections.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = X.shape[0]
        ni, nh, m, os_ = self.n_in, self.n_hidden, self.n_weights, self.out_scale
        iv, c1, c1x, p, z, zp, zpp = self._forward(X)

        y = z @ self.W2 + iv @ self.Ws + self.b2
        V = os_ * y
        A = (self.W2 * zp) @ self.W1.T + self.Ws
        G = os_ * c1 * A

        # dV/dw blocks
        dV_W1 = os_ * np.einsum('ti,tj->tij', iv, self.W2 * zp)       # (T,ni,nh)
        dV_b1 = os_ * self.W2 * zp                                    # (T,nh)
        dV_W2 = os_ * z
        dV_b2 = np.full((T, 1), os_)
        dV_Ws = os_ * iv
        dVdw = np.concatenate(
            [dV_W1.reshape(T, ni * nh), dV_b1, dV_W2, dV_b2, dV_Ws], axis=1)

        # dG/dw blocks: G_d = os * c1_d * A_d
        wz = self.W2 * zpp                                            # (nh,)
        # d A_d / d W1[i,j] = wz_j iv_i W1[d,j] + W2_j zp_j delta(i=d)
        gW1 = np.einsum('td,ti,tj,dj->tijd', c1, iv, wz, self.W1)
        gW1 += np.einsum('td,tj,id->tijd', c1, self.W2 * zp, np.eye(ni))
        gb1 = np.einsum('td,tj,dj->tjd', c1, wz, self.W1)
        gW2 = np.einsum('td,tj,dj->tjd', c1, zp, self.W1)
        gb2 = np.zeros((T, 1, ni))
        gWs = np.einsum('td,id->tid', c1, np.eye(ni))
        dGdw = os_ * np.concatenate(
            [gW1.reshape(T, ni * nh, ni), gb1, gW2, gb2, gWs], axis=1)

        # dG/dx: (t, l, d) = d G_d / d x_l
        dA = np.einsum('tj,dj,lj,tl->tld', wz, self.W1, self.W1, c1)
        dGdx = os_ * np.einsum('td,tld->tld', c1, dA)
        diag = os_ * c1x * A                                          # (T, d)
        dGdx[:, np.arange(ni), np.arange(ni)] += diag
        return V, G, dVdw, dGdw, dGdx

    def eval(self, t, x) -> CriticBundle:
        V, G, dVdw, dGdw, dGdx = self.eval_batch(np.asarray(x, float)[None, :])
        return CriticBundle(float(V[0]), G[0], dVdw[0], dGdw[0], dGdx[0])

    def layout(self) -> str:
        kind = "mlp-id" if self.identity_inputs else "mlp"
        return f"{kind} {self.n_in} {self.n_hidden}"


def save_weights(critic, path):
    """Plain-text weight snapshot: layout header line, one value per line."""
    w = critic.w
    with open(path, "w") as fh:
        fh.write(critic.layout() + "\n")
        for v in w:
            fh.write(f"{float(v)!r}\n")


def load_weights(critic, path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header != critic.layout():
            raise ValueError(f"layout mismatch: file {header!r} vs critic {critic.layout()!r}")
        vals = [float(line) for line in fh if line.strip()]
    critic.w = np.array(vals)
    return critic
