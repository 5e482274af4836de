"""Shared numeric primitives: seeded RNG and finite-difference oracles.

Conventions used throughout the package (matrix-vector layout):

* states ``x``, weights ``w``, value-gradients ``G`` are 1-D float arrays;
* a Jacobian such as ``dGdw`` has element ``(i, j) = dG[j] / dw[i]``, i.e.
  the differentiation variable indexes rows;
* scalars stay plain Python floats.
"""

from __future__ import annotations

import numpy as np


class OracleError(RuntimeError):
    """A verification oracle could not produce a finite answer."""


class TargetsUndefinedError(RuntimeError):
    """Value-gradient targets are undefined (dpi/dx missing with lambda > 0)."""

    def __init__(self, step, msg=None):
        self.step = step
        super().__init__(msg or f"targets undefined at step {step}")


class RunawayTrajectoryError(RuntimeError):
    """A rollout exceeded its episode step cap without terminating."""


class SeededRng:
    """Reproducible random source; identical seeds give identical streams."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed)

    def uniform(self, lo: float, hi: float, size=None):
        return self._gen.uniform(lo, hi, size)

    def normal(self, sd: float, size=None):
        return self._gen.normal(0.0, sd, size)

    def spawn(self, n: int) -> list["SeededRng"]:
        """Derive n independent child generators (one per trial/worker)."""
        seqs = np.random.SeedSequence(self.seed).spawn(n)
        out = []
        for s in seqs:
            r = SeededRng.__new__(SeededRng)
            r.seed = self.seed
            r._gen = np.random.default_rng(s)
            out.append(r)
        return out


def rnd(eps: float, rng: SeededRng) -> float:
    """Normal draw with mean 0 and standard deviation eps; eps=0 is exactly 0."""
    if eps < 0:
        raise ValueError(f"noise scale must be >= 0, got {eps}")
    if eps == 0.0:
        return 0.0
    return float(rng.normal(eps))


def fd_step(v: float, h: float = 1e-5) -> float:
    # relative step, floored at h for small coordinates
    return h * max(1.0, abs(v))


def fd_gradient(fn, point, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a 1-D array.

    Uses a per-component step ``h * max(1, |x_i|)``.  Raises OracleError if
    any probe evaluation is non-finite, so oracle failures never propagate
    as silent NaNs.
    """
    x = np.asarray(point, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        hi = fd_step(x[i], h)
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp = fn(xp)
        fm = fn(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise OracleError(f"non-finite evaluation at component {i}")
        g[i] = (fp - fm) / (2.0 * hi)
    return g


def fd_jacobian(fn, point, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a vector function of a 1-D array.

    Element (i, j) is d fn(x)[j] / d x[i], matching the package layout.
    """
    x = np.asarray(point, dtype=float)
    f0 = np.atleast_1d(np.asarray(fn(x), dtype=float))
    jac = np.empty((x.size, f0.size))
    for i in range(x.size):
        hi = fd_step(x[i], h)
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp = np.atleast_1d(np.asarray(fn(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(xm), dtype=float))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise OracleError(f"non-finite evaluation at component {i}")
        jac[i] = (fp - fm) / (2.0 * hi)
    return jac


def fd_scalar(fn, v: float, h: float = 1e-5) -> float:
    """Central difference of a scalar function of one scalar."""
    hv = fd_step(v, h)
    fp = fn(v + hv)
    fm = fn(v - hv)
    if not (np.isfinite(fp) and np.isfinite(fm)):
        raise OracleError("non-finite evaluation in scalar derivative")
    return (fp - fm) / (2.0 * hv)


def rel_err(got, want, floor: float = 1e-9) -> float:
    """Max relative error with an absolute floor for near-zero references."""
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    denom = np.maximum(np.abs(want), floor)
    return float(np.max(np.abs(got - want) / denom)) if got.size else 0.0
