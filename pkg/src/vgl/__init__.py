"""Value-gradient learning for deterministic episodic control problems.

Library layout:
    core      seeded RNG and finite-difference oracles
    models    toy line-world family and the 1-D lunar lander
    critics   quadratic and MLP value-function approximators
    policy    greedy / epsilon-greedy action selection and derivatives
    targets   rollouts and backward target recursions (V', G', Omega)
    learners  all weight-update rules plus SGD / RPROP application
    analysis  stability matrices, landscape and Pontryagin oracles
    harness   experiment drivers, fast trial kernels, TSV emitters, CLI
"""

from .core import SeededRng, fd_gradient, fd_jacobian, rnd

__all__ = ["SeededRng", "fd_gradient", "fd_jacobian", "rnd"]
__version__ = "0.1.0"
