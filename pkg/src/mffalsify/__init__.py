"""Multi-fidelity Bayesian-optimization falsification of closed-loop controllers."""

__version__ = "0.1.0"
