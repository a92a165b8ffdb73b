"""Decentralized learning over networks via consensus ADMM.

Subpackages cover topology/spectral graph algebra, the generic in-network
ADMM engine, batch estimators (BLUE, averaging, decoding, demodulation,
lasso), supervised/unsupervised learners (SVM, K-means), online adaptive
filters (LMS, RLS), sparse-plus-low-rank traffic anomaly detection, and
linear-convergence rate analysis.
"""

from . import adaptive, anomaly, engine, estimators, graph, learners, rates

__version__ = "0.1.0"

__all__ = [
    "adaptive",
    "anomaly",
    "engine",
    "estimators",
    "graph",
    "learners",
    "rates",
]
