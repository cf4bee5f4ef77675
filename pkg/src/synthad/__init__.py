"""Semi-supervised anomaly detection with uniform synthetic anomalies.

A library and CLI for training binary classifiers that separate normal data
from a blend of known and uniformly sampled synthetic anomalies, together
with numerical experiments that exercise the framework's mathematical
underpinnings (regression-function smoothing, excess-risk bounds, and
desk-scale convergence studies).
"""

__version__ = "0.1.0"
