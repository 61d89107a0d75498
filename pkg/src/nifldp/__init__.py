"""Executable model of federated learning with differential privacy.

Runs the FL protocol as a probabilistic transition system on exact
rationals, measures the realized DP factor between neighboring datasets and
the distinguishing advantage of adversaries.
"""

__version__ = "0.1.0"
