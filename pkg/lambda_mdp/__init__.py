"""Exact finite-MDP computations for lambda-return objectives, GAE and trust-region steps."""
__version__ = "0.1.0"
