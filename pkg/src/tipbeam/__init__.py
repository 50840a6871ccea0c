"""Clamped Euler-Bernoulli beam with a tip payload under nonlinear boundary feedback."""

__version__ = "0.1.0"
