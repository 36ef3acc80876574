"""Exact laboratory for multiple recurrence on model dynamical systems."""

__version__ = "0.1.0"
