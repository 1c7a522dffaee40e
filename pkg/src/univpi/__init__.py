"""Empirical and exact checks of π-value universality for random Čech and Rips filtrations."""
__version__ = "0.1.0"
