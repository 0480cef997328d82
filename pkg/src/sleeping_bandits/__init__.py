"""Sleeping multi-armed bandits with stochastic availabilities and adversarial losses."""

__version__ = "0.1.0"
