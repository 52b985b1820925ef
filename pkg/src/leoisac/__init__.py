"""Bistatic LEO-satellite integrated sensing and communication toolkit.

Precoder design that maximizes the worst user rate under transmit-power and
AOA-accuracy constraints, echo-channel simulation, and radar parameter
estimation (subspace AOA search plus a geometry-aware joint
delay-Doppler matched filter).
"""

__version__ = "0.1.0"
