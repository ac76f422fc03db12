"""Reconstruction of symmetric tensor fields in the unit disc from their
(attenuated) momenta ray transforms, via A-analytic sweep-down/sweep-up."""

__version__ = "0.1.0"
