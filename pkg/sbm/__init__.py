"""Skew Brownian motion laws and samplers."""
