"""Inverse optimization with noisy data."""
