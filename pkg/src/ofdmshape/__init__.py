"""Spectral shaping of OFDM signals under dynamically changing emission masks."""

__version__ = "0.1.0"
