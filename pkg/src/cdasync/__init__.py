"""Wireless time, frequency and phase coordination for distributed arrays."""

__version__ = "0.1.0"
