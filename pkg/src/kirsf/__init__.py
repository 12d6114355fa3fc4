"""Kernel-induced random survival forests."""
__version__ = "0.1.0"
