"""Numerical tools for projective Finsler metrizability of sprays."""

__version__ = "0.1.0"
