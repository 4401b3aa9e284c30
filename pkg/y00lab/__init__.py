"""
y00lab - desk-scale laboratory for the Y00 quantum-noise stream cipher
"""

__version__ = "0.1.0"

__all__ = [
    "prng",
    "y00core",
    "channel",
    "breach",
    "fca",
    "qdetect",
    "infotheory",
    "keyfresh",
    "engine",
    "cli",
]
