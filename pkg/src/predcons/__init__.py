"""Trust-weighted prediction consensus for decentralized collaborative learning."""

__version__ = "0.1.0"
