"""rankattack: a desk-scale adversarial ranking attack toolkit."""

__version__ = "0.1.0"
