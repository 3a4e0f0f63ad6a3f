"""Conditional-entropy regularized adversarial inference on numpy."""
__version__ = "0.1.0"
