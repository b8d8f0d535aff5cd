"""Secret-key and entanglement distillation from quantum states at desk scale."""

__version__ = "0.1.0"
