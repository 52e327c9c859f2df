"""rfsyn: analytical RF amplifier synthesis — surrogate EM modeling,
sizing, placement, routing, power delivery, and S-parameter verification."""

__version__ = "0.1.0"
