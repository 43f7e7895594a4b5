"""Security situation quantification for power information networks.

Element indices (service reliability, host vulnerability, network threat)
computed from windowed attack events, and a GA-optimized feedforward network
that predicts the network threat index from window features.
"""

__version__ = "0.1.0"
