"""nsb: scenario-oriented network security experiment orchestrator."""

__version__ = "0.1.0"
