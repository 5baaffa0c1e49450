"""Simulation of quantum direct communication with mutual authentication."""

from .qstate import BellLabel, CapacityError, Gate, Party, Qubit, Registry

__version__ = "0.1.0"
