"""Simulation toolkit for a BEC + movable-mirror optomechanical cavity driven by a noisy laser."""

__version__ = "0.1.0"
