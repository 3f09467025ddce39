"""Epistemic multi-agent task toolkit: scenes, goals, compilation, planning, simulation and scoring."""

__version__ = "0.1.0"
