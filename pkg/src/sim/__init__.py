"""Simulation, evaluation and sequential learning."""
